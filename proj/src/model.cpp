#include "uum/model.hpp"

#include "uum/errors.hpp"

#include <algorithm>
#include <map>

namespace uum {

std::string variant_name(Variant v) {
    switch (v) {
    case Variant::base: return "base";
    case Variant::domain_specific: return "domain_specific";
    case Variant::ib_token: return "ib_token";
    }
    return "unknown";
}

Variant parse_variant(const std::string& name) {
    if (name == "base") return Variant::base;
    if (name == "domain_specific" || name == "dse") return Variant::domain_specific;
    if (name == "ib_token" || name == "ib") return Variant::ib_token;
    throw ConfigError("unknown model variant '" + name + "'");
}

std::size_t ModelConfig::resolved_private_layers() const {
    return private_layers ? private_layers : std::max<std::size_t>(1, layers / 2);
}

std::size_t ModelConfig::resolved_shared_layers() const {
    if (shared_layers) return shared_layers;
    const auto p = resolved_private_layers();
    return layers > p ? layers - p : 1;
}

void ModelConfig::validate() const {
    if (latent_dim == 0 || heads == 0) throw ConfigError("model: latent_dim and heads must be positive");
    if (latent_dim % heads != 0) {
        throw ConfigError("model: latent_dim " + std::to_string(latent_dim) + " is not divisible by heads " +
                          std::to_string(heads));
    }
    if (layers == 0) throw ConfigError("model: layers must be positive");
    if (positional_capacity == 0) throw ConfigError("model: positional capacity must be positive");
    if (id_embed_dim == 0 || cat_embed_dim == 0 || domain_embed_dim == 0 || feature_hidden == 0 || ffn_hidden == 0 ||
        head_hidden == 0) {
        throw ConfigError("model: embedding and hidden widths must be positive");
    }
    if (!(layer_norm_eps > 0.0)) throw ConfigError("model: layer_norm_eps must be positive");
}

// ---------------------------------------------------------------------------

Model::Model(ModelConfig config, DatasetManifest manifest)
    : config_(std::move(config)), manifest_(std::move(manifest)), params_(std::make_unique<ParameterStore>()) {
    config_.validate();
    Rng rng(config_.init_seed);
    auto& store = *params_;
    const std::size_t f = config_.latent_dim;
    const std::size_t n_domains = manifest_.domain_count();
    const double sd = config_.embed_init_std;

    for (std::uint32_t d = 0; d < n_domains; ++d) {
        // last row is the pad row
        item_tables_.push_back(&store.add("embed.item." + std::to_string(d),
                                          normal_init(manifest_.domain(d).vocab_size + 1, config_.id_embed_dim, sd, rng)));
    }
    for (std::size_t s = 0; s < manifest_.slot_count(); ++s) {
        cat_tables_.push_back(&store.add("embed.cat." + std::to_string(s),
                                         normal_init(manifest_.slot_cardinality(s) + 2, config_.cat_embed_dim, sd, rng)));
    }
    domain_table_ = &store.add("embed.domain", normal_init(n_domains + 1, config_.domain_embed_dim, sd, rng));
    position_table_ = &store.add("embed.position", normal_init(config_.positional_capacity, f, sd, rng));

    const std::size_t feature_width = config_.id_embed_dim + manifest_.slot_count() * config_.cat_embed_dim +
                                      config_.domain_embed_dim + (config_.use_property_feature ? 1 : 0);
    feature_in_ = Linear(store, "featurizer.in", feature_width, config_.feature_hidden, true, rng);
    feature_out_ = Linear(store, "featurizer.out", config_.feature_hidden, f, true, rng);

    auto block = [&](const std::string& name) {
        return TransformerBlock(store, name, f, config_.ffn_hidden, config_.heads, config_.layer_norm_eps, rng);
    };
    switch (config_.variant) {
    case Variant::base:
        for (std::size_t l = 0; l < config_.layers; ++l) base_blocks_.push_back(block("encoder." + std::to_string(l)));
        break;
    case Variant::domain_specific:
        private_blocks_.resize(n_domains);
        for (std::uint32_t d = 0; d < n_domains; ++d)
            for (std::size_t l = 0; l < config_.resolved_private_layers(); ++l)
                private_blocks_[d].push_back(block("private." + std::to_string(d) + "." + std::to_string(l)));
        for (std::size_t l = 0; l < config_.resolved_shared_layers(); ++l)
            shared_blocks_.push_back(block("shared." + std::to_string(l)));
        break;
    case Variant::ib_token: {
        ib_seed_ = &store.add("ib.seed", normal_init(n_domains, f, sd, rng));
        for (std::size_t l = 0; l < config_.layers; ++l) {
            const std::string p = "ib." + std::to_string(l);
            ib_attend_.push_back(block(p + ".attend"));
            ib_exchange_norm_.emplace_back(store, p + ".exchange_norm", f, config_.layer_norm_eps);
            Tensor identity(f, f);
            for (std::size_t i = 0; i < f; ++i) identity(i, i) = 1.0;
            ib_value_proj_.push_back(&store.add(p + ".value_proj", std::move(identity)));
            ib_reattend_.push_back(block(p + ".reattend"));
        }
        break;
    }
    }

    pool_scorer_ = &store.add("pool.scorer", glorot_uniform(f, 1, rng));
    for (std::size_t k = 0; k < config_.cross_layers; ++k) {
        cross_.emplace_back(store, "target.cross." + std::to_string(k), f, f, true, rng);
    }
    target_in_ = Linear(store, "target.ffn.in", f, config_.head_hidden, true, rng);
    target_out_ = Linear(store, "target.ffn.out", config_.head_hidden, f, true, rng);
    score_hidden_ = Linear(store, "head.score.hidden", f, config_.head_hidden, false, rng);
    // no biases: a shared offset cancels in the candidate softmax
    score_out_ = Linear(store, "head.score.out", config_.head_hidden, 1, false, rng);
    domain_head_ = Linear(store, "head.domain", f, n_domains, true, rng);
    property_head_ = Linear(store, "head.property", f, 1, true, rng);
}

void Model::check_event(const Event& e) const {
    if (e.is_pad()) return;
    if (e.domain >= manifest_.domain_count()) {
        throw DataError("event domain " + std::to_string(e.domain) + " out of range");
    }
    if (e.item_id >= manifest_.domain(e.domain).vocab_size) {
        throw DataError("item_id " + std::to_string(e.item_id) + " out of vocabulary for domain '" +
                        manifest_.domain(e.domain).name + "'");
    }
    if (e.categorical.size() != manifest_.slot_count()) {
        throw DataError("event carries " + std::to_string(e.categorical.size()) + " categorical slots, expected " +
                        std::to_string(manifest_.slot_count()));
    }
    for (std::size_t s = 0; s < e.categorical.size(); ++s) {
        if (e.categorical[s] > manifest_.null_id(s)) {
            throw DataError("categorical id " + std::to_string(e.categorical[s]) + " out of range for slot " +
                            std::to_string(s));
        }
    }
}

Var Model::featurize(Tape& tape, std::span<const Event> events, std::span<const std::size_t> positions,
                     bool include_property) const {
    const std::size_t n = events.size();
    if (n == 0) throw std::invalid_argument("featurize: no events");
    if (!positions.empty() && positions.size() != n) throw std::invalid_argument("featurize: position count mismatch");

    std::vector<std::pair<std::size_t, std::size_t>> item_refs;
    item_refs.reserve(n);
    std::vector<std::size_t> domain_rows;
    domain_rows.reserve(n);
    for (const auto& e : events) {
        check_event(e);
        if (e.is_pad()) {
            item_refs.emplace_back(0, manifest_.domain(0).vocab_size);
            domain_rows.push_back(manifest_.domain_count());
        } else {
            item_refs.emplace_back(e.domain, e.item_id);
            domain_rows.push_back(e.domain);
        }
    }

    std::vector<Var> item_tables;
    for (auto* p : item_tables_) item_tables.push_back(tape.parameter(*p));
    std::vector<Var> parts{ad::gather_multi(item_tables, item_refs)};
    for (std::size_t s = 0; s < cat_tables_.size(); ++s) {
        std::vector<std::size_t> ids;
        ids.reserve(n);
        for (const auto& e : events) ids.push_back(e.is_pad() ? manifest_.pad_id(s) : e.categorical[s]);
        parts.push_back(ad::gather_rows(tape.parameter(*cat_tables_[s]), ids));
    }
    parts.push_back(ad::gather_rows(tape.parameter(*domain_table_), domain_rows));
    if (config_.use_property_feature) {
        Tensor prop(n, 1);
        if (include_property) {
            for (std::size_t i = 0; i < n; ++i) prop[i] = events[i].is_pad() ? 0.0 : events[i].property_value;
        }
        parts.push_back(tape.constant(std::move(prop)));
    }

    Var h = feature_out_(tape, ad::relu(feature_in_(tape, ad::concat_cols(parts))));
    if (!positions.empty()) {
        for (auto p : positions) {
            if (p >= config_.positional_capacity) {
                throw DataError("position " + std::to_string(p) + " exceeds positional capacity " +
                                std::to_string(config_.positional_capacity));
            }
        }
        h = ad::add(h, ad::gather_rows(tape.parameter(*position_table_),
                                       std::vector<std::size_t>(positions.begin(), positions.end())));
    }
    return h;
}

Var Model::featurize_batch(Tape& tape, const Batch& batch) const {
    std::vector<std::size_t> positions(batch.tokens.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i % batch.max_length;
    return featurize(tape, batch.tokens, positions, true);
}

std::vector<AttentionSegment> Model::window_segments(const Batch& batch) const {
    const std::size_t m = batch.max_length;
    std::vector<AttentionSegment> segs(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        auto& seg = segs[b];
        if (batch.lengths[b] == 0) throw DataError("example " + std::to_string(b) + " has an all-pad context");
        seg.mask = AttentionMask(m, false);
        for (std::size_t i = 0; i < m; ++i) {
            seg.rows.push_back(b * m + i);
            const bool qi = batch.real[b * m + i];
            seg.mask.set_active(i, qi);
            if (!qi) continue;
            for (std::size_t j = 0; j < m; ++j) {
                seg.mask.set(i, j, batch.real[b * m + j] && permitted_by_order(i, j));
            }
        }
    }
    return segs;
}

Var Model::encode_base(Tape& tape, Var latents, const Batch& batch) const {
    if (base_blocks_.empty()) throw std::logic_error("encode_base: model is not the base variant");
    const auto segs = window_segments(batch);
    Var x = latents;
    for (const auto& blk : base_blocks_) x = blk(tape, x, segs);
    return x;
}

Var Model::encode_domain_specific(Tape& tape, Var latents, const Batch& batch, Var* private_stage) const {
    if (private_blocks_.empty()) throw std::logic_error("encode_domain_specific: model is not the domain-specific variant");
    const std::size_t m = batch.max_length;
    const std::size_t n = batch.tokens.size();
    std::vector<Var> pieces;

    // Per-domain private encoders over each domain's subsequence.
    for (std::uint32_t d = 0; d < manifest_.domain_count(); ++d) {
        std::vector<std::size_t> rows;
        std::vector<AttentionSegment> segs;
        for (std::size_t b = 0; b < batch.size(); ++b) {
            AttentionSegment seg;
            std::vector<std::size_t> pos;
            for (std::size_t i = 0; i < m; ++i) {
                if (!batch.real[b * m + i] || batch.domains[b * m + i] != d) continue;
                seg.rows.push_back(rows.size());
                pos.push_back(i);
                rows.push_back(b * m + i);
            }
            if (seg.rows.empty()) continue;
            seg.mask = AttentionMask(seg.rows.size(), false);
            for (std::size_t a = 0; a < pos.size(); ++a)
                for (std::size_t c = 0; c < pos.size(); ++c) seg.mask.set(a, c, permitted_by_order(pos[a], pos[c]));
            segs.push_back(std::move(seg));
        }
        if (rows.empty()) continue;
        Var x = ad::gather_rows(latents, rows);
        for (const auto& blk : private_blocks_[d]) x = blk(tape, x, segs);
        pieces.push_back(ad::scatter_rows(x, rows, n));
    }
    std::vector<std::size_t> pads;
    for (std::size_t i = 0; i < n; ++i) {
        if (!batch.real[i]) pads.push_back(i);
    }
    if (!pads.empty()) pieces.push_back(ad::scatter_rows(ad::gather_rows(latents, pads), pads, n));
    if (pieces.empty()) throw NumericError("encode_domain_specific: batch has no tokens");

    Var x = pieces.front();
    for (std::size_t i = 1; i < pieces.size(); ++i) x = ad::add(x, pieces[i]);
    if (private_stage) *private_stage = x;

    const auto segs = window_segments(batch);
    for (const auto& blk : shared_blocks_) x = blk(tape, x, segs);
    return x;
}

EncoderOutput Model::encode_ib(Tape& tape, Var latents, const Batch& batch) const {
    if (ib_attend_.empty()) throw std::logic_error("encode_ib: model is not the IB variant");
    const std::size_t m = batch.max_length;
    const std::size_t n = batch.tokens.size();

    EncoderOutput out;
    std::vector<AttentionSegment> segs;
    std::vector<std::size_t> ib_domain_rows;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        std::vector<std::uint32_t> present;
        for (std::size_t i = 0; i < m; ++i) {
            const auto d = batch.domains[b * m + i];
            if (batch.real[b * m + i] && std::find(present.begin(), present.end(), d) == present.end()) present.push_back(d);
        }
        std::sort(present.begin(), present.end());
        if (present.empty()) throw NumericError("encode_ib: example " + std::to_string(b) + " has no tokens");

        AttentionSegment seg;
        std::vector<std::uint32_t> group;     // domain of each local row
        std::vector<std::size_t> position;    // window position, IB rows get none
        std::vector<bool> is_ib;
        for (std::size_t i = 0; i < m; ++i) {
            seg.rows.push_back(b * m + i);
            group.push_back(batch.real[b * m + i] ? batch.domains[b * m + i] : kPadDomain);
            position.push_back(i);
            is_ib.push_back(false);
        }
        for (auto d : present) {
            seg.rows.push_back(n + out.ib_rows.size());
            group.push_back(d);
            position.push_back(0);
            is_ib.push_back(true);
            out.ib_rows.emplace_back(b, d);
            ib_domain_rows.push_back(d);
        }
        const std::size_t len = seg.rows.size();
        seg.mask = AttentionMask(len, false);
        for (std::size_t a = 0; a < len; ++a) {
            const bool active = group[a] != kPadDomain;
            seg.mask.set_active(a, active);
            if (!active) continue;
            for (std::size_t c = 0; c < len; ++c) {
                if (group[c] != group[a]) continue;
                const bool ordered = is_ib[a] || is_ib[c] || permitted_by_order(position[a], position[c]);
                seg.mask.set(a, c, ordered);
            }
        }
        segs.push_back(std::move(seg));
    }

    const std::size_t n_ib = out.ib_rows.size();
    // (batch x n_ib) selector summing each example's IB tokens
    Tensor selector(batch.size(), n_ib);
    std::vector<std::size_t> ib_example;
    for (std::size_t j = 0; j < n_ib; ++j) {
        selector(out.ib_rows[j].first, j) = 1.0;
        ib_example.push_back(out.ib_rows[j].first);
    }
    Var select = tape.constant(std::move(selector));

    Var x = ad::concat_rows({latents, ad::gather_rows(tape.parameter(*ib_seed_), ib_domain_rows)});
    for (std::size_t l = 0; l < ib_attend_.size(); ++l) {
        x = ib_attend_[l](tape, x, segs);
        if (config_.ib_exchange) {
            Var ib = ad::slice_rows(x, n, n_ib);
            Var shared = ib_exchange_norm_[l](tape, ad::matmul(select, ib));
            shared = ad::matmul(shared, tape.parameter(*ib_value_proj_[l]));
            x = ad::concat_rows({ad::slice_rows(x, 0, n), ad::gather_rows(shared, ib_example)});
        }
        x = ib_reattend_[l](tape, x, segs);
    }
    out.tokens = ad::slice_rows(x, 0, n);
    out.ib_tokens = ad::slice_rows(x, n, n_ib);
    return out;
}

EncoderOutput Model::encode(Tape& tape, Var latents, const Batch& batch) const {
    switch (config_.variant) {
    case Variant::base: return {encode_base(tape, latents, batch), {}, {}};
    case Variant::domain_specific: return {encode_domain_specific(tape, latents, batch), {}, {}};
    case Variant::ib_token: return encode_ib(tape, latents, batch);
    }
    throw std::logic_error("unknown variant");
}

PoolOutput Model::pool(Tape& tape, Var tokens, const Batch& batch) const {
    const std::size_t m = batch.max_length;
    std::vector<std::vector<std::size_t>> groups(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b)
        for (std::size_t i = 0; i < m; ++i)
            if (batch.real[b * m + i]) groups[b].push_back(b * m + i);
    Var scores = ad::matmul(tokens, tape.parameter(*pool_scorer_));
    Var weights = ad::group_softmax(scores, groups);
    return {ad::group_weighted_sum(weights, tokens, groups), weights};
}

Var Model::user_embeddings(Tape& tape, const Batch& batch) const {
    Var h = featurize_batch(tape, batch);
    return pool(tape, encode(tape, h, batch).tokens, batch).embeddings;
}

Var Model::target_tower(Tape& tape, std::span<const Event> labels) const {
    for (const auto& e : labels) {
        if (e.is_pad()) throw DataError("target_tower: label cannot be a pad token");
    }
    Var c0 = featurize(tape, labels, {}, false);
    Var c = c0;
    for (const auto& layer : cross_) c = cross_layer(tape, c0, c, layer);
    return target_out_(tape, ad::relu(target_in_(tape, c)));
}

HeadOutputs Model::merge_and_score(Tape& tape, Var users, Var targets) const {
    Var merged = ad::add(users, targets);
    return {merged, score_out_(tape, ad::relu(score_hidden_(tape, merged))), domain_head_(tape, merged),
            property_head_(tape, merged)};
}

Var Model::pairwise_scores(Tape& tape, Var users, Var targets) const {
    Var merged = ad::pairwise_sum(users, targets);
    Var s = score_out_(tape, ad::relu(score_hidden_(tape, merged)));
    return ad::reshape(s, users.value().rows(), targets.value().rows());
}

Tensor Model::embed(const Batch& batch) const {
    Tape tape;
    return user_embeddings(tape, batch).value();
}

Tensor Model::target_representations(std::span<const Event> events) const {
    Tape tape;
    return target_tower(tape, events).value();
}

std::vector<double> Model::score_candidates(const Tensor& user, const Tensor& targets) const {
    Tape tape;
    Var s = pairwise_scores(tape, tape.constant(user), tape.constant(targets));
    auto v = s.value().values();
    return {v.begin(), v.end()};
}

} // namespace uum
