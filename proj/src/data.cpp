#include "uum/data.hpp"

#include "uum/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

namespace uum {

// ---------------------------------------------------------------------------
// DatasetManifest

DatasetManifest::DatasetManifest(std::vector<DomainSpec> domains) : domains_(std::move(domains)) {
    if (domains_.empty()) throw DataError("manifest declares no domains");
    std::uint64_t offset = 0;
    for (std::uint32_t d = 0; d < domains_.size(); ++d) {
        const auto& spec = domains_[d];
        if (spec.name.empty()) throw DataError("manifest domain " + std::to_string(d) + " has no name");
        if (spec.vocab_size == 0) throw DataError("domain '" + spec.name + "' has an empty vocabulary");
        for (std::uint32_t e = 0; e < d; ++e) {
            if (domains_[e].name == spec.name) throw DataError("duplicate domain name '" + spec.name + "'");
        }
        first_slot_.push_back(slot_owner_.size());
        for (auto card : spec.cat_cardinalities) {
            if (card == 0) throw DataError("domain '" + spec.name + "' has a categorical slot with cardinality 0");
            slot_owner_.push_back(d);
            slot_cardinality_.push_back(card);
        }
        vocab_offset_.push_back(offset);
        offset += spec.vocab_size;
    }
}

std::optional<std::uint32_t> DatasetManifest::domain_index(const std::string& name) const {
    for (std::uint32_t d = 0; d < domains_.size(); ++d) {
        if (domains_[d].name == name) return d;
    }
    return std::nullopt;
}

std::uint64_t DatasetManifest::total_vocab() const noexcept {
    std::uint64_t n = 0;
    for (const auto& d : domains_) n += d.vocab_size;
    return n;
}

std::vector<std::uint32_t> DatasetManifest::materialize(std::uint32_t domain, const std::vector<std::uint32_t>& own) const {
    if (own.size() != arity(domain)) {
        throw DataError("domain '" + domains_.at(domain).name + "' expects " + std::to_string(arity(domain)) +
                        " categorical values, got " + std::to_string(own.size()));
    }
    std::vector<std::uint32_t> out(slot_count());
    for (std::size_t s = 0; s < out.size(); ++s) out[s] = null_id(s);
    const std::size_t first = first_slot(domain);
    for (std::size_t i = 0; i < own.size(); ++i) out[first + i] = own[i];
    return out;
}

std::vector<std::uint32_t> DatasetManifest::own_slots(const Event& e) const {
    const std::size_t first = first_slot(e.domain);
    return {e.categorical.begin() + static_cast<std::ptrdiff_t>(first),
            e.categorical.begin() + static_cast<std::ptrdiff_t>(first + arity(e.domain))};
}

void DatasetManifest::check_event(const Event& e) const {
    if (e.domain >= domains_.size()) throw DataError("domain index " + std::to_string(e.domain) + " out of range");
    const auto& spec = domains_[e.domain];
    if (e.item_id >= spec.vocab_size) {
        throw DataError("item_id " + std::to_string(e.item_id) + " out of vocabulary for domain '" + spec.name +
                        "' (size " + std::to_string(spec.vocab_size) + ")");
    }
    if (e.categorical.size() != slot_count()) throw DataError("categorical vector has the wrong number of slots");
    for (std::size_t s = 0; s < slot_count(); ++s) {
        const bool own = slot_owner(s) == e.domain;
        const auto v = e.categorical[s];
        if (own ? v >= slot_cardinality(s) : v != null_id(s)) {
            throw DataError("categorical value " + std::to_string(v) + " invalid for slot " + std::to_string(s));
        }
    }
}

std::string DatasetManifest::to_json() const {
    nlohmann::ordered_json doc;
    doc["domains"] = nlohmann::ordered_json::array();
    for (const auto& d : domains_) {
        nlohmann::ordered_json j;
        j["name"] = d.name;
        j["vocab_size"] = d.vocab_size;
        j["cat_cardinalities"] = d.cat_cardinalities;
        doc["domains"].push_back(j);
    }
    return doc.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
    try {
        auto doc = nlohmann::json::parse(text);
        std::vector<DomainSpec> domains;
        for (const auto& j : doc.at("domains")) {
            DomainSpec d;
            d.name = j.at("name").get<std::string>();
            d.vocab_size = j.at("vocab_size").get<std::uint64_t>();
            d.cat_cardinalities = j.value("cat_cardinalities", std::vector<std::uint32_t>{});
            domains.push_back(std::move(d));
        }
        if (domains.size() < 2) throw DataError("manifest must declare at least two domains");
        return DatasetManifest(std::move(domains));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
}

DatasetManifest DatasetManifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

void DatasetManifest::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write manifest " + path);
    out << to_json();
}

// ---------------------------------------------------------------------------
// Sequences

std::vector<Event> Batch::context(std::size_t example) const {
    std::vector<Event> out;
    for (std::size_t i = 0; i < max_length; ++i) {
        if (real[example * max_length + i]) out.push_back(token(example, i));
    }
    return out;
}

StitchedSequence stitch(std::uint64_t user_id, const UserHistory& history) {
    StitchedSequence out{user_id, {}};
    std::size_t total = 0;
    for (const auto& xs : history.by_domain) total += xs.size();
    out.events.reserve(total);

    auto key = [](const Event& e) { return std::make_tuple(e.timestamp, e.domain, e.item_id); };
    std::vector<std::size_t> cursor(history.by_domain.size(), 0);
    while (out.events.size() < total) {
        std::size_t best = history.by_domain.size();
        for (std::size_t d = 0; d < history.by_domain.size(); ++d) {
            if (cursor[d] >= history.by_domain[d].size()) continue;
            if (best == history.by_domain.size() ||
                key(history.by_domain[d][cursor[d]]) < key(history.by_domain[best][cursor[best]])) {
                best = d;
            }
        }
        out.events.push_back(history.by_domain[best][cursor[best]++]);
    }
    return out;
}

StitchedSequence trim_to_cap(const StitchedSequence& seq, std::size_t cap) {
    if (cap == 0) throw std::invalid_argument("trim_to_cap: cap must be positive");
    if (seq.events.size() <= cap) return seq;
    std::size_t excess = seq.events.size() - cap;
    std::vector<bool> keep(seq.events.size(), true);
    for (Intent pass : {Intent::low, Intent::high}) {
        for (std::size_t i = 0; i < seq.events.size() && excess > 0; ++i) {
            if (keep[i] && seq.events[i].intent == pass) {
                keep[i] = false;
                --excess;
            }
        }
    }
    StitchedSequence out{seq.user_id, {}};
    out.events.reserve(cap);
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        if (keep[i]) out.events.push_back(seq.events[i]);
    }
    return out;
}

std::vector<TrainingExample> slide_windows(const StitchedSequence& seq, std::size_t window_len, std::size_t stride) {
    if (window_len < 2) throw std::invalid_argument("slide_windows: window length must be at least 2");
    if (stride == 0) stride = window_len;
    if (stride > window_len) throw std::invalid_argument("slide_windows: stride larger than the window skips events");
    std::vector<TrainingExample> out;
    for (std::size_t start = 0; start < seq.events.size(); start += stride) {
        const std::size_t end = std::min(start + window_len, seq.events.size());
        if (end - start < 2) break;
        TrainingExample ex;
        ex.user_id = seq.user_id;
        ex.context.assign(seq.events.begin() + static_cast<std::ptrdiff_t>(start),
                          seq.events.begin() + static_cast<std::ptrdiff_t>(end - 1));
        ex.label = seq.events[end - 1];
        out.push_back(std::move(ex));
        if (end == seq.events.size()) break;
    }
    return out;
}

Event make_pad_event(std::uint64_t pad_id) {
    Event e;
    e.domain = kPadDomain;
    e.item_id = pad_id;
    return e;
}

Batch assemble_batch(const std::vector<TrainingExample>& examples, std::uint64_t pad_id) {
    if (examples.empty()) throw std::invalid_argument("assemble_batch: empty batch");
    Batch b;
    for (const auto& ex : examples) b.max_length = std::max(b.max_length, ex.context.size());
    const Event pad = make_pad_event(pad_id);
    b.tokens.reserve(examples.size() * b.max_length);
    for (const auto& ex : examples) {
        for (std::size_t i = 0; i < b.max_length; ++i) {
            const bool real = i < ex.context.size();
            b.tokens.push_back(real ? ex.context[i] : pad);
            b.real.push_back(real);
            b.domains.push_back(real ? ex.context[i].domain : kPadDomain);
        }
        b.lengths.push_back(ex.context.size());
        b.labels.push_back(ex.label);
        b.user_ids.push_back(ex.user_id);
    }
    return b;
}

} // namespace uum
