#include "uum/evaluation.hpp"

#include "uum/errors.hpp"
#include "uum/numerics.hpp"
#include "uum/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_set>

namespace uum {

std::size_t EvalConfig::resolved_negatives(std::uint64_t vocab) const {
    if (negatives) return negatives;
    return vocab < kPaperNegatives + 1 ? kDeskNegatives : kPaperNegatives;
}

void EvalConfig::validate() const {
    if (k == 0) throw ConfigError("eval: k must be at least 1");
}

NegativeSample sample_negatives(std::uint64_t positive, std::uint64_t vocab, std::size_t n, std::uint64_t seed,
                                std::uint64_t example) {
    if (vocab < 2) throw DataError("negative sampling needs at least 2 items");
    if (positive >= vocab) throw DataError("positive item outside the vocabulary");
    if (n == 0) throw ConfigError("eval: negative count must be at least 1");
    NegativeSample out;
    if (n >= vocab) {
        n = vocab - 1;
        out.clamped = true;
    }
    Rng rng(derive_seed(seed, example, 0x4e47));
    out.items.reserve(n);
    if (2 * n >= vocab) {
        // dense: partial Fisher-Yates over every non-positive item
        std::vector<std::uint64_t> pool;
        pool.reserve(vocab - 1);
        for (std::uint64_t i = 0; i < vocab; ++i)
            if (i != positive) pool.push_back(i);
        for (std::size_t i = 0; i < n; ++i) {
            std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
            out.items.push_back(pool[i]);
        }
    } else {
        std::unordered_set<std::uint64_t> taken{positive};
        while (out.items.size() < n) {
            const std::uint64_t c = rng.index(vocab);
            if (taken.insert(c).second) out.items.push_back(c);
        }
    }
    return out;
}

std::size_t rank_positive(double positive, std::span<const double> negatives) {
    if (!std::isfinite(positive)) throw NumericError("non-finite positive score");
    std::size_t rank = 1;
    for (double s : negatives) {
        if (!std::isfinite(s)) throw NumericError("non-finite candidate score");
        if (s >= positive) ++rank;
    }
    return rank;
}

std::size_t rank_positive(const Model& model, const std::vector<Event>& context, const Event& positive,
                          const std::vector<Event>& negatives) {
    if (context.empty()) throw DataError("rank_positive: empty context");
    TrainingExample ex{0, context, positive};
    const Tensor user = model.embed(assemble_batch({ex}));
    std::vector<Event> candidates{positive};
    candidates.insert(candidates.end(), negatives.begin(), negatives.end());
    const auto scores = model.score_candidates(user, model.target_representations(candidates));
    return rank_positive(scores[0], std::span<const double>(scores).subspan(1));
}

double recall_at_k(std::size_t rank, std::size_t k) {
    if (rank == 0) throw std::invalid_argument("rank is 1-based");
    return rank <= k ? 1.0 : 0.0;
}

double ndcg_at_k(std::size_t rank, std::size_t k) {
    if (rank == 0) throw std::invalid_argument("rank is 1-based");
    return rank <= k ? 1.0 / std::log2(1.0 + static_cast<double>(rank)) : 0.0;
}

std::pair<double, double> metric_oracle(std::span<const double> scores, std::size_t positive, std::size_t k) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Descending score; among equal scores the positive goes last.
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return (a != positive) && (b == positive);
    });
    std::size_t rank = 0;
    while (order[rank] != positive) ++rank;
    ++rank;
    const double recall = rank <= k ? 1.0 : 0.0;
    const double ndcg = rank <= k ? 1.0 / std::log2(1.0 + static_cast<double>(rank)) : 0.0;
    return {recall, ndcg};
}

EvalReport evaluate_scorer(const std::vector<TrainingExample>& tests, const DatasetManifest& manifest,
                           const EvalConfig& config, const CandidateScorer& scorer) {
    config.validate();
    if (tests.empty()) throw DataError("evaluation set is empty");
    const std::uint64_t vocab = manifest.total_vocab();
    EvalReport report;
    report.k = config.k;
    report.seed = config.seed;
    report.negatives = config.resolved_negatives(vocab);
    if (report.negatives >= vocab) {
        report.warnings.push_back("negative count " + std::to_string(report.negatives) + " clamped to " +
                                  std::to_string(vocab - 1) + " (vocabulary has " + std::to_string(vocab) + " items)");
        report.negatives = static_cast<std::size_t>(vocab - 1);
    }
    CompensatedSum recall, ndcg;
    for (std::size_t i = 0; i < tests.size(); ++i) {
        const auto& t = tests[i];
        if (t.context.empty()) throw DataError("test example " + std::to_string(i) + " has an empty context");
        manifest.check_event(t.label);
        const std::uint64_t positive = manifest.vocab_offset(t.label.domain) + t.label.item_id;
        const auto negs = sample_negatives(positive, vocab, report.negatives, config.seed, i);
        const auto scores = scorer(i, t, negs.items);
        if (scores.size() != negs.items.size() + 1) throw std::logic_error("scorer returned the wrong number of scores");
        const std::size_t rank = rank_positive(scores[0], std::span<const double>(scores).subspan(1));
        recall.add(recall_at_k(rank, config.k));
        ndcg.add(ndcg_at_k(rank, config.k));
    }
    report.examples = tests.size();
    report.recall_at_k = recall.value() / static_cast<double>(tests.size());
    report.ndcg_at_k = ndcg.value() / static_cast<double>(tests.size());
    return report;
}

EvalReport evaluate(const Model& model, const std::vector<TrainingExample>& tests, const ItemCatalog& catalog,
                    const EvalConfig& config) {
    const auto& manifest = model.manifest();
    if (catalog.size() != manifest.total_vocab()) throw DataError("item catalog does not match the model's manifest");
    if (tests.empty()) throw DataError("evaluation set is empty");

    std::vector<Event> all_items;
    all_items.reserve(catalog.size());
    for (std::uint64_t g = 0; g < catalog.size(); ++g) all_items.push_back(catalog.candidate(g));
    const Tensor item_reps = model.target_representations(all_items);
    const std::size_t f = item_reps.cols();

    std::vector<Tensor> users;
    users.reserve(tests.size());
    constexpr std::size_t kChunk = 64;
    for (std::size_t start = 0; start < tests.size(); start += kChunk) {
        const std::size_t end = std::min(start + kChunk, tests.size());
        for (std::size_t i = start; i < end; ++i) {
            if (tests[i].context.empty()) throw DataError("test example " + std::to_string(i) + " has an empty context");
        }
        const std::vector<TrainingExample> chunk(tests.begin() + static_cast<std::ptrdiff_t>(start),
                                                 tests.begin() + static_cast<std::ptrdiff_t>(end));
        const Tensor emb = model.embed(assemble_batch(chunk));
        for (std::size_t r = 0; r < emb.rows(); ++r) {
            Tensor u(1, f);
            std::copy(emb.row(r).begin(), emb.row(r).end(), u.row(0).begin());
            users.push_back(std::move(u));
        }
    }

    return evaluate_scorer(tests, manifest, config,
                           [&](std::size_t i, const TrainingExample& t, std::span<const std::uint64_t> negs) {
        Tensor targets(negs.size() + 1, f);
        const Tensor pos = model.target_representations(std::span<const Event>(&t.label, 1));
        std::copy(pos.row(0).begin(), pos.row(0).end(), targets.row(0).begin());
        for (std::size_t j = 0; j < negs.size(); ++j) {
            const auto src = item_reps.row(negs[j]);
            std::copy(src.begin(), src.end(), targets.row(j + 1).begin());
        }
        return model.score_candidates(users[i], targets);
    });
}

std::string report_json(const EvalReport& report, const std::string& checkpoint_id, const std::string& variant,
                        const std::string& config_echo) {
    nlohmann::ordered_json j;
    j["recall_at_k"] = report.recall_at_k;
    j["ndcg_at_k"] = report.ndcg_at_k;
    j["k"] = report.k;
    j["negatives"] = report.negatives;
    j["examples"] = report.examples;
    j["seed"] = report.seed;
    j["variant"] = variant;
    j["checkpoint_id"] = checkpoint_id;
    j["warnings"] = report.warnings;
    j["config"] = config_echo;
    return j.dump(2) + "\n";
}

std::string report_csv(const EvalReport& report, const std::string& checkpoint_id, const std::string& variant) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%zu,%zu,%llu,%.17g,%.17g\n", checkpoint_id.c_str(), variant.c_str(),
                  report.k, report.negatives, report.examples, static_cast<unsigned long long>(report.seed),
                  report.recall_at_k, report.ndcg_at_k);
    return std::string("checkpoint_id,variant,k,negatives,examples,seed,recall_at_k,ndcg_at_k\n") + buf;
}

} // namespace uum
