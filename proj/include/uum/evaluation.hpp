#pragma once

#include "uum/ingest.hpp"
#include "uum/model.hpp"

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace uum {

inline constexpr std::size_t kPaperNegatives = 50000;
inline constexpr std::size_t kDeskNegatives = 1000;

struct EvalConfig {
    std::size_t k = 20;
    /// 0 picks 50000, or 1000 when the vocabulary has fewer than 50001 items.
    std::size_t negatives = 0;
    std::uint64_t seed = 7;

    std::size_t resolved_negatives(std::uint64_t vocab) const;
    void validate() const;
    friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct EvalReport {
    double recall_at_k = 0.0;
    double ndcg_at_k = 0.0;
    std::size_t examples = 0;
    std::size_t k = 0;
    std::size_t negatives = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

struct NegativeSample {
    std::vector<std::uint64_t> items; ///< global item indices
    bool clamped = false;
};

/// `n` distinct global item indices drawn uniformly from [0, vocab) minus the
/// positive. Deterministic in (seed, example). n >= vocab is clamped to vocab - 1.
NegativeSample sample_negatives(std::uint64_t positive, std::uint64_t vocab, std::size_t n, std::uint64_t seed,
                                std::uint64_t example);

/// 1 + #(negatives scoring above the positive) + #(negatives tying it).
std::size_t rank_positive(double positive, std::span<const double> negatives);
/// Scores `positive` and `negatives` against the context's user embedding.
std::size_t rank_positive(const Model& model, const std::vector<Event>& context, const Event& positive,
                          const std::vector<Event>& negatives);

double recall_at_k(std::size_t rank, std::size_t k);
double ndcg_at_k(std::size_t rank, std::size_t k);

/// Sort-based recomputation of (recall, ndcg) for scores[positive].
std::pair<double, double> metric_oracle(std::span<const double> scores, std::size_t positive, std::size_t k);

/// Scores for one test example: the positive first, then the negatives in order.
using CandidateScorer = std::function<std::vector<double>(std::size_t example, const TrainingExample& test,
                                                          std::span<const std::uint64_t> negatives)>;

/// Item space is every domain's vocabulary, indexed as in DatasetManifest::vocab_offset.
EvalReport evaluate_scorer(const std::vector<TrainingExample>& tests, const DatasetManifest& manifest,
                           const EvalConfig& config, const CandidateScorer& scorer);

/// Negatives take their features from the catalog; the positive is the label event.
EvalReport evaluate(const Model& model, const std::vector<TrainingExample>& tests, const ItemCatalog& catalog,
                    const EvalConfig& config);

/// JSON with the metrics plus the given provenance fields.
std::string report_json(const EvalReport& report, const std::string& checkpoint_id, const std::string& variant,
                        const std::string& config_echo);
/// Header and one data row.
std::string report_csv(const EvalReport& report, const std::string& checkpoint_id, const std::string& variant);

} // namespace uum
