#pragma once

#include "uum/config.hpp"
#include "uum/evaluation.hpp"
#include "uum/pipeline.hpp"
#include "uum/training.hpp"

#include <functional>
#include <string>
#include <vector>

namespace uum {

struct RunOutcome {
    std::string variant;
    std::uint64_t seed = 0;
    TrainResult training;
    EvalReport report;
};

/// Trains `variant` from the config's model section with initialization,
/// shuffle and negative seeds set to `seed`, then evaluates on the test split.
RunOutcome train_and_evaluate(const RunConfig& config, const PreparedData& data, Variant variant, std::uint64_t seed);

/// Every configured variant for every configured seed, on the same data.
std::vector<RunOutcome> run_comparison(const RunConfig& config, const PreparedData& data,
                                       const std::function<void(const RunOutcome&)>& progress = {});

struct MetricSummary {
    std::string variant;
    double recall_mean = 0.0, recall_stdev = 0.0;
    double ndcg_mean = 0.0, ndcg_stdev = 0.0;
    std::size_t runs = 0;
};

/// Per-variant mean and sample standard deviation, in first-seen variant order.
std::vector<MetricSummary> summarize(const std::vector<RunOutcome>& runs);

std::string format_compare_table(const std::vector<MetricSummary>& summary, std::size_t k);
std::string compare_csv(const std::vector<RunOutcome>& runs, const std::vector<MetricSummary>& summary);

ItemCatalog build_catalog(const PreparedData& data);

} // namespace uum
