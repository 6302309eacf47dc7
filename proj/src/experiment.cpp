#include "uum/experiment.hpp"

#include "uum/numerics.hpp"

#include <cmath>
#include <cstdio>

namespace uum {

ItemCatalog build_catalog(const PreparedData& data) {
    ItemCatalog catalog(data.manifest);
    catalog.observe(data.users);
    return catalog;
}

RunOutcome train_and_evaluate(const RunConfig& config, const PreparedData& data, Variant variant, std::uint64_t seed) {
    ModelConfig mc = config.resolved_model();
    mc.variant = variant;
    mc.init_seed = seed;
    TrainConfig tc = config.train;
    tc.seed = seed;
    tc.checkpoint_path.clear();
    EvalConfig ec = config.eval;
    ec.seed = seed;

    Model model(mc, data.manifest);
    RunOutcome out;
    out.variant = variant_name(variant);
    out.seed = seed;
    out.training = train(model, data.split.train, tc);
    const ItemCatalog catalog = build_catalog(data);
    out.report = evaluate(model, data.split.test, catalog, ec);
    return out;
}

std::vector<RunOutcome> run_comparison(const RunConfig& config, const PreparedData& data,
                                       const std::function<void(const RunOutcome&)>& progress) {
    std::vector<RunOutcome> runs;
    for (auto seed : config.compare.seeds) {
        for (const auto& name : config.compare.variants) {
            runs.push_back(train_and_evaluate(config, data, parse_variant(name), seed));
            if (progress) progress(runs.back());
        }
    }
    return runs;
}

std::vector<MetricSummary> summarize(const std::vector<RunOutcome>& runs) {
    std::vector<MetricSummary> out;
    for (const auto& r : runs) {
        bool seen = false;
        for (const auto& s : out) seen = seen || s.variant == r.variant;
        if (seen) continue;
        std::vector<double> recall, ndcg;
        for (const auto& q : runs) {
            if (q.variant != r.variant) continue;
            recall.push_back(q.report.recall_at_k);
            ndcg.push_back(q.report.ndcg_at_k);
        }
        auto stdev = [](const std::vector<double>& xs, double mean) {
            if (xs.size() < 2) return 0.0;
            CompensatedSum s;
            for (double x : xs) s.add((x - mean) * (x - mean));
            return std::sqrt(s.value() / static_cast<double>(xs.size() - 1));
        };
        MetricSummary m;
        m.variant = r.variant;
        m.runs = recall.size();
        m.recall_mean = compensated_mean(recall);
        m.ndcg_mean = compensated_mean(ndcg);
        m.recall_stdev = stdev(recall, m.recall_mean);
        m.ndcg_stdev = stdev(ndcg, m.ndcg_mean);
        out.push_back(m);
    }
    return out;
}

std::string format_compare_table(const std::vector<MetricSummary>& summary, std::size_t k) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%-16s  %-20s  %-20s  %s\n", "variant", ("recall@" + std::to_string(k)).c_str(),
                  ("ndcg@" + std::to_string(k)).c_str(), "runs");
    std::string out = buf;
    for (const auto& s : summary) {
        std::snprintf(buf, sizeof(buf), "%-16s  %.4f +/- %.4f     %.4f +/- %.4f     %zu\n", s.variant.c_str(),
                      s.recall_mean, s.recall_stdev, s.ndcg_mean, s.ndcg_stdev, s.runs);
        out += buf;
    }
    return out;
}

std::string compare_csv(const std::vector<RunOutcome>& runs, const std::vector<MetricSummary>& summary) {
    std::string out = "variant,seed,recall_at_k,ndcg_at_k\n";
    char buf[200];
    for (const auto& r : runs) {
        std::snprintf(buf, sizeof(buf), "%s,%llu,%.17g,%.17g\n", r.variant.c_str(),
                      static_cast<unsigned long long>(r.seed), r.report.recall_at_k, r.report.ndcg_at_k);
        out += buf;
    }
    for (const auto& s : summary) {
        std::snprintf(buf, sizeof(buf), "%s,mean,%.17g,%.17g\n%s,stdev,%.17g,%.17g\n", s.variant.c_str(), s.recall_mean,
                      s.ndcg_mean, s.variant.c_str(), s.recall_stdev, s.ndcg_stdev);
        out += buf;
    }
    return out;
}

} // namespace uum
