#pragma once

#include "uum/evaluation.hpp"
#include "uum/model.hpp"
#include "uum/synthgen.hpp"
#include "uum/training.hpp"

#include <string>
#include <vector>

namespace uum {

struct PathsConfig {
    std::string data_dir = "data";
    std::string out_dir = "out";

    std::string events() const { return data_dir + "/events.jsonl"; }
    std::string manifest() const { return data_dir + "/manifest.json"; }
    std::string ground_truth() const { return data_dir + "/ground_truth.csv"; }
    std::string checkpoint() const { return out_dir + "/model.ckpt"; }
    std::string loss_trace() const { return out_dir + "/loss_trace.csv"; }

    friend bool operator==(const PathsConfig&, const PathsConfig&) = default;
};

struct DataConfig {
    std::size_t sequence_cap = kDefaultSequenceCap;
    std::size_t window_len = kDefaultWindowLength;
    /// 0 means window_len: disjoint windows.
    std::size_t window_stride = 0;
    double max_error_rate = 0.0;

    friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct CompareConfig {
    std::vector<std::uint64_t> seeds = {7, 8, 9};
    std::vector<std::string> variants = {"base", "domain_specific", "ib_token"};

    friend bool operator==(const CompareConfig&, const CompareConfig&) = default;
};

/// Every module's settings in one file with one section per module:
/// [paths] [generator] [data] [model] [train] [eval] [compare].
struct RunConfig {
    PathsConfig paths;
    GeneratorConfig generator;
    DataConfig data;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;
    CompareConfig compare;

    /// Model config with positional capacity taken from the window length when unset.
    ModelConfig resolved_model() const;
    /// Seeds the generator, initialization, training shuffle and negative sampling.
    void apply_seed(std::uint64_t seed);
    void validate() const;

    bool operator==(const RunConfig& other) const;
};

RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_run_config(const std::string& path);
/// Lossless: parse_run_config(serialize_run_config(c)) == c.
std::string serialize_run_config(const RunConfig& config);

/// Applies "section.key=value"; the value uses config-file syntax, and bare
/// words are accepted for string keys.
void apply_override(RunConfig& config, const std::string& assignment);

} // namespace uum
