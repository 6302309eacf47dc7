#pragma once

#include "uum/data.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace uum {

struct GeneratorConfig {
    std::size_t user_count = 1000;
    std::vector<std::string> domain_names = {"d0", "d1"};
    std::vector<std::uint64_t> vocab_sizes = {1000, 1000};
    /// Categorical slots per domain; every slot has `cat_cardinality` values.
    std::vector<std::uint32_t> cat_slots = {1, 1};
    std::uint32_t cat_cardinality = 16;
    std::size_t intent_count = 8;
    /// Items per intent per domain; 0 means vocab / intent_count.
    std::uint64_t cluster_size = 0;
    double power_law_exponent = 1.5;
    std::size_t min_events = 8;
    std::size_t max_events = 2000;
    std::vector<double> domain_propensity = {0.5, 0.5};
    /// Probability an event's item comes from the user's intent cluster.
    double signal_strength = 0.9;
    /// Per-domain overrides of signal_strength; empty means no override.
    std::vector<double> domain_signal_strength;
    double high_intent_in_cluster = 0.8;
    double high_intent_outside = 0.2;
    double property_base = 1.0;
    double property_step = 1.0;
    double property_noise = 1.0;
    std::uint64_t seed = 7;

    std::size_t domain_count() const noexcept { return domain_names.size(); }
    std::uint64_t resolved_cluster_size(std::size_t domain) const;
    double signal_for(std::size_t domain) const;
    /// Throws ConfigError on an inconsistent configuration.
    void validate() const;
};

struct GeneratedUser {
    std::uint64_t user_id = 0;
    std::size_t intent = 0;
    std::vector<Event> events;
};

struct GeneratedDataset {
    DatasetManifest manifest;
    std::vector<GeneratedUser> users;
};

DatasetManifest manifest_for(const GeneratorConfig& config);

/// Item range [first, first + size) of an intent's cluster in a domain.
std::pair<std::uint64_t, std::uint64_t> intent_cluster(const GeneratorConfig& config, std::size_t intent, std::size_t domain);

/// Deterministic given the config. Each user's stream is derived from (seed, user id).
GeneratedDataset generate_dataset(const GeneratorConfig& config);

struct GeneratedFiles {
    std::string events;
    std::string manifest;
    std::string ground_truth;
};

/// Writes the event log, manifest and user -> intent ground truth.
void write_dataset(const GeneratedDataset& data, const GeneratedFiles& paths);

} // namespace uum
