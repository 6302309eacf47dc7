#include "uum/synthgen.hpp"

#include "uum/errors.hpp"
#include "uum/ingest.hpp"
#include "uum/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace uum {

std::uint64_t GeneratorConfig::resolved_cluster_size(std::size_t domain) const {
    return cluster_size ? cluster_size : vocab_sizes.at(domain) / intent_count;
}

double GeneratorConfig::signal_for(std::size_t domain) const {
    return domain_signal_strength.empty() ? signal_strength : domain_signal_strength.at(domain);
}

void GeneratorConfig::validate() const {
    const std::size_t d = domain_names.size();
    if (d < 2) throw ConfigError("generator needs at least two domains");
    if (vocab_sizes.size() != d || cat_slots.size() != d || domain_propensity.size() != d) {
        throw ConfigError("generator: per-domain lists must all have one entry per domain");
    }
    if (!domain_signal_strength.empty() && domain_signal_strength.size() != d) {
        throw ConfigError("generator: domain_signal_strength must have one entry per domain");
    }
    if (intent_count == 0) throw ConfigError("generator: intent_count must be positive");
    if (user_count == 0) throw ConfigError("generator: user_count must be positive");
    if (min_events == 0 || min_events > max_events) throw ConfigError("generator: need 1 <= min_events <= max_events");
    if (power_law_exponent <= 1.0) throw ConfigError("generator: power_law_exponent must exceed 1");
    if (cat_cardinality == 0) throw ConfigError("generator: cat_cardinality must be positive");
    double total = 0.0;
    for (double w : domain_propensity) {
        if (w < 0.0) throw ConfigError("generator: negative domain propensity");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("generator: domain propensities must sum to 1");
    for (std::size_t i = 0; i < d; ++i) {
        const double rho = signal_for(i);
        if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("generator: signal strength must lie in [0, 1]");
        const auto cs = resolved_cluster_size(i);
        if (cs == 0 || cs * intent_count > vocab_sizes[i]) {
            throw ConfigError("generator: vocabulary of domain '" + domain_names[i] + "' (" +
                              std::to_string(vocab_sizes[i]) + ") is smaller than " + std::to_string(intent_count) +
                              " clusters");
        }
    }
}

DatasetManifest manifest_for(const GeneratorConfig& config) {
    std::vector<DomainSpec> domains;
    for (std::size_t i = 0; i < config.domain_count(); ++i) {
        domains.push_back({config.domain_names[i], config.vocab_sizes[i],
                           std::vector<std::uint32_t>(config.cat_slots[i], config.cat_cardinality)});
    }
    return DatasetManifest(std::move(domains));
}

std::pair<std::uint64_t, std::uint64_t> intent_cluster(const GeneratorConfig& config, std::size_t intent, std::size_t domain) {
    const auto size = config.resolved_cluster_size(domain);
    return {intent * size, size};
}

namespace {

// Truncated continuous power law on [lo, hi + 1), floored.
std::size_t draw_event_count(Rng& rng, const GeneratorConfig& c) {
    const double a = 1.0 - c.power_law_exponent;
    const double lo = std::pow(static_cast<double>(c.min_events), a);
    const double hi = std::pow(static_cast<double>(c.max_events) + 1.0, a);
    const double x = std::pow(lo + rng.uniform() * (hi - lo), 1.0 / a);
    return std::clamp(static_cast<std::size_t>(x), c.min_events, c.max_events);
}

} // namespace

GeneratedDataset generate_dataset(const GeneratorConfig& config) {
    config.validate();
    GeneratedDataset out{manifest_for(config), {}};
    const auto& manifest = out.manifest;
    out.users.reserve(config.user_count);
    for (std::uint64_t u = 0; u < config.user_count; ++u) {
        Rng rng(derive_seed(config.seed, u, 0x5eedu));
        GeneratedUser user;
        user.user_id = u;
        user.intent = static_cast<std::size_t>(rng.index(config.intent_count));
        const std::size_t n = draw_event_count(rng, config);
        const double property_mean = config.property_base + config.property_step * static_cast<double>(user.intent);
        std::int64_t ts = static_cast<std::int64_t>(rng.index(86'400'000));
        user.events.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            Event e;
            e.domain = static_cast<std::uint32_t>(rng.categorical(config.domain_propensity));
            const auto [first, size] = intent_cluster(config, user.intent, e.domain);
            if (rng.bernoulli(config.signal_for(e.domain))) {
                e.item_id = first + rng.index(size);
            } else {
                e.item_id = rng.index(config.vocab_sizes[e.domain]);
            }
            const bool in_cluster = e.item_id >= first && e.item_id < first + size;
            e.intent = rng.bernoulli(in_cluster ? config.high_intent_in_cluster : config.high_intent_outside)
                           ? Intent::high
                           : Intent::low;
            ts += 1 + static_cast<std::int64_t>(rng.index(600'000));
            e.timestamp = ts;
            const auto cs = config.resolved_cluster_size(e.domain);
            std::vector<std::uint32_t> own(config.cat_slots[e.domain]);
            for (std::size_t s = 0; s < own.size(); ++s) {
                own[s] = static_cast<std::uint32_t>((e.item_id / cs + 5 * s) % config.cat_cardinality);
            }
            e.categorical = manifest.materialize(e.domain, own);
            e.property_value = property_mean + rng.normal(0.0, config.property_noise);
            user.events.push_back(std::move(e));
        }
        out.users.push_back(std::move(user));
    }
    return out;
}

void write_dataset(const GeneratedDataset& data, const GeneratedFiles& paths) {
    {
        std::ofstream out(paths.events, std::ios::binary);
        if (!out) throw DataError("cannot write " + paths.events);
        for (const auto& u : data.users)
            for (const auto& e : u.events) out << format_event_record(u.user_id, e, data.manifest) << '\n';
        if (!out) throw DataError("failed writing " + paths.events);
    }
    data.manifest.save(paths.manifest);
    std::ofstream gt(paths.ground_truth, std::ios::binary);
    if (!gt) throw DataError("cannot write " + paths.ground_truth);
    gt << "user_id,intent\n";
    for (const auto& u : data.users) gt << u.user_id << ',' << u.intent << '\n';
}

} // namespace uum
