#pragma once

#include "uum/data.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace uum {

struct IngestIssue {
    std::size_t line = 0;
    std::string message;
};

struct IngestOptions {
    /// Fraction of bad records tolerated before the run fails.
    double max_error_rate = 0.0;
};

struct IngestResult {
    UserHistories users;
    std::vector<IngestIssue> issues;
    std::size_t records = 0;
};

/// Parses one event-log line. Throws DataError describing the problem.
std::pair<std::uint64_t, Event> parse_event_record(const std::string& line, const DatasetManifest& manifest);

/// Serializes one record; field order is fixed.
std::string format_event_record(std::uint64_t user_id, const Event& e, const DatasetManifest& manifest);

/// Reads a newline-delimited event log. Each user's per-domain lists come
/// back sorted by (timestamp, item id). Throws DataError naming the first
/// bad line when the error rate exceeds the threshold.
IngestResult ingest_events(const std::string& path, const DatasetManifest& manifest, const IngestOptions& options = {});

/// Categorical features per item, learned from observed events. Items never
/// observed get null features.
class ItemCatalog {
public:
    explicit ItemCatalog(const DatasetManifest& manifest);

    void observe(const Event& e);
    void observe(const UserHistories& users);

    std::uint64_t size() const noexcept { return manifest_->total_vocab(); }
    /// Candidate event for the item at a global index in [0, size()).
    Event candidate(std::uint64_t global_index) const;
    std::uint64_t global_index(const Event& e) const;

private:
    const DatasetManifest* manifest_;
    std::vector<std::vector<std::uint32_t>> features_;
    std::vector<bool> seen_;
};

} // namespace uum
