#pragma once

#include "uum/data.hpp"
#include "uum/ingest.hpp"
#include "uum/synthgen.hpp"

#include <map>
#include <string>
#include <vector>

namespace uum {

struct Split {
    std::vector<TrainingExample> train;
    std::vector<TrainingExample> test; ///< each user's final window
};

/// Stitched and trimmed sequence per user, in user-id order.
std::map<std::uint64_t, StitchedSequence> build_sequences(const UserHistories& users, std::size_t cap);

/// Windows every sequence; a user's last window is held out for testing.
Split split_windows(const std::map<std::uint64_t, StitchedSequence>& sequences, std::size_t window_len,
                    std::size_t stride = 0);

struct PreparedData {
    DatasetManifest manifest;
    UserHistories users;
    std::vector<IngestIssue> issues;
    std::map<std::uint64_t, StitchedSequence> sequences;
    Split split;
};

PreparedData prepare_data(const std::string& events_path, const std::string& manifest_path, std::size_t sequence_cap,
                          std::size_t window_len, double max_error_rate = 0.0, std::size_t stride = 0);

/// Same result as writing the dataset and reading it back.
PreparedData prepare_generated(const GeneratedDataset& data, std::size_t sequence_cap, std::size_t window_len,
                               std::size_t stride = 0);

} // namespace uum
