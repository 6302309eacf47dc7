#include "uum/pipeline.hpp"

#include <algorithm>
#include <tuple>

namespace uum {

std::map<std::uint64_t, StitchedSequence> build_sequences(const UserHistories& users, std::size_t cap) {
    std::map<std::uint64_t, StitchedSequence> out;
    for (const auto& [id, history] : users) out.emplace(id, trim_to_cap(stitch(id, history), cap));
    return out;
}

Split split_windows(const std::map<std::uint64_t, StitchedSequence>& sequences, std::size_t window_len,
                    std::size_t stride) {
    Split split;
    for (const auto& [id, seq] : sequences) {
        auto windows = slide_windows(seq, window_len, stride);
        if (windows.empty()) continue;
        split.test.push_back(std::move(windows.back()));
        windows.pop_back();
        for (auto& w : windows) split.train.push_back(std::move(w));
    }
    return split;
}

PreparedData prepare_data(const std::string& events_path, const std::string& manifest_path, std::size_t sequence_cap,
                          std::size_t window_len, double max_error_rate, std::size_t stride) {
    PreparedData out;
    out.manifest = DatasetManifest::load(manifest_path);
    auto ingested = ingest_events(events_path, out.manifest, IngestOptions{max_error_rate});
    out.users = std::move(ingested.users);
    out.issues = std::move(ingested.issues);
    out.sequences = build_sequences(out.users, sequence_cap);
    out.split = split_windows(out.sequences, window_len, stride);
    return out;
}

PreparedData prepare_generated(const GeneratedDataset& data, std::size_t sequence_cap, std::size_t window_len,
                               std::size_t stride) {
    PreparedData out;
    out.manifest = data.manifest;
    for (const auto& u : data.users) {
        auto& h = out.users[u.user_id];
        h.by_domain.resize(out.manifest.domain_count());
        for (const auto& e : u.events) {
            out.manifest.check_event(e);
            h.by_domain[e.domain].push_back(e);
        }
    }
    for (auto& [id, h] : out.users) {
        for (auto& xs : h.by_domain) {
            std::stable_sort(xs.begin(), xs.end(), [](const Event& a, const Event& b) {
                return std::tie(a.timestamp, a.item_id) < std::tie(b.timestamp, b.item_id);
            });
        }
    }
    out.sequences = build_sequences(out.users, sequence_cap);
    out.split = split_windows(out.sequences, window_len, stride);
    return out;
}

} // namespace uum
