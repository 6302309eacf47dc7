#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace uum {

enum class Intent : std::uint8_t { high, low };

inline constexpr std::uint32_t kPadDomain = 0xffffffffu;

/// One user interaction. `categorical` spans every categorical slot of the
/// manifest; slots owned by other domains hold that slot's null id.
struct Event {
    std::uint32_t domain = 0;
    std::uint64_t item_id = 0;
    std::int64_t timestamp = 0;
    Intent intent = Intent::low;
    std::vector<std::uint32_t> categorical;
    double property_value = 0.0;

    bool is_pad() const noexcept { return domain == kPadDomain; }
    friend bool operator==(const Event&, const Event&) = default;
};

struct DomainSpec {
    std::string name;
    std::uint64_t vocab_size = 0;
    std::vector<std::uint32_t> cat_cardinalities;

    friend bool operator==(const DomainSpec&, const DomainSpec&) = default;
};

/// Declares domains, item vocabularies and categorical slots. Categorical
/// slots are numbered globally, domain by domain. Each slot's table has
/// `cardinality` value rows, then a null row, then a pad row.
class DatasetManifest {
public:
    DatasetManifest() = default;
    explicit DatasetManifest(std::vector<DomainSpec> domains);

    const std::vector<DomainSpec>& domains() const noexcept { return domains_; }
    std::size_t domain_count() const noexcept { return domains_.size(); }
    const DomainSpec& domain(std::size_t d) const { return domains_.at(d); }
    std::optional<std::uint32_t> domain_index(const std::string& name) const;

    std::size_t slot_count() const noexcept { return slot_owner_.size(); }
    std::uint32_t slot_owner(std::size_t slot) const { return slot_owner_.at(slot); }
    std::uint32_t slot_cardinality(std::size_t slot) const { return slot_cardinality_.at(slot); }
    std::size_t first_slot(std::uint32_t domain) const { return first_slot_.at(domain); }
    std::size_t arity(std::uint32_t domain) const { return domains_.at(domain).cat_cardinalities.size(); }
    std::uint32_t null_id(std::size_t slot) const { return slot_cardinality(slot); }
    std::uint32_t pad_id(std::size_t slot) const { return slot_cardinality(slot) + 1; }

    std::uint64_t total_vocab() const noexcept;
    /// Offset of domain d's items in the concatenated all-domain item space.
    std::uint64_t vocab_offset(std::uint32_t domain) const { return vocab_offset_.at(domain); }

    /// Global categorical vector for an event of `domain` whose own slot values are `own`.
    std::vector<std::uint32_t> materialize(std::uint32_t domain, const std::vector<std::uint32_t>& own) const;
    /// The domain's own slot values out of a global categorical vector.
    std::vector<std::uint32_t> own_slots(const Event& e) const;

    /// Throws DataError if item or categorical ids are out of vocabulary.
    void check_event(const Event& e) const;

    std::string to_json() const;
    static DatasetManifest from_json(const std::string& text);
    static DatasetManifest load(const std::string& path);
    void save(const std::string& path) const;

    friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) { return a.domains_ == b.domains_; }

private:
    std::vector<DomainSpec> domains_;
    std::vector<std::uint32_t> slot_owner_;
    std::vector<std::uint32_t> slot_cardinality_;
    std::vector<std::size_t> first_slot_;
    std::vector<std::uint64_t> vocab_offset_;
};

/// One user's history split by domain, each list in time order.
struct UserHistory {
    std::vector<std::vector<Event>> by_domain;
};

using UserHistories = std::map<std::uint64_t, UserHistory>;

struct StitchedSequence {
    std::uint64_t user_id = 0;
    std::vector<Event> events;
};

struct TrainingExample {
    std::uint64_t user_id = 0;
    std::vector<Event> context;
    Event label;
};

/// Examples right-padded to the longest context; tokens are row-major (batch x max_length).
struct Batch {
    std::size_t max_length = 0;
    std::vector<Event> tokens;
    std::vector<bool> real;
    std::vector<std::uint32_t> domains;
    std::vector<std::size_t> lengths;
    std::vector<Event> labels;
    std::vector<std::uint64_t> user_ids;

    std::size_t size() const noexcept { return labels.size(); }
    const Event& token(std::size_t example, std::size_t position) const { return tokens[example * max_length + position]; }
    /// The example's context without padding.
    std::vector<Event> context(std::size_t example) const;
};

/// Merges per-domain lists by (timestamp, domain index, item id).
StitchedSequence stitch(std::uint64_t user_id, const UserHistory& history);

inline constexpr std::size_t kDefaultSequenceCap = 5000;
inline constexpr std::size_t kDefaultWindowLength = 800;

/// Drops oldest low-intent events first, then oldest high-intent events,
/// until at most `cap` remain. Relative order is preserved.
StitchedSequence trim_to_cap(const StitchedSequence& seq, std::size_t cap = kDefaultSequenceCap);

/// Chunks of `window_len` starting every `stride` events (0 means
/// window_len, a disjoint partition); chunks shorter than 2 are dropped. The
/// last event of each chunk is its label.
std::vector<TrainingExample> slide_windows(const StitchedSequence& seq, std::size_t window_len = kDefaultWindowLength,
                                           std::size_t stride = 0);

Event make_pad_event(std::uint64_t pad_id);

Batch assemble_batch(const std::vector<TrainingExample>& examples, std::uint64_t pad_id = 0);

} // namespace uum
