#include "uum/data.hpp"
#include "uum/errors.hpp"
#include "uum/random.hpp"

#include <gtest/gtest.h>

#include <set>
#include <tuple>

using namespace uum;

namespace {

Event ev(std::uint32_t domain, std::uint64_t item, std::int64_t ts, Intent intent = Intent::high) {
    Event e;
    e.domain = domain;
    e.item_id = item;
    e.timestamp = ts;
    e.intent = intent;
    return e;
}

StitchedSequence sequence_of(std::size_t n) {
    StitchedSequence s{1, {}};
    for (std::size_t i = 0; i < n; ++i) s.events.push_back(ev(0, i, static_cast<std::int64_t>(i)));
    return s;
}

} // namespace

TEST(Manifest, SlotsAreNumberedDomainByDomain) {
    const DatasetManifest m({{"a", 10, {4, 5}}, {"b", 7, {3}}});
    EXPECT_EQ(m.slot_count(), 3u);
    EXPECT_EQ(m.slot_owner(2), 1u);
    EXPECT_EQ(m.first_slot(1), 2u);
    EXPECT_EQ(m.null_id(1), 5u);
    EXPECT_EQ(m.pad_id(1), 6u);
    EXPECT_EQ(m.total_vocab(), 17u);
    EXPECT_EQ(m.vocab_offset(1), 10u);
    EXPECT_EQ(m.materialize(1, {2}), (std::vector<std::uint32_t>{4, 5, 2}));
}

TEST(Manifest, JsonRoundTripAndValidation) {
    const DatasetManifest m({{"a", 10, {4}}, {"b", 7, {}}});
    EXPECT_EQ(DatasetManifest::from_json(m.to_json()), m);
    EXPECT_THROW(DatasetManifest::from_json(R"({"domains":[{"name":"a","vocab_size":3}]})"), DataError);
    EXPECT_THROW(DatasetManifest({{"a", 0, {}}, {"b", 1, {}}}), DataError);
    EXPECT_THROW(DatasetManifest({{"a", 2, {}}, {"a", 1, {}}}), DataError);
}

TEST(Stitch, InterleavesByTimestamp) {
    UserHistory h;
    h.by_domain = {{ev(0, 1, 1), ev(0, 3, 3)}, {ev(1, 2, 2)}};
    const auto s = stitch(9, h);
    ASSERT_EQ(s.events.size(), 3u);
    EXPECT_EQ(s.events[0], ev(0, 1, 1));
    EXPECT_EQ(s.events[1], ev(1, 2, 2));
    EXPECT_EQ(s.events[2], ev(0, 3, 3));
}

TEST(Stitch, EqualTimestampsPutLowerDomainFirst) {
    UserHistory h;
    h.by_domain = {{ev(0, 5, 10)}, {ev(1, 1, 10)}};
    const auto s = stitch(1, h);
    EXPECT_EQ(s.events[0].domain, 0u);
    EXPECT_EQ(s.events[1].domain, 1u);
}

TEST(Stitch, SingleDomainIsIdentity) {
    UserHistory h;
    h.by_domain = {{ev(0, 4, 1), ev(0, 2, 5), ev(0, 9, 7)}, {}};
    EXPECT_EQ(stitch(1, h).events, h.by_domain[0]);
}

TEST(Stitch, RestrictionToOneDomainRecoversItsList) {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        UserHistory h;
        h.by_domain.resize(3);
        for (auto& xs : h.by_domain) {
            std::int64_t ts = 0;
            for (std::size_t i = rng.index(8); i > 0; --i) {
                ts += static_cast<std::int64_t>(rng.index(3));
                xs.push_back(ev(static_cast<std::uint32_t>(&xs - h.by_domain.data()), rng.index(5), ts));
            }
            std::sort(xs.begin(), xs.end(), [](const Event& a, const Event& b) {
                return std::tie(a.timestamp, a.item_id) < std::tie(b.timestamp, b.item_id);
            });
        }
        const auto s = stitch(1, h);
        for (std::uint32_t d = 0; d < 3; ++d) {
            std::vector<Event> only;
            for (const auto& e : s.events)
                if (e.domain == d) only.push_back(e);
            EXPECT_EQ(only, h.by_domain[d]);
        }
        for (std::size_t i = 1; i < s.events.size(); ++i) EXPECT_LE(s.events[i - 1].timestamp, s.events[i].timestamp);
    }
}

TEST(TrimToCap, DefaultCap) { EXPECT_EQ(kDefaultSequenceCap, 5000u); }

TEST(TrimToCap, DropsOldestLowIntentFirst) {
    StitchedSequence s{1, {ev(0, 0, 0, Intent::high), ev(0, 1, 1, Intent::low), ev(0, 2, 2, Intent::low),
                           ev(0, 3, 3, Intent::high), ev(0, 4, 4, Intent::low), ev(0, 5, 5, Intent::low)}};
    const auto t = trim_to_cap(s, 5);
    ASSERT_EQ(t.events.size(), 5u);
    for (const auto& e : t.events) EXPECT_NE(e.item_id, 1u);
}

TEST(TrimToCap, AllHighDropsOldest) {
    const auto t = trim_to_cap(sequence_of(6), 5);
    ASSERT_EQ(t.events.size(), 5u);
    EXPECT_EQ(t.events.front().item_id, 1u);
}

TEST(TrimToCap, UnderCapUnchanged) { EXPECT_EQ(trim_to_cap(sequence_of(4), 5).events, sequence_of(4).events); }

TEST(TrimToCap, NeverDropsHighWhileLowRemains) {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        StitchedSequence s{1, {}};
        const std::size_t n = 1 + rng.index(40);
        for (std::size_t i = 0; i < n; ++i)
            s.events.push_back(ev(0, i, static_cast<std::int64_t>(i), rng.bernoulli(0.4) ? Intent::high : Intent::low));
        const std::size_t cap = 1 + rng.index(40);
        const auto t = trim_to_cap(s, cap);
        EXPECT_EQ(t.events.size(), std::min(n, cap));
        std::set<std::uint64_t> kept;
        bool low_kept = false;
        for (const auto& e : t.events) {
            kept.insert(e.item_id);
            low_kept |= e.intent == Intent::low;
        }
        for (const auto& e : s.events) {
            if (e.intent == Intent::high && !kept.count(e.item_id)) {
                EXPECT_FALSE(low_kept);
            }
        }
        for (std::size_t i = 1; i < t.events.size(); ++i) EXPECT_LT(t.events[i - 1].item_id, t.events[i].item_id);
    }
}

TEST(SlideWindows, DefaultLength) { EXPECT_EQ(kDefaultWindowLength, 800u); }

TEST(SlideWindows, FiveEventsLengthTwo) {
    const auto w = slide_windows(sequence_of(5), 2);
    ASSERT_EQ(w.size(), 2u);
    EXPECT_EQ(w[0].context.size(), 1u);
    EXPECT_EQ(w[0].context[0].item_id, 0u);
    EXPECT_EQ(w[0].label.item_id, 1u);
    EXPECT_EQ(w[1].context[0].item_id, 2u);
    EXPECT_EQ(w[1].label.item_id, 3u);
}

TEST(SlideWindows, SingleEventGivesNothing) { EXPECT_TRUE(slide_windows(sequence_of(1), 4).empty()); }

TEST(SlideWindows, PartitionCoverage) {
    for (std::size_t n = 0; n < 60; ++n) {
        for (std::size_t len = 2; len < 12; ++len) {
            const auto w = slide_windows(sequence_of(n), len);
            std::vector<int> seen(n, 0);
            for (const auto& ex : w) {
                EXPECT_LE(ex.context.size() + 1, len);
                for (const auto& e : ex.context) {
                    ++seen[e.item_id];
                    EXPECT_LE(e.timestamp, ex.label.timestamp);
                }
                ++seen[ex.label.item_id];
            }
            const std::size_t tail = n % len;
            for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(seen[i], (tail == 1 && i == n - 1) ? 0 : 1);
        }
    }
}

TEST(SlideWindows, OverlappingStride) {
    const auto w = slide_windows(sequence_of(7), 4, 2);
    ASSERT_EQ(w.size(), 3u);
    EXPECT_EQ(w[0].label.item_id, 3u);
    EXPECT_EQ(w[1].context.front().item_id, 2u);
    EXPECT_EQ(w[2].label.item_id, 6u);
}

TEST(AssembleBatch, PadsToLongestContext) {
    TrainingExample a{1, {ev(0, 1, 1), ev(1, 2, 2), ev(0, 3, 3)}, ev(0, 4, 4)};
    TrainingExample b{2, {ev(0, 1, 1), ev(0, 2, 2), ev(1, 3, 3), ev(1, 4, 4), ev(0, 5, 5)}, ev(1, 6, 6)};
    const Batch batch = assemble_batch({a, b}, 99);
    EXPECT_EQ(batch.max_length, 5u);
    EXPECT_EQ(std::count(batch.real.begin(), batch.real.begin() + 5, true), 3);
    EXPECT_EQ(std::count(batch.real.begin() + 5, batch.real.end(), true), 5);
    EXPECT_TRUE(batch.token(0, 4).is_pad());
    EXPECT_EQ(batch.token(0, 4).item_id, 99u);
    EXPECT_EQ(batch.domains[3], kPadDomain);
    EXPECT_EQ(batch.labels[1], b.label);
    EXPECT_EQ(batch.context(0), a.context);
    EXPECT_EQ(batch.context(1), b.context);
}

TEST(AssembleBatch, EqualLengthsAndSingleton) {
    TrainingExample a{1, {ev(0, 1, 1), ev(0, 2, 2)}, ev(0, 3, 3)};
    const Batch two = assemble_batch({a, a});
    EXPECT_EQ(std::count(two.real.begin(), two.real.end(), false), 0);
    const Batch one = assemble_batch({a});
    EXPECT_EQ(one.max_length, 2u);
}
