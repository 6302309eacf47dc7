#include "uum/ingest.hpp"

#include "uum/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>

namespace uum {

namespace {

constexpr std::array<const char*, 7> kFields = {"user_id", "domain", "item_id", "ts_ms", "intent", "cats", "prop"};

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    std::string s(buf.data(), end);
    if (s.find_first_of(".eE") == std::string::npos && s.find("inf") == std::string::npos) s += ".0";
    return s;
}

} // namespace

std::pair<std::uint64_t, Event> parse_event_record(const std::string& line, const DatasetManifest& manifest) {
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception&) {
        throw DataError("malformed record: not valid JSON");
    }
    if (!doc.is_object()) throw DataError("malformed record: expected an object");
    std::size_t i = 0;
    for (auto it = doc.begin(); it != doc.end(); ++it, ++i) {
        if (i >= kFields.size()) throw DataError("unknown field '" + it.key() + "'");
        if (it.key() != kFields[i]) {
            bool known = std::find(kFields.begin(), kFields.end(), it.key()) != kFields.end();
            throw DataError(known ? "field '" + it.key() + "' out of order" : "unknown field '" + it.key() + "'");
        }
    }
    if (i != kFields.size()) throw DataError(std::string("missing field '") + kFields[i] + "'");

    auto require_uint = [&](const char* key) -> std::uint64_t {
        const auto& v = doc[key];
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            throw DataError(std::string("field '") + key + "' must be a non-negative integer");
        }
        return v.get<std::uint64_t>();
    };

    const std::uint64_t user = require_uint("user_id");
    if (!doc["domain"].is_string()) throw DataError("field 'domain' must be a string");
    const auto name = doc["domain"].get<std::string>();
    auto domain = manifest.domain_index(name);
    if (!domain) throw DataError("unknown domain '" + name + "'");

    Event e;
    e.domain = *domain;
    e.item_id = require_uint("item_id");
    e.timestamp = static_cast<std::int64_t>(require_uint("ts_ms"));
    const auto& intent = doc["intent"];
    if (intent == "high") {
        e.intent = Intent::high;
    } else if (intent == "low") {
        e.intent = Intent::low;
    } else {
        throw DataError("field 'intent' must be \"high\" or \"low\"");
    }
    const auto& cats = doc["cats"];
    if (!cats.is_array()) throw DataError("field 'cats' must be an integer list");
    std::vector<std::uint32_t> own;
    for (const auto& c : cats) {
        if (!c.is_number_unsigned()) throw DataError("field 'cats' must hold non-negative integers");
        own.push_back(c.get<std::uint32_t>());
    }
    e.categorical = manifest.materialize(e.domain, own);
    if (!doc["prop"].is_number()) throw DataError("field 'prop' must be a number");
    e.property_value = doc["prop"].get<double>();
    if (!std::isfinite(e.property_value)) throw DataError("field 'prop' must be finite");
    manifest.check_event(e);
    return {user, std::move(e)};
}

std::string format_event_record(std::uint64_t user_id, const Event& e, const DatasetManifest& manifest) {
    std::string s = "{\"user_id\":" + std::to_string(user_id);
    s += ",\"domain\":\"" + manifest.domain(e.domain).name + "\"";
    s += ",\"item_id\":" + std::to_string(e.item_id);
    s += ",\"ts_ms\":" + std::to_string(e.timestamp);
    s += std::string(",\"intent\":\"") + (e.intent == Intent::high ? "high" : "low") + "\"";
    s += ",\"cats\":[";
    const auto own = manifest.own_slots(e);
    for (std::size_t i = 0; i < own.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(own[i]);
    }
    s += "],\"prop\":" + format_double(e.property_value) + "}";
    return s;
}

IngestResult ingest_events(const std::string& path, const DatasetManifest& manifest, const IngestOptions& options) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open event log " + path);
    IngestResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        ++result.records;
        try {
            auto [user, e] = parse_event_record(line, manifest);
            auto& hist = result.users[user];
            hist.by_domain.resize(manifest.domain_count());
            hist.by_domain[e.domain].push_back(std::move(e));
        } catch (const DataError& err) {
            result.issues.push_back({line_no, err.what()});
        }
    }
    if (!result.issues.empty()) {
        const double rate = static_cast<double>(result.issues.size()) / static_cast<double>(result.records);
        if (rate > options.max_error_rate) {
            const auto& first = result.issues.front();
            throw DataError(path + ":" + std::to_string(first.line) + ": " + first.message + " (" +
                            std::to_string(result.issues.size()) + " bad record(s) of " +
                            std::to_string(result.records) + ")");
        }
    }
    for (auto& [user, hist] : result.users) {
        for (auto& xs : hist.by_domain) {
            std::stable_sort(xs.begin(), xs.end(), [](const Event& a, const Event& b) {
                return std::tie(a.timestamp, a.item_id) < std::tie(b.timestamp, b.item_id);
            });
        }
    }
    return result;
}

ItemCatalog::ItemCatalog(const DatasetManifest& manifest)
    : manifest_(&manifest), features_(manifest.total_vocab()), seen_(manifest.total_vocab(), false) {}

void ItemCatalog::observe(const Event& e) {
    const auto idx = global_index(e);
    if (seen_[idx]) return;
    seen_[idx] = true;
    features_[idx] = e.categorical;
}

void ItemCatalog::observe(const UserHistories& users) {
    for (const auto& [user, hist] : users)
        for (const auto& xs : hist.by_domain)
            for (const auto& e : xs) observe(e);
}

std::uint64_t ItemCatalog::global_index(const Event& e) const {
    return manifest_->vocab_offset(e.domain) + e.item_id;
}

Event ItemCatalog::candidate(std::uint64_t global_index) const {
    if (global_index >= size()) throw std::out_of_range("catalog index out of range");
    std::uint32_t d = 0;
    while (d + 1 < manifest_->domain_count() && manifest_->vocab_offset(d + 1) <= global_index) ++d;
    Event e;
    e.domain = d;
    e.item_id = global_index - manifest_->vocab_offset(d);
    e.categorical = seen_[global_index] ? features_[global_index] : manifest_->materialize(d, [&] {
        std::vector<std::uint32_t> nulls;
        for (std::size_t i = 0; i < manifest_->arity(d); ++i) nulls.push_back(manifest_->null_id(manifest_->first_slot(d) + i));
        return nulls;
    }());
    return e;
}

} // namespace uum
