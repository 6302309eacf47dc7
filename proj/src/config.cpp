#include "uum/config.hpp"

#include "uum/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>

namespace uum {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Drops a trailing comment, leaving '#' inside quoted strings alone.
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && quoted) {
            ++i;
        } else if (s[i] == '"') {
            quoted = !quoted;
        } else if (s[i] == '#' && !quoted) {
            return s.substr(0, i);
        }
    }
    return s;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    std::string s = buf;
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

struct Value {
    std::string text;
    bool bare_string = false; // accept unquoted words for string fields

    [[noreturn]] void fail(const std::string& what) const { throw ConfigError("expected " + what + ", got '" + text + "'"); }

    std::uint64_t as_uint() const {
        std::uint64_t v = 0;
        const auto* end = text.data() + text.size();
        auto [p, ec] = std::from_chars(text.data(), end, v);
        if (ec != std::errc() || p != end) fail("a non-negative integer");
        return v;
    }
    double as_double() const {
        if (text.empty()) fail("a number");
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(text, &used);
        } catch (const std::exception&) {
            fail("a number");
        }
        if (used != text.size() || !std::isfinite(v)) fail("a finite number");
        return v;
    }
    bool as_bool() const {
        if (text == "true") return true;
        if (text == "false") return false;
        fail("true or false");
    }
    std::string as_string() const {
        if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
            std::string out;
            for (std::size_t i = 1; i + 1 < text.size(); ++i) {
                if (text[i] == '\\' && i + 2 < text.size()) ++i;
                else if (text[i] == '"') fail("a string");
                out += text[i];
            }
            return out;
        }
        if (bare_string && !text.empty() && text.find_first_of("\"[],") == std::string::npos) return text;
        fail("a quoted string");
    }
    std::vector<Value> as_list() const {
        if (text.size() < 2 || text.front() != '[' || text.back() != ']') fail("a list");
        std::vector<Value> out;
        const std::string body = trim(text.substr(1, text.size() - 2));
        if (body.empty()) return out;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < body.size(); ++i) {
            const char c = body[i];
            if (c == '\\' && quoted && i + 1 < body.size()) {
                cur += c;
                cur += body[++i];
                continue;
            }
            if (c == '"') quoted = !quoted;
            if (c == ',' && !quoted) {
                out.push_back({trim(cur), bare_string});
                cur.clear();
            } else {
                cur += c;
            }
        }
        out.push_back({trim(cur), bare_string});
        for (const auto& v : out)
            if (v.text.empty()) fail("a list without empty elements");
        return out;
    }
};

template <class T>
std::string join(const std::vector<T>& xs, const std::function<std::string(const T&)>& f) {
    std::string out = "[";
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + f(xs[i]);
    return out + "]";
}

struct Field {
    std::string section;
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const Value&)> set;
};

#define UUM_UINT(sec, name, member)                                                                                 \
    Field {                                                                                                         \
        sec, name, [](const RunConfig& c) { return std::to_string(c.member); },                                    \
            [](RunConfig& c, const Value& v) { c.member = static_cast<decltype(c.member)>(v.as_uint()); }          \
    }
#define UUM_DOUBLE(sec, name, member)                                                                               \
    Field {                                                                                                         \
        sec, name, [](const RunConfig& c) { return format_double(c.member); },                                     \
            [](RunConfig& c, const Value& v) { c.member = v.as_double(); }                                          \
    }
#define UUM_BOOL(sec, name, member)                                                                                 \
    Field {                                                                                                         \
        sec, name, [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); },                   \
            [](RunConfig& c, const Value& v) { c.member = v.as_bool(); }                                            \
    }
#define UUM_STRING(sec, name, member)                                                                               \
    Field {                                                                                                         \
        sec, name, [](const RunConfig& c) { return quote(c.member); },                                             \
            [](RunConfig& c, const Value& v) { c.member = v.as_string(); }                                          \
    }
#define UUM_UINT_LIST(sec, name, member)                                                                            \
    Field {                                                                                                         \
        sec, name,                                                                                                  \
            [](const RunConfig& c) {                                                                                \
                using T = typename decltype(c.member)::value_type;                                                  \
                return join<T>(c.member, [](const T& x) { return std::to_string(x); });                            \
            },                                                                                                      \
            [](RunConfig& c, const Value& v) {                                                                      \
                c.member.clear();                                                                                   \
                for (const auto& e : v.as_list())                                                                   \
                    c.member.push_back(static_cast<typename decltype(c.member)::value_type>(e.as_uint()));          \
            }                                                                                                       \
    }
#define UUM_DOUBLE_LIST(sec, name, member)                                                                          \
    Field {                                                                                                         \
        sec, name, [](const RunConfig& c) { return join<double>(c.member, format_double); },                       \
            [](RunConfig& c, const Value& v) {                                                                      \
                c.member.clear();                                                                                   \
                for (const auto& e : v.as_list()) c.member.push_back(e.as_double());                                \
            }                                                                                                       \
    }
#define UUM_STRING_LIST(sec, name, member)                                                                          \
    Field {                                                                                                         \
        sec, name, [](const RunConfig& c) { return join<std::string>(c.member, quote); },                          \
            [](RunConfig& c, const Value& v) {                                                                      \
                c.member.clear();                                                                                   \
                for (const auto& e : v.as_list()) c.member.push_back(e.as_string());                                \
            }                                                                                                       \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        UUM_STRING("paths", "data_dir", paths.data_dir),
        UUM_STRING("paths", "out_dir", paths.out_dir),

        UUM_UINT("generator", "user_count", generator.user_count),
        UUM_STRING_LIST("generator", "domain_names", generator.domain_names),
        UUM_UINT_LIST("generator", "vocab_sizes", generator.vocab_sizes),
        UUM_UINT_LIST("generator", "cat_slots", generator.cat_slots),
        UUM_UINT("generator", "cat_cardinality", generator.cat_cardinality),
        UUM_UINT("generator", "intent_count", generator.intent_count),
        UUM_UINT("generator", "cluster_size", generator.cluster_size),
        UUM_DOUBLE("generator", "power_law_exponent", generator.power_law_exponent),
        UUM_UINT("generator", "min_events", generator.min_events),
        UUM_UINT("generator", "max_events", generator.max_events),
        UUM_DOUBLE_LIST("generator", "domain_propensity", generator.domain_propensity),
        UUM_DOUBLE("generator", "signal_strength", generator.signal_strength),
        UUM_DOUBLE_LIST("generator", "domain_signal_strength", generator.domain_signal_strength),
        UUM_DOUBLE("generator", "high_intent_in_cluster", generator.high_intent_in_cluster),
        UUM_DOUBLE("generator", "high_intent_outside", generator.high_intent_outside),
        UUM_DOUBLE("generator", "property_base", generator.property_base),
        UUM_DOUBLE("generator", "property_step", generator.property_step),
        UUM_DOUBLE("generator", "property_noise", generator.property_noise),
        UUM_UINT("generator", "seed", generator.seed),

        UUM_UINT("data", "sequence_cap", data.sequence_cap),
        UUM_UINT("data", "window_len", data.window_len),
        UUM_UINT("data", "window_stride", data.window_stride),
        UUM_DOUBLE("data", "max_error_rate", data.max_error_rate),

        Field{"model", "variant", [](const RunConfig& c) { return quote(variant_name(c.model.variant)); },
              [](RunConfig& c, const Value& v) { c.model.variant = parse_variant(v.as_string()); }},
        UUM_UINT("model", "latent_dim", model.latent_dim),
        UUM_UINT("model", "layers", model.layers),
        UUM_UINT("model", "heads", model.heads),
        UUM_UINT("model", "id_embed_dim", model.id_embed_dim),
        UUM_UINT("model", "cat_embed_dim", model.cat_embed_dim),
        UUM_UINT("model", "domain_embed_dim", model.domain_embed_dim),
        UUM_UINT("model", "feature_hidden", model.feature_hidden),
        UUM_UINT("model", "ffn_hidden", model.ffn_hidden),
        UUM_UINT("model", "head_hidden", model.head_hidden),
        UUM_UINT("model", "positional_capacity", model.positional_capacity),
        UUM_UINT("model", "cross_layers", model.cross_layers),
        UUM_UINT("model", "private_layers", model.private_layers),
        UUM_UINT("model", "shared_layers", model.shared_layers),
        UUM_BOOL("model", "ib_exchange", model.ib_exchange),
        UUM_BOOL("model", "causal", model.causal),
        UUM_BOOL("model", "use_property_feature", model.use_property_feature),
        UUM_DOUBLE("model", "layer_norm_eps", model.layer_norm_eps),
        UUM_DOUBLE("model", "embed_init_std", model.embed_init_std),
        UUM_UINT("model", "init_seed", model.init_seed),

        UUM_UINT("train", "batch_size", train.batch_size),
        UUM_UINT("train", "epochs", train.epochs),
        UUM_DOUBLE("train", "learning_rate", train.learning_rate),
        UUM_DOUBLE("train", "beta1", train.beta1),
        UUM_DOUBLE("train", "beta2", train.beta2),
        UUM_DOUBLE("train", "lambda_domain", train.lambda_domain),
        UUM_DOUBLE("train", "lambda_property", train.lambda_property),
        UUM_UINT("train", "seed", train.seed),
        UUM_UINT("train", "eval_every", train.eval_every),

        UUM_UINT("eval", "k", eval.k),
        UUM_UINT("eval", "negatives", eval.negatives),
        UUM_UINT("eval", "seed", eval.seed),

        UUM_UINT_LIST("compare", "seeds", compare.seeds),
        UUM_STRING_LIST("compare", "variants", compare.variants),
    };
    return table;
}

const Field* find_field(const std::string& section, const std::string& key) {
    for (const auto& f : fields())
        if (f.section == section && f.key == key) return &f;
    return nullptr;
}

} // namespace

ModelConfig RunConfig::resolved_model() const {
    ModelConfig m = model;
    if (m.positional_capacity == 0) m.positional_capacity = data.window_len;
    return m;
}

void RunConfig::apply_seed(std::uint64_t seed) {
    generator.seed = seed;
    model.init_seed = seed;
    train.seed = seed;
    eval.seed = seed;
}

void RunConfig::validate() const {
    generator.validate();
    resolved_model().validate();
    train.validate();
    eval.validate();
    if (data.window_len < 2) throw ConfigError("data: window_len must be at least 2");
    if (data.window_stride > data.window_len) throw ConfigError("data: window_stride must not exceed window_len");
    if (data.sequence_cap == 0) throw ConfigError("data: sequence_cap must be positive");
    if (!(data.max_error_rate >= 0.0 && data.max_error_rate <= 1.0)) throw ConfigError("data: max_error_rate must lie in [0, 1]");
    if (resolved_model().positional_capacity + 1 < data.window_len) {
        throw ConfigError("model: positional_capacity " + std::to_string(resolved_model().positional_capacity) +
                          " is smaller than the longest context (window_len - 1 = " + std::to_string(data.window_len - 1) + ")");
    }
    if (compare.seeds.empty()) throw ConfigError("compare: seeds must not be empty");
    for (const auto& v : compare.variants) parse_variant(v);
}

bool RunConfig::operator==(const RunConfig& o) const {
    return serialize_run_config(*this) == serialize_run_config(o);
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
    RunConfig config;
    std::istringstream in(text);
    std::string raw, section;
    std::set<const Field*> assigned;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string where = origin + ":" + std::to_string(line_no) + ": ";
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + "malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            bool known = false;
            for (const auto& f : fields()) known = known || f.section == section;
            if (!known) throw ConfigError(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        if (section.empty()) throw ConfigError(where + "key outside of a section");
        const std::string key = trim(line.substr(0, eq));
        const Field* f = find_field(section, key);
        if (!f) throw ConfigError(where + "unknown key '" + key + "' in [" + section + "]");
        if (!assigned.insert(f).second) throw ConfigError(where + "duplicate key " + section + "." + key);
        try {
            f->set(config, Value{trim(line.substr(eq + 1)), false});
        } catch (const ConfigError& e) {
            throw ConfigError(where + section + "." + key + ": " + e.what());
        }
    }
    return config;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_run_config({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()}, path);
}

std::string serialize_run_config(const RunConfig& config) {
    std::string out, section;
    for (const auto& f : fields()) {
        if (f.section != section) {
            out += (section.empty() ? "" : "\n") + std::string("[") + f.section + "]\n";
            section = f.section;
        }
        out += f.key + " = " + f.get(config) + "\n";
    }
    return out;
}

void apply_override(RunConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
    }
    const std::string section = trim(assignment.substr(0, dot));
    const std::string key = trim(assignment.substr(dot + 1, eq - dot - 1));
    const Field* f = find_field(section, key);
    if (!f) throw ConfigError("override names unknown key " + section + "." + key);
    try {
        f->set(config, Value{trim(assignment.substr(eq + 1)), true});
    } catch (const ConfigError& e) {
        throw ConfigError("override " + section + "." + key + ": " + e.what());
    }
}

} // namespace uum
