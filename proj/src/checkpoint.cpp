#include "uum/checkpoint.hpp"

#include "uum/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace uum {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'U', 'U', 'M', 'C', 'K', 'P', 'T', '\n'};

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    Reader(std::string bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

    template <class T>
    T get(const char* what) {
        T v;
        need(sizeof(T), what);
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string take(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == bytes_.size(); }
    const std::string& path() const { return path_; }

private:
    void need(std::size_t n, const char* what) {
        if (bytes_.size() - pos_ < n) {
            throw DataError("checkpoint " + path_ + " is truncated (while reading " + what + ")");
        }
    }
    std::string bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Loaded {
    ModelConfig config;
    DatasetManifest manifest;
    std::vector<std::pair<std::string, Tensor>> tensors;
};

Loaded parse(const std::string& path) {
    Reader r(read_file(path), path);
    const std::string magic = r.take(sizeof(kMagic), "header");
    if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
        throw DataError("checkpoint " + path + ": bad header, not a checkpoint of a supported version");
    }
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint " + path + ": unsupported version " + std::to_string(version) + " (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    }
    const auto meta_len = r.get<std::uint64_t>("metadata length");
    const std::string meta = r.take(meta_len, "metadata");
    Loaded out;
    try {
        auto doc = nlohmann::json::parse(meta);
        out.config = model_config_from_json(doc.at("model").dump());
        out.manifest = DatasetManifest::from_json(doc.at("manifest").dump());
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint " + path + ": malformed metadata: " + e.what());
    }
    const auto count = r.get<std::uint64_t>("tensor count");
    for (std::uint64_t t = 0; t < count; ++t) {
        const auto name_len = r.get<std::uint32_t>("tensor name");
        std::string name = r.take(name_len, "tensor name");
        const auto rank = r.get<std::uint32_t>("tensor rank");
        if (rank == 0 || rank > 8) throw DataError("checkpoint " + path + ": tensor '" + name + "' has invalid rank");
        std::vector<std::size_t> shape;
        std::size_t n = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            shape.push_back(r.get<std::uint64_t>("tensor dims"));
            n *= shape.back();
        }
        std::vector<double> data(n);
        const std::string raw = r.take(n * sizeof(double), "tensor data");
        std::memcpy(data.data(), raw.data(), raw.size());
        if (n == 0) {
            out.tensors.emplace_back(std::move(name), Tensor(shape[0], rank > 1 ? shape[1] : 0));
        } else {
            out.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
        }
    }
    if (!r.done()) throw DataError("checkpoint " + path + ": trailing bytes after the last tensor");
    return out;
}

std::string dims(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

} // namespace

std::string model_config_to_json(const ModelConfig& c) {
    nlohmann::ordered_json j;
    j["latent_dim"] = c.latent_dim;
    j["layers"] = c.layers;
    j["heads"] = c.heads;
    j["variant"] = variant_name(c.variant);
    j["id_embed_dim"] = c.id_embed_dim;
    j["cat_embed_dim"] = c.cat_embed_dim;
    j["domain_embed_dim"] = c.domain_embed_dim;
    j["feature_hidden"] = c.feature_hidden;
    j["ffn_hidden"] = c.ffn_hidden;
    j["head_hidden"] = c.head_hidden;
    j["positional_capacity"] = c.positional_capacity;
    j["cross_layers"] = c.cross_layers;
    j["private_layers"] = c.private_layers;
    j["shared_layers"] = c.shared_layers;
    j["ib_exchange"] = c.ib_exchange;
    j["causal"] = c.causal;
    j["use_property_feature"] = c.use_property_feature;
    j["layer_norm_eps"] = c.layer_norm_eps;
    j["embed_init_std"] = c.embed_init_std;
    j["init_seed"] = c.init_seed;
    return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
    try {
        auto j = nlohmann::json::parse(text);
        ModelConfig c;
        c.latent_dim = j.at("latent_dim");
        c.layers = j.at("layers");
        c.heads = j.at("heads");
        c.variant = parse_variant(j.at("variant"));
        c.id_embed_dim = j.at("id_embed_dim");
        c.cat_embed_dim = j.at("cat_embed_dim");
        c.domain_embed_dim = j.at("domain_embed_dim");
        c.feature_hidden = j.at("feature_hidden");
        c.ffn_hidden = j.at("ffn_hidden");
        c.head_hidden = j.at("head_hidden");
        c.positional_capacity = j.at("positional_capacity");
        c.cross_layers = j.at("cross_layers");
        c.private_layers = j.at("private_layers");
        c.shared_layers = j.at("shared_layers");
        c.ib_exchange = j.at("ib_exchange");
        c.causal = j.at("causal");
        c.use_property_feature = j.at("use_property_feature");
        c.layer_norm_eps = j.at("layer_norm_eps");
        c.embed_init_std = j.at("embed_init_std");
        c.init_seed = j.at("init_seed");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model config: ") + e.what());
    }
}

void save_checkpoint(const Model& model, const std::string& path) {
    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    nlohmann::ordered_json meta;
    meta["model"] = nlohmann::ordered_json::parse(model_config_to_json(model.config()));
    meta["manifest"] = nlohmann::ordered_json::parse(model.manifest().to_json());
    const std::string meta_text = meta.dump();
    put<std::uint64_t>(out, meta_text.size());
    out += meta_text;
    put<std::uint64_t>(out, model.parameters().size());
    for (const auto& p : model.parameters()) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out += p.name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
        for (auto d : p.value.shape()) put<std::uint64_t>(out, d);
        const auto v = p.value.values();
        out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write checkpoint " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("failed writing checkpoint " + path);
}

void load_into(Model& model, const std::string& path) {
    Loaded l = parse(path);
    auto& store = model.parameters();
    if (l.tensors.size() != store.size()) {
        for (const auto& [name, t] : l.tensors) {
            if (!store.contains(name)) throw DataError("checkpoint " + path + ": unexpected tensor '" + name + "'");
        }
        for (const auto& p : store) {
            bool found = false;
            for (const auto& [name, t] : l.tensors) found = found || name == p.name;
            if (!found) throw DataError("checkpoint " + path + ": missing tensor '" + p.name + "'");
        }
    }
    for (const auto& [name, t] : l.tensors) {
        const Parameter* p = store.find(name);
        if (!p) throw DataError("checkpoint " + path + ": unexpected tensor '" + name + "'");
        if (p->value.shape() != t.shape()) {
            throw DataError("checkpoint " + path + ": shape mismatch for tensor '" + name + "': file has " +
                            dims(t.shape()) + ", model expects " + dims(p->value.shape()));
        }
    }
    if (!(l.config == model.config())) throw DataError("checkpoint " + path + ": model config mismatch");
    if (!(l.manifest == model.manifest())) throw DataError("checkpoint " + path + ": dataset manifest mismatch");
    for (auto& [name, t] : l.tensors) store.get(name).value = std::move(t);
}

Model load_checkpoint(const std::string& path) {
    Loaded l = parse(path);
    Model model(l.config, l.manifest);
    load_into(model, path);
    return model;
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string checkpoint_id(const std::string& path) { return fnv1a_hex(read_file(path)); }

} // namespace uum
