#include "support/toy.hpp"

#include "uum/checkpoint.hpp"
#include "uum/errors.hpp"
#include "uum/evaluation.hpp"
#include "uum/ingest.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

using namespace uum;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "uum_test_checkpoint";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
}

// Runs f and returns the DataError message, or "" if nothing was thrown.
template <class F>
std::string data_error(F&& f) {
    try {
        f();
    } catch (const DataError& e) {
        return e.what();
    }
    return {};
}

std::string saved(Variant v, std::uint64_t seed, const std::string& name) {
    Model model(toy::config(v, seed), toy::manifest());
    const auto path = scratch(name).string();
    save_checkpoint(model, path);
    return path;
}

} // namespace

TEST(Checkpoint, RoundTripIsBitwise) {
    for (Variant v : {Variant::base, Variant::domain_specific, Variant::ib_token}) {
        Model model(toy::config(v, 4), toy::manifest());
        const auto path = scratch("rt.ckpt").string();
        save_checkpoint(model, path);
        Model back = load_checkpoint(path);
        EXPECT_EQ(back.config(), model.config());
        EXPECT_EQ(back.manifest(), model.manifest());
        ASSERT_EQ(back.parameters().size(), model.parameters().size());
        auto it = back.parameters().begin();
        for (const auto& p : model.parameters()) {
            EXPECT_EQ(it->name, p.name);
            EXPECT_EQ(it->value, p.value) << p.name;
            ++it;
        }
        const auto again = scratch("rt2.ckpt").string();
        save_checkpoint(back, again);
        EXPECT_EQ(slurp(path), slurp(again));
        EXPECT_EQ(checkpoint_id(path), checkpoint_id(again));
    }
}

TEST(Checkpoint, LoadIntoOverwritesValues) {
    const auto path = saved(Variant::ib_token, 1, "into.ckpt");
    Model other(toy::config(Variant::ib_token, 1), toy::manifest());
    for (auto& p : other.parameters()) p.value.fill(0.25);
    load_into(other, path);
    Model reference(toy::config(Variant::ib_token, 1), toy::manifest());
    auto it = reference.parameters().begin();
    for (const auto& p : other.parameters()) EXPECT_EQ(p.value, (it++)->value) << p.name;
}

TEST(Checkpoint, EvaluationIsIdenticalAfterReload) {
    const auto m = toy::manifest();
    Model model(toy::config(Variant::domain_specific, 2), m);
    const auto path = scratch("eval.ckpt").string();
    save_checkpoint(model, path);
    Model back = load_checkpoint(path);
    ItemCatalog catalog(back.manifest());
    ItemCatalog catalog_a(model.manifest());
    EvalConfig cfg;
    cfg.k = 3;
    cfg.negatives = 6;
    const auto tests = toy::examples(2);
    const auto a = evaluate(model, tests, catalog_a, cfg);
    const auto b = evaluate(back, tests, catalog, cfg);
    EXPECT_EQ(a.recall_at_k, b.recall_at_k);
    EXPECT_EQ(a.ndcg_at_k, b.ndcg_at_k);
}

TEST(Checkpoint, BadHeaderIsAVersionError) {
    const auto path = scratch("junk.ckpt");
    spit(path, "definitely not a checkpoint file");
    EXPECT_NE(data_error([&] { load_checkpoint(path.string()); }).find("not a checkpoint of a supported version"),
              std::string::npos);
    spit(path, "");
    EXPECT_NE(data_error([&] { load_checkpoint(path.string()); }), "");
}

TEST(Checkpoint, FutureVersionIsRejected) {
    const auto path = saved(Variant::base, 1, "future.ckpt");
    auto bytes = slurp(path);
    bytes[8] = 2; // u32 version follows the 8-byte magic
    spit(path, bytes);
    const auto msg = data_error([&] { load_checkpoint(path); });
    EXPECT_NE(msg.find("unsupported version 2"), std::string::npos) << msg;
}

TEST(Checkpoint, TruncationAndTrailingBytes) {
    const auto path = saved(Variant::base, 1, "cut.ckpt");
    const auto bytes = slurp(path);
    for (std::size_t keep : {std::size_t{12}, bytes.size() / 2, bytes.size() - 1}) {
        spit(path, bytes.substr(0, keep));
        const auto msg = data_error([&] { load_checkpoint(path); });
        EXPECT_NE(msg.find("truncated"), std::string::npos) << keep << ": " << msg;
    }
    spit(path, bytes + "x");
    EXPECT_NE(data_error([&] { load_checkpoint(path); }).find("trailing bytes"), std::string::npos);
}

TEST(Checkpoint, WrongLatentDimNamesTheTensor) {
    const auto path = saved(Variant::base, 1, "f8.ckpt");
    auto cfg = toy::config(Variant::base, 1);
    cfg.latent_dim = 16;
    Model wide(cfg, toy::manifest());
    const auto msg = data_error([&] { load_into(wide, path); });
    EXPECT_NE(msg.find("shape mismatch for tensor 'embed.position'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("file has [4,8], model expects [4,16]"), std::string::npos) << msg;
}

TEST(Checkpoint, VariantChangeIsATensorSetError) {
    const auto path = saved(Variant::base, 1, "base.ckpt");
    Model ib(toy::config(Variant::ib_token, 1), toy::manifest());
    const auto msg = data_error([&] { load_into(ib, path); });
    EXPECT_NE(msg.find("tensor"), std::string::npos) << msg;
}

TEST(Checkpoint, ConfigAndManifestMismatch) {
    const auto path = saved(Variant::ib_token, 1, "cfg.ckpt");
    auto cfg = toy::config(Variant::ib_token, 1);
    cfg.ib_exchange = false;
    Model off(cfg, toy::manifest());
    EXPECT_NE(data_error([&] { load_into(off, path); }).find("model config mismatch"), std::string::npos);

    const DatasetManifest renamed({{"x", 6, {3}}, {"y", 5, {2}}});
    Model other(toy::config(Variant::ib_token, 1), renamed);
    EXPECT_NE(data_error([&] { load_into(other, path); }).find("manifest mismatch"), std::string::npos);
}

TEST(Checkpoint, MissingFile) {
    EXPECT_NE(data_error([] { load_checkpoint("/nonexistent/dir/model.ckpt"); }).find("cannot open"), std::string::npos);
}

TEST(Checkpoint, ModelConfigJsonRoundTrip) {
    auto c = toy::config(Variant::domain_specific, 99);
    c.private_layers = 1;
    c.shared_layers = 3;
    c.causal = true;
    c.layer_norm_eps = 1e-7;
    EXPECT_EQ(model_config_from_json(model_config_to_json(c)), c);
    EXPECT_THROW(model_config_from_json("{\"latent_dim\": 8}"), DataError);
}

TEST(Checkpoint, Fnv1aKnownValues) {
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
    EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}
