#include "uum/config.hpp"
#include "uum/errors.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace uum;

namespace {

std::string config_path(const std::string& name) { return std::string(UUM_SOURCE_DIR) + "/configs/" + name; }

std::string config_error(const std::string& text) {
    try {
        parse_run_config(text, "t.toml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST(RunConfig, CommittedConfigsLoadAndValidate) {
    for (const char* name : {"default.toml", "imbalanced.toml"}) {
        const auto c = load_run_config(config_path(name));
        EXPECT_NO_THROW(c.validate()) << name;
        EXPECT_EQ(c.generator.user_count, 1000u);
        EXPECT_EQ(c.model.latent_dim, 32u);
        EXPECT_EQ(c.train.batch_size, 64u);
        EXPECT_EQ(c.eval.k, 20u);
        EXPECT_EQ(c.resolved_model().positional_capacity, c.data.window_len);
    }
    const auto imb = load_run_config(config_path("imbalanced.toml"));
    EXPECT_EQ(imb.generator.domain_propensity, (std::vector<double>{0.85, 0.15}));
}

TEST(RunConfig, SerializationIsLossless) {
    RunConfig c = load_run_config(config_path("imbalanced.toml"));
    c.train.learning_rate = 0.1 + 0.2; // not exactly representable in short form
    c.generator.property_noise = 1e-300;
    c.model.variant = Variant::ib_token;
    c.model.ib_exchange = false;
    c.paths.out_dir = "runs/with \"quotes\"";
    c.compare.seeds = {1, 2, 3, 4};
    const auto text = serialize_run_config(c);
    const auto back = parse_run_config(text);
    EXPECT_TRUE(back == c);
    EXPECT_EQ(serialize_run_config(back), text);
}

TEST(RunConfig, DefaultsRoundTrip) {
    const RunConfig c;
    EXPECT_TRUE(parse_run_config(serialize_run_config(c)) == c);
    EXPECT_TRUE(parse_run_config("") == c);
}

TEST(RunConfig, CommentsAndWhitespace) {
    const auto c = parse_run_config("# top\n\n[model]   # trailing\n  latent_dim = 16  # f\nheads=4\n");
    EXPECT_EQ(c.model.latent_dim, 16u);
    EXPECT_EQ(c.model.heads, 4u);
}

TEST(RunConfig, ErrorsCarryLocation) {
    EXPECT_NE(config_error("[model]\nlatent_dim = \"x\"\n").find("t.toml:2"), std::string::npos);
    EXPECT_NE(config_error("[nope]\n").find("t.toml:1"), std::string::npos);
    EXPECT_NE(config_error("[model]\nunknown_key = 3\n").find("unknown_key"), std::string::npos);
    EXPECT_NE(config_error("[model]\nlatent_dim = 8\nlatent_dim = 8\n").find("t.toml:3"), std::string::npos);
    EXPECT_NE(config_error("[model\n"), "");
    EXPECT_NE(config_error("[model]\nlayers = -1\n"), "");
    EXPECT_NE(config_error("[train]\nlearning_rate = abc\n"), "");
    EXPECT_NE(config_error("[generator]\nvocab_sizes = [1, 2\n"), "");
    EXPECT_NE(config_error("[model]\nvariant = \"transformer\"\n"), "");
}

TEST(RunConfig, ValidationCatchesInconsistentSettings) {
    RunConfig c;
    c.model.latent_dim = 30;
    c.model.heads = 4;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RunConfig{};
    c.model.positional_capacity = 3;
    c.data.window_len = 10;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RunConfig{};
    c.data.window_stride = c.data.window_len + 1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = RunConfig{};
    c.generator.domain_propensity = {0.5, 0.6};
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RunConfig, Overrides) {
    RunConfig c;
    apply_override(c, "model.latent_dim=16");
    apply_override(c, "model.variant=domain_specific");
    apply_override(c, "generator.domain_propensity=[0.9, 0.1]");
    apply_override(c, "paths.out_dir = runs/x");
    EXPECT_EQ(c.model.latent_dim, 16u);
    EXPECT_EQ(c.model.variant, Variant::domain_specific);
    EXPECT_EQ(c.generator.domain_propensity, (std::vector<double>{0.9, 0.1}));
    EXPECT_EQ(c.paths.out_dir, "runs/x");
    EXPECT_THROW(apply_override(c, "model.latent_dim"), ConfigError);
    EXPECT_THROW(apply_override(c, "latent_dim=3"), ConfigError);
    EXPECT_THROW(apply_override(c, "model.nothing=3"), ConfigError);
}

TEST(RunConfig, ApplySeedTouchesEveryStream) {
    RunConfig c;
    c.apply_seed(123);
    EXPECT_EQ(c.generator.seed, 123u);
    EXPECT_EQ(c.model.init_seed, 123u);
    EXPECT_EQ(c.train.seed, 123u);
    EXPECT_EQ(c.eval.seed, 123u);
}

TEST(RunConfig, PathHelpers) {
    PathsConfig p{"d", "o"};
    EXPECT_EQ(p.events(), "d/events.jsonl");
    EXPECT_EQ(p.manifest(), "d/manifest.json");
    EXPECT_EQ(p.checkpoint(), "o/model.ckpt");
    EXPECT_EQ(p.loss_trace(), "o/loss_trace.csv");
}

TEST(RunConfig, MissingFile) { EXPECT_THROW(load_run_config("/nonexistent/cfg.toml"), ConfigError); }
