#include "uum/cli.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace fs = std::filesystem;

namespace {

constexpr const char* kSmallConfig = R"([generator]
user_count = 3
vocab_sizes = [40, 30]
cat_slots = [1, 0]
cat_cardinality = 4
intent_count = 2
cluster_size = 5
min_events = 20
max_events = 30

[data]
window_len = 5

[model]
latent_dim = 32
layers = 1
heads = 2

[train]
batch_size = 4
epochs = 2

[eval]
k = 5
negatives = 20
)";

struct Result {
    int code;
    std::string out, err;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        root_ = fs::temp_directory_path() / ("uum_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(root_);
        fs::create_directories(root_);
        config_ = (root_ / "small.toml").string();
        std::ofstream(config_) << kSmallConfig;
    }
    void TearDown() override { fs::remove_all(root_); }

    Result run(std::vector<std::string> args) {
        args.insert(args.begin(), "uum");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        const int code = uum::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        return {code, out.str(), err.str()};
    }

    std::string path(const std::string& rel) const { return (root_ / rel).string(); }

    // generate + train into root_/data and root_/run
    void prepare(const std::vector<std::string>& extra = {}) {
        ASSERT_EQ(run({"generate", "--config", config_, "--out", path("data")}).code, 0);
        std::vector<std::string> args{"train", "--config", config_, "--data", path("data"), "--out", path("run")};
        args.insert(args.end(), extra.begin(), extra.end());
        const auto r = run(args);
        ASSERT_EQ(r.code, 0) << r.err;
    }

    static std::string slurp(const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return {std::istreambuf_iterator<char>(in), {}};
    }

    bool any_partial() const {
        for (const auto& e : fs::recursive_directory_iterator(root_))
            if (e.path().extension() == ".partial") return true;
        return false;
    }

    fs::path root_;
    std::string config_;
};

} // namespace

TEST_F(Cli, HelpAndUsageErrors) {
    EXPECT_EQ(run({"--help"}).code, 0);
    const auto none = run({});
    EXPECT_EQ(none.code, 2);
    EXPECT_EQ(none.err.rfind("uum: error[config]:", 0), 0u) << none.err;
    EXPECT_EQ(run({"train", "--bogus"}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST_F(Cli, ConfigErrorsExitTwo) {
    const auto missing = run({"generate", "--config", path("nope.toml")});
    EXPECT_EQ(missing.code, 2);
    EXPECT_NE(missing.err.find("error[config]"), std::string::npos);
    const auto bad_set = run({"generate", "--config", config_, "--set", "model.latent_dim=abc", "--out", path("d")});
    EXPECT_EQ(bad_set.code, 2);
    EXPECT_FALSE(fs::exists(path("d")));
}

TEST_F(Cli, MissingDatasetExitsThree) {
    const auto r = run({"train", "--config", config_, "--data", path("nothing"), "--out", path("run")});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("error[data]"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(path("run/model.ckpt")));
}

TEST_F(Cli, GenerateTrainEvalExport) {
    prepare();
    EXPECT_TRUE(fs::exists(path("data/events.jsonl")));
    EXPECT_TRUE(fs::exists(path("data/manifest.json")));
    EXPECT_TRUE(fs::exists(path("data/ground_truth.csv")));
    EXPECT_TRUE(fs::exists(path("run/model.ckpt")));
    const auto trace = slurp(path("run/loss_trace.csv"));
    EXPECT_NE(trace.find("# config_id = "), std::string::npos);
    EXPECT_NE(trace.find("\nstep,retrieval,domain,property,total\n1,"), std::string::npos);

    const auto ev = run({"eval", "--config", config_, "--data", path("data"), "--out", path("run")});
    ASSERT_EQ(ev.code, 0) << ev.err;
    EXPECT_NE(ev.out.find("recall@5"), std::string::npos);
    EXPECT_TRUE(fs::exists(path("run/eval.json")));
    EXPECT_TRUE(fs::exists(path("run/eval.csv")));

    const auto ex = run({"export", "--config", config_, "--data", path("data"), "--out", path("run"), "--output",
                         path("emb.csv")});
    ASSERT_EQ(ex.code, 0) << ex.err;
    std::istringstream lines(slurp(path("emb.csv")));
    std::string line;
    std::size_t rows = 0;
    bool header = false;
    while (std::getline(lines, line)) {
        if (line.rfind("# f=32 checkpoint=", 0) == 0) header = true;
        if (line.empty() || line[0] == '#') continue;
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 32) << line;
    }
    EXPECT_TRUE(header);
    EXPECT_EQ(rows, 3u);
    EXPECT_FALSE(any_partial());
}

TEST_F(Cli, RerunIsByteIdentical) {
    prepare();
    const auto trace = slurp(path("run/loss_trace.csv"));
    const auto ckpt = slurp(path("run/model.ckpt"));
    const auto events = slurp(path("data/events.jsonl"));
    fs::remove_all(path("run"));
    fs::remove_all(path("data"));
    prepare();
    EXPECT_EQ(slurp(path("run/loss_trace.csv")), trace);
    EXPECT_EQ(slurp(path("run/model.ckpt")), ckpt);
    EXPECT_EQ(slurp(path("data/events.jsonl")), events);
}

TEST_F(Cli, SeedFlagChangesEverything) {
    prepare();
    const auto events = slurp(path("data/events.jsonl"));
    ASSERT_EQ(run({"generate", "--config", config_, "--seed", "99", "--out", path("data99")}).code, 0);
    EXPECT_NE(slurp(path("data99/events.jsonl")), events);
}

TEST_F(Cli, EvalWithMismatchedCheckpointFailsCleanly) {
    prepare();
    const auto r = run({"eval", "--config", config_, "--set", "model.latent_dim=16", "--data", path("data"),
                        "--out", path("run"), "--checkpoint", path("run/model.ckpt")});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("shape mismatch"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(path("run/eval.json")));
    EXPECT_FALSE(any_partial());
}

TEST_F(Cli, NumericFailureRemovesPartialOutputs) {
    ASSERT_EQ(run({"generate", "--config", config_, "--set", "generator.property_base=1e200", "--out", path("data")})
                  .code,
              0);
    const auto r = run({"train", "--config", config_, "--data", path("data"), "--out", path("run")});
    EXPECT_EQ(r.code, 4) << r.err;
    EXPECT_NE(r.err.find("error[numeric]"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("step 1"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(path("run/model.ckpt")));
    EXPECT_FALSE(fs::exists(path("run/loss_trace.csv")));
    EXPECT_FALSE(any_partial());
}

TEST_F(Cli, CompareWritesTable) {
    ASSERT_EQ(run({"generate", "--config", config_, "--out", path("data")}).code, 0);
    const auto r = run({"compare", "--config", config_, "--set", "compare.seeds=[1, 2]", "--set", "train.epochs=1",
                        "--data", path("data"), "--out", path("cmp")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("ib_token"), std::string::npos) << r.out;
    const auto csv = slurp(path("cmp/compare.csv"));
    EXPECT_NE(csv.find("domain_specific"), std::string::npos);
}
