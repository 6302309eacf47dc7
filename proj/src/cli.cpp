#include "uum/cli.hpp"

#include "uum/checkpoint.hpp"
#include "uum/config.hpp"
#include "uum/errors.hpp"
#include "uum/experiment.hpp"
#include "uum/synthgen.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

namespace uum {

namespace {

namespace fs = std::filesystem;

/// Outputs are written under temporary names and renamed on commit; anything
/// not committed is removed.
class Outputs {
public:
    Outputs() = default;
    Outputs(const Outputs&) = delete;
    Outputs& operator=(const Outputs&) = delete;
    ~Outputs() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& [tmp, final_path] : files_) fs::remove(tmp, ec);
    }

    /// Temporary path standing in for `final_path` until commit.
    std::string add(const std::string& final_path) {
        const fs::path p(final_path);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        std::string tmp = final_path + ".partial";
        files_.emplace_back(tmp, final_path);
        return tmp;
    }
    std::string write(const std::string& final_path, const std::string& content) {
        std::string tmp = add(final_path);
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + final_path);
        out << content;
        out.close();
        if (!out) throw DataError("failed writing " + final_path);
        return tmp;
    }
    void commit() {
        for (const auto& [tmp, final_path] : files_) fs::rename(tmp, final_path);
        committed_ = true;
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
    bool committed_ = false;
};

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::vector<std::string> overrides;
    std::string checkpoint;
    std::string data_dir;
    std::string output;
};

RunConfig resolve_config(const Options& o) {
    RunConfig c = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
    for (const auto& s : o.overrides) apply_override(c, s);
    if (o.seed) c.apply_seed(*o.seed);
    if (!o.out_dir.empty()) c.paths.out_dir = o.out_dir;
    if (!o.data_dir.empty()) c.paths.data_dir = o.data_dir;
    c.validate();
    return c;
}

PreparedData load_data(const RunConfig& c, std::ostream& err) {
    if (!fs::exists(c.paths.manifest())) {
        throw DataError("no dataset at " + c.paths.data_dir + " (missing manifest.json; run `uum generate` first)");
    }
    auto data = prepare_data(c.paths.events(), c.paths.manifest(), c.data.sequence_cap, c.data.window_len,
                             c.data.max_error_rate, c.data.window_stride);
    for (const auto& issue : data.issues) {
        err << "uum: warning: " << c.paths.events() << ":" << issue.line << ": skipped: " << issue.message << "\n";
    }
    return data;
}

std::string config_id(const RunConfig& c) { return fnv1a_hex(serialize_run_config(c)); }

int cmd_generate(const Options& o, std::ostream& out) {
    const RunConfig c = resolve_config(o);
    const auto data = generate_dataset(c.generator);
    Outputs outputs;
    const GeneratedFiles files{outputs.add(c.paths.events()), outputs.add(c.paths.manifest()),
                               outputs.add(c.paths.ground_truth())};
    write_dataset(data, files);
    outputs.commit();
    std::size_t events = 0;
    for (const auto& u : data.users) events += u.events.size();
    out << "generated " << data.users.size() << " users, " << events << " events into " << c.paths.data_dir << "\n";
    return 0;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    RunConfig c = resolve_config(o);
    const auto data = load_data(c, err);
    Model model(c.resolved_model(), data.manifest);
    Outputs outputs;
    const std::string ckpt = o.checkpoint.empty() ? c.paths.checkpoint() : o.checkpoint;
    TrainConfig tc = c.train;
    tc.checkpoint_path = outputs.add(ckpt);
    std::size_t last_epoch = 0;
    const auto result = train(model, data.split.train, tc, [&](const StepRecord& r) {
        if (r.epoch != last_epoch) {
            last_epoch = r.epoch;
            err << "uum: epoch " << r.epoch << " step " << r.step << " loss " << r.loss.total << "\n";
        }
    });
    const std::string echo = serialize_run_config(c) + "config_id = " + config_id(c) + "\n";
    outputs.write(c.paths.loss_trace(), format_loss_trace(result.trace, echo));
    outputs.commit();
    out << "trained " << variant_name(c.model.variant) << " for " << result.trace.size() << " steps on "
        << data.split.train.size() << " windows\n";
    for (std::size_t e = 0; e < result.epoch_retrieval.size(); ++e) {
        out << "epoch " << e + 1 << " mean retrieval loss " << result.epoch_retrieval[e] << "\n";
    }
    out << "checkpoint " << ckpt << " (" << checkpoint_id(ckpt) << ")\n";
    return 0;
}

int cmd_eval(const Options& o, std::ostream& out, std::ostream& err) {
    const RunConfig c = resolve_config(o);
    const auto data = load_data(c, err);
    const std::string ckpt = o.checkpoint.empty() ? c.paths.checkpoint() : o.checkpoint;
    Model model(c.resolved_model(), data.manifest);
    load_into(model, ckpt);
    const auto report = evaluate(model, data.split.test, build_catalog(data), c.eval);
    for (const auto& w : report.warnings) err << "uum: warning: " << w << "\n";

    const std::string id = checkpoint_id(ckpt);
    const std::string variant = variant_name(c.model.variant);
    const std::string stem = o.output.empty() ? c.paths.out_dir + "/eval" : o.output;
    Outputs outputs;
    outputs.write(stem + ".json", report_json(report, id, variant, serialize_run_config(c)));
    outputs.write(stem + ".csv", comment_lines(serialize_run_config(c)) + report_csv(report, id, variant));
    outputs.commit();
    out << "recall@" << report.k << " " << report.recall_at_k << "  ndcg@" << report.k << " " << report.ndcg_at_k
        << "  (" << report.examples << " users, " << report.negatives << " negatives)\n";
    return 0;
}

int cmd_export(const Options& o, std::ostream& out, std::ostream& err) {
    const RunConfig c = resolve_config(o);
    const auto data = load_data(c, err);
    const std::string ckpt = o.checkpoint.empty() ? c.paths.checkpoint() : o.checkpoint;
    Model model(c.resolved_model(), data.manifest);
    load_into(model, ckpt);
    const std::size_t capacity = model.config().positional_capacity;
    const std::size_t f = model.config().latent_dim;

    std::string text = comment_lines(serialize_run_config(c));
    text += "# f=" + std::to_string(f) + " checkpoint=" + checkpoint_id(ckpt) + " config_id=" + config_id(c) + "\n";
    char buf[40];
    for (const auto& [user, seq] : data.sequences) {
        if (seq.events.empty()) continue;
        // The positional table bounds how much history one pass can see.
        const std::size_t start = seq.events.size() > capacity ? seq.events.size() - capacity : 0;
        TrainingExample ex{user, {seq.events.begin() + static_cast<std::ptrdiff_t>(start), seq.events.end()}, {}};
        const Tensor h = model.embed(assemble_batch({ex}));
        text += std::to_string(user);
        for (double v : h.values()) {
            std::snprintf(buf, sizeof(buf), ",%.17g", v);
            text += buf;
        }
        text += "\n";
    }
    const std::string path = o.output.empty() ? c.paths.out_dir + "/embeddings.csv" : o.output;
    Outputs outputs;
    outputs.write(path, text);
    outputs.commit();
    out << "exported " << data.sequences.size() << " users x " << f << " to " << path << "\n";
    return 0;
}

int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
    const RunConfig c = resolve_config(o);
    const auto data = load_data(c, err);
    const auto runs = run_comparison(c, data, [&](const RunOutcome& r) {
        err << "uum: " << r.variant << " seed " << r.seed << " recall@" << r.report.k << " " << r.report.recall_at_k
            << " ndcg@" << r.report.k << " " << r.report.ndcg_at_k << "\n";
    });
    const auto summary = summarize(runs);
    const std::string path = o.output.empty() ? c.paths.out_dir + "/compare.csv" : o.output;
    Outputs outputs;
    outputs.write(path, comment_lines(serialize_run_config(c)) + compare_csv(runs, summary));
    outputs.commit();
    out << format_compare_table(summary, c.eval.k);
    return 0;
}

int exit_code(ErrorCategory c) {
    switch (c) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::data: return 3;
    case ErrorCategory::numeric: return 4;
    }
    return 3;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Unified user modeling: generate, train, eval, export, compare"};
    app.require_subcommand(1);
    Options o;
    std::uint64_t seed = 0;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "Config file");
        sub->add_option("--seed", seed, "Seed for generation, initialization, shuffling and negatives");
        sub->add_option("--out", o.out_dir, "Output directory (generate: dataset directory)");
        sub->add_option("--set", o.overrides, "Override a config key: section.key=value");
    };
    auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
    auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint and loss trace");
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on held-out windows");
    auto* ex = app.add_subcommand("export", "Write one user embedding per user");
    auto* cmp = app.add_subcommand("compare", "Train and evaluate every variant over several seeds");
    for (auto* sub : {gen, tr, ev, ex, cmp}) add_common(sub);
    for (auto* sub : {tr, ev, ex, cmp}) sub->add_option("--data", o.data_dir, "Dataset directory");
    for (auto* sub : {tr, ev, ex}) sub->add_option("--checkpoint", o.checkpoint, "Checkpoint path");
    for (auto* sub : {ev, ex, cmp}) sub->add_option("--output", o.output, "Output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "uum: error[config]: " << e.what() << "\n";
        return 2;
    }
    for (auto* sub : {gen, tr, ev, ex, cmp}) {
        if (sub->parsed() && sub->count("--seed")) o.seed = seed;
    }
    if (gen->parsed() && !o.out_dir.empty()) {
        o.data_dir = o.out_dir;
        o.out_dir.clear();
    }

    try {
        if (gen->parsed()) return cmd_generate(o, out);
        if (tr->parsed()) return cmd_train(o, out, err);
        if (ev->parsed()) return cmd_eval(o, out, err);
        if (ex->parsed()) return cmd_export(o, out, err);
        if (cmp->parsed()) return cmd_compare(o, out, err);
    } catch (const Error& e) {
        err << "uum: error[" << category_name(e.category()) << "]: " << e.what() << "\n";
        return exit_code(e.category());
    } catch (const fs::filesystem_error& e) {
        err << "uum: error[data]: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        err << "uum: error[data]: " << e.what() << "\n";
        return 3;
    }
    return 2;
}

} // namespace uum
