#include "uum/training.hpp"

#include "uum/checkpoint.hpp"
#include "uum/errors.hpp"
#include "uum/numerics.hpp"
#include "uum/random.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace uum {

void TrainConfig::validate() const {
    if (batch_size < 2) throw ConfigError("train: batch_size must be at least 2 for in-batch negatives");
    if (epochs == 0) throw ConfigError("train: epochs must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("train: learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train: betas must lie in [0, 1)");
    if (!(lambda_domain >= 0.0) || !(lambda_property >= 0.0)) throw ConfigError("train: loss weights must be non-negative");
}

LossBreakdown LossTerms::values() const {
    return {retrieval.scalar(), domain.scalar(), property.scalar(), total.scalar()};
}

std::vector<char> in_batch_candidates(const Batch& batch) {
    const std::size_t b = batch.size();
    if (b < 2) throw std::invalid_argument("in_batch_candidates: batch needs at least 2 examples");
    std::vector<char> mask(b * b, 1);
    for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
            if (i == j) continue;
            const auto& a = batch.labels[i];
            const auto& c = batch.labels[j];
            if (a.domain == c.domain && a.item_id == c.item_id) mask[i * b + j] = 0;
        }
    }
    return mask;
}

Var sampled_softmax_loss(Var scores, const std::vector<char>& candidates) {
    std::vector<std::size_t> targets(scores.rows());
    std::iota(targets.begin(), targets.end(), std::size_t{0});
    return ad::softmax_cross_entropy(scores, candidates, targets);
}

namespace {

template <class F>
auto named_term(const char* term, F&& f) {
    try {
        return f();
    } catch (const NumericError& e) {
        throw NumericError(std::string(term) + " loss: " + e.what());
    }
}

} // namespace

LossTerms multitask_loss(Tape& tape, const Model& model, const Batch& batch, double lambda_domain,
                         double lambda_property) {
    Var users = named_term("retrieval", [&] { return model.user_embeddings(tape, batch); });
    Var targets = named_term("retrieval", [&] { return model.target_tower(tape, batch.labels); });

    LossTerms out;
    out.retrieval = named_term("retrieval", [&] {
        return sampled_softmax_loss(model.pairwise_scores(tape, users, targets), in_batch_candidates(batch));
    });
    HeadOutputs heads = named_term("domain", [&] { return model.merge_and_score(tape, users, targets); });
    out.domain = named_term("domain", [&] {
        std::vector<std::size_t> labels;
        for (const auto& e : batch.labels) labels.push_back(e.domain);
        return ad::softmax_cross_entropy(heads.domain_logits, labels);
    });
    out.property = named_term("property", [&] {
        std::vector<double> values;
        for (const auto& e : batch.labels) values.push_back(e.property_value);
        return ad::mean_squared_error(heads.property, values);
    });
    out.total = named_term("total", [&] {
        return ad::add(ad::add(out.retrieval, ad::scale(out.domain, lambda_domain)),
                       ad::scale(out.property, lambda_property));
    });
    return out;
}

std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t count) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, epoch, 0x5a1e));
    rng.shuffle(order);
    return order;
}

TrainResult train(Model& model, const std::vector<TrainingExample>& examples, const TrainConfig& config,
                  const std::function<void(const StepRecord&)>& on_step) {
    config.validate();
    if (examples.size() < 2) throw DataError("training set yields no batch (needs at least 2 examples)");

    Adam adam(AdamConfig{config.learning_rate, config.beta1, config.beta2, 1e-8});
    TrainResult result;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        const auto order = epoch_order(config.seed, epoch, examples.size());
        CompensatedSum epoch_sum;
        std::size_t epoch_steps = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(start + config.batch_size, order.size());
            if (end - start < 2) break;
            std::vector<TrainingExample> chunk;
            chunk.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) chunk.push_back(examples[order[i]]);
            const Batch batch = assemble_batch(chunk);

            ++step;
            model.parameters().zero_grad();
            Tape tape;
            LossTerms terms;
            try {
                terms = multitask_loss(tape, model, batch, config.lambda_domain, config.lambda_property);
                tape.backward(terms.total);
            } catch (const NumericError& e) {
                throw NumericError("non-finite value at step " + std::to_string(step) + ": " + e.what());
            }
            StepRecord rec{step, epoch + 1, terms.values()};
            adam.step(model.parameters());
            for (const auto& p : model.parameters()) {
                if (!p.value.all_finite()) {
                    throw NumericError("step " + std::to_string(step) + ": parameter '" + p.name +
                                       "' became non-finite after the update");
                }
            }
            result.trace.push_back(rec);
            epoch_sum.add(rec.loss.retrieval);
            ++epoch_steps;
            if (on_step) on_step(rec);
            if (config.eval_every > 0 && step % config.eval_every == 0 && !config.checkpoint_path.empty()) {
                save_checkpoint(model, config.checkpoint_path);
            }
        }
        result.epoch_retrieval.push_back(epoch_steps ? epoch_sum.value() / static_cast<double>(epoch_steps) : 0.0);
    }
    if (!config.checkpoint_path.empty()) save_checkpoint(model, config.checkpoint_path);
    return result;
}

std::string comment_lines(const std::string& text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line)) out += "# " + line + "\n";
    return out;
}

std::string format_loss_trace(const std::vector<StepRecord>& trace, const std::string& echo) {
    std::string out = comment_lines(echo);
    out += "step,retrieval,domain,property,total\n";
    char buf[160];
    for (const auto& r : trace) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", r.step, r.loss.retrieval, r.loss.domain,
                      r.loss.property, r.loss.total);
        out += buf;
    }
    return out;
}

void write_loss_trace(const std::string& path, const std::vector<StepRecord>& trace, const std::string& echo) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write loss trace " + path);
    out << format_loss_trace(trace, echo);
}

} // namespace uum
