#pragma once

#include "uum/adam.hpp"
#include "uum/model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace uum {

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t epochs = 10;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double lambda_domain = 1.0;
    double lambda_property = 0.1;
    std::uint64_t seed = 7;
    /// Checkpoint every n steps when positive (and always at the end).
    std::size_t eval_every = 0;
    /// Empty disables checkpointing.
    std::string checkpoint_path;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct LossBreakdown {
    double retrieval = 0.0;
    double domain = 0.0;
    double property = 0.0;
    double total = 0.0;
};

struct LossTerms {
    Var retrieval, domain, property, total;
    LossBreakdown values() const;
};

/// Row-major (B x B) candidate mask. Row i's positive sits at column i; column
/// j != i is masked out when label j has the same domain and item as label i.
std::vector<char> in_batch_candidates(const Batch& batch);

/// Batch-averaged softmax cross-entropy over unmasked candidates, positives on the diagonal.
Var sampled_softmax_loss(Var scores, const std::vector<char>& candidates);

/// Retrieval, domain and property losses for a batch, and their weighted total.
LossTerms multitask_loss(Tape& tape, const Model& model, const Batch& batch, double lambda_domain,
                         double lambda_property);

struct StepRecord {
    std::size_t step = 0; ///< 1-based
    std::size_t epoch = 0;
    LossBreakdown loss;
};

struct TrainResult {
    std::vector<StepRecord> trace;
    std::vector<double> epoch_retrieval; ///< mean retrieval loss per epoch
};

/// Example order for one epoch; a pure function of (seed, epoch, count).
std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t count);

TrainResult train(Model& model, const std::vector<TrainingExample>& examples, const TrainConfig& config,
                  const std::function<void(const StepRecord&)>& on_step = {});

/// CSV with '#'-prefixed echo lines, then step,retrieval,domain,property,total.
std::string format_loss_trace(const std::vector<StepRecord>& trace, const std::string& echo = {});
void write_loss_trace(const std::string& path, const std::vector<StepRecord>& trace, const std::string& echo = {});

/// Prefixes every line of `text` with "# ".
std::string comment_lines(const std::string& text);

} // namespace uum
