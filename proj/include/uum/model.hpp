#pragma once

#include "uum/autodiff.hpp"
#include "uum/data.hpp"
#include "uum/layers.hpp"

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace uum {

enum class Variant { base, domain_specific, ib_token };

std::string variant_name(Variant v);
/// Accepts "base", "domain_specific", "ib_token" (and "ib").
Variant parse_variant(const std::string& name);

struct ModelConfig {
    std::size_t latent_dim = 32;
    std::size_t layers = 2;
    std::size_t heads = 2;
    Variant variant = Variant::base;
    std::size_t id_embed_dim = 16;
    std::size_t cat_embed_dim = 8;
    std::size_t domain_embed_dim = 8;
    std::size_t feature_hidden = 64;
    std::size_t ffn_hidden = 64;
    std::size_t head_hidden = 64;
    std::size_t positional_capacity = kDefaultWindowLength;
    std::size_t cross_layers = 2;
    /// Domain-specific variant depths; 0 derives them from `layers`.
    std::size_t private_layers = 0;
    std::size_t shared_layers = 0;
    bool ib_exchange = true;
    bool causal = false;
    /// Feeds property_value to the context featurizer as one extra column.
    bool use_property_feature = true;
    double layer_norm_eps = 1e-5;
    double embed_init_std = 0.1;
    std::uint64_t init_seed = 7;

    std::size_t resolved_private_layers() const;
    std::size_t resolved_shared_layers() const;
    /// Throws ConfigError on invalid combinations.
    void validate() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct EncoderOutput {
    Var tokens;    ///< (batch * max_length) x f, row-major like Batch::tokens
    Var ib_tokens; ///< IB variant only: one row per (example, present domain)
    std::vector<std::pair<std::size_t, std::uint32_t>> ib_rows; ///< (example, domain) of each IB row
};

struct PoolOutput {
    Var embeddings; ///< batch x f
    Var weights;    ///< (batch * max_length) x 1, zero at pads
};

struct HeadOutputs {
    Var merged;
    Var score;         ///< n x 1
    Var domain_logits; ///< n x |D|
    Var property;      ///< n x 1
};

/// The user tower (featurizer, encoder, pooling), the target tower and the
/// prediction heads. Parameters live in one ParameterStore in a fixed order.
class Model {
public:
    Model(ModelConfig config, DatasetManifest manifest);
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) = default;

    const ModelConfig& config() const noexcept { return config_; }
    const DatasetManifest& manifest() const noexcept { return manifest_; }
    ParameterStore& parameters() noexcept { return *params_; }
    const ParameterStore& parameters() const noexcept { return *params_; }

    /// Latent vectors for events. `positions` empty means no positional term;
    /// `include_property` false zeroes the property column.
    Var featurize(Tape& tape, std::span<const Event> events, std::span<const std::size_t> positions,
                  bool include_property) const;
    /// Batch tokens with their window positions.
    Var featurize_batch(Tape& tape, const Batch& batch) const;

    Var encode_base(Tape& tape, Var latents, const Batch& batch) const;
    /// `private_stage`, if given, receives the token matrix after the per-domain encoders.
    Var encode_domain_specific(Tape& tape, Var latents, const Batch& batch, Var* private_stage = nullptr) const;
    EncoderOutput encode_ib(Tape& tape, Var latents, const Batch& batch) const;
    /// Dispatches on the configured variant.
    EncoderOutput encode(Tape& tape, Var latents, const Batch& batch) const;

    PoolOutput pool(Tape& tape, Var tokens, const Batch& batch) const;
    /// featurize -> encode -> pool.
    Var user_embeddings(Tape& tape, const Batch& batch) const;

    Var target_tower(Tape& tape, std::span<const Event> labels) const;
    HeadOutputs merge_and_score(Tape& tape, Var users, Var targets) const;
    /// Score of user i against target j, as a (users x targets) matrix.
    Var pairwise_scores(Tape& tape, Var users, Var targets) const;

    Tensor embed(const Batch& batch) const;
    Tensor target_representations(std::span<const Event> events) const;
    std::vector<double> score_candidates(const Tensor& user, const Tensor& targets) const;

    /// Base-variant-style segments: one per example over its padded window.
    std::vector<AttentionSegment> window_segments(const Batch& batch) const;

    // Component access for tests and ablations.
    const TransformerBlock& base_block(std::size_t layer) const { return base_blocks_.at(layer); }
    Parameter& ib_value_projection(std::size_t layer) const { return *ib_value_proj_.at(layer); }
    Parameter& pool_scorer() const { return *pool_scorer_; }
    const std::vector<Linear>& cross_layers() const { return cross_; }

private:
    void check_event(const Event& e) const;
    bool permitted_by_order(std::size_t q_pos, std::size_t k_pos) const { return !config_.causal || k_pos <= q_pos; }

    ModelConfig config_;
    DatasetManifest manifest_;
    std::unique_ptr<ParameterStore> params_;

    std::vector<Parameter*> item_tables_;
    std::vector<Parameter*> cat_tables_;
    Parameter* domain_table_ = nullptr;
    Parameter* position_table_ = nullptr;
    Linear feature_in_, feature_out_;

    std::vector<TransformerBlock> base_blocks_;
    std::vector<std::vector<TransformerBlock>> private_blocks_;
    std::vector<TransformerBlock> shared_blocks_;
    Parameter* ib_seed_ = nullptr;
    std::vector<TransformerBlock> ib_attend_;
    std::vector<LayerNorm> ib_exchange_norm_;
    std::vector<Parameter*> ib_value_proj_;
    std::vector<TransformerBlock> ib_reattend_;

    Parameter* pool_scorer_ = nullptr;
    std::vector<Linear> cross_;
    Linear target_in_, target_out_;
    Linear score_hidden_, score_out_;
    Linear domain_head_, property_head_;
};

} // namespace uum
