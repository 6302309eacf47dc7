#pragma once

#include "uum/autodiff.hpp"
#include "uum/random.hpp"

#include <string>
#include <vector>

namespace uum {

/// Glorot-uniform initialized (rows x cols) tensor.
Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);
/// N(0, stddev^2) initialized tensor.
Tensor normal_init(std::size_t rows, std::size_t cols, double stddev, Rng& rng);

/// y = x W (+ b). Weight is (in x out); bias is a (1 x out) row.
class Linear {
public:
    Linear() = default;
    Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias, Rng& rng);

    Var operator()(Tape& tape, Var x) const;

    Parameter& weight() const { return *weight_; }
    Parameter* bias() const { return bias_; }
    std::size_t in() const { return weight_->value.rows(); }
    std::size_t out() const { return weight_->value.cols(); }

private:
    Parameter* weight_ = nullptr;
    Parameter* bias_ = nullptr;
};

/// Feature-crossing layer: c0 * (c W + b) + c, element-wise product.
Var cross_layer(Tape& tape, Var c0, Var c, const Linear& layer);

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(ParameterStore& store, const std::string& name, std::size_t width, double eps);

    Var operator()(Tape& tape, Var x) const;

    Parameter& gain() const { return *gain_; }
    Parameter& bias() const { return *bias_; }

private:
    Parameter* gain_ = nullptr;
    Parameter* bias_ = nullptr;
    double eps_ = 1e-5;
};

/// Post-norm transformer block:
///   x1 = LN(x + MHA(x) Wo + bo);  out = LN(x1 + FFN(x1)),  FFN = ReLU(x W1 + b1) W2 + b2.
/// Query/key/value projections carry no bias.
class TransformerBlock {
public:
    TransformerBlock() = default;
    TransformerBlock(ParameterStore& store, const std::string& name, std::size_t width, std::size_t ffn_hidden,
                     std::size_t heads, double eps, Rng& rng);

    Var operator()(Tape& tape, Var x, const std::vector<AttentionSegment>& segments) const;
    /// Concatenated head outputs before the output projection.
    Var attention_mix(Tape& tape, Var x, const std::vector<AttentionSegment>& segments) const;

    std::size_t heads() const noexcept { return heads_; }
    const Linear& query() const { return q_; }
    const Linear& key() const { return k_; }
    const Linear& value() const { return v_; }
    const Linear& output() const { return o_; }
    const Linear& ffn_in() const { return ff1_; }
    const Linear& ffn_out() const { return ff2_; }

private:
    Linear q_, k_, v_, o_, ff1_, ff2_;
    LayerNorm ln1_, ln2_;
    std::size_t heads_ = 1;
};

/// Single-sequence convenience wrapper: one full block over H under `mask`.
Tensor masked_multi_head_attention(const Tensor& h, const AttentionMask& mask, const TransformerBlock& block);

} // namespace uum
