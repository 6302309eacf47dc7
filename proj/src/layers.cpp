#include "uum/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace uum {

Tensor glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Tensor t(rows, cols);
    for (double& v : t.values()) v = rng.uniform(-limit, limit);
    return t;
}

Tensor normal_init(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    Tensor t(rows, cols);
    for (double& v : t.values()) v = rng.normal(0.0, stddev);
    return t;
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias, Rng& rng)
    : weight_(&store.add(name + ".weight", glorot_uniform(in, out, rng))) {
    if (bias) bias_ = &store.add(name + ".bias", Tensor(1, out));
}

Var Linear::operator()(Tape& tape, Var x) const {
    Var y = ad::matmul(x, tape.parameter(*weight_));
    if (bias_) y = ad::add_row(y, tape.parameter(*bias_));
    return y;
}

Var cross_layer(Tape& tape, Var c0, Var c, const Linear& layer) { return ad::add(ad::mul(c0, layer(tape, c)), c); }

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t width, double eps)
    : gain_(&store.add(name + ".gain", Tensor(1, width, 1.0))),
      bias_(&store.add(name + ".bias", Tensor(1, width))),
      eps_(eps) {}

Var LayerNorm::operator()(Tape& tape, Var x) const {
    return ad::layer_norm(x, tape.parameter(*gain_), tape.parameter(*bias_), eps_);
}

TransformerBlock::TransformerBlock(ParameterStore& store, const std::string& name, std::size_t width,
                                   std::size_t ffn_hidden, std::size_t heads, double eps, Rng& rng)
    : q_(store, name + ".attn.query", width, width, false, rng),
      k_(store, name + ".attn.key", width, width, false, rng),
      v_(store, name + ".attn.value", width, width, false, rng),
      o_(store, name + ".attn.output", width, width, true, rng),
      ff1_(store, name + ".ffn.in", width, ffn_hidden, true, rng),
      ff2_(store, name + ".ffn.out", ffn_hidden, width, true, rng),
      ln1_(store, name + ".norm1", width, eps),
      ln2_(store, name + ".norm2", width, eps),
      heads_(heads) {
    if (heads == 0 || width % heads != 0) {
        throw std::invalid_argument("latent width " + std::to_string(width) + " not divisible by head count " +
                                    std::to_string(heads));
    }
}

Var TransformerBlock::attention_mix(Tape& tape, Var x, const std::vector<AttentionSegment>& segments) const {
    return ad::attention(q_(tape, x), k_(tape, x), v_(tape, x), segments, heads_);
}

Var TransformerBlock::operator()(Tape& tape, Var x, const std::vector<AttentionSegment>& segments) const {
    Var attended = o_(tape, attention_mix(tape, x, segments));
    Var x1 = ln1_(tape, ad::add(x, attended));
    Var ff = ff2_(tape, ad::relu(ff1_(tape, x1)));
    return ln2_(tape, ad::add(x1, ff));
}

Tensor masked_multi_head_attention(const Tensor& h, const AttentionMask& mask, const TransformerBlock& block) {
    if (mask.size() != h.rows()) throw std::invalid_argument("attention mask must be M x M");
    Tape tape;
    AttentionSegment seg;
    seg.mask = mask;
    for (std::size_t i = 0; i < h.rows(); ++i) seg.rows.push_back(i);
    return block(tape, tape.constant(h), {seg}).value();
}

} // namespace uum
