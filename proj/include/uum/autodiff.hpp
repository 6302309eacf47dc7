#pragma once

#include "uum/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace uum {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

/// Owns named trainable tensors. Addresses are stable; iteration follows insertion order.
class ParameterStore {
public:
    Parameter& add(std::string name, Tensor init);
    Parameter& get(std::string_view name);
    const Parameter& get(std::string_view name) const;
    Parameter* find(std::string_view name);
    bool contains(std::string_view name) const;

    void zero_grad();
    std::size_t scalar_count() const;
    std::size_t size() const noexcept { return params_.size(); }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::deque<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Tensor& value() const;
    const Tensor& grad() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    double scalar() const { return value()[0]; }

    Tape* tape() const noexcept { return tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Reverse-mode recorder. Nodes are appended in evaluation order, so a
/// reverse sweep visits them in reverse topological order.
class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);
    Var input(Tensor value);
    /// Leaf bound to a parameter; recorded once per tape. Gradients flow back
    /// into Parameter::grad when backward() finishes.
    Var parameter(Parameter& p);

    /// Records an op result. Throws NumericError if the value is not finite.
    Var record(Tensor value, const std::vector<Var>& inputs, Backward backward, std::string_view op);

    void backward(Var root);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
    /// Gradient buffer for node `id`, allocated on first use.
    Tensor& grad(std::size_t id);
    const Tensor& grad_or_empty(std::size_t id) const { return nodes_[id].grad; }
    bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }

    std::size_t size() const noexcept { return nodes_.size(); }

    /// Hash of every piecewise branch taken so far (ReLU masks). Two forward
    /// passes with equal signatures lie on the same smooth piece.
    std::uint64_t kink_signature() const noexcept { return kinks_; }
    void note_branch(bool taken) noexcept { kinks_ = (kinks_ ^ (taken ? 0x9eu : 0x3bu)) * 0x100000001b3ull; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        Backward backward;
        bool needs_grad = false;
    };

    std::vector<Node> nodes_;
    std::vector<std::pair<std::size_t, Parameter*>> param_nodes_;
    std::unordered_map<const Parameter*, std::size_t> param_cache_;
    std::uint64_t kinks_ = 0xcbf29ce484222325ull;
};

/// Query-by-key permission matrix for one attention segment. Inactive query
/// rows (padding) may have no permitted keys and produce a zero output.
class AttentionMask {
public:
    AttentionMask() = default;
    explicit AttentionMask(std::size_t size, bool permitted = true);

    static AttentionMask full(std::size_t size) { return AttentionMask(size, true); }
    /// Real tokens attend to every real token; pad rows are inactive.
    static AttentionMask from_padding(const std::vector<bool>& real);

    std::size_t size() const noexcept { return size_; }
    bool permits(std::size_t q, std::size_t k) const { return permitted_[q * size_ + k] != 0; }
    void set(std::size_t q, std::size_t k, bool v) { permitted_[q * size_ + k] = v ? 1 : 0; }
    bool active(std::size_t q) const { return active_[q] != 0; }
    void set_active(std::size_t q, bool v) { active_[q] = v ? 1 : 0; }

    bool all_permitted() const;
    /// Throws NumericError if an active query row has no permitted key.
    void validate() const;

private:
    std::size_t size_ = 0;
    std::vector<char> permitted_;
    std::vector<char> active_;
};

/// A set of rows of a token matrix that attend among themselves.
struct AttentionSegment {
    std::vector<std::size_t> rows;
    AttentionMask mask;
};

namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a (n x m) + row (1 x m) broadcast over rows.
Var add_row(Var a, Var row);
Var scale(Var a, double factor);
Var relu(Var a);
Var sum(Var a);
Var reshape(Var a, std::size_t rows, std::size_t cols);

Var gather_rows(Var table, const std::vector<std::size_t>& rows);
/// Row i of the result is row refs[i].second of tables[refs[i].first].
Var gather_multi(const std::vector<Var>& tables, const std::vector<std::pair<std::size_t, std::size_t>>& refs);
/// Places row i of `src` at row positions[i] of a zero (total_rows x cols) matrix.
Var scatter_rows(Var src, const std::vector<std::size_t>& positions, std::size_t total_rows);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var slice_rows(Var a, std::size_t begin, std::size_t count);

/// Row-wise layer normalization with gain/bias rows (1 x cols).
Var layer_norm(Var x, Var gain, Var bias, double eps);

/// Multi-head scaled dot-product attention restricted to segments. Rows
/// outside every segment, and inactive rows, get zero output.
Var attention(Var q, Var k, Var v, const std::vector<AttentionSegment>& segments, std::size_t heads);

/// Row (i * b.rows() + j) of the result is a_i + b_j.
Var pairwise_sum(Var a, Var b);

/// Softmax of a column of scores within each group of rows; rows outside
/// every group get weight 0. Throws NumericError on an empty group.
Var group_softmax(Var scores, const std::vector<std::vector<std::size_t>>& groups);
/// Row g of the result is sum over rows r in groups[g] of weights[r] * tokens[r].
Var group_weighted_sum(Var weights, Var tokens, const std::vector<std::vector<std::size_t>>& groups);

/// Mean over rows of the cross-entropy of a masked softmax at targets[r].
/// mask is row-major (rows x cols), nonzero = candidate participates.
Var softmax_cross_entropy(Var logits, const std::vector<char>& mask, const std::vector<std::size_t>& targets);
Var softmax_cross_entropy(Var logits, const std::vector<std::size_t>& targets);
/// Mean squared error of a column of predictions.
Var mean_squared_error(Var predictions, const std::vector<double>& targets);

} // namespace ad
} // namespace uum
