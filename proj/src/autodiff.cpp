#include "uum/autodiff.hpp"

#include "uum/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace uum {

// ---------------------------------------------------------------------------
// ParameterStore

Parameter& ParameterStore::add(std::string name, Tensor init) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    index_.emplace(name, params_.size());
    Tensor grad(init.shape(), std::vector<double>(init.size(), 0.0));
    params_.push_back(Parameter{std::move(name), std::move(init), std::move(grad)});
    return params_.back();
}

Parameter& ParameterStore::get(std::string_view name) {
    auto* p = find(name);
    if (!p) throw std::out_of_range("unknown parameter " + std::string(name));
    return *p;
}

const Parameter& ParameterStore::get(std::string_view name) const {
    return const_cast<ParameterStore*>(this)->get(name);
}

Parameter* ParameterStore::find(std::string_view name) {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &params_[it->second];
}

bool ParameterStore::contains(std::string_view name) const {
    return index_.count(std::string(name)) != 0;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p.grad.fill(0.0);
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

// ---------------------------------------------------------------------------
// Var / Tape

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad_or_empty(id_); }

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, false});
    return Var(this, nodes_.size() - 1);
}

Var Tape::input(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, true});
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
    auto it = param_cache_.find(&p);
    if (it != param_cache_.end()) return Var(this, it->second);
    Var v = input(p.value);
    param_cache_.emplace(&p, v.id());
    param_nodes_.emplace_back(v.id(), &p);
    return v;
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, Backward backward, std::string_view op) {
    if (!value.all_finite()) {
        throw NumericError("non-finite value produced by " + std::string(op));
    }
    bool needs = false;
    for (const auto& in : inputs) {
        if (in.tape() != this) throw std::invalid_argument("op mixes values from different tapes");
        needs = needs || nodes_[in.id()].needs_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs});
    return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) {
        n.grad = Tensor(n.value.shape(), std::vector<double>(n.value.size(), 0.0));
    }
    return n.grad;
}

void Tape::backward(Var root) {
    if (root.tape() != this) throw std::invalid_argument("backward: foreign variable");
    if (root.value().size() != 1) throw std::invalid_argument("backward: root must be a scalar");
    grad(root.id())[0] += 1.0;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
        auto& n = nodes_[i];
        if (!n.backward || n.grad.empty()) continue;
        n.backward(*this, i);
    }
    for (auto [id, p] : param_nodes_) {
        if (!has_grad(id)) continue;
        const auto& g = nodes_[id].grad;
        auto dst = p->grad.values();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += g[j];
    }
}

// ---------------------------------------------------------------------------
// AttentionMask

AttentionMask::AttentionMask(std::size_t size, bool permitted)
    : size_(size), permitted_(size * size, permitted ? 1 : 0), active_(size, 1) {}

AttentionMask AttentionMask::from_padding(const std::vector<bool>& real) {
    AttentionMask m(real.size(), false);
    for (std::size_t q = 0; q < real.size(); ++q) {
        m.set_active(q, real[q]);
        if (!real[q]) continue;
        for (std::size_t k = 0; k < real.size(); ++k) m.set(q, k, real[k]);
    }
    return m;
}

bool AttentionMask::all_permitted() const {
    return std::all_of(permitted_.begin(), permitted_.end(), [](char c) { return c != 0; }) &&
           std::all_of(active_.begin(), active_.end(), [](char c) { return c != 0; });
}

void AttentionMask::validate() const {
    for (std::size_t q = 0; q < size_; ++q) {
        if (!active(q)) continue;
        bool any = false;
        for (std::size_t k = 0; k < size_ && !any; ++k) any = permits(q, k);
        if (!any) throw NumericError("attention: query row " + std::to_string(q) + " has no permitted key");
    }
}

// ---------------------------------------------------------------------------
// Ops

namespace ad {
namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

void accumulate(Tape& t, const Var& v, const Tensor& g) {
    if (!t.needs_grad(v.id())) return;
    auto dst = t.grad(v.id()).values();
    auto src = g.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// c (n x m) += a (n x k) * b (k x m)
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* pc = c.values().data();
    for (std::size_t i = 0; i < n; ++i) {
        double* crow = pc + i * m;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            const double* brow = pb + p * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

// c (n x k) += a (n x m) * b^T, b is (k x m)
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t n = a.rows(), m = a.cols(), k = b.rows();
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* pc = c.values().data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < m; ++p) s += pa[i * m + p] * pb[j * m + p];
            pc[i * k + j] += s;
        }
    }
}

// c (k x m) += a^T * b, a is (n x k), b is (n x m)
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c) {
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    double* pc = c.values().data();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            double* crow = pc + p * m;
            const double* brow = pb + i * m;
            for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
        }
    }
}

} // namespace

Var matmul(Var a, Var b) {
    require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
    Tape& t = *a.tape();
    Tensor out(a.rows(), b.cols());
    gemm_nn(a.value(), b.value(), out);
    return t.record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        if (t.needs_grad(a.id())) gemm_nt(g, t.value(b.id()), t.grad(a.id()));
        if (t.needs_grad(b.id())) gemm_tn(t.value(a.id()), g, t.grad(b.id()));
    }, "matmul");
}

Var transpose(Var a) {
    const Tensor& x = a.value();
    Tensor out(x.cols(), x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(j, i) = x(i, j);
    return a.tape()->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad(a.id());
        for (std::size_t i = 0; i < ga.rows(); ++i)
            for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(j, i);
    }, "transpose");
}

Var add(Var a, Var b) {
    require(a.value().rows() == b.value().rows() && a.cols() == b.cols(), "add: shape mismatch");
    Tensor out = a.value();
    auto ov = out.values();
    auto bv = b.value().values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += bv[i];
    return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        accumulate(t, a, g);
        accumulate(t, b, g);
    }, "add");
}

Var sub(Var a, Var b) {
    require(a.value().rows() == b.value().rows() && a.cols() == b.cols(), "sub: shape mismatch");
    Tensor out = a.value();
    auto ov = out.values();
    auto bv = b.value().values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] -= bv[i];
    return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        accumulate(t, a, g);
        if (t.needs_grad(b.id())) {
            auto gb = t.grad(b.id()).values();
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
        }
    }, "sub");
}

Var mul(Var a, Var b) {
    require(a.value().rows() == b.value().rows() && a.cols() == b.cols(), "mul: shape mismatch");
    Tensor out = a.value();
    auto ov = out.values();
    auto bv = b.value().values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= bv[i];
    return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const auto av = t.value(a.id()).values();
        const auto bv = t.value(b.id()).values();
        if (t.needs_grad(a.id())) {
            auto ga = t.grad(a.id()).values();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (t.needs_grad(b.id())) {
            auto gb = t.grad(b.id()).values();
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
        }
    }, "mul");
}

Var add_row(Var a, Var row) {
    require(row.rows() == 1 && row.cols() == a.cols(), "add_row: shape mismatch");
    Tensor out = a.value();
    const auto r = row.value().values();
    for (std::size_t i = 0; i < out.rows(); ++i) {
        auto o = out.row(i);
        for (std::size_t j = 0; j < o.size(); ++j) o[j] += r[j];
    }
    return a.tape()->record(std::move(out), {a, row}, [a, row](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        accumulate(t, a, g);
        if (t.needs_grad(row.id())) {
            auto gr = t.grad(row.id()).values();
            for (std::size_t i = 0; i < g.rows(); ++i) {
                auto gi = g.row(i);
                for (std::size_t j = 0; j < gr.size(); ++j) gr[j] += gi[j];
            }
        }
    }, "add_row");
}

Var scale(Var a, double factor) {
    Tensor out = a.value();
    for (double& v : out.values()) v *= factor;
    return a.tape()->record(std::move(out), {a}, [a, factor](Tape& t, std::size_t self) {
        const auto g = t.grad(self).values();
        auto ga = t.grad(a.id()).values();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * g[i];
    }, "scale");
}

Var relu(Var a) {
    Tensor out = a.value();
    Tape& tape = *a.tape();
    for (double& v : out.values()) {
        tape.note_branch(v > 0.0);
        v = v > 0.0 ? v : 0.0;
    }
    return tape.record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
        const auto g = t.grad(self).values();
        const auto x = t.value(a.id()).values();
        auto ga = t.grad(a.id()).values();
        for (std::size_t i = 0; i < ga.size(); ++i) {
            if (x[i] > 0.0) ga[i] += g[i];
        }
    }, "relu");
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return a.tape()->record(Tensor(1, 1, s), {a}, [a](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        for (double& v : t.grad(a.id()).values()) v += g;
    }, "sum");
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
    require(rows * cols == a.value().size(), "reshape: size mismatch");
    const auto src = a.value().values();
    Tensor out({rows, cols}, std::vector<double>(src.begin(), src.end()));
    return a.tape()->record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
        const auto g = t.grad(self).values();
        auto ga = t.grad(a.id()).values();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    }, "reshape");
}

Var gather_rows(Var table, const std::vector<std::size_t>& rows) {
    const Tensor& x = table.value();
    const std::size_t c = x.cols();
    Tensor out(rows.size(), c);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] < x.rows(), "gather_rows: row out of range");
        std::copy_n(x.row(rows[i]).data(), c, out.row(i).data());
    }
    return table.tape()->record(std::move(out), {table}, [table, rows](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gt = t.grad(table.id());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto src = g.row(i);
            auto dst = gt.row(rows[i]);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }, "gather_rows");
}

Var gather_multi(const std::vector<Var>& tables, const std::vector<std::pair<std::size_t, std::size_t>>& refs) {
    require(!tables.empty(), "gather_multi: no tables");
    const std::size_t c = tables.front().cols();
    for (const auto& tb : tables) require(tb.cols() == c, "gather_multi: width mismatch");
    Tensor out(refs.size(), c);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto [ti, ri] = refs[i];
        require(ti < tables.size() && ri < tables[ti].rows(), "gather_multi: reference out of range");
        std::copy_n(tables[ti].value().row(ri).data(), c, out.row(i).data());
    }
    return tables.front().tape()->record(std::move(out), tables, [tables, refs](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        for (std::size_t i = 0; i < refs.size(); ++i) {
            const Var& tb = tables[refs[i].first];
            if (!t.needs_grad(tb.id())) continue;
            auto src = g.row(i);
            auto dst = t.grad(tb.id()).row(refs[i].second);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
        }
    }, "gather_multi");
}

Var scatter_rows(Var src, const std::vector<std::size_t>& positions, std::size_t total_rows) {
    require(positions.size() == src.rows(), "scatter_rows: position count mismatch");
    const std::size_t c = src.cols();
    Tensor out(total_rows, c);
    for (std::size_t i = 0; i < positions.size(); ++i) {
        require(positions[i] < total_rows, "scatter_rows: position out of range");
        auto dst = out.row(positions[i]);
        auto s = src.value().row(i);
        for (std::size_t j = 0; j < c; ++j) dst[j] += s[j];
    }
    return src.tape()->record(std::move(out), {src}, [src, positions](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& gs = t.grad(src.id());
        for (std::size_t i = 0; i < positions.size(); ++i) {
            auto from = g.row(positions[i]);
            auto to = gs.row(i);
            for (std::size_t j = 0; j < to.size(); ++j) to[j] += from[j];
        }
    }, "scatter_rows");
}

Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    const std::size_t n = parts.front().rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        require(p.rows() == n, "concat_cols: row count mismatch");
        total += p.cols();
    }
    Tensor out(n, total);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const Tensor& x = p.value();
        for (std::size_t i = 0; i < n; ++i) std::copy_n(x.row(i).data(), x.cols(), out.row(i).data() + offset);
        offset += x.cols();
    }
    return parts.front().tape()->record(std::move(out), parts, [parts](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        std::size_t offset = 0;
        for (const auto& p : parts) {
            const std::size_t w = t.value(p.id()).cols();
            if (t.needs_grad(p.id())) {
                Tensor& gp = t.grad(p.id());
                for (std::size_t i = 0; i < gp.rows(); ++i) {
                    auto src = g.row(i);
                    auto dst = gp.row(i);
                    for (std::size_t j = 0; j < w; ++j) dst[j] += src[offset + j];
                }
            }
            offset += w;
        }
    }, "concat_cols");
}

Var concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    const std::size_t c = parts.front().cols();
    std::size_t total = 0;
    for (const auto& p : parts) {
        require(p.cols() == c, "concat_rows: column count mismatch");
        total += p.value().rows();
    }
    Tensor out(total, c);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        const auto v = p.value().values();
        std::copy(v.begin(), v.end(), out.values().begin() + static_cast<std::ptrdiff_t>(offset * c));
        offset += p.value().rows();
    }
    return parts.front().tape()->record(std::move(out), parts, [parts](Tape& t, std::size_t self) {
        const auto g = t.grad(self).values();
        std::size_t offset = 0;
        for (const auto& p : parts) {
            const std::size_t n = t.value(p.id()).size();
            if (t.needs_grad(p.id())) {
                auto gp = t.grad(p.id()).values();
                for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
            }
            offset += n;
        }
    }, "concat_rows");
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
    require(begin + count <= a.cols(), "slice_cols: out of range");
    const Tensor& x = a.value();
    Tensor out(x.rows(), count);
    for (std::size_t i = 0; i < x.rows(); ++i) std::copy_n(x.row(i).data() + begin, count, out.row(i).data());
    return a.tape()->record(std::move(out), {a}, [a, begin, count](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        Tensor& ga = t.grad(a.id());
        for (std::size_t i = 0; i < g.rows(); ++i) {
            auto src = g.row(i);
            auto dst = ga.row(i);
            for (std::size_t j = 0; j < count; ++j) dst[begin + j] += src[j];
        }
    }, "slice_cols");
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
    require(begin + count <= a.value().rows(), "slice_rows: out of range");
    const std::size_t c = a.cols();
    const auto v = a.value().values();
    Tensor out(count, c);
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(begin * c), count * c, out.values().begin());
    return a.tape()->record(std::move(out), {a}, [a, begin, c](Tape& t, std::size_t self) {
        const auto g = t.grad(self).values();
        auto ga = t.grad(a.id()).values();
        for (std::size_t i = 0; i < g.size(); ++i) ga[begin * c + i] += g[i];
    }, "slice_rows");
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
    const Tensor& xv = x.value();
    const std::size_t n = xv.rows(), c = xv.cols();
    require(gain.cols() == c && bias.cols() == c && gain.rows() == 1 && bias.rows() == 1,
            "layer_norm: gain/bias shape mismatch");
    Tensor out(n, c);
    // normalized values and inverse std per row, kept for backward
    auto xhat = std::make_shared<Tensor>(n, c);
    auto inv = std::make_shared<std::vector<double>>(n);
    const auto g = gain.value().values();
    const auto b = bias.value().values();
    for (std::size_t i = 0; i < n; ++i) {
        auto row = xv.row(i);
        double mean = 0.0;
        for (double v : row) mean += v;
        mean /= static_cast<double>(c);
        double var = 0.0;
        for (double v : row) var += (v - mean) * (v - mean);
        var /= static_cast<double>(c);
        const double s = 1.0 / std::sqrt(var + eps);
        (*inv)[i] = s;
        for (std::size_t j = 0; j < c; ++j) {
            const double h = (row[j] - mean) * s;
            (*xhat)(i, j) = h;
            out(i, j) = g[j] * h + b[j];
        }
    }
    return x.tape()->record(std::move(out), {x, gain, bias}, [x, gain, bias, xhat, inv](Tape& t, std::size_t self) {
        const Tensor& dy = t.grad(self);
        const std::size_t n = dy.rows(), c = dy.cols();
        const auto g = t.value(gain.id()).values();
        if (t.needs_grad(gain.id()) || t.needs_grad(bias.id())) {
            Tensor& dg = t.grad(gain.id());
            Tensor& db = t.grad(bias.id());
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    dg[j] += dy(i, j) * (*xhat)(i, j);
                    db[j] += dy(i, j);
                }
            }
        }
        if (!t.needs_grad(x.id())) return;
        Tensor& dx = t.grad(x.id());
        std::vector<double> dh(c);
        for (std::size_t i = 0; i < n; ++i) {
            double sum_dh = 0.0, sum_dh_h = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                dh[j] = dy(i, j) * g[j];
                sum_dh += dh[j];
                sum_dh_h += dh[j] * (*xhat)(i, j);
            }
            const double k = (*inv)[i] / static_cast<double>(c);
            for (std::size_t j = 0; j < c; ++j) {
                dx(i, j) += k * (static_cast<double>(c) * dh[j] - sum_dh - (*xhat)(i, j) * sum_dh_h);
            }
        }
    }, "layer_norm");
}

Var attention(Var q, Var k, Var v, const std::vector<AttentionSegment>& segments, std::size_t heads) {
    const std::size_t n = q.value().rows(), f = q.cols();
    require(k.value().rows() == n && v.value().rows() == n && k.cols() == f && v.cols() == f,
            "attention: q/k/v shape mismatch");
    require(heads > 0 && f % heads == 0, "attention: width not divisible by head count");
    const std::size_t hd = f / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    const Tensor& Q = q.value();
    const Tensor& K = k.value();
    const Tensor& V = v.value();

    // probabilities per segment per head, row-major (m x m)
    auto probs = std::make_shared<std::vector<std::vector<double>>>();
    probs->reserve(segments.size() * heads);
    Tensor out(n, f);
    std::vector<double> logits;
    for (const auto& seg : segments) {
        const std::size_t m = seg.rows.size();
        require(seg.mask.size() == m, "attention: mask size does not match segment");
        seg.mask.validate();
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = h * hd;
            std::vector<double> p(m * m, 0.0);
            for (std::size_t a = 0; a < m; ++a) {
                if (!seg.mask.active(a)) continue;
                const double* qa = Q.row(seg.rows[a]).data() + off;
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t b = 0; b < m; ++b) {
                    if (!seg.mask.permits(a, b)) continue;
                    const double* kb = K.row(seg.rows[b]).data() + off;
                    double s = 0.0;
                    for (std::size_t d = 0; d < hd; ++d) s += qa[d] * kb[d];
                    s *= scale;
                    p[a * m + b] = s;
                    mx = std::max(mx, s);
                }
                double total = 0.0;
                for (std::size_t b = 0; b < m; ++b) {
                    if (!seg.mask.permits(a, b)) continue;
                    p[a * m + b] = std::exp(p[a * m + b] - mx);
                    total += p[a * m + b];
                }
                double* oa = out.row(seg.rows[a]).data() + off;
                for (std::size_t b = 0; b < m; ++b) {
                    if (!seg.mask.permits(a, b)) continue;
                    p[a * m + b] /= total;
                    const double w = p[a * m + b];
                    const double* vb = V.row(seg.rows[b]).data() + off;
                    for (std::size_t d = 0; d < hd; ++d) oa[d] += w * vb[d];
                }
            }
            probs->push_back(std::move(p));
        }
    }

    return q.tape()->record(std::move(out), {q, k, v},
        [q, k, v, segments, heads, hd, scale, probs](Tape& t, std::size_t self) {
            const Tensor& dO = t.grad(self);
            const Tensor& Q = t.value(q.id());
            const Tensor& K = t.value(k.id());
            const Tensor& V = t.value(v.id());
            Tensor& dQ = t.grad(q.id());
            Tensor& dK = t.grad(k.id());
            Tensor& dV = t.grad(v.id());
            std::size_t pi = 0;
            std::vector<double> dp;
            for (const auto& seg : segments) {
                const std::size_t m = seg.rows.size();
                for (std::size_t h = 0; h < heads; ++h, ++pi) {
                    const auto& p = (*probs)[pi];
                    const std::size_t off = h * hd;
                    dp.assign(m, 0.0);
                    for (std::size_t a = 0; a < m; ++a) {
                        if (!seg.mask.active(a)) continue;
                        const double* doa = dO.row(seg.rows[a]).data() + off;
                        double dot = 0.0;
                        for (std::size_t b = 0; b < m; ++b) {
                            dp[b] = 0.0;
                            if (!seg.mask.permits(a, b)) continue;
                            const double w = p[a * m + b];
                            const double* vb = V.row(seg.rows[b]).data() + off;
                            double* dvb = dV.row(seg.rows[b]).data() + off;
                            double s = 0.0;
                            for (std::size_t d = 0; d < hd; ++d) {
                                dvb[d] += w * doa[d];
                                s += doa[d] * vb[d];
                            }
                            dp[b] = s;
                            dot += w * s;
                        }
                        const double* qa = Q.row(seg.rows[a]).data() + off;
                        double* dqa = dQ.row(seg.rows[a]).data() + off;
                        for (std::size_t b = 0; b < m; ++b) {
                            if (!seg.mask.permits(a, b)) continue;
                            const double ds = p[a * m + b] * (dp[b] - dot) * scale;
                            if (ds == 0.0) continue;
                            const double* kb = K.row(seg.rows[b]).data() + off;
                            double* dkb = dK.row(seg.rows[b]).data() + off;
                            for (std::size_t d = 0; d < hd; ++d) {
                                dqa[d] += ds * kb[d];
                                dkb[d] += ds * qa[d];
                            }
                        }
                    }
                }
            }
        }, "attention");
}

Var pairwise_sum(Var a, Var b) {
    require(a.cols() == b.cols(), "pairwise_sum: width mismatch");
    const std::size_t na = a.value().rows(), nb = b.value().rows(), c = a.cols();
    Tensor out(na * nb, c);
    for (std::size_t i = 0; i < na; ++i) {
        auto ai = a.value().row(i);
        for (std::size_t j = 0; j < nb; ++j) {
            auto bj = b.value().row(j);
            auto o = out.row(i * nb + j);
            for (std::size_t d = 0; d < c; ++d) o[d] = ai[d] + bj[d];
        }
    }
    return a.tape()->record(std::move(out), {a, b}, [a, b, na, nb, c](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const bool ga_needed = t.needs_grad(a.id());
        const bool gb_needed = t.needs_grad(b.id());
        for (std::size_t i = 0; i < na; ++i) {
            for (std::size_t j = 0; j < nb; ++j) {
                auto gij = g.row(i * nb + j);
                if (ga_needed) {
                    auto dst = t.grad(a.id()).row(i);
                    for (std::size_t d = 0; d < c; ++d) dst[d] += gij[d];
                }
                if (gb_needed) {
                    auto dst = t.grad(b.id()).row(j);
                    for (std::size_t d = 0; d < c; ++d) dst[d] += gij[d];
                }
            }
        }
    }, "pairwise_sum");
}

Var group_softmax(Var scores, const std::vector<std::vector<std::size_t>>& groups) {
    require(scores.cols() == 1, "group_softmax: scores must be a column");
    const Tensor& s = scores.value();
    Tensor out(s.rows(), 1);
    for (const auto& grp : groups) {
        if (grp.empty()) throw NumericError("pooling: group has no non-pad token");
        double mx = -std::numeric_limits<double>::infinity();
        for (auto r : grp) mx = std::max(mx, s[r]);
        double total = 0.0;
        for (auto r : grp) {
            out[r] = std::exp(s[r] - mx);
            total += out[r];
        }
        for (auto r : grp) out[r] /= total;
    }
    return scores.tape()->record(std::move(out), {scores}, [scores, groups](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& w = t.value(self);
        Tensor& gs = t.grad(scores.id());
        for (const auto& grp : groups) {
            double dot = 0.0;
            for (auto r : grp) dot += w[r] * g[r];
            for (auto r : grp) gs[r] += w[r] * (g[r] - dot);
        }
    }, "group_softmax");
}

Var group_weighted_sum(Var weights, Var tokens, const std::vector<std::vector<std::size_t>>& groups) {
    require(weights.cols() == 1 && weights.rows() == tokens.rows(), "group_weighted_sum: shape mismatch");
    const std::size_t c = tokens.cols();
    Tensor out(groups.size(), c);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        auto o = out.row(gi);
        for (auto r : groups[gi]) {
            const double w = weights.value()[r];
            auto x = tokens.value().row(r);
            for (std::size_t d = 0; d < c; ++d) o[d] += w * x[d];
        }
    }
    return weights.tape()->record(std::move(out), {weights, tokens}, [weights, tokens, groups, c](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& w = t.value(weights.id());
        const Tensor& x = t.value(tokens.id());
        const bool gw = t.needs_grad(weights.id());
        const bool gx = t.needs_grad(tokens.id());
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            auto go = g.row(gi);
            for (auto r : groups[gi]) {
                if (gw) {
                    double s = 0.0;
                    auto xr = x.row(r);
                    for (std::size_t d = 0; d < c; ++d) s += go[d] * xr[d];
                    t.grad(weights.id())[r] += s;
                }
                if (gx) {
                    auto dst = t.grad(tokens.id()).row(r);
                    for (std::size_t d = 0; d < c; ++d) dst[d] += w[r] * go[d];
                }
            }
        }
    }, "group_weighted_sum");
}

Var softmax_cross_entropy(Var logits, const std::vector<char>& mask, const std::vector<std::size_t>& targets) {
    const Tensor& z = logits.value();
    const std::size_t n = z.rows(), c = z.cols();
    require(mask.size() == n * c && targets.size() == n, "softmax_cross_entropy: shape mismatch");
    auto probs = std::make_shared<Tensor>(n, c);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        require(targets[i] < c, "softmax_cross_entropy: target out of range");
        if (!mask[i * c + targets[i]]) throw NumericError("cross-entropy target is masked out");
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j)
            if (mask[i * c + j]) mx = std::max(mx, z(i, j));
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j)
            if (mask[i * c + j]) total += std::exp(z(i, j) - mx);
        const double log_total = std::log(total);
        for (std::size_t j = 0; j < c; ++j)
            if (mask[i * c + j]) (*probs)(i, j) = std::exp(z(i, j) - mx - log_total);
        loss += -(z(i, targets[i]) - mx - log_total);
    }
    loss /= static_cast<double>(n);
    return logits.tape()->record(Tensor(1, 1, loss), {logits}, [logits, targets, probs](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        Tensor& gz = t.grad(logits.id());
        const std::size_t n = gz.rows(), c = gz.cols();
        const double k = g / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c; ++j) gz(i, j) += k * (*probs)(i, j);
            gz(i, targets[i]) -= k;
        }
    }, "softmax_cross_entropy");
}

Var softmax_cross_entropy(Var logits, const std::vector<std::size_t>& targets) {
    return softmax_cross_entropy(logits, std::vector<char>(logits.value().size(), 1), targets);
}

Var mean_squared_error(Var predictions, const std::vector<double>& targets) {
    const Tensor& p = predictions.value();
    require(p.cols() == 1 && p.rows() == targets.size(), "mean_squared_error: shape mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double d = p[i] - targets[i];
        loss += d * d;
    }
    loss /= static_cast<double>(targets.size());
    return predictions.tape()->record(Tensor(1, 1, loss), {predictions}, [predictions, targets](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0];
        const Tensor& p = t.value(predictions.id());
        Tensor& gp = t.grad(predictions.id());
        const double k = 2.0 * g / static_cast<double>(targets.size());
        for (std::size_t i = 0; i < targets.size(); ++i) gp[i] += k * (p[i] - targets[i]);
    }, "mean_squared_error");
}

} // namespace ad
} // namespace uum
