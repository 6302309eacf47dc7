#include "uum/autodiff.hpp"
#include "uum/errors.hpp"
#include "uum/gradient_check.hpp"
#include "uum/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace uum;

namespace {

constexpr double kTol = 1e-4;

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    Tensor t(r, c);
    for (auto& v : t.storage()) v = rng.normal(0.0, scale);
    return t;
}

// Values bounded away from zero, so ReLU kinks sit outside the difference stencil.
Tensor away_from_zero(std::size_t r, std::size_t c, Rng& rng) {
    Tensor t(r, c);
    for (auto& v : t.storage()) v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.2, 1.5);
    return t;
}

// Random linear functional of `v`, so every output coordinate gets a distinct weight.
Var project(Tape& t, Var v, std::uint64_t seed) {
    Rng rng(seed);
    return ad::sum(ad::mul(v, t.constant(random_tensor(v.rows(), v.cols(), rng))));
}

class OpGradients : public ::testing::TestWithParam<std::uint64_t> {
protected:
    std::uint64_t seed() const { return GetParam(); }
    Rng rng{GetParam() * 7919 + 1};
};

} // namespace

TEST_P(OpGradients, MatmulBothSides) {
    const Tensor b = random_tensor(4, 2, rng), a = random_tensor(3, 4, rng);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) { return project(t, ad::matmul(x, t.constant(b)), seed()); },
                             random_tensor(3, 4, rng)), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) { return project(t, ad::matmul(t.constant(a), x), seed()); },
                             random_tensor(4, 2, rng)), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) { return project(t, ad::matmul(x, ad::transpose(x)), seed()); },
                             random_tensor(3, 4, rng)), kTol);
}

TEST_P(OpGradients, Elementwise) {
    const Tensor other = random_tensor(3, 5, rng);
    const Tensor row = random_tensor(1, 5, rng);
    auto check = [&](auto op) {
        return gradient_check([&](Tape& t, Var x) { return project(t, op(t, x), seed()); }, random_tensor(3, 5, rng));
    };
    EXPECT_LT(check([&](Tape& t, Var x) { return ad::add(x, t.constant(other)); }), kTol);
    EXPECT_LT(check([&](Tape& t, Var x) { return ad::sub(t.constant(other), x); }), kTol);
    EXPECT_LT(check([&](Tape& t, Var x) { return ad::mul(x, ad::add(x, t.constant(other))); }), kTol);
    EXPECT_LT(check([&](Tape& t, Var x) { return ad::add_row(x, t.constant(row)); }), kTol);
    EXPECT_LT(check([&](Tape&, Var x) { return ad::scale(x, -2.5); }), kTol);
    EXPECT_LT(check([&](Tape&, Var x) { return ad::reshape(x, 5, 3); }), kTol);
    EXPECT_LT(check([&](Tape&, Var x) { return ad::transpose(x); }), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var r) { return project(t, ad::add_row(t.constant(other), r), seed()); }, row),
              kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) { return project(t, ad::relu(x), seed()); }, away_from_zero(3, 5, rng)),
              kTol);
}

TEST_P(OpGradients, GatherScatterAndSlices) {
    EXPECT_LT(gradient_check([&](Tape& t, Var x) { return project(t, ad::gather_rows(x, {2, 0, 2, 3}), seed()); },
                             random_tensor(4, 3, rng)), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) { return project(t, ad::scatter_rows(x, {4, 1}, 6), seed()); },
                             random_tensor(2, 3, rng)), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) { return project(t, ad::slice_cols(x, 1, 2), seed()); },
                             random_tensor(3, 4, rng)), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) { return project(t, ad::slice_rows(x, 1, 2), seed()); },
                             random_tensor(4, 3, rng)), kTol);
    const Tensor other = random_tensor(3, 2, rng);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) {
        return project(t, ad::concat_cols({x, t.constant(other), x}), seed());
    }, random_tensor(3, 3, rng)), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) {
        return project(t, ad::concat_rows({x, ad::scale(x, 2.0)}), seed());
    }, random_tensor(2, 3, rng)), kTol);
    const Tensor table_b = random_tensor(3, 4, rng);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) {
        return project(t, ad::gather_multi({x, t.constant(table_b)}, {{0, 1}, {1, 2}, {0, 1}, {0, 0}}), seed());
    }, random_tensor(2, 4, rng)), kTol);
}

TEST_P(OpGradients, LayerNorm) {
    const Tensor gain = random_tensor(1, 6, rng), bias = random_tensor(1, 6, rng);
    const Tensor x0 = random_tensor(4, 6, rng);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) {
        return project(t, ad::layer_norm(x, t.constant(gain), t.constant(bias), 1e-5), seed());
    }, x0), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var g) {
        return project(t, ad::layer_norm(t.constant(x0), g, t.constant(bias), 1e-5), seed());
    }, gain), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var b) {
        return project(t, ad::layer_norm(t.constant(x0), t.constant(gain), b, 1e-5), seed());
    }, bias), kTol);
}

TEST_P(OpGradients, AttentionQueriesKeysValues) {
    const std::size_t n = 7, f = 4;
    AttentionSegment s1{{0, 2, 4}, AttentionMask(3)};
    AttentionSegment s2{{1, 3, 5, 6}, AttentionMask::from_padding({true, true, false, true})};
    s1.mask.set(0, 2, false);
    const std::vector<AttentionSegment> segs{s1, s2};
    const Tensor q = random_tensor(n, f, rng), k = random_tensor(n, f, rng), v = random_tensor(n, f, rng);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) {
        return project(t, ad::attention(x, t.constant(k), t.constant(v), segs, 2), seed());
    }, q), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) {
        return project(t, ad::attention(t.constant(q), x, t.constant(v), segs, 2), seed());
    }, k), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) {
        return project(t, ad::attention(t.constant(q), t.constant(k), x, segs, 2), seed());
    }, v), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) { return project(t, ad::attention(x, x, x, segs, 1), seed()); }, q),
              kTol);
}

TEST_P(OpGradients, PairwiseAndPooling) {
    const Tensor b = random_tensor(4, 3, rng);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) { return project(t, ad::pairwise_sum(x, t.constant(b)), seed()); },
                             random_tensor(2, 3, rng)), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) { return project(t, ad::pairwise_sum(t.constant(b), x), seed()); },
                             random_tensor(2, 3, rng)), kTol);
    const std::vector<std::vector<std::size_t>> groups{{0, 1, 3}, {4}, {5, 2}};
    EXPECT_LT(gradient_check([&](Tape& t, Var x) { return project(t, ad::group_softmax(x, groups), seed()); },
                             random_tensor(7, 1, rng)), kTol);
    const Tensor w = random_tensor(7, 1, rng), tok = random_tensor(7, 3, rng);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) {
        return project(t, ad::group_weighted_sum(x, t.constant(tok), groups), seed());
    }, w), kTol);
    EXPECT_LT(gradient_check([&](Tape& t, Var x) {
        return project(t, ad::group_weighted_sum(t.constant(w), x, groups), seed());
    }, tok), kTol);
}

TEST_P(OpGradients, Losses) {
    const std::vector<char> mask{1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 1, 1};
    EXPECT_LT(gradient_check([&](Tape&, Var x) { return ad::softmax_cross_entropy(x, mask, {0, 2, 1}); },
                             random_tensor(3, 4, rng)), kTol);
    EXPECT_LT(gradient_check([&](Tape&, Var x) { return ad::mean_squared_error(x, {1.0, -2.0, 0.5}); },
                             random_tensor(3, 1, rng)), kTol);
    EXPECT_LT(gradient_check([&](Tape&, Var x) { return ad::sum(x); }, random_tensor(2, 2, rng)), kTol);
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradients, ::testing::Values(1u, 2u, 3u));

TEST(Tape, GradientsAccumulateAcrossUses) {
    Tape t;
    Var x = t.input(Tensor::row_vector({3.0}));
    Var y = ad::add(ad::mul(x, x), x);
    t.backward(y);
    EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(Tape, ParameterGradientsLandInStore) {
    ParameterStore store;
    auto& p = store.add("p", Tensor::row_vector({2.0, -1.0}));
    Tape t;
    Var a = t.parameter(p);
    Var b = t.parameter(p);
    EXPECT_EQ(a.id(), b.id());
    t.backward(ad::sum(ad::mul(a, b)));
    EXPECT_DOUBLE_EQ(p.grad[0], 4.0);
    EXPECT_DOUBLE_EQ(p.grad[1], -2.0);
    store.zero_grad();
    EXPECT_DOUBLE_EQ(p.grad[0], 0.0);
}

TEST(Tape, NonFiniteForwardThrows) {
    Tape t;
    Var x = t.input(Tensor::row_vector({1e300}));
    EXPECT_THROW(ad::mul(x, x), NumericError);
}

TEST(Tape, ConstantsReceiveNoGradient) {
    Tape t;
    Var c = t.constant(Tensor::row_vector({1.0}));
    Var x = t.input(Tensor::row_vector({2.0}));
    t.backward(ad::sum(ad::mul(c, x)));
    EXPECT_FALSE(t.has_grad(c.id()));
    EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
}

TEST(Attention, IdenticalValuesGiveThatValue) {
    Rng rng(4);
    const Tensor q = random_tensor(5, 4, rng), k = random_tensor(5, 4, rng);
    Tensor v(5, 4);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 4; ++j) v(i, j) = 0.25 * static_cast<double>(j) - 1.0;
    Tape t;
    const auto out = ad::attention(t.constant(q), t.constant(k), t.constant(v), {{{0, 1, 2, 3, 4}, AttentionMask(5)}}, 2)
                         .value();
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(out(i, j), v(0, j), 1e-14);
}

TEST(Attention, SelfOnlyMaskReturnsOwnValue) {
    Rng rng(5);
    const Tensor q = random_tensor(4, 4, rng), k = random_tensor(4, 4, rng), v = random_tensor(4, 4, rng);
    AttentionMask m(4, false);
    for (std::size_t i = 0; i < 4; ++i) m.set(i, i, true);
    Tape t;
    const auto out = ad::attention(t.constant(q), t.constant(k), t.constant(v), {{{0, 1, 2, 3}, m}}, 2).value();
    EXPECT_EQ(out, v);
}

TEST(Attention, AllPermittedMaskMatchesFullBitwise) {
    Rng rng(6);
    const Tensor q = random_tensor(6, 4, rng), k = random_tensor(6, 4, rng), v = random_tensor(6, 4, rng);
    Tape t;
    const std::vector<bool> real(6, true);
    const auto a = ad::attention(t.constant(q), t.constant(k), t.constant(v),
                                 {{{0, 1, 2, 3, 4, 5}, AttentionMask::full(6)}}, 2).value();
    const auto b = ad::attention(t.constant(q), t.constant(k), t.constant(v),
                                 {{{0, 1, 2, 3, 4, 5}, AttentionMask::from_padding(real)}}, 2).value();
    EXPECT_EQ(a, b);
}

TEST(Attention, PadRowsAreZeroAndActiveRowWithoutKeysThrows) {
    Rng rng(7);
    const Tensor q = random_tensor(3, 2, rng);
    Tape t;
    const auto out = ad::attention(t.constant(q), t.constant(q), t.constant(q),
                                   {{{0, 1, 2}, AttentionMask::from_padding({true, false, true})}}, 1).value();
    EXPECT_EQ(out(1, 0), 0.0);
    EXPECT_EQ(out(1, 1), 0.0);
    AttentionMask bad(2, false);
    bad.set(0, 0, true);
    EXPECT_THROW(ad::attention(t.constant(q), t.constant(q), t.constant(q), {{{0, 1}, bad}}, 1), NumericError);
}

TEST(Attention, MaskedKeysDoNotInfluenceOutput) {
    Rng rng(8);
    Tensor q = random_tensor(3, 2, rng), k = random_tensor(3, 2, rng), v = random_tensor(3, 2, rng);
    AttentionMask m(3);
    m.set(0, 2, false);
    Tape t;
    const auto before = ad::attention(t.constant(q), t.constant(k), t.constant(v), {{{0, 1, 2}, m}}, 1).value();
    k(2, 0) += 50.0;
    v(2, 1) -= 9.0;
    const auto after = ad::attention(t.constant(q), t.constant(k), t.constant(v), {{{0, 1, 2}, m}}, 1).value();
    EXPECT_EQ(before(0, 0), after(0, 0));
    EXPECT_EQ(before(0, 1), after(0, 1));
}
