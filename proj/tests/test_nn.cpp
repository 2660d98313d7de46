#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mixpt/nn/adam.hpp"
#include "mixpt/nn/gradcheck.hpp"
#include "mixpt/nn/graph.hpp"
#include "mixpt/rng.hpp"

using namespace mixpt;
using namespace mixpt::nn;

namespace {

Tensor<double> random_tensor(Rng& rng, Shape shape) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data) v = rng.normal();
    return t;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST(Matmul, HandComputed) {
    Graph<double> g;
    Var a = g.constant(Tensor<double>({2, 2}, {1, 2, 3, 4}));
    Var b = g.constant(Tensor<double>({2, 2}, {5, 6, 7, 8}));
    EXPECT_EQ(g.value(g.matmul(a, b)).data, (std::vector<double>{19, 22, 43, 50}));
}

TEST(Matmul, IdentityLeavesOperand) {
    Rng rng(3);
    Graph<double> g;
    auto A = random_tensor(rng, {3, 3});
    Var i = g.constant(Tensor<double>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    EXPECT_EQ(g.value(g.matmul(i, g.constant(A))), A);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
    Graph<double> g;
    Var a = g.constant(Tensor<double>({2, 3}));
    Var b = g.constant(Tensor<double>({4, 2}));
    try {
        g.matmul(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("(2,3)"), std::string::npos);
        EXPECT_NE(msg.find("(4,2)"), std::string::npos);
    }
}

TEST(Softmax, SymmetricAndStable) {
    Graph<double> g;
    auto y = g.value(g.softmax(g.constant(Tensor<double>({2}, {0, 0}))));
    EXPECT_DOUBLE_EQ(y[0], 0.5);
    EXPECT_DOUBLE_EQ(y[1], 0.5);
    auto z = g.value(g.softmax(g.constant(Tensor<double>({2}, {1000, 0}))));
    EXPECT_NEAR(z[0], 1.0, 1e-6);
    EXPECT_NEAR(z[1], 0.0, 1e-6);
    auto big = g.value(g.softmax(g.constant(Tensor<double>({3}, {1e4, -1e4, 0}))));
    EXPECT_TRUE(big.all_finite());
}

TEST(Softmax, ShiftInvariantRowsSumToOne) {
    Rng rng(5);
    Graph<double> g;
    auto x = random_tensor(rng, {4, 7});
    auto shifted = x;
    for (auto& v : shifted.data) v += 123.25;
    auto a = g.value(g.softmax(g.constant(x)));
    auto b = g.value(g.softmax(g.constant(shifted)));
    for (std::size_t r = 0; r < 4; ++r) {
        double s = 0;
        for (std::size_t j = 0; j < 7; ++j) {
            s += a[r * 7 + j];
            EXPECT_NEAR(a[r * 7 + j], b[r * 7 + j], 1e-6);
        }
        EXPECT_NEAR(s, 1.0, 1e-6);
    }
}

TEST(LayerNorm, HandComputedAndConstantRow) {
    Graph<double> g;
    Var gain = g.constant(Tensor<double>({2}, 1.0));
    Var bias = g.constant(Tensor<double>({2}, 0.0));
    auto y = g.value(g.layer_norm(g.constant(Tensor<double>({2}, {1, 3})), gain, bias));
    EXPECT_NEAR(y[0], -1.0, 1e-5);
    EXPECT_NEAR(y[1], 1.0, 1e-5);
    auto c = g.value(g.layer_norm(g.constant(Tensor<double>({2}, {4, 4})), gain, bias));
    EXPECT_EQ(c[0], 0.0);
    EXPECT_EQ(c[1], 0.0);
}

TEST(LayerNorm, MeanIsBiasUnderUniformGain) {
    Rng rng(9);
    Graph<double> g;
    auto y = g.value(g.layer_norm(g.constant(random_tensor(rng, {3, 10})), g.constant(Tensor<double>({10}, 2.5)),
                                  g.constant(Tensor<double>({10}, 0.75))));
    for (std::size_t r = 0; r < 3; ++r) {
        double m = 0;
        for (std::size_t j = 0; j < 10; ++j) m += y[r * 10 + j];
        EXPECT_NEAR(m / 10, 0.75, 1e-5);
    }
}

TEST(ConvPatchify, TokenCountAndDivisibility) {
    Graph<double> g;
    Var w = g.constant(Tensor<double>({48, 5}));
    Var b = g.constant(Tensor<double>({5}));
    EXPECT_EQ(g.shape(g.conv_patchify(g.constant(Tensor<double>({1, 8, 8, 3})), w, b, 4)), (Shape{1, 4, 5}));
    EXPECT_THROW(g.conv_patchify(g.constant(Tensor<double>({1, 7, 8, 3})), w, b, 4), ShapeError);
}

// Independent oracle: gather every patch into a row, then a plain triple-loop
// matrix product.
TEST(ConvPatchify, MatchesUnfoldMatmulOracle) {
    Rng rng(11);
    const std::size_t B = 2, H = 8, W = 12, C = 3, p = 4, d = 6;
    auto img = random_tensor(rng, {B, H, W, C});
    auto wt = random_tensor(rng, {p * p * C, d});
    auto bias = random_tensor(rng, {d});
    Graph<double> g;
    auto out = g.value(g.conv_patchify(g.constant(img), g.constant(wt), g.constant(bias), p));

    const std::size_t gh = H / p, gw = W / p;
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t ty = 0; ty < gh; ++ty)
            for (std::size_t tx = 0; tx < gw; ++tx) {
                std::vector<double> row;
                for (std::size_t py = 0; py < p; ++py)
                    for (std::size_t px = 0; px < p; ++px)
                        for (std::size_t c = 0; c < C; ++c)
                            row.push_back(img[((b * H + ty * p + py) * W + tx * p + px) * C + c]);
                for (std::size_t j = 0; j < d; ++j) {
                    double s = bias[j];
                    for (std::size_t r = 0; r < row.size(); ++r) s += row[r] * wt[r * d + j];
                    EXPECT_NEAR(out[((b * gh + ty) * gw + tx) * d + j], s, 1e-5);
                }
            }
}

TEST(Attention, SinglePositionReturnsValue) {
    Rng rng(2);
    Graph<double> g;
    auto v = random_tensor(rng, {1, 2, 1, 3});
    auto y = g.value(g.attention(g.constant(random_tensor(rng, {1, 2, 1, 3})), g.constant(random_tensor(rng, {1, 2, 1, 3})),
                                 g.constant(v)));
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(y[i], v[i], 1e-12);
}

TEST(Attention, UniformScoresAverageUnmaskedValues) {
    Rng rng(4);
    Graph<double> g;
    const std::size_t S = 5, dh = 3;
    auto v = random_tensor(rng, {1, 1, S, dh});
    Tensor<double> mask({1, S, S});
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = i + 1; j < S; ++j) mask[i * S + j] = -kInf;
    auto y = g.value(g.attention(g.constant(Tensor<double>({1, 1, S, dh}, 1.0)), g.constant(Tensor<double>({1, 1, S, dh}, 1.0)),
                                 g.constant(v), g.constant(mask)));
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t e = 0; e < dh; ++e) {
            double m = 0;
            for (std::size_t j = 0; j <= i; ++j) m += v[j * dh + e];
            EXPECT_NEAR(y[i * dh + e], m / static_cast<double>(i + 1), 1e-6);
        }
}

TEST(Attention, CausalMaskBlocksFuture) {
    Rng rng(6);
    const std::size_t S = 6, dh = 4;
    auto q = random_tensor(rng, {1, 2, S, dh}), k = random_tensor(rng, {1, 2, S, dh}), v = random_tensor(rng, {1, 2, S, dh});
    Tensor<double> mask({1, S, S});
    for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = i + 1; j < S; ++j) mask[i * S + j] = -kInf;
    auto run = [&](const Tensor<double>& kk, const Tensor<double>& vv) {
        Graph<double> g;
        return g.value(g.attention(g.constant(q), g.constant(kk), g.constant(vv), g.constant(mask)));
    };
    auto base = run(k, v);
    const std::size_t t = 3;
    auto k2 = k, v2 = v;
    for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t e = 0; e < dh; ++e) {
            k2[(h * S + t + 1) * dh + e] += 5.0;
            v2[(h * S + t + 1) * dh + e] -= 7.0;
        }
    auto moved = run(k2, v2);
    for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t i = 0; i <= t; ++i)
            for (std::size_t e = 0; e < dh; ++e) EXPECT_EQ(base[(h * S + i) * dh + e], moved[(h * S + i) * dh + e]);
}

TEST(CrossEntropy, UniformLogitsGiveLogV) {
    Graph<double> g;
    const std::size_t V = 13;
    Var l = g.constant(Tensor<double>({3, V}, 0.25));
    EXPECT_NEAR(g.value(g.cross_entropy_masked(l, {1, 5, 12}, {1, 1, 1}))[0], std::log(13.0), 1e-6);
}

TEST(CrossEntropy, ConfidentCorrectApproachesZero) {
    Graph<double> g;
    Tensor<double> logits({2, 4}, 0.0);
    logits[2] = 60;
    logits[4 + 1] = 60;
    EXPECT_LT(g.value(g.cross_entropy_masked(g.constant(logits), {2, 1}, {1, 1}))[0], 1e-20);
    auto huge = Tensor<double>({1, 3}, {1e4, -1e4, 0});
    EXPECT_TRUE(std::isfinite(g.value(g.cross_entropy_masked(g.constant(huge), {1}, {1}))[0]));
}

TEST(CrossEntropy, MaskedPositionsDoNotContribute) {
    Rng rng(8);
    auto logits = random_tensor(rng, {4, 6});
    Graph<double> g;
    Var x = g.input(logits);
    Var loss = g.cross_entropy_masked(x, {1, 2, 3, 4}, {1, 0, 1, 0});
    const double base = g.value(loss)[0];
    g.backward(loss);
    for (std::size_t j = 0; j < 6; ++j) {
        EXPECT_EQ(g.grad(x)[1 * 6 + j], 0.0);
        EXPECT_EQ(g.grad(x)[3 * 6 + j], 0.0);
    }
    auto perturbed = logits;
    for (std::size_t j = 0; j < 6; ++j) perturbed[6 + j] += 3.0 * static_cast<double>(j);
    Graph<double> g2;
    EXPECT_EQ(g2.value(g2.cross_entropy_masked(g2.constant(perturbed), {1, 2, 3, 4}, {1, 0, 1, 0}))[0], base);
}

TEST(CrossEntropy, AllZeroMaskThrows) {
    Graph<double> g;
    EXPECT_THROW(g.cross_entropy_masked(g.constant(Tensor<double>({2, 3})), {0, 1}, {0, 0}), InputError);
}

TEST(Backward, ScalarProductGradient) {
    Graph<double> g;
    Var x = g.input(Tensor<double>({1}, {3.0}));
    Var y = g.input(Tensor<double>({1}, {-2.5}));
    g.backward(g.sum(g.mul(x, y)));
    EXPECT_EQ(g.grad(x)[0], -2.5);
    EXPECT_EQ(g.grad(y)[0], 3.0);
}

TEST(Backward, NonScalarThrows) {
    Graph<double> g;
    Var x = g.input(Tensor<double>({2}, {1.0, 2.0}));
    EXPECT_THROW(g.backward(g.scale(x, 2.0)), InputError);
}

TEST(Backward, RepeatedCallsAccumulateIntoParameters) {
    Parameter<double> p{"w", Tensor<double>({2}, {1.0, 2.0}), Tensor<double>({2})};
    Graph<double> g;
    Var loss = g.dot(g.param(p), Tensor<double>({2}, {3.0, 4.0}));
    g.backward(loss);
    g.backward(loss);
    EXPECT_EQ(p.grad.data, (std::vector<double>{6.0, 8.0}));
}

TEST(Graph, NonFiniteOutputThrows) {
    Graph<double> g;
    Var x = g.constant(Tensor<double>({1}, {std::numeric_limits<double>::max()}));
    EXPECT_THROW(g.scale(x, 10.0), NumericError);
}

TEST(Adam, ZeroGradLeavesParams) {
    ParameterSet<float> ps;
    ps.add("a", Tensor<float>({3}, {1.f, -2.f, 0.5f}));
    Adam<float> opt({}, ps);
    opt.step(ps);
    EXPECT_EQ(ps[0].value.data, (std::vector<float>{1.f, -2.f, 0.5f}));
    EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, FirstStepIsLearningRate) {
    ParameterSet<double> ps;
    ps.add("x", Tensor<double>({1}, {0.0}));
    Adam<double> opt({0.1, 0.9, 0.999, 1e-8}, ps);
    ps[0].grad[0] = 1.0;
    opt.step(ps);
    EXPECT_NEAR(ps[0].value[0], -0.1, 1e-6);
}

TEST(Adam, IdenticalParamsUpdateIdentically) {
    ParameterSet<float> ps;
    ps.add("a", Tensor<float>({2}, {0.3f, 0.7f}));
    ps.add("b", Tensor<float>({2}, {0.3f, 0.7f}));
    Adam<float> opt({}, ps);
    for (int s = 0; s < 5; ++s) {
        for (std::size_t i = 0; i < 2; ++i) ps[i].grad.data = {0.1f * static_cast<float>(s), -0.2f};
        opt.step(ps);
    }
    EXPECT_EQ(ps[0].value, ps[1].value);
}

TEST(Adam, NonFiniteGradNamesParameter) {
    ParameterSet<float> ps;
    ps.add("enc.0.attn.wq", Tensor<float>({1}));
    Adam<float> opt({}, ps);
    ps[0].grad[0] = std::numeric_limits<float>::quiet_NaN();
    try {
        opt.step(ps);
        FAIL();
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("enc.0.attn.wq"), std::string::npos);
    }
}

TEST(GradCheck, KernelSuiteFiveSeeds) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed)
        for (const auto& r : kernel_gradcheck_suite(seed)) {
            EXPECT_GT(r.checked, 0u) << r.name;
            EXPECT_LT(r.max_rel_error, 1e-4) << r.name << " seed " << seed;
        }
}

TEST(GradCheck, DetectsWrongGradient) {
    // A function whose "gradient" is checked against a different function
    // must fail: guards against a checker that always passes.
    int calls = 0;
    ScalarFn f = [&calls](Graph<double>& g, const std::vector<Var>& v) {
        ++calls;
        if (g.recording()) return g.sum(g.scale(v[0], 2.0));
        return g.sum(g.scale(v[0], 3.0));
    };
    auto r = check_gradients("mismatch", {Tensor<double>({2}, {1.0, 2.0})}, f);
    EXPECT_GT(r.max_rel_error, 0.1);
    EXPECT_GT(calls, 1);
}
