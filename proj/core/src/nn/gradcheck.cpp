#include "mixpt/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mixpt/rng.hpp"

namespace mixpt::nn {

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), kRelErrorFloor});
    return std::abs(analytic - numeric) / denom;
}

namespace {

double evaluate(const std::vector<Tensor<double>>& inputs, const ScalarFn& f) {
    Graph<double> g(false);
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.input(t));
    return g.value(f(g, vars))[0];
}

}  // namespace

GradCheckResult check_gradients(const std::string& name, std::vector<Tensor<double>> inputs, const ScalarFn& f,
                                double h) {
    Graph<double> g(true);
    std::vector<Var> vars;
    for (const auto& t : inputs) vars.push_back(g.input(t));
    Var out = f(g, vars);
    g.backward(out);

    GradCheckResult res;
    res.name = name;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto& analytic = g.grad(vars[i]);
        for (std::size_t j = 0; j < inputs[i].size(); ++j) {
            const double a = analytic.data.empty() ? 0.0 : analytic[j];
            const double orig = inputs[i][j];
            inputs[i][j] = orig + h;
            const double up = evaluate(inputs, f);
            inputs[i][j] = orig - h;
            const double down = evaluate(inputs, f);
            inputs[i][j] = orig;
            const double numeric = (up - down) / (2 * h);
            res.max_rel_error = std::max(res.max_rel_error, relative_error(a, numeric));
            res.max_abs_error = std::max(res.max_abs_error, std::abs(a - numeric));
            ++res.checked;
        }
    }
    return res;
}

namespace {

Tensor<double> random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data) v = rng.normal() * scale;
    return t;
}

Tensor<double> causal_mask(std::size_t B, std::size_t S) {
    Tensor<double> m(Shape{B, S, S});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < S; ++i)
            for (std::size_t j = i + 1; j < S; ++j) m[(b * S + i) * S + j] = -std::numeric_limits<double>::infinity();
    return m;
}

}  // namespace

std::vector<GradCheckResult> kernel_gradcheck_suite(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCheckResult> out;

    auto run = [&](const std::string& name, std::vector<Tensor<double>> inputs, auto body) {
        // Random projection so every output element reaches the scalar; the
        // weights are drawn once and reused by the numeric evaluations.
        std::vector<Tensor<double>> weights;
        ScalarFn f = [&weights, body, &rng](Graph<double>& g, const std::vector<Var>& v) {
            Var y = body(g, v);
            if (weights.empty()) weights.push_back(random_tensor(rng, g.shape(y)));
            return g.dot(y, weights.front());
        };
        out.push_back(check_gradients(name, std::move(inputs), f));
    };

    run("matmul", {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 5})},
        [](Graph<double>& g, const std::vector<Var>& v) { return g.matmul(v[0], v[1]); });
    run("matmul_batched", {random_tensor(rng, {2, 3, 4}), random_tensor(rng, {2, 4, 2})},
        [](Graph<double>& g, const std::vector<Var>& v) { return g.matmul(v[0], v[1]); });
    run("matmul_shared", {random_tensor(rng, {2, 3, 4}), random_tensor(rng, {4, 2})},
        [](Graph<double>& g, const std::vector<Var>& v) { return g.matmul(v[0], v[1]); });
    run("matmul_nt", {random_tensor(rng, {2, 3, 4}), random_tensor(rng, {5, 4})},
        [](Graph<double>& g, const std::vector<Var>& v) { return g.matmul_nt(v[0], v[1]); });
    run("add_broadcast", {random_tensor(rng, {2, 3, 4}), random_tensor(rng, {4})},
        [](Graph<double>& g, const std::vector<Var>& v) { return g.add(v[0], v[1]); });
    run("mul_broadcast", {random_tensor(rng, {3, 4}), random_tensor(rng, {3, 4})},
        [](Graph<double>& g, const std::vector<Var>& v) { return g.mul(v[0], v[1]); });
    run("gelu", {random_tensor(rng, {3, 5}, 2.0)},
        [](Graph<double>& g, const std::vector<Var>& v) { return g.gelu(v[0]); });
    run("softmax", {random_tensor(rng, {3, 6})},
        [](Graph<double>& g, const std::vector<Var>& v) { return g.softmax(v[0]); });
    run("layer_norm", {random_tensor(rng, {3, 6}), random_tensor(rng, {6}), random_tensor(rng, {6})},
        [](Graph<double>& g, const std::vector<Var>& v) { return g.layer_norm(v[0], v[1], v[2]); });
    run("embedding", {random_tensor(rng, {7, 3})}, [](Graph<double>& g, const std::vector<Var>& v) {
        return g.embedding(v[0], {1, 4, 4, 0, 6, 2}, {2, 3});
    });
    run("heads_roundtrip", {random_tensor(rng, {2, 3, 4}), random_tensor(rng, {2, 2, 4})},
        [](Graph<double>& g, const std::vector<Var>& v) {
            Var x = g.concat_seq(v[0], v[1]);
            Var h = g.split_heads(x, 2);
            return g.reshape(g.merge_heads(g.scale(h, 1.5)), {2, 20});
        });
    run("attention_causal",
        {random_tensor(rng, {2, 2, 4, 3}), random_tensor(rng, {2, 2, 4, 3}), random_tensor(rng, {2, 2, 4, 3})},
        [](Graph<double>& g, const std::vector<Var>& v) {
            Var m = g.constant(causal_mask(2, 4));
            return g.attention(v[0], v[1], v[2], m);
        });
    run("attention_cross",
        {random_tensor(rng, {1, 2, 3, 4}), random_tensor(rng, {1, 2, 5, 4}), random_tensor(rng, {1, 2, 5, 4})},
        [](Graph<double>& g, const std::vector<Var>& v) { return g.attention(v[0], v[1], v[2]); });
    run("conv_patchify", {random_tensor(rng, {2, 4, 4, 3}), random_tensor(rng, {12, 5}), random_tensor(rng, {5})},
        [](Graph<double>& g, const std::vector<Var>& v) { return g.conv_patchify(v[0], v[1], v[2], 2); });
    run("cross_entropy", {random_tensor(rng, {2, 3, 6})}, [](Graph<double>& g, const std::vector<Var>& v) {
        return g.reshape(g.cross_entropy_masked(v[0], {1, 5, 0, 2, 2, 3}, {1, 1, 0, 1, 0, 1}), {1});
    });
    return out;
}

}  // namespace mixpt::nn
