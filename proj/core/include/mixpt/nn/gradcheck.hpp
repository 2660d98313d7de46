#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mixpt/nn/graph.hpp"

namespace mixpt::nn {

// |analytic - numeric| / max(|analytic|, |numeric|, kRelErrorFloor).
inline constexpr double kRelErrorFloor = 1e-6;
double relative_error(double analytic, double numeric);

struct GradCheckResult {
    std::string name;
    double max_rel_error = 0;
    double max_abs_error = 0;
    std::size_t checked = 0;
};

using ScalarFn = std::function<Var(Graph<double>&, const std::vector<Var>&)>;

// Compares reverse-mode gradients of f with respect to every element of
// every input against central differences with step h.
GradCheckResult check_gradients(const std::string& name, std::vector<Tensor<double>> inputs, const ScalarFn& f,
                                double h = 1e-5);

// Randomized check of every differentiable kernel op for one seed.
std::vector<GradCheckResult> kernel_gradcheck_suite(std::uint64_t seed);

}  // namespace mixpt::nn
