#pragma once

#include <cstdint>
#include <vector>

#include "mixpt/nn/tensor.hpp"

namespace mixpt::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected adaptive-moment optimizer over a ParameterSet.
template <typename T>
class Adam {
public:
    Adam(AdamConfig cfg, const ParameterSet<T>& params);

    // Throws NumericError naming the parameter when a gradient is not finite.
    void step(ParameterSet<T>& params);

    std::uint64_t steps() const { return steps_; }
    void set_steps(std::uint64_t n) { steps_ = n; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

    std::vector<Tensor<T>>& first_moments() { return m_; }
    std::vector<Tensor<T>>& second_moments() { return v_; }
    const std::vector<Tensor<T>>& first_moments() const { return m_; }
    const std::vector<Tensor<T>>& second_moments() const { return v_; }

private:
    AdamConfig cfg_;
    std::uint64_t steps_ = 0;
    std::vector<Tensor<T>> m_;
    std::vector<Tensor<T>> v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace mixpt::nn
