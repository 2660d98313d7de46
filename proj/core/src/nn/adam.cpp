#include "mixpt/nn/adam.hpp"

#include <cmath>

namespace mixpt::nn {

template <typename T>
Adam<T>::Adam(AdamConfig cfg, const ParameterSet<T>& params) : cfg_(cfg) {
    if (!(cfg.lr > 0) || !(cfg.beta1 >= 0 && cfg.beta1 < 1) || !(cfg.beta2 >= 0 && cfg.beta2 < 1) || !(cfg.eps > 0))
        throw ConfigError("invalid optimizer settings");
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_.emplace_back(params[i].value.shape);
        v_.emplace_back(params[i].value.shape);
    }
}

template <typename T>
void Adam<T>::step(ParameterSet<T>& params) {
    if (params.size() != m_.size()) throw InputError("parameter set changed under the optimizer");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (!params[i].grad.all_finite()) throw NumericError("non-finite gradient in parameter " + params[i].name);

    ++steps_;
    const double t = static_cast<double>(steps_);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t);
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T step_size = static_cast<T>(cfg_.lr / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    const T eps = static_cast<T>(cfg_.eps);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const T g = p.grad[j];
            m[j] = b1 * m[j] + (T(1) - b1) * g;
            v[j] = b2 * v[j] + (T(1) - b2) * g * g;
            p.value[j] -= step_size * m[j] / (std::sqrt(v[j] * inv_c2) + eps);
        }
        if (!p.value.all_finite()) throw NumericError("non-finite value in parameter " + p.name + " after update");
    }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace mixpt::nn
