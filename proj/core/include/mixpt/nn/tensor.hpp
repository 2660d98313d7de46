#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "mixpt/error.hpp"

namespace mixpt::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape);

// Dense row-major array. Precision is a template parameter: float for
// training, double for finite-difference verification.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(numel(shape), fill) {}
    Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
        if (data.size() != numel(shape))
            throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                             shape_str(shape));
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    // Negative indices count from the back.
    std::size_t dim(int i) const { return shape[i < 0 ? shape.size() + i : static_cast<std::size_t>(i)]; }
    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }
    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    bool all_finite() const {
        for (const T& v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }

    bool operator==(const Tensor&) const = default;
};

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

// Named parameters in registration order; addresses are stable.
template <typename T>
class ParameterSet {
public:
    Parameter<T>& add(const std::string& name, Tensor<T> init) {
        if (find(name)) throw InputError("duplicate parameter " + name);
        auto p = std::make_unique<Parameter<T>>();
        p->name = name;
        p->grad = Tensor<T>(init.shape);
        p->value = std::move(init);
        items_.push_back(std::move(p));
        return *items_.back();
    }

    Parameter<T>* find(const std::string& name) {
        for (auto& p : items_)
            if (p->name == name) return p.get();
        return nullptr;
    }
    const Parameter<T>* find(const std::string& name) const {
        for (const auto& p : items_)
            if (p->name == name) return p.get();
        return nullptr;
    }
    Parameter<T>& get(const std::string& name) {
        if (auto* p = find(name)) return *p;
        throw InputError("unknown parameter " + name);
    }
    const Parameter<T>& get(const std::string& name) const {
        if (const auto* p = find(name)) return *p;
        throw InputError("unknown parameter " + name);
    }

    std::size_t size() const { return items_.size(); }
    Parameter<T>& operator[](std::size_t i) { return *items_[i]; }
    const Parameter<T>& operator[](std::size_t i) const { return *items_[i]; }

    void zero_grad() {
        for (auto& p : items_) p->zero_grad();
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : items_) n += p->value.size();
        return n;
    }

private:
    std::vector<std::unique_ptr<Parameter<T>>> items_;
};

}  // namespace mixpt::nn
