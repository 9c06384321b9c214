#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "bicnet/errors.hpp"
#include "bicnet/rng.hpp"
#include "bicnet/tensor.hpp"

namespace bicnet {

// A named trainable tensor. The name encodes module/branch/layer position,
// e.g. "relation.spatial.l0.attn.wq.h1".
template <typename S>
struct Parameter {
    std::string name;
    Tensor<S> value;
};

// Registration-ordered parameter registry; names are unique within a model.
template <typename S>
class ParameterStore {
public:
    Tensor<S> add(const std::string& name, Tensor<S> t) {
        if (index_.count(name)) throw UsageError("duplicate parameter name: " + name);
        t.set_requires_grad(true);
        index_[name] = params_.size();
        params_.push_back({name, t});
        return t;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    Tensor<S>& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw UsageError("unknown parameter: " + name);
        return params_[it->second].value;
    }

    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : params_) n += p.value.numel();
        return n;
    }

    std::vector<Parameter<S>>& all() { return params_; }
    const std::vector<Parameter<S>>& all() const { return params_; }

    void zero_grads() {
        for (auto& p : params_) p.value.zero_grad();
    }

private:
    std::vector<Parameter<S>> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

namespace init {

// Glorot/Xavier uniform: +-sqrt(6 / (fan_in + fan_out)).
template <typename S>
Tensor<S> linear_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
    std::vector<S> v(fan_in * fan_out);
    for (auto& x : v) x = S(rng.uniform(-bound, bound));
    return Tensor<S>::from_values({fan_in, fan_out}, std::move(v));
}

template <typename S>
Tensor<S> zeros_vec(std::size_t d) {
    return Tensor<S>::zeros({d});
}

template <typename S>
Tensor<S> ones_vec(std::size_t d) {
    return Tensor<S>::full({d}, S(1));
}

// Learned positional rows start small but nonzero, so enabling them actually
// breaks permutation equivariance from the first step.
template <typename S>
Tensor<S> positional_table(std::size_t max_len, std::size_t d, Rng& rng) {
    std::vector<S> v(max_len * d);
    for (auto& x : v) x = S(rng.uniform(-0.02, 0.02));
    return Tensor<S>::from_values({max_len, d}, std::move(v));
}

// Aggregator query vector, stored as a 1 x d row.
template <typename S>
Tensor<S> query_row(std::size_t d, Rng& rng) {
    const double bound = std::sqrt(3.0 / double(d));
    std::vector<S> v(d);
    for (auto& x : v) x = S(rng.uniform(-bound, bound));
    return Tensor<S>::from_values({std::size_t(1), d}, std::move(v));
}

} // namespace init

} // namespace bicnet
