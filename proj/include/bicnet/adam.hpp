#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "bicnet/errors.hpp"
#include "bicnet/params.hpp"
#include "bicnet/tensor.hpp"

namespace bicnet {

// Adam with bias correction; moment buffers are index-aligned with the
// parameter store's registration order.
template <typename S>
struct AdamState {
    std::uint64_t step = 0;
    S learning_rate = S(2e-4);
    S beta1 = S(0.9);
    S beta2 = S(0.999);
    S epsilon = S(1e-8);
    std::vector<std::vector<S>> first_moment;
    std::vector<std::vector<S>> second_moment;

    static AdamState init(const ParameterStore<S>& store, S lr) {
        AdamState st;
        st.learning_rate = lr;
        st.first_moment.reserve(store.size());
        st.second_moment.reserve(store.size());
        for (const auto& p : store.all()) {
            st.first_moment.emplace_back(p.value.numel(), S(0));
            st.second_moment.emplace_back(p.value.numel(), S(0));
        }
        return st;
    }
};

// One optimizer step over every parameter. Every parameter must carry a
// populated gradient buffer (zeroing counts as populated; an absent buffer
// means backward never ran for it).
template <typename S>
void adam_step(ParameterStore<S>& store, AdamState<S>& state) {
    if (state.first_moment.size() != store.size())
        throw UsageError("adam state does not match the parameter store");
    state.step += 1;
    const S b1t = S(1) - S(std::pow(double(state.beta1), double(state.step)));
    const S b2t = S(1) - S(std::pow(double(state.beta2), double(state.step)));
    auto& params = store.all();
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        if (!p.value.has_grad())
            throw UsageError("adam_step: missing gradient for parameter " + p.name);
        auto g = p.value.grad();
        auto w = p.value.values_mut();
        auto& m = state.first_moment[pi];
        auto& v = state.second_moment[pi];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = state.beta1 * m[i] + (S(1) - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (S(1) - state.beta2) * g[i] * g[i];
            const S mhat = m[i] / b1t;
            const S vhat = v[i] / b2t;
            w[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

} // namespace bicnet
