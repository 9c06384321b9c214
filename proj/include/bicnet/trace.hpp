#pragma once

#include <string>
#include <vector>

#include "bicnet/tensor.hpp"

namespace bicnet {

// Captured attention weights from one forward pass, for inspection and the
// dump-attention command. Values are widened to double on capture.
struct TraceEntry {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

struct AttentionTrace {
    std::vector<TraceEntry> entries;
};

// Cheap pass-through context: a null sink records nothing.
struct TraceCtx {
    AttentionTrace* sink = nullptr;
    std::string prefix;

    TraceCtx sub(const std::string& name) const {
        if (!sink) return {};
        return {sink, prefix.empty() ? name : prefix + "." + name};
    }

    template <typename S>
    void record(const std::string& name, const Tensor<S>& t) const {
        if (!sink) return;
        TraceEntry e;
        e.name = prefix.empty() ? name : prefix + "." + name;
        e.shape = t.shape();
        e.values.reserve(t.numel());
        for (S v : t.values()) e.values.push_back(double(v));
        sink->entries.push_back(std::move(e));
    }
};

} // namespace bicnet
