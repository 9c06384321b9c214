#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "bicnet/errors.hpp"

namespace bicnet {

// Scalar precision of one process run. Training uses 32-bit scalars, gradient
// verification uses 64-bit. The engine is templated on the scalar type, so the
// two kinds can never mix inside one expression.
enum class ScalarKind { Training32, Verification64 };

inline const char* to_string(ScalarKind k) {
    return k == ScalarKind::Training32 ? "training32" : "verification64";
}

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

template <typename S>
struct Node {
    Shape shape;
    std::vector<S> value;
    std::vector<S> grad; // allocated lazily, same length as value
    bool requires_grad = false;
    // Reverse-mode record: parents keep the graph alive, backward_fn pushes
    // this node's gradient into its parents' grad buffers.
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::size_t numel() const { return value.size(); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), S(0));
    }
};

// Thread-local gradient mode. Evaluation workers flip it off so forward
// passes do not record the graph.
inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

} // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradGuard() { detail::grad_mode_flag() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Dense row-major tensor handle. Copies are shallow; the underlying node is
// shared, which is what lets the reverse-mode record reference intermediate
// values without copying them.
template <typename S>
class Tensor {
public:
    using scalar_type = S;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return from_data(std::move(shape), {}, requires_grad, /*fill*/ true, S(0));
    }

    static Tensor full(Shape shape, S v, bool requires_grad = false) {
        return from_data(std::move(shape), {}, requires_grad, /*fill*/ true, v);
    }

    static Tensor from_values(Shape shape, std::vector<S> data, bool requires_grad = false) {
        validate_shape(shape);
        if (shape_numel(shape) != data.size()) {
            throw DimensionError("tensor data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str(shape));
        }
        Tensor t;
        t.n_ = std::make_shared<detail::Node<S>>();
        t.n_->shape = std::move(shape);
        t.n_->value = std::move(data);
        t.n_->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(S v, bool requires_grad = false) {
        return from_values({1}, {v}, requires_grad);
    }

    bool defined() const { return n_ != nullptr; }

    const Shape& shape() const { return node().shape; }
    std::size_t rank() const { return node().shape.size(); }
    std::size_t numel() const { return node().value.size(); }
    std::size_t extent(std::size_t axis) const { return node().shape.at(axis); }

    std::span<const S> values() const { return node().value; }
    // Mutable access is for leaves (parameters, inputs); mutating an interior
    // node between forward and backward is undefined.
    std::span<S> values_mut() { return node().value; }

    bool requires_grad() const { return node().requires_grad; }
    void set_requires_grad(bool b) { node().requires_grad = b; }

    bool has_grad() const { return node().grad.size() == node().value.size(); }
    std::span<const S> grad() const {
        const auto& nd = node();
        if (nd.grad.size() != nd.value.size())
            throw UsageError("gradient read before any backward pass");
        return nd.grad;
    }
    std::span<S> grad_mut() {
        node().ensure_grad();
        return node().grad;
    }

    void zero_grad() { node().grad.assign(node().value.size(), S(0)); }
    void drop_grad() { node().grad.clear(); }

    S item() const {
        if (numel() != 1) throw UsageError("item() on non-scalar tensor " + shape_str(shape()));
        return node().value[0];
    }

    // 2-D convenience accessors.
    std::size_t rows() const { return extent(0); }
    std::size_t cols() const { return extent(1); }
    S at(std::size_t r, std::size_t c) const { return node().value[r * cols() + c]; }

    detail::Node<S>& node() const {
        if (!n_) throw UsageError("use of an undefined tensor");
        return *n_;
    }
    const std::shared_ptr<detail::Node<S>>& node_ptr() const { return n_; }

    static Tensor adopt(std::shared_ptr<detail::Node<S>> n) {
        Tensor t;
        t.n_ = std::move(n);
        return t;
    }

private:
    static void validate_shape(const Shape& shape) {
        if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
        for (std::size_t e : shape)
            if (e == 0) throw DimensionError("tensor extents must be positive: " + shape_str(shape));
    }

    static Tensor from_data(Shape shape, std::vector<S> data, bool requires_grad, bool fill, S v) {
        validate_shape(shape);
        Tensor t;
        t.n_ = std::make_shared<detail::Node<S>>();
        std::size_t n = shape_numel(shape);
        t.n_->shape = std::move(shape);
        if (fill)
            t.n_->value.assign(n, v);
        else
            t.n_->value = std::move(data);
        t.n_->requires_grad = requires_grad;
        return t;
    }

    std::shared_ptr<detail::Node<S>> n_;
};

// NaN/Inf anywhere is an error state, never a silent value.
template <typename S>
void check_finite(const Tensor<S>& t, const char* where) {
    for (S v : t.values()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value produced by ") + where);
        }
    }
}

// Accumulates d(root)/d(leaf) into the grad buffer of every node that
// requires a gradient and is reachable from `root`. Repeated calls keep
// accumulating until grads are cleared.
template <typename S>
void backward(const Tensor<S>& root) {
    if (root.numel() != 1)
        throw UsageError("backward root must be scalar, got shape " + shape_str(root.shape()));
    auto* start = root.node_ptr().get();
    if (!start) throw UsageError("backward on an undefined tensor");
    if (!start->requires_grad) return; // detached root: nothing reachable

    // Iterative post-order DFS; mark 1 = on stack, 2 = finished.
    std::unordered_map<detail::Node<S>*, int> mark;
    std::vector<detail::Node<S>*> order;
    std::vector<std::pair<detail::Node<S>*, std::size_t>> stack;
    stack.emplace_back(start, 0);
    mark[start] = 1;
    while (!stack.empty()) {
        auto& [nd, next] = stack.back();
        if (next < nd->parents.size()) {
            detail::Node<S>* p = nd->parents[next++].get();
            if (!p->requires_grad) continue;
            auto it = mark.find(p);
            if (it == mark.end()) {
                mark[p] = 1;
                stack.emplace_back(p, 0);
            } else if (it->second == 1) {
                throw InternalError("cycle detected in computation record");
            }
        } else {
            mark[nd] = 2;
            order.push_back(nd);
            stack.pop_back();
        }
    }

    start->ensure_grad();
    start->grad[0] += S(1);
    // `order` is post-order, so iterating it backwards visits every node
    // before any of its parents.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node<S>* nd = *it;
        if (nd->backward_fn) {
            nd->ensure_grad();
            nd->backward_fn(*nd);
        }
    }
}

} // namespace bicnet
