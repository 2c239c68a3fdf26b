#pragma once

#include <cstring>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fanet/common.hpp"

namespace fanet {

// Dense 4-D (B,C,H,W) row-major array with an optional gradient buffer.
// BasicTensor is a handle: copies share storage, so tensors recorded on a
// GradTape keep referring to the buffers the adjoint pass accumulates into.
template <typename T>
class BasicTensor {
public:
    BasicTensor() = default;

    explicit BasicTensor(Shape shape, T fill = T(0))
        : s_(std::make_shared<Storage>()) {
        check_shape(shape);
        s_->shape = shape;
        s_->values.assign(static_cast<std::size_t>(shape.numel()), fill);
    }

    static BasicTensor zeros(Shape shape) { return BasicTensor(shape, T(0)); }

    static BasicTensor full(Shape shape, T v) { return BasicTensor(shape, v); }

    static BasicTensor scalar(T v) { return BasicTensor(Shape{1, 1, 1, 1}, v); }

    static BasicTensor from(Shape shape, std::vector<T> values) {
        BasicTensor t;
        t.s_ = std::make_shared<Storage>();
        check_shape(shape);
        if (static_cast<std::int64_t>(values.size()) != shape.numel()) {
            throw ShapeError("tensor data length " + std::to_string(values.size()) +
                             " does not match shape " + shape.str());
        }
        t.s_->shape = shape;
        t.s_->values = std::move(values);
        return t;
    }

    bool defined() const { return s_ != nullptr; }
    const Shape& shape() const { return s_->shape; }
    std::int64_t numel() const { return s_->shape.numel(); }

    std::span<T> data() { return {s_->values.data(), s_->values.size()}; }
    std::span<const T> data() const { return {s_->values.data(), s_->values.size()}; }

    T& at(int b, int c, int y, int x) { return s_->values[static_cast<std::size_t>(index(b, c, y, x))]; }
    const T& at(int b, int c, int y, int x) const {
        return s_->values[static_cast<std::size_t>(index(b, c, y, x))];
    }

    std::int64_t index(int b, int c, int y, int x) const {
        const Shape& s = s_->shape;
        return ((static_cast<std::int64_t>(b) * s.c + c) * s.h + y) * s.w + x;
    }

    // Value of a scalar (1,1,1,1) tensor.
    T value() const {
        if (numel() != 1) {
            throw UsageError("value() requires a scalar tensor, got shape " + shape().str());
        }
        return s_->values[0];
    }

    bool requires_grad() const { return s_->requires_grad; }

    void set_requires_grad(bool f) {
        s_->requires_grad = f;
        if (f && s_->grad.size() != s_->values.size()) {
            s_->grad.assign(s_->values.size(), T(0));
        }
    }

    bool is_leaf() const { return s_->leaf; }

    // Marks a tensor as the tracked output of a recorded op.
    void mark_tape_output() {
        s_->leaf = false;
        set_requires_grad(true);
    }

    std::span<T> grad() { return {s_->grad.data(), s_->grad.size()}; }
    std::span<const T> grad() const { return {s_->grad.data(), s_->grad.size()}; }

    void zero_grad() {
        std::fill(s_->grad.begin(), s_->grad.end(), T(0));
    }

    // Deep copy of values only (fresh leaf, no gradient history).
    BasicTensor clone() const {
        BasicTensor t;
        t.s_ = std::make_shared<Storage>();
        t.s_->shape = s_->shape;
        t.s_->values = s_->values;
        return t;
    }

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(s_->values.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(s_->values[i]);
        return BasicTensor<U>::from(s_->shape, std::move(out));
    }

    // Storage identity, for aliasing checks in tests.
    const void* storage_id() const { return s_.get(); }

private:
    struct Storage {
        Shape shape;
        std::vector<T> values;
        std::vector<T> grad;
        bool requires_grad = false;
        bool leaf = true;
    };

    static void check_shape(const Shape& s) {
        if (s.b < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
            throw ShapeError("negative dimension in shape " + s.str());
        }
    }

    std::shared_ptr<Storage> s_;
};

using Tensor = BasicTensor<float>;
using DTensor = BasicTensor<double>;

template <typename T>
struct NamedParam {
    std::string name;
    BasicTensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

// Ordered record of executed operations. Ops append themselves during the
// forward pass; backward() replays adjoints in exact reverse execution
// order, visiting each node once. A tape belongs to one logical execution
// context.
template <typename T>
class GradTape {
public:
    void record(BasicTensor<T> output, std::function<void()> adjoint) {
        nodes_.push_back(Node{std::move(output), std::move(adjoint)});
    }

    // Seeds d(loss)/d(loss) = 1 and accumulates adjoints into every
    // requires-grad leaf reachable from the recorded graph. Non-leaf
    // adjoints are reset first, so calling backward repeatedly without
    // zeroing adds one full gradient per call.
    void backward(const BasicTensor<T>& loss) {
        if (!loss.defined() || loss.numel() != 1) {
            throw UsageError("backward expects a scalar loss tensor");
        }
        if (loss.is_leaf() || !loss.requires_grad()) {
            throw UsageError("backward: loss is not the output of a recorded operation");
        }
        for (auto& n : nodes_) {
            if (!n.output.is_leaf()) n.output.zero_grad();
        }
        BasicTensor<T> l = loss;
        l.grad()[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            it->adjoint();
        }
    }

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    struct Node {
        BasicTensor<T> output;
        std::function<void()> adjoint;
    };
    std::vector<Node> nodes_;
};

}  // namespace fanet
