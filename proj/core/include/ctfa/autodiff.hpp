#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ctfa/tensor.hpp"

namespace ctfa {

// One value in the computation graph. Gradients are kept as a pair of real
// planes: d(loss)/d(re) and d(loss)/d(im), i.e. the real and imaginary parts
// are differentiated as independent real variables.
struct Node {
    ComplexTensor value;
    ComplexTensor grad;  // empty until something flows into it
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    // Zero-initialised gradient buffer, allocated on first use.
    ComplexTensor& grad_buffer();
    bool has_grad() const { return grad.size() == value.size() && grad.shape() == value.shape(); }
};

// Handle to a graph node. Cheap to copy; copies alias the same node.
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const ComplexTensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }

    // Gradient after backward; a zero tensor of the value's shape if none flowed.
    ComplexTensor grad() const;
    void zero_grad();

    // Direct access for optimizers, checkpoint loading and finite differences.
    ComplexTensor& mutable_value() { return node_->value; }
    ComplexTensor& mutable_grad() { return node_->grad_buffer(); }

    Node* node() const { return node_.get(); }
    const std::shared_ptr<Node>& shared() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// Gradient-free leaf.
Var constant(ComplexTensor value);
// Trainable leaf; lives outside any tape so it survives tape resets.
Var parameter(ComplexTensor value);

// Eager, append-only operation record. Nodes are appended as operations
// execute, so the sequence is already in topological order.
class Tape {
public:
    void record(std::shared_ptr<Node> node);
    std::size_t size() const { return nodes_.size(); }

    // Reverse sweep from a scalar loss. Gradients accumulate into every
    // reachable leaf with requires_grad; the tape is cleared afterwards.
    void backward(const Var& loss);
    void clear() { nodes_.clear(); }

private:
    std::vector<std::shared_ptr<Node>> nodes_;
};

// Makes a tape the recording target for the current thread for the lifetime
// of the scope. Without an active tape, operations compute values only.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

// Suspends recording on the current thread: operations compute values only.
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* previous_;
};

Tape* active_tape();

// Builds the result node of an operation: records it on the active tape when
// any parent needs gradients, otherwise drops the backward closure.
Var make_result(ComplexTensor value, std::vector<Var> parents, std::function<void(Node&)> backward,
                const char* op);

}  // namespace ctfa
