#include "ctfa/autodiff.hpp"

#include <algorithm>

#include "ctfa/errors.hpp"

namespace ctfa {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

ComplexTensor& Node::grad_buffer() {
    if (!has_grad()) grad = ComplexTensor::zeros(value.shape());
    return grad;
}

ComplexTensor Var::grad() const {
    if (node_->has_grad()) return node_->grad;
    return ComplexTensor::zeros(node_->value.shape());
}

void Var::zero_grad() {
    node_->grad_buffer().fill_zero();
}

Var constant(ComplexTensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = "constant";
    return Var(std::move(node));
}

Var parameter(ComplexTensor value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    node->op = "parameter";
    return Var(std::move(node));
}

void Tape::record(std::shared_ptr<Node> node) {
    nodes_.push_back(std::move(node));
}

void Tape::backward(const Var& loss) {
    if (!loss.defined()) throw ContractError("backward: undefined loss");
    if (loss.value().size() != 1) {
        throw ContractError("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
    }
    if (!loss.requires_grad()) {
        clear();
        return;
    }
    Node* root = loss.node();
    auto it = std::find_if(nodes_.begin(), nodes_.end(), [&](const auto& n) { return n.get() == root; });
    if (it == nodes_.end()) throw ContractError("backward: loss was not recorded on this tape");

    ComplexTensor& seed = root->grad_buffer();
    seed.fill_zero();
    seed.re()[0] = 1.0;

    for (auto rit = std::make_reverse_iterator(std::next(it)); rit != nodes_.rend(); ++rit) {
        Node& node = **rit;
        if (node.backward && node.has_grad()) node.backward(node);
    }
    clear();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
    g_active_tape = &tape;
}

TapeScope::~TapeScope() {
    g_active_tape = previous_;
}

NoGradScope::NoGradScope() : previous_(g_active_tape) {
    g_active_tape = nullptr;
}

NoGradScope::~NoGradScope() {
    g_active_tape = previous_;
}

Tape* active_tape() {
    return g_active_tape;
}

Var make_result(ComplexTensor value, std::vector<Var> parents, std::function<void(Node&)> backward,
                const char* op) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->op = op;
    Tape* tape = g_active_tape;
    const bool needs_grad =
        tape != nullptr && std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p.requires_grad(); });
    if (needs_grad) {
        node->requires_grad = true;
        node->backward = std::move(backward);
        node->parents.reserve(parents.size());
        for (auto& p : parents) node->parents.push_back(p.shared());
        tape->record(node);
    }
    return Var(std::move(node));
}

}  // namespace ctfa
