#pragma once

#include <functional>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sgdf/ad/params.hpp"
#include "sgdf/core/tensor.hpp"

namespace sgdf::ad {

// Reverse-mode tape. Nodes are appended in forward order, so walking the tape
// backwards is a valid topological order. Single-threaded by design: gradient
// accumulation order is fixed, which keeps training runs bit-reproducible.
template <typename T>
class Graph {
public:
    // Receives the graph and the node's own index; reads grad(node) and
    // accumulates into parents' grads.
    using BackwardFn = std::function<void(Graph<T>&, int)>;

    explicit Graph(ParamStore<T>* params = nullptr) : params_(params) {}

    int constant(Tensor<T> v) { return push(std::move(v), false, -1, nullptr); }

    // Differentiable leaf not tied to the store (inputs under gradient check).
    int input(Tensor<T> v) { return push(std::move(v), true, -1, nullptr); }

    // Leaf bound to a store parameter; one node per parameter per graph.
    int param(int pid) {
        if (!params_) throw std::logic_error("graph has no parameter store");
        auto it = param_nodes_.find(pid);
        if (it != param_nodes_.end()) return it->second;
        const int node = push(Tensor<T>(params_->value(pid)), true, pid, nullptr);
        param_nodes_[pid] = node;
        return node;
    }

    int make(Tensor<T> value, std::vector<int> parents, BackwardFn fn) {
        bool needs = false;
        for (const int p : parents) needs = needs || node(p).needs_grad;
        return push(std::move(value), needs, -1, needs ? std::move(fn) : nullptr);
    }

    const Tensor<T>& val(int i) const { return node(i).value; }
    bool needs_grad(int i) const { return node(i).needs_grad; }

    // Gradient buffer, allocated to zeros on first touch.
    Tensor<T>& grad(int i) {
        Node& n = node(i);
        if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
        return n.grad;
    }

    // Gradient buffer to accumulate into, or nullptr when the parent does not
    // participate in differentiation (lets kernels skip dead branches).
    Tensor<T>* grad_sink(int i) { return node(i).needs_grad ? &grad(i) : nullptr; }

    bool has_grad(int i) const { return !node(i).grad.empty(); }

    // Seeds d(root)/d(root) = seed and sweeps the tape. Root must be scalar.
    // Parameter gradients accumulate into the store, so per-sample graphs of
    // one batch can run sequentially before the optimizer step.
    void backward(int root, T seed = T(1)) {
        if (val(root).size() != 1)
            throw std::invalid_argument("backward root must be a scalar node");
        grad(root)[0] += seed;
        for (int i = root; i >= 0; --i) {
            Node& n = node(i);
            if (n.backward && !n.grad.empty()) n.backward(*this, i);
        }
        if (params_) {
            for (const auto& [pid, node_id] : param_nodes_) {
                Node& n = node(node_id);
                if (n.grad.empty()) continue;
                Tensor<T>& g = params_->grad(pid);
                for (std::size_t j = 0; j < g.size(); ++j) g[j] += n.grad[j];
            }
        }
    }

    std::size_t num_nodes() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool needs_grad = false;
        int param_id = -1;
        BackwardFn backward;
    };

    Node& node(int i) { return nodes_.at(static_cast<std::size_t>(i)); }
    const Node& node(int i) const { return nodes_.at(static_cast<std::size_t>(i)); }

    int push(Tensor<T> v, bool needs, int pid, BackwardFn fn) {
        Node n;
        n.value = std::move(v);
        n.needs_grad = needs;
        n.param_id = pid;
        n.backward = std::move(fn);
        nodes_.push_back(std::move(n));
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
    ParamStore<T>* params_;
    std::unordered_map<int, int> param_nodes_;
};

}  // namespace sgdf::ad
