#ifndef UMYOPS_NN_AUTODIFF_HPP
#define UMYOPS_NN_AUTODIFF_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "umyops/nn/tensor.hpp"

namespace umyops::nn {

// Reverse-mode tape node. Graphs are built define-by-run; backward() walks
// the DAG once in reverse topological order. Parameters are long-lived nodes
// whose grads persist across backward calls until zero_grad().
struct Node {
    Tensor val;
    Tensor grad;                       // allocated on demand, same shape as val
    bool requires_grad = false;
    bool is_param = false;
    bool frozen = false;               // trainer skips updates when set
    std::string name;                  // parameter name; empty for intermediates
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (!grad.same_shape(val)) grad = Tensor(val.c, val.h, val.w, 0.0f);
    }
    void zero_grad() {
        if (grad.same_shape(val))
            std::fill(grad.v.begin(), grad.v.end(), 0.0f);
    }
    float scalar() const { return val.v.at(0); }
};

using Var = std::shared_ptr<Node>;

Var constant(Tensor t);
Var make_param(Tensor t, std::string name);

// Accumulates gradients of a scalar root into every reachable node with
// requires_grad. Intermediate grads are freed as the walk retires them.
void backward(const Var& root);

// A value-copy of x detached from the graph.
Var detach(const Var& x);

// ---- elementwise / structural ops -----------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// broadcast single-channel p over all channels of x
Var mul_bcast(const Var& x, const Var& p);
Var scale(const Var& a, float k);
Var relu(const Var& x);
Var sigmoid(const Var& x);
Var concat(const std::vector<Var>& xs);

} // namespace umyops::nn

#endif
