#include "umyops/nn/autodiff.hpp"

#include <cmath>
#include <unordered_set>

namespace umyops::nn {

bool Tensor::finite() const {
    for (const float x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

Tensor from_image(const ImageD& img) {
    Tensor t(1, img.rows(), img.cols());
    for (size_t i = 0; i < img.size(); ++i) t.v[i] = static_cast<float>(img.raw()[i]);
    return t;
}

ImageD to_image(const Tensor& t, int channel) {
    if (channel < 0 || channel >= t.c) throw InvalidArgument("to_image: channel out of range");
    ImageD img(t.h, t.w);
    const size_t off = static_cast<size_t>(channel) * t.plane();
    for (size_t i = 0; i < t.plane(); ++i) img.raw()[i] = t.v[off + i];
    return img;
}

Var constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    return n;
}

Var make_param(Tensor t, std::string name) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->requires_grad = true;
    n->is_param = true;
    n->name = std::move(name);
    return n;
}

Var detach(const Var& x) { return constant(x->val); }

void backward(const Var& root) {
    if (root->val.size() != 1) throw InvalidArgument("backward: root must be scalar");
    if (!root->requires_grad) return;

    // iterative DFS postorder
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad.v[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) {
            n->backward_fn(*n);
            if (!n->is_param) n->grad = Tensor();  // retire intermediate grads
        }
    }
}

namespace {

Var unary(const Var& x, Tensor out, std::function<void(Node&)> bw) {
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->parents = {x};
    n->requires_grad = x->requires_grad;
    if (n->requires_grad) n->backward_fn = std::move(bw);
    return n;
}

Var binary(const Var& a, const Var& b, Tensor out, std::function<void(Node&)> bw) {
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->parents = {a, b};
    n->requires_grad = a->requires_grad || b->requires_grad;
    if (n->requires_grad) n->backward_fn = std::move(bw);
    return n;
}

} // namespace

Var add(const Var& a, const Var& b) {
    if (!a->val.same_shape(b->val)) throw InvalidArgument("add: shape mismatch");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] += b->val.v[i];
    return binary(a, b, std::move(out), [](Node& self) {
        for (int k = 0; k < 2; ++k) {
            Node* p = self.parents[k].get();
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) p->grad.v[i] += self.grad.v[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    if (!a->val.same_shape(b->val)) throw InvalidArgument("sub: shape mismatch");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] -= b->val.v[i];
    return binary(a, b, std::move(out), [](Node& self) {
        Node* a_ = self.parents[0].get();
        Node* b_ = self.parents[1].get();
        if (a_->requires_grad) {
            a_->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) a_->grad.v[i] += self.grad.v[i];
        }
        if (b_->requires_grad) {
            b_->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i) b_->grad.v[i] -= self.grad.v[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    if (!a->val.same_shape(b->val)) throw InvalidArgument("mul: shape mismatch");
    Tensor out = a->val;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] *= b->val.v[i];
    return binary(a, b, std::move(out), [](Node& self) {
        Node* a_ = self.parents[0].get();
        Node* b_ = self.parents[1].get();
        if (a_->requires_grad) {
            a_->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                a_->grad.v[i] += self.grad.v[i] * b_->val.v[i];
        }
        if (b_->requires_grad) {
            b_->ensure_grad();
            for (size_t i = 0; i < self.grad.size(); ++i)
                b_->grad.v[i] += self.grad.v[i] * a_->val.v[i];
        }
    });
}

Var mul_bcast(const Var& x, const Var& p) {
    if (p->val.c != 1 || p->val.h != x->val.h || p->val.w != x->val.w)
        throw InvalidArgument("mul_bcast: p must be single-channel with matching plane");
    Tensor out = x->val;
    const size_t plane = out.plane();
    for (int ci = 0; ci < out.c; ++ci)
        for (size_t i = 0; i < plane; ++i) out.v[ci * plane + i] *= p->val.v[i];
    return binary(x, p, std::move(out), [](Node& self) {
        Node* x_ = self.parents[0].get();
        Node* p_ = self.parents[1].get();
        const size_t plane = self.val.plane();
        if (x_->requires_grad) {
            x_->ensure_grad();
            for (int ci = 0; ci < self.val.c; ++ci)
                for (size_t i = 0; i < plane; ++i)
                    x_->grad.v[ci * plane + i] += self.grad.v[ci * plane + i] * p_->val.v[i];
        }
        if (p_->requires_grad) {
            p_->ensure_grad();
            for (int ci = 0; ci < self.val.c; ++ci)
                for (size_t i = 0; i < plane; ++i)
                    p_->grad.v[i] += self.grad.v[ci * plane + i] * x_->val.v[ci * plane + i];
        }
    });
}

Var scale(const Var& a, float k) {
    Tensor out = a->val;
    for (auto& x : out.v) x *= k;
    return unary(a, std::move(out), [k](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) p->grad.v[i] += k * self.grad.v[i];
    });
}

Var relu(const Var& x) {
    Tensor out = x->val;
    for (auto& v : out.v) v = v > 0.0f ? v : 0.0f;
    return unary(x, std::move(out), [](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
            if (self.val.v[i] > 0.0f) p->grad.v[i] += self.grad.v[i];
    });
}

Var sigmoid(const Var& x) {
    Tensor out = x->val;
    for (auto& v : out.v) v = 1.0f / (1.0f + std::exp(-v));
    return unary(x, std::move(out), [](Node& self) {
        Node* p = self.parents[0].get();
        if (!p->requires_grad) return;
        p->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
            const float s = self.val.v[i];
            p->grad.v[i] += self.grad.v[i] * s * (1.0f - s);
        }
    });
}

Var concat(const std::vector<Var>& xs) {
    if (xs.empty()) throw InvalidArgument("concat: empty input");
    const int h = xs[0]->val.h, w = xs[0]->val.w;
    int c = 0;
    bool rg = false;
    for (const auto& x : xs) {
        if (x->val.h != h || x->val.w != w) throw InvalidArgument("concat: plane mismatch");
        c += x->val.c;
        rg |= x->requires_grad;
    }
    Tensor out(c, h, w);
    size_t off = 0;
    for (const auto& x : xs) {
        std::copy(x->val.v.begin(), x->val.v.end(), out.v.begin() + off);
        off += x->val.size();
    }
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->parents = xs;
    n->requires_grad = rg;
    if (rg) {
        n->backward_fn = [](Node& self) {
            size_t off = 0;
            for (auto& parent : self.parents) {
                Node* p = parent.get();
                const size_t len = p->val.size();
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (size_t i = 0; i < len; ++i) p->grad.v[i] += self.grad.v[off + i];
                }
                off += len;
            }
        };
    }
    return n;
}

} // namespace umyops::nn
