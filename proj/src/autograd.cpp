#include "cranial/autograd.hpp"

#include <cmath>
#include <unordered_set>

#include "cranial/error.hpp"
#include "cranial/kernels.hpp"

namespace cranial {

Tensor& Node::grad_buffer() {
    if (grad.empty()) grad = Tensor(value.shape(), 0.0);
    return grad;
}

void Var::zero_grad() {
    if (!node_->grad.empty()) node_->grad.fill(0.0);
}

Var parameter(Tensor t) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    n->requires_grad = true;
    return Var(std::move(n));
}

Var constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    return Var(std::move(n));
}

namespace {

Var make_result(Tensor value, std::vector<std::shared_ptr<Node>> parents, std::function<void(Node&)> fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward = std::move(fn);
    }
    return Var(std::move(n));
}

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (!(a == b)) {
        throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": " + to_string(a) + " vs " + to_string(b));
    }
}

}  // namespace

void backward(const Var& root) {
    if (root.value().numel() != 1) throw Error(ErrorKind::ShapeMismatch, "backward needs a scalar root");
    // Iterative post-order DFS.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root.node()->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(*n);
    }
}

Var conv3d(const Var& x, const Var& weight, const Var& bias, int stride, int pad) {
    const Shape& xs = x.shape();
    const Shape& ws = weight.shape();
    if (ws.c != xs.c) {
        throw Error(ErrorKind::ShapeMismatch, "conv3d: input channels " + std::to_string(xs.c) + " vs weight " +
                                                  to_string(ws));
    }
    if (ws.d % 2 == 0 || ws.h % 2 == 0 || ws.w % 2 == 0) {
        throw Error(ErrorKind::ShapeMismatch, "conv3d: kernel extents must be odd, got " + to_string(ws));
    }
    if (bias.value().numel() != ws.n) throw Error(ErrorKind::ShapeMismatch, "conv3d: bias size != out channels");
    if (stride < 1 || pad < 0) throw Error(ErrorKind::ShapeMismatch, "conv3d: stride >= 1 and pad >= 0 required");
    kernels::ConvDims cd;
    cd.batch = xs.n;
    cd.in_channels = xs.c;
    cd.out_channels = ws.n;
    cd.in_d = xs.d;
    cd.in_h = xs.h;
    cd.in_w = xs.w;
    cd.k_d = ws.d;
    cd.k_h = ws.h;
    cd.k_w = ws.w;
    cd.stride = stride;
    cd.pad = pad;
    if (cd.out_d() < 1 || cd.out_h() < 1 || cd.out_w() < 1) {
        throw Error(ErrorKind::ShapeMismatch, "conv3d: kernel larger than padded input " + to_string(xs));
    }
    Tensor y(Shape{xs.n, ws.n, cd.out_d(), cd.out_h(), cd.out_w()});
    if (kernels::backend() == kernels::Backend::Parallel) {
        kernels::parallel::conv3d_forward(cd, x.value().data(), weight.value().data(), bias.value().data(), y.data());
    } else {
        kernels::reference::conv3d_forward(cd, x.value().data(), weight.value().data(), bias.value().data(), y.data());
    }
    return make_result(std::move(y), {x.node(), weight.node(), bias.node()}, [cd](Node& self) {
        Node& xn = *self.parents[0];
        Node& wn = *self.parents[1];
        Node& bn = *self.parents[2];
        std::span<double> gx = xn.requires_grad ? xn.grad_buffer().data() : std::span<double>{};
        // Gradients for weight/bias are always produced; discarded if they are constants.
        Tensor scratch_w, scratch_b;
        std::span<double> gw, gb;
        if (wn.requires_grad) {
            gw = wn.grad_buffer().data();
        } else {
            scratch_w = Tensor(wn.value.shape());
            gw = scratch_w.data();
        }
        if (bn.requires_grad) {
            gb = bn.grad_buffer().data();
        } else {
            scratch_b = Tensor(bn.value.shape());
            gb = scratch_b.data();
        }
        if (kernels::backend() == kernels::Backend::Parallel) {
            kernels::parallel::conv3d_backward(cd, xn.value.data(), wn.value.data(), self.grad.data(), gx, gw, gb);
        } else {
            kernels::reference::conv3d_backward(cd, xn.value.data(), wn.value.data(), self.grad.data(), gx, gw, gb);
        }
    });
}

Var leaky_relu(const Var& x, double slope) {
    Tensor y(x.shape());
    const auto xv = x.value().data();
    auto yv = y.data();
    const auto n = static_cast<std::int64_t>(yv.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const double v = xv[static_cast<std::size_t>(i)];
        yv[static_cast<std::size_t>(i)] = v > 0.0 ? v : slope * v;
    }
    return make_result(std::move(y), {x.node()}, [slope](Node& self) {
        Node& xn = *self.parents[0];
        auto gx = xn.grad_buffer().data();
        const auto xv = xn.value.data();
        const auto gy = self.grad.data();
        const auto n = static_cast<std::int64_t>(gy.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            gx[k] += xv[k] > 0.0 ? gy[k] : slope * gy[k];
        }
    });
}

Var sigmoid(const Var& x) {
    Tensor y(x.shape());
    const auto xv = x.value().data();
    auto yv = y.data();
    const auto n = static_cast<std::int64_t>(yv.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const double v = xv[static_cast<std::size_t>(i)];
        // Branches keep exp() from overflowing for large |v|.
        yv[static_cast<std::size_t>(i)] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    return make_result(std::move(y), {x.node()}, [](Node& self) {
        Node& xn = *self.parents[0];
        auto gx = xn.grad_buffer().data();
        const auto yv = self.value.data();
        const auto gy = self.grad.data();
        const auto n = static_cast<std::int64_t>(gy.size());
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(i);
            gx[k] += gy[k] * yv[k] * (1.0 - yv[k]);
        }
    });
}

Var upsample_nearest2x(const Var& x) {
    const Shape s = x.shape();
    const Shape o{s.n, s.c, 2 * s.d, 2 * s.h, 2 * s.w};
    Tensor y(o);
    const auto xv = x.value().data();
    auto yv = y.data();
    const std::int64_t planes = s.n * s.c;
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < planes; ++p)
        for (std::int64_t z = 0; z < o.d; ++z)
            for (std::int64_t yy = 0; yy < o.h; ++yy)
                for (std::int64_t xx = 0; xx < o.w; ++xx)
                    yv[static_cast<std::size_t>(((p * o.d + z) * o.h + yy) * o.w + xx)] =
                        xv[static_cast<std::size_t>(((p * s.d + z / 2) * s.h + yy / 2) * s.w + xx / 2)];
    return make_result(std::move(y), {x.node()}, [s, o](Node& self) {
        auto gx = self.parents[0]->grad_buffer().data();
        const auto gy = self.grad.data();
        const std::int64_t planes = s.n * s.c;
#pragma omp parallel for schedule(static)
        for (std::int64_t p = 0; p < planes; ++p)
            for (std::int64_t z = 0; z < o.d; ++z)
                for (std::int64_t yy = 0; yy < o.h; ++yy)
                    for (std::int64_t xx = 0; xx < o.w; ++xx)
                        gx[static_cast<std::size_t>(((p * s.d + z / 2) * s.h + yy / 2) * s.w + xx / 2)] +=
                            gy[static_cast<std::size_t>(((p * o.d + z) * o.h + yy) * o.w + xx)];
    });
}

Var concat_channels(const Var& a, const Var& b) {
    const Shape sa = a.shape();
    const Shape sb = b.shape();
    if (sa.n != sb.n || sa.d != sb.d || sa.h != sb.h || sa.w != sb.w) {
        throw Error(ErrorKind::ShapeMismatch, "concat_channels: " + to_string(sa) + " vs " + to_string(sb));
    }
    const Shape o{sa.n, sa.c + sb.c, sa.d, sa.h, sa.w};
    Tensor y(o);
    const std::int64_t sp = sa.spatial();
    auto yv = y.data();
    const auto av = a.value().data();
    const auto bv = b.value().data();
    for (std::int64_t n = 0; n < sa.n; ++n) {
        std::copy_n(av.begin() + n * sa.c * sp, sa.c * sp, yv.begin() + n * o.c * sp);
        std::copy_n(bv.begin() + n * sb.c * sp, sb.c * sp, yv.begin() + (n * o.c + sa.c) * sp);
    }
    return make_result(std::move(y), {a.node(), b.node()}, [sa, sb, sp](Node& self) {
        const auto gy = self.grad.data();
        const std::int64_t oc = sa.c + sb.c;
        for (int side = 0; side < 2; ++side) {
            Node& pn = *self.parents[static_cast<std::size_t>(side)];
            if (!pn.requires_grad) continue;
            auto g = pn.grad_buffer().data();
            const std::int64_t c = side == 0 ? sa.c : sb.c;
            const std::int64_t c0 = side == 0 ? 0 : sa.c;
            for (std::int64_t n = 0; n < sa.n; ++n)
                for (std::int64_t i = 0; i < c * sp; ++i)
                    g[static_cast<std::size_t>(n * c * sp + i)] += gy[static_cast<std::size_t>((n * oc + c0) * sp + i)];
        }
    });
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a.shape(), b.shape(), "add");
    Tensor y(a.shape());
    const auto av = a.value().data();
    const auto bv = b.value().data();
    auto yv = y.data();
    const auto n = static_cast<std::int64_t>(yv.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        yv[k] = av[k] + bv[k];
    }
    return make_result(std::move(y), {a.node(), b.node()}, [](Node& self) {
        const auto gy = self.grad.data();
        for (auto& p : self.parents) {
            if (!p->requires_grad) continue;
            auto g = p->grad_buffer().data();
            for (std::size_t k = 0; k < gy.size(); ++k) g[k] += gy[k];
        }
    });
}

Var sum(const Var& x) {
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    return make_result(Tensor(Shape{1, 1, 1, 1, 1}, s), {x.node()}, [](Node& self) {
        const double g = self.grad[0];
        for (auto& v : self.parents[0]->grad_buffer().data()) v += g;
    });
}

Var weighted(const Var& x, const Tensor& weights) {
    require_same_shape(x.shape(), weights.shape(), "weighted");
    Tensor y(x.shape());
    for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = x.value()[i] * weights[i];
    return make_result(std::move(y), {x.node()}, [weights](Node& self) {
        auto g = self.parents[0]->grad_buffer().data();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += self.grad.data()[k] * weights.data()[k];
    });
}

Var soft_dice_loss(const Var& pred, const Tensor& target, double eps) {
    require_same_shape(pred.shape(), target.shape(), "soft_dice_loss");
    const Shape s = pred.shape();
    const std::int64_t per = s.c * s.spatial();
    std::vector<double> inter(static_cast<std::size_t>(s.n)), denom(static_cast<std::size_t>(s.n));
    const auto pv = pred.value().data();
    const auto tv = target.data();
    double loss = 0.0;
    for (std::int64_t n = 0; n < s.n; ++n) {
        double pt = 0.0, ps = 0.0, ts = 0.0;
        for (std::int64_t i = n * per; i < (n + 1) * per; ++i) {
            const auto k = static_cast<std::size_t>(i);
            pt += pv[k] * tv[k];
            ps += pv[k];
            ts += tv[k];
        }
        inter[static_cast<std::size_t>(n)] = 2.0 * pt + eps;
        denom[static_cast<std::size_t>(n)] = ps + ts + eps;
        loss += 1.0 - inter[static_cast<std::size_t>(n)] / denom[static_cast<std::size_t>(n)];
    }
    loss /= static_cast<double>(s.n);
    return make_result(Tensor(Shape{1, 1, 1, 1, 1}, loss), {pred.node()},
                       [target, inter, denom, per, batch = s.n](Node& self) {
                           const double g = self.grad[0] / static_cast<double>(batch);
                           auto gp = self.parents[0]->grad_buffer().data();
                           const auto tv = target.data();
                           for (std::int64_t n = 0; n < batch; ++n) {
                               const double num = inter[static_cast<std::size_t>(n)];
                               const double den = denom[static_cast<std::size_t>(n)];
                               const double inv2 = 1.0 / (den * den);
                               for (std::int64_t i = n * per; i < (n + 1) * per; ++i) {
                                   const auto k = static_cast<std::size_t>(i);
                                   // d/dp of -(num / den)
                                   gp[k] += g * -(2.0 * tv[k] * den - num) * inv2;
                               }
                           }
                       });
}

}  // namespace cranial
