// SPDX-License-Identifier: Apache-2.0
#include "csiforge/autograd.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace csiforge::autograd {

using MapRM =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>;
using CMapRM =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;

std::size_t shape_size(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0)
            throw data_error("tensor shape dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    return shape.empty() ? 0 : n;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
    v.assign(shape_size(shape), 0.0);
}

Tensor::Tensor(std::vector<int> s, std::vector<double> data)
    : shape(std::move(s)), v(std::move(data)) {
    if (v.size() != shape_size(shape))
        throw data_error("tensor data does not match shape");
}

int Tensor::rows() const {
    if (shape.size() == 2)
        return shape[0];
    if (shape.size() == 1)
        return 1;
    throw data_error("tensor is not a matrix");
}

int Tensor::cols() const {
    if (shape.size() == 2)
        return shape[1];
    if (shape.size() == 1)
        return shape[0];
    throw data_error("tensor is not a matrix");
}

bool Tensor::finite() const {
    for (double x : v)
        if (!std::isfinite(x))
            return false;
    return true;
}

double* Node::grad_data() {
    if (grad.v.empty()) {
        grad.shape = val.shape;
        grad.v.assign(val.size(), 0.0);
    }
    return grad.v.data();
}

void Node::zero_grad() {
    std::fill(grad.v.begin(), grad.v.end(), 0.0);
    backward_done = false;
}

namespace {

using Packet = Eigen::internal::packet_traits<double>::type;
constexpr int kPacket = Eigen::internal::unpacket_traits<Packet>::size;

// exp(in[j] - shift) with a fixed packet stride so results do not depend
// on heap alignment; the padded tail keeps every lane on the same code path
void exp_shifted(const double* in, double* out, int n, double shift) {
    using namespace Eigen::internal;
    const Packet sh = pset1<Packet>(shift);
    int j = 0;
    for (; j + kPacket <= n; j += kPacket)
        pstoreu(out + j, pexp(psub(ploadu<Packet>(in + j), sh)));
    if (j < n) {
        double tmp[kPacket];
        for (int t = 0; t < kPacket; ++t)
            tmp[t] = t < n - j ? in[j + t] - shift : 0.0;
        pstoreu(tmp, pexp(ploadu<Packet>(tmp)));
        for (int t = 0; t < n - j; ++t)
            out[j + t] = tmp[t];
    }
}

std::atomic<std::uint64_t> g_next_id{1};

NodePtr make_node(Tensor val, std::vector<NodePtr> parents) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad)
            n->requires_grad = true;
    n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
    return n;
}

void check_same_shape(const NodePtr& a, const NodePtr& b, const char* op) {
    if (a->val.shape != b->val.shape)
        throw data_error(std::string(op) + ": operand shapes differ");
}

} // namespace

NodePtr make_leaf(Tensor t, bool requires_grad) {
    auto n = make_node(std::move(t), {});
    n->requires_grad = requires_grad;
    return n;
}

NodePtr make_const(Tensor t) { return make_leaf(std::move(t), false); }

NodePtr add(const NodePtr& a, const NodePtr& b) {
    check_same_shape(a, b, "add");
    Tensor out(a->val.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = a->val.v[i] + b->val.v[i];
    auto n = make_node(std::move(out), {a, b});
    Node *self = n.get(), *pa = a.get(), *pb = b.get();
    n->backprop = [self, pa, pb] {
        const std::size_t m = self->grad.v.size();
        if (pa->requires_grad) {
            double* g = pa->grad_data();
            for (std::size_t i = 0; i < m; ++i)
                g[i] += self->grad.v[i];
        }
        if (pb->requires_grad) {
            double* g = pb->grad_data();
            for (std::size_t i = 0; i < m; ++i)
                g[i] += self->grad.v[i];
        }
    };
    return n;
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a->val.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = a->val.v[i] - b->val.v[i];
    auto n = make_node(std::move(out), {a, b});
    Node *self = n.get(), *pa = a.get(), *pb = b.get();
    n->backprop = [self, pa, pb] {
        const std::size_t m = self->grad.v.size();
        if (pa->requires_grad) {
            double* g = pa->grad_data();
            for (std::size_t i = 0; i < m; ++i)
                g[i] += self->grad.v[i];
        }
        if (pb->requires_grad) {
            double* g = pb->grad_data();
            for (std::size_t i = 0; i < m; ++i)
                g[i] -= self->grad.v[i];
        }
    };
    return n;
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a->val.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = a->val.v[i] * b->val.v[i];
    auto n = make_node(std::move(out), {a, b});
    Node *self = n.get(), *pa = a.get(), *pb = b.get();
    n->backprop = [self, pa, pb] {
        const std::size_t m = self->grad.v.size();
        if (pa->requires_grad) {
            double* g = pa->grad_data();
            for (std::size_t i = 0; i < m; ++i)
                g[i] += self->grad.v[i] * pb->val.v[i];
        }
        if (pb->requires_grad) {
            double* g = pb->grad_data();
            for (std::size_t i = 0; i < m; ++i)
                g[i] += self->grad.v[i] * pa->val.v[i];
        }
    };
    return n;
}

NodePtr vdiv(const NodePtr& a, const NodePtr& b) {
    check_same_shape(a, b, "vdiv");
    Tensor out(a->val.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = a->val.v[i] / b->val.v[i];
    auto n = make_node(std::move(out), {a, b});
    Node *self = n.get(), *pa = a.get(), *pb = b.get();
    n->backprop = [self, pa, pb] {
        const std::size_t m = self->grad.v.size();
        if (pa->requires_grad) {
            double* g = pa->grad_data();
            for (std::size_t i = 0; i < m; ++i)
                g[i] += self->grad.v[i] / pb->val.v[i];
        }
        if (pb->requires_grad) {
            double* g = pb->grad_data();
            for (std::size_t i = 0; i < m; ++i)
                g[i] -= self->grad.v[i] * self->val.v[i] / pb->val.v[i];
        }
    };
    return n;
}

NodePtr affine(const NodePtr& x, double s, double c) {
    Tensor out(x->val.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = s * x->val.v[i] + c;
    auto n = make_node(std::move(out), {x});
    Node *self = n.get(), *px = x.get();
    n->backprop = [self, px, s] {
        if (!px->requires_grad)
            return;
        double* g = px->grad_data();
        for (std::size_t i = 0; i < self->grad.v.size(); ++i)
            g[i] += s * self->grad.v[i];
    };
    return n;
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    const int m = a->val.rows(), k = a->val.cols(), n2 = b->val.cols();
    if (b->val.rows() != k)
        throw data_error("matmul: inner dimensions differ");
    Tensor out({m, n2});
    {
        CMapRM A(a->val.v.data(), m, k), B(b->val.v.data(), k, n2);
        MapRM C(out.v.data(), m, n2);
        C.noalias() = A * B;
    }
    auto node = make_node(std::move(out), {a, b});
    Node *self = node.get(), *pa = a.get(), *pb = b.get();
    node->backprop = [self, pa, pb, m, k, n2] {
        CMapRM dC(self->grad.v.data(), m, n2);
        if (pa->requires_grad) {
            CMapRM B(pb->val.v.data(), k, n2);
            MapRM gA(pa->grad_data(), m, k);
            gA.noalias() += dC * B.transpose();
        }
        if (pb->requires_grad) {
            CMapRM A(pa->val.v.data(), m, k);
            MapRM gB(pb->grad_data(), k, n2);
            gB.noalias() += A.transpose() * dC;
        }
    };
    return node;
}

NodePtr matmul_nt(const NodePtr& a, const NodePtr& b) {
    const int m = a->val.rows(), k = a->val.cols(), n2 = b->val.rows();
    if (b->val.cols() != k)
        throw data_error("matmul_nt: inner dimensions differ");
    Tensor out({m, n2});
    {
        CMapRM A(a->val.v.data(), m, k), B(b->val.v.data(), n2, k);
        MapRM C(out.v.data(), m, n2);
        C.noalias() = A * B.transpose();
    }
    auto node = make_node(std::move(out), {a, b});
    Node *self = node.get(), *pa = a.get(), *pb = b.get();
    node->backprop = [self, pa, pb, m, k, n2] {
        CMapRM dC(self->grad.v.data(), m, n2);
        if (pa->requires_grad) {
            CMapRM B(pb->val.v.data(), n2, k);
            MapRM gA(pa->grad_data(), m, k);
            gA.noalias() += dC * B;
        }
        if (pb->requires_grad) {
            CMapRM A(pa->val.v.data(), m, k);
            MapRM gB(pb->grad_data(), n2, k);
            gB.noalias() += dC.transpose() * A;
        }
    };
    return node;
}

NodePtr matmul_tn(const NodePtr& a, const NodePtr& b) {
    const int k = a->val.rows(), m = a->val.cols(), n2 = b->val.cols();
    if (b->val.rows() != k)
        throw data_error("matmul_tn: inner dimensions differ");
    Tensor out({m, n2});
    {
        CMapRM A(a->val.v.data(), k, m), B(b->val.v.data(), k, n2);
        MapRM C(out.v.data(), m, n2);
        C.noalias() = A.transpose() * B;
    }
    auto node = make_node(std::move(out), {a, b});
    Node *self = node.get(), *pa = a.get(), *pb = b.get();
    node->backprop = [self, pa, pb, k, m, n2] {
        CMapRM dC(self->grad.v.data(), m, n2);
        if (pa->requires_grad) {
            CMapRM B(pb->val.v.data(), k, n2);
            MapRM gA(pa->grad_data(), k, m);
            gA.noalias() += B * dC.transpose();
        }
        if (pb->requires_grad) {
            CMapRM A(pa->val.v.data(), k, m);
            MapRM gB(pb->grad_data(), k, n2);
            gB.noalias() += A * dC;
        }
    };
    return node;
}

namespace {

void check_batched(const NodePtr& a, const NodePtr& b, int batch,
                   const char* op) {
    if (batch <= 0)
        throw data_error(std::string(op) + ": batch must be positive");
    if (a->val.rows() % batch != 0 || b->val.rows() % batch != 0)
        throw data_error(std::string(op) +
                         ": rows not divisible by batch");
}

} // namespace

NodePtr bmm_nt(const NodePtr& a, const NodePtr& b, int batch) {
    check_batched(a, b, batch, "bmm_nt");
    const int m = a->val.rows() / batch, k = a->val.cols();
    const int n2 = b->val.rows() / batch;
    if (b->val.cols() != k)
        throw data_error("bmm_nt: inner dimensions differ");
    Tensor out({batch * m, n2});
    for (int i = 0; i < batch; ++i) {
        CMapRM A(a->val.v.data() + std::size_t(i) * m * k, m, k);
        CMapRM B(b->val.v.data() + std::size_t(i) * n2 * k, n2, k);
        MapRM C(out.v.data() + std::size_t(i) * m * n2, m, n2);
        C.noalias() = A * B.transpose();
    }
    auto node = make_node(std::move(out), {a, b});
    Node *self = node.get(), *pa = a.get(), *pb = b.get();
    node->backprop = [self, pa, pb, batch, m, k, n2] {
        for (int i = 0; i < batch; ++i) {
            CMapRM dC(self->grad.v.data() + std::size_t(i) * m * n2, m, n2);
            if (pa->requires_grad) {
                CMapRM B(pb->val.v.data() + std::size_t(i) * n2 * k, n2, k);
                MapRM gA(pa->grad_data() + std::size_t(i) * m * k, m, k);
                gA.noalias() += dC * B;
            }
            if (pb->requires_grad) {
                CMapRM A(pa->val.v.data() + std::size_t(i) * m * k, m, k);
                MapRM gB(pb->grad_data() + std::size_t(i) * n2 * k, n2, k);
                gB.noalias() += dC.transpose() * A;
            }
        }
    };
    return node;
}

NodePtr bmm(const NodePtr& a, const NodePtr& b, int batch) {
    check_batched(a, b, batch, "bmm");
    const int m = a->val.rows() / batch, k = a->val.cols();
    const int k2 = b->val.rows() / batch, n2 = b->val.cols();
    if (k2 != k)
        throw data_error("bmm: inner dimensions differ");
    Tensor out({batch * m, n2});
    for (int i = 0; i < batch; ++i) {
        CMapRM A(a->val.v.data() + std::size_t(i) * m * k, m, k);
        CMapRM B(b->val.v.data() + std::size_t(i) * k * n2, k, n2);
        MapRM C(out.v.data() + std::size_t(i) * m * n2, m, n2);
        C.noalias() = A * B;
    }
    auto node = make_node(std::move(out), {a, b});
    Node *self = node.get(), *pa = a.get(), *pb = b.get();
    node->backprop = [self, pa, pb, batch, m, k, n2] {
        for (int i = 0; i < batch; ++i) {
            CMapRM dC(self->grad.v.data() + std::size_t(i) * m * n2, m, n2);
            if (pa->requires_grad) {
                CMapRM B(pb->val.v.data() + std::size_t(i) * k * n2, k, n2);
                MapRM gA(pa->grad_data() + std::size_t(i) * m * k, m, k);
                gA.noalias() += dC * B.transpose();
            }
            if (pb->requires_grad) {
                CMapRM A(pa->val.v.data() + std::size_t(i) * m * k, m, k);
                MapRM gB(pb->grad_data() + std::size_t(i) * k * n2, k, n2);
                gB.noalias() += A.transpose() * dC;
            }
        }
    };
    return node;
}

NodePtr add_tiled(const NodePtr& x, const NodePtr& t) {
    const int R = x->val.rows(), C = x->val.cols();
    const int r = t->val.rows();
    if (t->val.cols() != C || R % r != 0)
        throw data_error("add_tiled: tile shape incompatible");
    Tensor out({R, C});
    const std::size_t block = std::size_t(r) * C;
    for (int i = 0; i < R / r; ++i)
        for (std::size_t j = 0; j < block; ++j)
            out.v[std::size_t(i) * block + j] =
                x->val.v[std::size_t(i) * block + j] + t->val.v[j];
    auto n = make_node(std::move(out), {x, t});
    Node *self = n.get(), *px = x.get(), *pt = t.get();
    n->backprop = [self, px, pt, block] {
        const std::size_t m = self->grad.v.size();
        if (px->requires_grad) {
            double* g = px->grad_data();
            for (std::size_t i = 0; i < m; ++i)
                g[i] += self->grad.v[i];
        }
        if (pt->requires_grad) {
            double* g = pt->grad_data();
            for (std::size_t i = 0; i < m; i += block)
                for (std::size_t j = 0; j < block; ++j)
                    g[j] += self->grad.v[i + j];
        }
    };
    return n;
}

NodePtr mul_tiled(const NodePtr& x, const NodePtr& t) {
    const int R = x->val.rows(), C = x->val.cols();
    const int r = t->val.rows();
    if (t->val.cols() != C || R % r != 0)
        throw data_error("mul_tiled: tile shape incompatible");
    Tensor out({R, C});
    const std::size_t block = std::size_t(r) * C;
    for (std::size_t i = 0; i < out.size(); i += block)
        for (std::size_t j = 0; j < block; ++j)
            out.v[i + j] = x->val.v[i + j] * t->val.v[j];
    auto n = make_node(std::move(out), {x, t});
    Node *self = n.get(), *px = x.get(), *pt = t.get();
    n->backprop = [self, px, pt, block] {
        const std::size_t m = self->grad.v.size();
        if (px->requires_grad) {
            double* g = px->grad_data();
            for (std::size_t i = 0; i < m; i += block)
                for (std::size_t j = 0; j < block; ++j)
                    g[i + j] += self->grad.v[i + j] * pt->val.v[j];
        }
        if (pt->requires_grad) {
            double* g = pt->grad_data();
            for (std::size_t i = 0; i < m; i += block)
                for (std::size_t j = 0; j < block; ++j)
                    g[j] += self->grad.v[i + j] * px->val.v[i + j];
        }
    };
    return n;
}

NodePtr softmax_rows(const NodePtr& x) {
    const int R = x->val.rows(), C = x->val.cols();
    Tensor out({R, C});
    for (int i = 0; i < R; ++i) {
        const double* row = x->val.v.data() + std::size_t(i) * C;
        double* o = out.v.data() + std::size_t(i) * C;
        double mx = row[0];
        for (int j = 1; j < C; ++j)
            mx = std::max(mx, row[j]);
        if (!std::isfinite(mx))
            throw numeric_error("softmax_rows: non-finite logits");
        exp_shifted(row, o, C, mx);
        double s = 0.0;
        for (int j = 0; j < C; ++j)
            s += o[j];
        for (int j = 0; j < C; ++j)
            o[j] /= s;
    }
    auto n = make_node(std::move(out), {x});
    Node *self = n.get(), *px = x.get();
    n->backprop = [self, px, R, C] {
        if (!px->requires_grad)
            return;
        double* g = px->grad_data();
        for (int i = 0; i < R; ++i) {
            const double* y = self->val.v.data() + std::size_t(i) * C;
            const double* dy = self->grad.v.data() + std::size_t(i) * C;
            double dot = 0.0;
            for (int j = 0; j < C; ++j)
                dot += dy[j] * y[j];
            double* gr = g + std::size_t(i) * C;
            for (int j = 0; j < C; ++j)
                gr[j] += y[j] * (dy[j] - dot);
        }
    };
    return n;
}

NodePtr layernorm_rows(const NodePtr& x, double eps) {
    const int R = x->val.rows(), C = x->val.cols();
    Tensor out({R, C});
    std::vector<double> inv_std(R);
    for (int i = 0; i < R; ++i) {
        const double* row = x->val.v.data() + std::size_t(i) * C;
        double mu = 0.0;
        for (int j = 0; j < C; ++j)
            mu += row[j];
        mu /= C;
        double var = 0.0;
        for (int j = 0; j < C; ++j)
            var += (row[j] - mu) * (row[j] - mu);
        var /= C;
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std[i] = inv;
        double* o = out.v.data() + std::size_t(i) * C;
        for (int j = 0; j < C; ++j)
            o[j] = (row[j] - mu) * inv;
    }
    auto n = make_node(std::move(out), {x});
    Node *self = n.get(), *px = x.get();
    n->backprop = [self, px, R, C, inv_std = std::move(inv_std)] {
        if (!px->requires_grad)
            return;
        double* g = px->grad_data();
        for (int i = 0; i < R; ++i) {
            const double* y = self->val.v.data() + std::size_t(i) * C;
            const double* dy = self->grad.v.data() + std::size_t(i) * C;
            double m_dy = 0.0, m_dyy = 0.0;
            for (int j = 0; j < C; ++j) {
                m_dy += dy[j];
                m_dyy += dy[j] * y[j];
            }
            m_dy /= C;
            m_dyy /= C;
            double* gr = g + std::size_t(i) * C;
            for (int j = 0; j < C; ++j)
                gr[j] += inv_std[i] * (dy[j] - m_dy - y[j] * m_dyy);
        }
    };
    return n;
}

NodePtr gelu(const NodePtr& x) {
    Tensor out(x->val.shape);
    // cache the gaussian cdf so backward does not repeat the erf
    auto cdf = std::make_shared<std::vector<double>>(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = x->val.v[i];
        const double c = 0.5 * (1.0 + std::erf(v / std::numbers::sqrt2));
        (*cdf)[i] = c;
        out.v[i] = v * c;
    }
    auto n = make_node(std::move(out), {x});
    Node *self = n.get(), *px = x.get();
    n->backprop = [self, px, cdf] {
        if (!px->requires_grad)
            return;
        using namespace Eigen::internal;
        const std::size_t m = self->grad.v.size();
        double* g = px->grad_data();
        const double* v = px->val.v.data();
        const double* dy = self->grad.v.data();
        const double* c = cdf->data();
        const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
        const Packet half = pset1<Packet>(-0.5);
        const Packet k = pset1<Packet>(inv_sqrt2pi);
        std::size_t i = 0;
        for (; i + kPacket <= m; i += std::size_t(kPacket)) {
            const Packet pv = ploadu<Packet>(v + i);
            const Packet phi = pmul(pexp(pmul(half, pmul(pv, pv))), k);
            const Packet t = padd(ploadu<Packet>(c + i), pmul(pv, phi));
            pstoreu(g + i,
                    padd(ploadu<Packet>(g + i), pmul(ploadu<Packet>(dy + i), t)));
        }
        for (; i < m; ++i) {
            const double phi = std::exp(-0.5 * v[i] * v[i]) * inv_sqrt2pi;
            g[i] += dy[i] * (c[i] + v[i] * phi);
        }
    };
    return n;
}

NodePtr sigmoid(const NodePtr& x) {
    Tensor out(x->val.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = 1.0 / (1.0 + std::exp(-x->val.v[i]));
    auto n = make_node(std::move(out), {x});
    Node *self = n.get(), *px = x.get();
    n->backprop = [self, px] {
        if (!px->requires_grad)
            return;
        double* g = px->grad_data();
        for (std::size_t i = 0; i < self->grad.v.size(); ++i) {
            const double s = self->val.v[i];
            g[i] += self->grad.v[i] * s * (1.0 - s);
        }
    };
    return n;
}

NodePtr tanh_op(const NodePtr& x) {
    Tensor out(x->val.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = std::tanh(x->val.v[i]);
    auto n = make_node(std::move(out), {x});
    Node *self = n.get(), *px = x.get();
    n->backprop = [self, px] {
        if (!px->requires_grad)
            return;
        double* g = px->grad_data();
        for (std::size_t i = 0; i < self->grad.v.size(); ++i) {
            const double t = self->val.v[i];
            g[i] += self->grad.v[i] * (1.0 - t * t);
        }
    };
    return n;
}

NodePtr sqrt_op(const NodePtr& x) {
    Tensor out(x->val.shape);
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (x->val.v[i] < 0.0)
            throw numeric_error("sqrt_op: negative input");
        out.v[i] = std::sqrt(x->val.v[i]);
    }
    auto n = make_node(std::move(out), {x});
    Node *self = n.get(), *px = x.get();
    n->backprop = [self, px] {
        if (!px->requires_grad)
            return;
        double* g = px->grad_data();
        for (std::size_t i = 0; i < self->grad.v.size(); ++i) {
            if (self->val.v[i] == 0.0)
                throw numeric_error("sqrt_op: derivative at zero");
            g[i] += self->grad.v[i] * 0.5 / self->val.v[i];
        }
    };
    return n;
}

NodePtr gather(const NodePtr& x, std::vector<std::size_t> idx,
               std::vector<int> out_shape) {
    if (idx.size() != shape_size(out_shape))
        throw data_error("gather: index count does not match output shape");
    Tensor out(std::move(out_shape));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= x->val.size())
            throw data_error("gather: index out of range");
        out.v[i] = x->val.v[idx[i]];
    }
    auto n = make_node(std::move(out), {x});
    Node *self = n.get(), *px = x.get();
    n->backprop = [self, px, idx = std::move(idx)] {
        if (!px->requires_grad)
            return;
        double* g = px->grad_data();
        for (std::size_t i = 0; i < idx.size(); ++i)
            g[idx[i]] += self->grad.v[i];
    };
    return n;
}

NodePtr slice_cols(const NodePtr& x, int c0, int c1) {
    const int R = x->val.rows(), C = x->val.cols();
    if (c0 < 0 || c1 > C || c0 >= c1)
        throw data_error("slice_cols: bad column range");
    const int W = c1 - c0;
    Tensor out({R, W});
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < W; ++j)
            out.v[std::size_t(i) * W + j] =
                x->val.v[std::size_t(i) * C + c0 + j];
    auto n = make_node(std::move(out), {x});
    Node *self = n.get(), *px = x.get();
    n->backprop = [self, px, R, C, c0, W] {
        if (!px->requires_grad)
            return;
        double* g = px->grad_data();
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < W; ++j)
                g[std::size_t(i) * C + c0 + j] +=
                    self->grad.v[std::size_t(i) * W + j];
    };
    return n;
}

NodePtr concat_cols(const std::vector<NodePtr>& parts) {
    if (parts.empty())
        throw data_error("concat_cols: no operands");
    const int R = parts[0]->val.rows();
    int C = 0;
    for (const auto& p : parts) {
        if (p->val.rows() != R)
            throw data_error("concat_cols: row counts differ");
        C += p->val.cols();
    }
    Tensor out({R, C});
    std::vector<int> offs;
    int off = 0;
    for (const auto& p : parts) {
        const int W = p->val.cols();
        offs.push_back(off);
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < W; ++j)
                out.v[std::size_t(i) * C + off + j] =
                    p->val.v[std::size_t(i) * W + j];
        off += W;
    }
    auto n = make_node(std::move(out), parts);
    Node* self = n.get();
    std::vector<Node*> raw;
    raw.reserve(parts.size());
    for (const auto& p : parts)
        raw.push_back(p.get());
    n->backprop = [self, raw = std::move(raw), offs = std::move(offs), R, C] {
        for (std::size_t pi = 0; pi < raw.size(); ++pi) {
            Node* p = raw[pi];
            if (!p->requires_grad)
                continue;
            const int W = p->val.cols();
            double* g = p->grad_data();
            for (int i = 0; i < R; ++i)
                for (int j = 0; j < W; ++j)
                    g[std::size_t(i) * W + j] +=
                        self->grad.v[std::size_t(i) * C + offs[pi] + j];
        }
    };
    return n;
}

NodePtr sum_rows(const NodePtr& x) {
    const int R = x->val.rows(), C = x->val.cols();
    Tensor out({R, 1});
    for (int r = 0; r < R; ++r) {
        double s = 0.0;
        for (int c = 0; c < C; ++c)
            s += x->val.v[std::size_t(r) * C + c];
        out.v[r] = s;
    }
    auto n = make_node(std::move(out), {x});
    Node *self = n.get(), *px = x.get();
    n->backprop = [self, px, R, C] {
        if (!px->requires_grad)
            return;
        double* g = px->grad_data();
        for (int r = 0; r < R; ++r) {
            const double d = self->grad.v[r];
            for (int c = 0; c < C; ++c)
                g[std::size_t(r) * C + c] += d;
        }
    };
    return n;
}

NodePtr sum(const NodePtr& x) {
    Tensor out({1});
    double s = 0.0;
    for (double v : x->val.v)
        s += v;
    out.v[0] = s;
    auto n = make_node(std::move(out), {x});
    Node *self = n.get(), *px = x.get();
    n->backprop = [self, px] {
        if (!px->requires_grad)
            return;
        double* g = px->grad_data();
        const double d = self->grad.v[0];
        for (std::size_t i = 0; i < px->val.size(); ++i)
            g[i] += d;
    };
    return n;
}

void backward(const NodePtr& loss) {
    if (!loss)
        throw usage_error("backward: null loss node");
    if (loss->val.size() != 1)
        throw usage_error("backward: loss must be scalar");
    if (loss->backward_done)
        throw usage_error(
            "backward: already propagated for this node; reset gradients "
            "first");
    loss->backward_done = true;

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{loss.get()};
    seen.insert(loss.get());
    while (!stack.empty()) {
        Node* nd = stack.back();
        stack.pop_back();
        order.push_back(nd);
        for (const auto& p : nd->parents)
            if (p->requires_grad && seen.insert(p.get()).second)
                stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](const Node* a, const Node* b) { return a->id > b->id; });

    loss->grad_data()[0] += 1.0;
    for (Node* nd : order)
        if (nd->backprop && nd->requires_grad && !nd->grad.v.empty())
            nd->backprop();
}

double grad_check(
    const std::function<NodePtr(const std::vector<NodePtr>&)>& fn,
    const std::vector<Tensor>& inputs, double step, double floor) {
    std::vector<NodePtr> leaves;
    leaves.reserve(inputs.size());
    for (const auto& t : inputs)
        leaves.push_back(make_leaf(t, true));
    NodePtr loss = fn(leaves);
    backward(loss);

    auto eval_at = [&](std::size_t which, std::size_t coord,
                       double delta) -> double {
        std::vector<NodePtr> probe;
        probe.reserve(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            Tensor t = inputs[i];
            if (i == which)
                t.v[coord] += delta;
            probe.push_back(make_leaf(std::move(t), false));
        }
        return fn(probe)->val.v[0];
    };

    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        for (std::size_t c = 0; c < inputs[i].size(); ++c) {
            const double analytic =
                leaves[i]->grad.v.empty() ? 0.0 : leaves[i]->grad.v[c];
            const double numeric =
                (eval_at(i, c, step) - eval_at(i, c, -step)) / (2.0 * step);
            const double rel =
                std::abs(analytic - numeric) /
                std::max({std::abs(analytic), std::abs(numeric), floor});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

} // namespace csiforge::autograd
