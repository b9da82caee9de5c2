// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "csiforge/errors.hpp"

namespace csiforge::autograd {

// Dense 64-bit real tensor. Shape is a plain dimension list; data is
// row-major with the last dimension fastest.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<double> data);

    std::size_t size() const { return v.size(); }
    int rows() const;
    int cols() const;
    bool finite() const;
};

std::size_t shape_size(const std::vector<int>& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the forward graph. Gradients accumulate into grad.v,
// which is allocated on first use so untouched graphs stay cheap.
struct Node {
    Tensor val;
    Tensor grad;
    std::vector<NodePtr> parents;
    std::function<void()> backprop; // adds into parents' grads
    bool requires_grad = false;
    bool backward_done = false;
    std::uint64_t id = 0;

    double* grad_data(); // allocates zeros on demand
    void zero_grad();
};

NodePtr make_leaf(Tensor t, bool requires_grad);
NodePtr make_const(Tensor t);

// Elementwise (identical shapes).
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr vdiv(const NodePtr& a, const NodePtr& b);

// y = s*x + c elementwise.
NodePtr affine(const NodePtr& x, double s, double c);

// Matrix products on 2-D tensors (Eigen-backed).
NodePtr matmul(const NodePtr& a, const NodePtr& b);    // A[m,k] B[k,n]
NodePtr matmul_nt(const NodePtr& a, const NodePtr& b); // A[m,k] B[n,k]^T
NodePtr matmul_tn(const NodePtr& a, const NodePtr& b); // A[k,m]^T B[k,n]

// Block-diagonal batched products: rows are grouped into `batch` equal
// blocks and each block is multiplied independently.
NodePtr bmm_nt(const NodePtr& a, const NodePtr& b, int batch);
NodePtr bmm(const NodePtr& a, const NodePtr& b, int batch);

// y = x + tile(t): rows(x) must be a multiple of rows(t). A 1-row t is a
// broadcast bias; t with P rows tiled over a batch adds a shared table.
NodePtr add_tiled(const NodePtr& x, const NodePtr& t);
NodePtr mul_tiled(const NodePtr& x, const NodePtr& t);

NodePtr softmax_rows(const NodePtr& x);
NodePtr layernorm_rows(const NodePtr& x, double eps = 1e-8);

NodePtr gelu(const NodePtr& x); // exact erf form
NodePtr sigmoid(const NodePtr& x);
NodePtr tanh_op(const NodePtr& x);
NodePtr sqrt_op(const NodePtr& x);

// out[i] = x[idx[i]]; backward scatter-adds. idx entries must be valid.
NodePtr gather(const NodePtr& x, std::vector<std::size_t> idx,
               std::vector<int> out_shape);

NodePtr slice_cols(const NodePtr& x, int c0, int c1);
NodePtr concat_cols(const std::vector<NodePtr>& parts);

NodePtr sum_rows(const NodePtr& x); // [r, c] -> [r, 1]

NodePtr sum(const NodePtr& x); // scalar [1]

// Reverse-mode accumulation from a scalar loss. Each reachable node is
// visited once in reverse creation order. Running it twice on the same
// loss node without resetting is rejected.
void backward(const NodePtr& loss);

// Central-finite-difference check of d(loss)/d(inputs). Builds the graph
// through `fn`, runs backward, then perturbs every coordinate of every
// tensor in `inputs` by +-step. Returns the max relative error
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double grad_check(
    const std::function<NodePtr(const std::vector<NodePtr>&)>& fn,
    const std::vector<Tensor>& inputs, double step = 1e-5,
    double floor = 1e-3);

} // namespace csiforge::autograd
