// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>

#include "csiforge/autograd.hpp"
#include "csiforge/grid.hpp"

namespace csiforge {

struct LossWeights {
    double beta = 0.05;    // smoothness weight
    double gamma = 0.1;    // correlation weight
    double lambda_t = 1.0; // time-gradient weight
    double lambda_f = 1.0; // frequency-gradient weight
    bool plain_nmse = false; // use nmse instead of the scaled variant

    void validate() const;
};

struct LossBreakdown {
    double total = 0.0;
    double pri = 0.0;
    double smooth = 0.0;
    double corr = 0.0;
    cplx alpha_star{0.0, 0.0};
};

// Grid-domain losses for a single estimate/reference pair.
double nmse(const ComplexGrid& est, const ComplexGrid& ref);

// Scale-projected variant: the estimate is first aligned to the reference
// by the least-squares complex scalar, making the value invariant to
// global phase and amplitude of either argument.
std::pair<double, cplx> sp_nmse(const ComplexGrid& est,
                                const ComplexGrid& ref);

double corr_loss(const ComplexGrid& est, const ComplexGrid& ref);

// Forward differences of the estimate along symbols and subcarriers,
// squared magnitudes summed with the lambda weights.
double smooth_loss(const ComplexGrid& est, const LossWeights& w);

LossBreakdown total_loss(const ComplexGrid& est, const ComplexGrid& ref,
                         const LossWeights& w);

// Differentiable batch losses over the {B, 2*K*L} tensor layout used by
// the models. Row-wise variants return one value per sample in {B, 1}.
namespace lossgraph {

using autograd::NodePtr;

NodePtr nmse_rows(const NodePtr& est, const NodePtr& ref);
NodePtr sp_nmse_rows(const NodePtr& est, const NodePtr& ref);
NodePtr corr_rows(const NodePtr& est, const NodePtr& ref);
NodePtr smooth_rows(const NodePtr& est, int K, int L,
                    const LossWeights& w);

struct Terms {
    NodePtr total; // scalar, batch mean
    NodePtr pri;
    NodePtr smooth;
    NodePtr corr;
};

Terms batch_loss(const NodePtr& est, const NodePtr& ref, int K, int L,
                 const LossWeights& w);

} // namespace lossgraph

} // namespace csiforge
