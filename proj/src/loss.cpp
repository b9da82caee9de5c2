// SPDX-License-Identifier: Apache-2.0
#include "csiforge/loss.hpp"

#include <cmath>

namespace csiforge {

namespace ag = autograd;

void LossWeights::validate() const {
    if (beta < 0 || gamma < 0 || lambda_t < 0 || lambda_f < 0)
        throw data_error("loss weights must be non-negative");
}

namespace {

void check_pair(const ComplexGrid& est, const ComplexGrid& ref) {
    if (!(est.shape() == ref.shape()))
        throw data_error("loss: estimate and reference shapes differ: " +
                         est.shape().str() + " vs " + ref.shape().str());
}

} // namespace

double nmse(const ComplexGrid& est, const ComplexGrid& ref) {
    check_pair(est, ref);
    const double hh = fro_norm_sq(ref);
    if (hh <= 0.0)
        throw data_error("nmse: reference grid is zero");
    double ee = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i)
        ee += std::norm(est.values()[i] - ref.values()[i]);
    return ee / hh;
}

std::pair<double, cplx> sp_nmse(const ComplexGrid& est,
                                const ComplexGrid& ref) {
    check_pair(est, ref);
    const double hh = fro_norm_sq(ref);
    if (hh <= 0.0)
        throw data_error("sp_nmse: reference grid is zero");
    const cplx dot = inner_product(est, ref);
    const cplx alpha = dot / hh;
    // ||e - a h||^2 = ||e||^2 - |<e,h>|^2 / ||h||^2 at the minimizer
    const double val = (fro_norm_sq(est) - std::norm(dot) / hh) / hh;
    return {std::max(val, 0.0), alpha};
}

double corr_loss(const ComplexGrid& est, const ComplexGrid& ref) {
    check_pair(est, ref);
    const double ee = fro_norm_sq(est), hh = fro_norm_sq(ref);
    if (ee <= 0.0 || hh <= 0.0)
        throw data_error("corr_loss: zero grid has no correlation");
    const double c = std::abs(inner_product(est, ref)) /
                     std::sqrt(ee * hh);
    return 1.0 - std::min(c, 1.0);
}

double smooth_loss(const ComplexGrid& est, const LossWeights& w) {
    w.validate();
    const GridShape& s = est.shape();
    double dt = 0.0, df = 0.0;
    for (int r = 0; r < s.n_rx; ++r)
        for (int t = 0; t < s.n_tx; ++t) {
            for (int l = 0; l + 1 < s.symbols; ++l)
                for (int k = 0; k < s.subcarriers; ++k)
                    dt += std::norm(est.at(k, l + 1, r, t) -
                                    est.at(k, l, r, t));
            for (int l = 0; l < s.symbols; ++l)
                for (int k = 0; k + 1 < s.subcarriers; ++k)
                    df += std::norm(est.at(k + 1, l, r, t) -
                                    est.at(k, l, r, t));
        }
    return w.lambda_t * dt + w.lambda_f * df;
}

LossBreakdown total_loss(const ComplexGrid& est, const ComplexGrid& ref,
                         const LossWeights& w) {
    w.validate();
    LossBreakdown out;
    if (w.plain_nmse) {
        out.pri = nmse(est, ref);
        const double hh = fro_norm_sq(ref);
        out.alpha_star = inner_product(est, ref) / hh;
    } else {
        auto [val, alpha] = sp_nmse(est, ref);
        out.pri = val;
        out.alpha_star = alpha;
    }
    out.smooth = smooth_loss(est, w);
    out.corr = corr_loss(est, ref);
    out.total = out.pri + w.beta * out.smooth + w.gamma * out.corr;
    return out;
}

namespace lossgraph {

namespace {

void check_tensors(const NodePtr& est, const NodePtr& ref) {
    if (est->val.shape != ref->val.shape)
        throw data_error("loss graph: estimate and reference shapes differ");
    if (est->val.cols() % 2 != 0)
        throw data_error("loss graph: expected a re/im channel layout");
}

struct ComplexCols {
    NodePtr re, im;
};

ComplexCols planes(const NodePtr& x) {
    const int half = x->val.cols() / 2;
    return {ag::slice_cols(x, 0, half), ag::slice_cols(x, half, 2 * half)};
}

// per-row <e, r> = sum e * conj(r) over the complex layout
std::pair<NodePtr, NodePtr> dot_rows(const ComplexCols& e,
                                     const ComplexCols& r) {
    auto re = ag::sum_rows(
        ag::add(ag::mul(e.re, r.re), ag::mul(e.im, r.im)));
    auto im = ag::sum_rows(
        ag::sub(ag::mul(e.im, r.re), ag::mul(e.re, r.im)));
    return {re, im};
}

NodePtr norm_sq_rows(const NodePtr& x) {
    return ag::sum_rows(ag::mul(x, x));
}

void require_positive_rows(const NodePtr& n, const char* what) {
    for (double v : n->val.v)
        if (!(v > 0.0))
            throw data_error(std::string("loss graph: ") + what +
                             " has a zero row");
}

} // namespace

NodePtr nmse_rows(const NodePtr& est, const NodePtr& ref) {
    check_tensors(est, ref);
    auto hh = norm_sq_rows(ref);
    require_positive_rows(hh, "reference");
    auto d = ag::sub(est, ref);
    return ag::vdiv(norm_sq_rows(d), hh);
}

NodePtr sp_nmse_rows(const NodePtr& est, const NodePtr& ref) {
    check_tensors(est, ref);
    auto hh = norm_sq_rows(ref);
    require_positive_rows(hh, "reference");
    auto e = planes(est), r = planes(ref);
    auto [dre, dim] = dot_rows(e, r);
    auto dot_sq = ag::add(ag::mul(dre, dre), ag::mul(dim, dim));
    auto ee = norm_sq_rows(est);
    return ag::vdiv(ag::sub(ee, ag::vdiv(dot_sq, hh)), hh);
}

NodePtr corr_rows(const NodePtr& est, const NodePtr& ref) {
    check_tensors(est, ref);
    auto ee = norm_sq_rows(est);
    auto hh = norm_sq_rows(ref);
    require_positive_rows(ee, "estimate");
    require_positive_rows(hh, "reference");
    auto e = planes(est), r = planes(ref);
    auto [dre, dim] = dot_rows(e, r);
    auto mag = ag::sqrt_op(ag::add(ag::mul(dre, dre), ag::mul(dim, dim)));
    auto denom = ag::sqrt_op(ag::mul(ee, hh));
    return ag::affine(ag::vdiv(mag, denom), -1.0, 1.0);
}

NodePtr smooth_rows(const NodePtr& est, int K, int L,
                    const LossWeights& w) {
    w.validate();
    if (K < 1 || L < 1 || est->val.cols() != 2 * K * L)
        throw data_error("loss graph: grid dimensions do not match tensor");
    const int B = est->val.rows();
    auto shifted = [&](int dl, int dk, int nl, int nk) {
        // rows of (b, c, l, k) windows offset by (dl, dk)
        std::vector<std::size_t> idx;
        idx.reserve(std::size_t(B) * 2 * nl * nk);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < 2; ++c)
                for (int l = 0; l < nl; ++l)
                    for (int k = 0; k < nk; ++k)
                        idx.push_back(
                            ((std::size_t(b) * 2 + c) * L + l + dl) * K + k +
                            dk);
        return ag::gather(est, std::move(idx), {B, 2 * nl * nk});
    };
    NodePtr acc;
    if (L > 1 && w.lambda_t != 0.0) {
        auto d = ag::sub(shifted(1, 0, L - 1, K), shifted(0, 0, L - 1, K));
        acc = ag::affine(norm_sq_rows(d), w.lambda_t, 0.0);
    }
    if (K > 1 && w.lambda_f != 0.0) {
        auto d = ag::sub(shifted(0, 1, L, K - 1), shifted(0, 0, L, K - 1));
        auto f = ag::affine(norm_sq_rows(d), w.lambda_f, 0.0);
        acc = acc ? ag::add(acc, f) : f;
    }
    if (!acc)
        acc = ag::make_const(ag::Tensor({B, 1}));
    return acc;
}

Terms batch_loss(const NodePtr& est, const NodePtr& ref, int K, int L,
                 const LossWeights& w) {
    w.validate();
    check_tensors(est, ref);
    const int B = est->val.rows();
    const double inv_b = 1.0 / B;
    auto mean = [&](const NodePtr& rows) {
        return ag::affine(ag::sum(rows), inv_b, 0.0);
    };
    Terms t;
    t.pri = mean(w.plain_nmse ? nmse_rows(est, ref)
                              : sp_nmse_rows(est, ref));
    t.smooth = mean(smooth_rows(est, K, L, w));
    t.corr = mean(corr_rows(est, ref));
    t.total = ag::add(t.pri, ag::add(ag::affine(t.smooth, w.beta, 0.0),
                                     ag::affine(t.corr, w.gamma, 0.0)));
    return t;
}

} // namespace lossgraph

} // namespace csiforge
