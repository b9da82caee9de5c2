// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csiforge/channel.hpp"
#include "csiforge/grid.hpp"
#include "csiforge/pilots.hpp"

namespace csiforge {

// Second-order statistics over the pilot-subcarrier vector:
// R_hh[i,j] = sum_p sigma_p^2 exp(-j 2 pi (k_i - k_j) df tau_p).
struct ChannelPrior {
    std::vector<int> pilot_subcarriers; // sorted, the comb of one pilot symbol
    std::vector<cplx> r_hh;             // row-major n x n
    double sigma2 = 0.0;

    int n() const { return int(pilot_subcarriers.size()); }
    const cplx& r(int i, int j) const { return r_hh[std::size_t(i) * n() + j]; }
    // Hermitian PSD up to -1e-9 minimum eigenvalue after symmetrization.
    void validate() const;
};

ChannelPrior build_prior(const TapProfile& profile, const DopplerSpec& doppler,
                         double subcarrier_spacing,
                         const std::vector<int>& pilot_subcarriers,
                         double sigma2);

// Posterior-mean smoothing of the raw pilot observations per pilot-bearing
// symbol, then the same hold-and-interpolate fill as the sparse pipeline.
ComplexGrid lmmse_estimate(const std::vector<cplx>& y, const PilotMask& mask,
                           const ChannelPrior& prior);

// Plug-in denoiser: apply(v, sigma) with sigma the observation-noise
// standard deviation.
struct Denoiser {
    std::string name;
    std::function<ComplexGrid(const ComplexGrid&, double)> apply;
};

// "identity" or "soft-delay" (complex soft-threshold in the delay domain,
// lambda = sigma * sqrt(2 log K)).
Denoiser make_denoiser(const std::string& name);

// Hutchinson divergence estimate of the denoiser Jacobian over the real view,
// single +-1 probe; exact for linear denoisers.
double divergence_mc(const Denoiser& den, const ComplexGrid& x,
                     double sigma_hat, uint64_t seed);

struct DampState {
    ComplexGrid x;       // current grid estimate
    std::vector<cplx> z; // residual on the pilot set; empty before iteration 0
    double delta = 1.0;  // |Omega| / (K L)
    int t = 0;
};

DampState damp_init(const PilotMask& mask, const GridShape& shape);
DampState damp_init_from(ComplexGrid x0, const PilotMask& mask);

// One Onsager-corrected update:
//   z^t = y - A x^t + (1/delta) z^{t-1} <D'(x^t + A^H z^{t-1})>
//   x^{t+1} = D(x^t + A^H z^t)
// where A selects the pilot REs and A^H zero-fills. y lives in the channel
// domain (least-squares pilot values).
DampState damp_iterate(const DampState& state, const std::vector<cplx>& y,
                       const PilotMask& mask, const Denoiser& den,
                       double sigma2, uint64_t seed);

// Full iteration with cap and relative-change early stop.
ComplexGrid damp_run(const std::vector<cplx>& y, const PilotMask& mask,
                     const GridShape& shape, const Denoiser& den, double sigma2,
                     uint64_t seed, int max_iter = 10, double tol = 1e-4,
                     const ComplexGrid* x0 = nullptr);

// Upper-bound estimator: a copy of the true channel.
ComplexGrid genie_oracle(const ComplexGrid& h);

} // namespace csiforge
