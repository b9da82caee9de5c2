// SPDX-License-Identifier: Apache-2.0
#include "csiforge/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "csiforge/rng.hpp"

namespace csiforge {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
// the prior stores its covariance row-major
using MapRowXcd = Eigen::Map<
    const Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void ChannelPrior::validate() const {
    const int m = n();
    if (m < 1 || int(r_hh.size()) != m * m)
        throw data_error("ChannelPrior: malformed covariance");
    if (sigma2 < 0.0)
        throw data_error("ChannelPrior: negative noise variance");
    MapRowXcd R(r_hh.data(), m, m);
    MatrixXcd sym = 0.5 * (R + MatrixXcd(R).adjoint());
    if ((R - sym).norm() > 1e-9 * std::max(1.0, R.norm()))
        throw data_error("ChannelPrior: covariance not Hermitian");
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(sym);
    if (eig.eigenvalues().minCoeff() < -1e-9)
        throw data_error("ChannelPrior: covariance not positive semidefinite");
}

ChannelPrior build_prior(const TapProfile& profile, const DopplerSpec& doppler,
                         double subcarrier_spacing,
                         const std::vector<int>& pilot_subcarriers,
                         double sigma2) {
    profile.validate();
    doppler.validate(profile.n_taps());
    if (pilot_subcarriers.empty())
        throw data_error("build_prior: empty pilot subcarrier set");
    if (sigma2 < 0.0)
        throw data_error("build_prior: negative noise variance");

    ChannelPrior prior;
    prior.pilot_subcarriers = pilot_subcarriers;
    std::sort(prior.pilot_subcarriers.begin(), prior.pilot_subcarriers.end());
    prior.sigma2 = sigma2;
    const int m = prior.n();
    prior.r_hh.resize(std::size_t(m) * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double dk = prior.pilot_subcarriers[i] - prior.pilot_subcarriers[j];
            cplx acc(0.0, 0.0);
            for (int p = 0; p < profile.n_taps(); ++p) {
                const double phase = -2.0 * std::numbers::pi * dk *
                                     subcarrier_spacing * profile.delays[p];
                acc += profile.powers[p] * std::polar(1.0, phase);
            }
            prior.r_hh[std::size_t(i) * m + j] = acc;
        }
    return prior;
}

ComplexGrid lmmse_estimate(const std::vector<cplx>& y, const PilotMask& mask,
                           const ChannelPrior& prior) {
    if (y.size() != mask.count())
        throw data_error("lmmse_estimate: observation length mismatch");
    if (mask.values.size() != mask.count())
        throw data_error("lmmse_estimate: pilot values not generated");
    const std::vector<int> pls = mask.pilot_symbol_indices();
    if (pls.empty())
        throw data_error("lmmse_estimate: window contains no pilots");

    const int m = prior.n();
    MapRowXcd R(prior.r_hh.data(), m, m);

    // smoothed pilot-domain values, aligned with the mask layout
    std::vector<cplx> smoothed(mask.count());
    for (int l : pls) {
        // indices into the mask for this symbol, k ascending
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < mask.count(); ++i)
            if (mask.omega_l[i] == l)
                idx.push_back(i);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return mask.omega_k[a] < mask.omega_k[b];
        });
        if (int(idx.size()) != m)
            throw data_error("lmmse_estimate: prior size does not match the comb");
        for (int i = 0; i < m; ++i)
            if (mask.omega_k[idx[i]] != prior.pilot_subcarriers[i])
                throw data_error("lmmse_estimate: prior subcarriers do not match the comb");

        VectorXcd yv(m);
        MatrixXcd S = MatrixXcd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            yv(i) = y[idx[i]];
            S(i, i) = mask.values[idx[i]];
        }
        MatrixXcd ryy = S * R * S.adjoint();
        ryy.diagonal().array() += prior.sigma2;
        Eigen::LLT<MatrixXcd> llt(ryy);
        if (llt.info() != Eigen::Success) {
            ryy.diagonal().array() += 1e-10;
            llt.compute(ryy);
            if (llt.info() != Eigen::Success)
                throw numeric_error(
                    "lmmse_estimate: R_yy singular; raise the noise floor sigma2");
        }
        VectorXcd hhat = R * S.adjoint() * llt.solve(yv);
        for (int i = 0; i < m; ++i)
            smoothed[idx[i]] = hhat(i);
    }

    GridShape shape(mask.subcarriers, mask.symbols, 1, 1);
    return interp_sparse(smoothed, mask, shape);
}

namespace {

// Unitary DFT pair used by the delay-domain denoiser; naive O(K^2) is fine
// at the grid sizes involved.
void dft_unitary(const cplx* in, cplx* out, int n, bool inverse) {
    const double sign = inverse ? 1.0 : -1.0;
    const double scale = 1.0 / std::sqrt(double(n));
    for (int a = 0; a < n; ++a) {
        cplx acc(0.0, 0.0);
        for (int b = 0; b < n; ++b)
            acc += in[b] *
                   std::polar(1.0, sign * 2.0 * std::numbers::pi * a * b / n);
        out[a] = acc * scale;
    }
}

ComplexGrid soft_delay_denoise(const ComplexGrid& v, double sigma_hat) {
    const GridShape& s = v.shape();
    const int K = s.subcarriers;
    const double lambda = sigma_hat * std::sqrt(2.0 * std::log(double(K)));
    ComplexGrid out(s);
    std::vector<cplx> freq(K), delay(K);
    for (int r = 0; r < s.n_rx; ++r)
        for (int t = 0; t < s.n_tx; ++t)
            for (int l = 0; l < s.symbols; ++l) {
                for (int k = 0; k < K; ++k)
                    freq[k] = v.at(k, l, r, t);
                dft_unitary(freq.data(), delay.data(), K, true);
                for (int d = 0; d < K; ++d) {
                    const double mag = std::abs(delay[d]);
                    delay[d] = mag > lambda ? delay[d] * ((mag - lambda) / mag)
                                            : cplx(0.0, 0.0);
                }
                dft_unitary(delay.data(), freq.data(), K, false);
                for (int k = 0; k < K; ++k)
                    out.at(k, l, r, t) = freq[k];
            }
    return out;
}

} // namespace

Denoiser make_denoiser(const std::string& name) {
    if (name == "identity")
        return Denoiser{name, [](const ComplexGrid& v, double) { return v; }};
    if (name == "soft-delay")
        return Denoiser{name, soft_delay_denoise};
    throw usage_error("unknown denoiser \"" + name +
                      "\" (expected identity or soft-delay)");
}

double divergence_mc(const Denoiser& den, const ComplexGrid& x,
                     double sigma_hat, uint64_t seed) {
    const std::size_t n = 2 * x.size(); // real view
    double rms = std::sqrt(fro_norm_sq(x) / double(n));
    double eps = 1e-3 * rms;
    if (eps == 0.0)
        eps = 1e-6; // probing the denoiser at the origin
    Rng rng(derive_seed(seed, stream::probe));
    std::vector<double> u(n);
    for (auto& ui : u)
        ui = rng.sign();

    ComplexGrid xp = x;
    for (std::size_t i = 0; i < x.size(); ++i)
        xp.values()[i] += cplx(eps * u[2 * i], eps * u[2 * i + 1]);
    ComplexGrid d0 = den.apply(x, sigma_hat);
    ComplexGrid d1 = den.apply(xp, sigma_hat);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const cplx diff = d1.values()[i] - d0.values()[i];
        acc += u[2 * i] * diff.real() + u[2 * i + 1] * diff.imag();
    }
    return acc / (eps * double(n));
}

DampState damp_init(const PilotMask& mask, const GridShape& shape) {
    ComplexGrid zero(shape);
    return damp_init_from(std::move(zero), mask);
}

DampState damp_init_from(ComplexGrid x0, const PilotMask& mask) {
    DampState st;
    const GridShape& s = x0.shape();
    if (s.n_rx != 1 || s.n_tx != 1)
        throw data_error("damp: operates on one antenna pair");
    if (mask.subcarriers != s.subcarriers || mask.symbols != s.symbols)
        throw data_error("damp: mask/shape mismatch");
    if (mask.count() == 0)
        throw data_error("damp: empty pilot set");
    st.x = std::move(x0);
    st.delta = double(mask.count()) / double(s.subcarriers * s.symbols);
    st.t = 0;
    return st;
}

DampState damp_iterate(const DampState& state, const std::vector<cplx>& y,
                       const PilotMask& mask, const Denoiser& den,
                       double sigma2, uint64_t seed) {
    if (y.size() != mask.count())
        throw data_error("damp_iterate: observation length mismatch");
    if (state.delta <= 0.0 || state.delta > 1.0)
        throw data_error("damp_iterate: sampling ratio outside (0, 1]");
    if (sigma2 < 0.0)
        throw data_error("damp_iterate: negative noise variance");
    const double sigma = std::sqrt(sigma2);

    const std::size_t m = mask.count();
    DampState next;
    next.delta = state.delta;
    next.t = state.t + 1;

    // Onsager correction from the previous residual
    double onsager = 0.0;
    bool z_prev_nonzero = false;
    for (const auto& zi : state.z)
        z_prev_nonzero = z_prev_nonzero || (zi != cplx(0.0, 0.0));
    if (z_prev_nonzero) {
        ComplexGrid v_prev = state.x;
        for (std::size_t i = 0; i < m; ++i)
            v_prev.at(mask.omega_k[i], mask.omega_l[i]) += state.z[i];
        const double div =
            divergence_mc(den, v_prev, sigma,
                          derive_seed(seed, stream::probe, uint64_t(state.t)));
        onsager = div / state.delta;
    }

    next.z.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const cplx prev = state.z.empty() ? cplx(0.0, 0.0) : state.z[i];
        next.z[i] = y[i] - state.x.at(mask.omega_k[i], mask.omega_l[i]) +
                    onsager * prev;
    }

    ComplexGrid v = state.x;
    for (std::size_t i = 0; i < m; ++i)
        v.at(mask.omega_k[i], mask.omega_l[i]) += next.z[i];
    next.x = den.apply(v, sigma);
    if (!next.x.finite())
        throw numeric_error("damp_iterate: non-finite estimate at iteration " +
                            std::to_string(next.t));
    return next;
}

ComplexGrid damp_run(const std::vector<cplx>& y, const PilotMask& mask,
                     const GridShape& shape, const Denoiser& den, double sigma2,
                     uint64_t seed, int max_iter, double tol,
                     const ComplexGrid* x0) {
    DampState st = x0 ? damp_init_from(*x0, mask) : damp_init(mask, shape);
    for (int it = 0; it < max_iter; ++it) {
        DampState nx = damp_iterate(st, y, mask, den, sigma2, seed);
        double dd = 0.0, xx = 0.0;
        for (std::size_t i = 0; i < nx.x.size(); ++i) {
            dd += std::norm(nx.x.values()[i] - st.x.values()[i]);
            xx += std::norm(st.x.values()[i]);
        }
        st = std::move(nx);
        if (xx > 0.0 && std::sqrt(dd / xx) < tol)
            break;
    }
    return st.x;
}

ComplexGrid genie_oracle(const ComplexGrid& h) {
    return h; // value copy; callers may mutate freely
}

} // namespace csiforge
