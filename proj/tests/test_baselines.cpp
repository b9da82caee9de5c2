// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "csiforge/baselines.hpp"
#include "csiforge/rng.hpp"

using namespace csiforge;

namespace {

TapProfile toy_profile() {
    TapProfile p;
    p.delays = {0.0, 120e-9, 400e-9};
    p.powers = {0.6, 0.25, 0.15};
    p.rms_delay_spread = 150e-9;
    return p;
}

// channel over the comb drawn exactly from the prior: h[k] = sum_p g_p
// exp(-j 2 pi k df tau_p) with g_p ~ CN(0, sigma_p^2)
std::vector<cplx> draw_from_prior(const TapProfile& prof, double df,
                                  const std::vector<int>& ks, uint64_t seed) {
    Rng rng(seed);
    std::vector<cplx> g(prof.n_taps());
    for (int p = 0; p < prof.n_taps(); ++p)
        g[p] = rng.cgaussian(prof.powers[p]);
    std::vector<cplx> h(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) {
        cplx acc(0, 0);
        for (int p = 0; p < prof.n_taps(); ++p)
            acc += g[p] * std::polar(1.0, -2.0 * std::numbers::pi * ks[i] * df *
                                              prof.delays[p]);
        h[i] = acc;
    }
    return h;
}

// dense posterior-mean oracle: hhat = R S^H (S R S^H + sigma2 I)^{-1} y,
// solved by hand-written Gaussian elimination with partial pivoting
std::vector<cplx> lmmse_oracle(const ChannelPrior& prior,
                               const std::vector<cplx>& s,
                               const std::vector<cplx>& y) {
    const int n = prior.n();
    std::vector<std::vector<cplx>> A(n, std::vector<cplx>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            A[i][j] = s[i] * prior.r(i, j) * std::conj(s[j]);
            if (i == j)
                A[i][j] += prior.sigma2;
        }
    std::vector<cplx> b(y);
    for (int c = 0; c < n; ++c) {
        int piv = c;
        for (int r = c + 1; r < n; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c]))
                piv = r;
        std::swap(A[c], A[piv]);
        std::swap(b[c], b[piv]);
        for (int r = c + 1; r < n; ++r) {
            const cplx f = A[r][c] / A[c][c];
            for (int j = c; j < n; ++j)
                A[r][j] -= f * A[c][j];
            b[r] -= f * b[c];
        }
    }
    std::vector<cplx> a(n);
    for (int c = n - 1; c >= 0; --c) {
        cplx acc = b[c];
        for (int j = c + 1; j < n; ++j)
            acc -= A[c][j] * a[j];
        a[c] = acc / A[c][c];
    }
    std::vector<cplx> out(n);
    for (int i = 0; i < n; ++i) {
        cplx acc(0, 0);
        for (int j = 0; j < n; ++j)
            acc += prior.r(i, j) * std::conj(s[j]) * a[j];
        out[i] = acc;
    }
    return out;
}

PilotMask single_symbol_mask(int K, int comb, const std::vector<cplx>& values) {
    PilotMask m;
    m.subcarriers = K;
    m.symbols = 1;
    for (int k = 0; k < K; k += comb) {
        m.omega_k.push_back(k);
        m.omega_l.push_back(0);
    }
    m.values = values.empty() ? std::vector<cplx>(m.count(), cplx(1, 0)) : values;
    return m;
}

} // namespace

TEST_CASE("prior covariance entries") {
    SUBCASE("single zero-delay tap gives the all-ones matrix") {
        TapProfile p;
        p.delays = {0.0};
        p.powers = {1.0};
        p.rms_delay_spread = 1e-9;
        ChannelPrior prior = build_prior(p, {}, 15e3, {0, 3, 7}, 0.1);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(std::abs(prior.r(i, j) - cplx(1, 0)) < 1e-12);
        prior.validate();
    }
    SUBCASE("diagonal equals total tap power") {
        ChannelPrior prior = build_prior(toy_profile(), {}, 15e3, {0, 5, 11}, 0.0);
        for (int i = 0; i < 3; ++i) {
            CHECK(prior.r(i, i).real() == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(std::abs(prior.r(i, i).imag()) < 1e-12);
        }
    }
    SUBCASE("two-subcarrier entry matches hand summation") {
        TapProfile p = toy_profile();
        const double df = 15e3;
        ChannelPrior prior = build_prior(p, {}, df, {2, 6}, 0.0);
        cplx expect(0, 0);
        for (int t = 0; t < 3; ++t)
            expect += p.powers[t] *
                      std::polar(1.0, -2.0 * std::numbers::pi * (2 - 6) * df *
                                          p.delays[t]);
        CHECK(std::abs(prior.r(0, 1) - expect) < 1e-12);
        CHECK(std::abs(prior.r(1, 0) - std::conj(expect)) < 1e-12);
    }
    SUBCASE("prior is Hermitian positive semidefinite") {
        ChannelPrior prior = build_prior(make_tdlc_profile(251e-9), {}, 15e3,
                                         {0, 4, 8, 12, 16, 20, 24, 28}, 0.01);
        prior.validate();
    }
    CHECK_THROWS_AS(build_prior(toy_profile(), {}, 15e3, {}, 0.1), data_error);
    CHECK_THROWS_AS(build_prior(toy_profile(), {}, 15e3, {0}, -0.1), data_error);
}

TEST_CASE("scalar textbook shrinkage") {
    TapProfile p;
    p.delays = {0.0};
    p.powers = {1.0};
    p.rms_delay_spread = 1e-9;
    const double sigma2 = 0.4;
    ChannelPrior prior = build_prior(p, {}, 15e3, {0}, sigma2);
    PilotMask m = single_symbol_mask(1, 1, {cplx(1, 0)});
    std::vector<cplx> y = {cplx(0.7, -1.1)};
    ComplexGrid out = lmmse_estimate(y, m, prior);
    CHECK(std::abs(out.at(0, 0) - y[0] / (1.0 + sigma2)) < 1e-12);
}

// four well-spread taps keep the 4x4 prior full rank on a comb-2 over K = 8
static TapProfile full_rank_profile() {
    TapProfile p;
    p.delays = {0.0, 2.2e-6, 4.9e-6, 7.6e-6};
    p.powers = {0.4, 0.3, 0.2, 0.1};
    p.rms_delay_spread = 2e-6;
    return p;
}

TEST_CASE("vanishing noise recovers least squares") {
    const int K = 8;
    const double df = 15e3;
    PilotMask m = single_symbol_mask(K, 2, {});
    m = gen_pilot_symbols(m, 3);
    std::vector<int> ks;
    for (std::size_t i = 0; i < m.count(); ++i)
        ks.push_back(m.omega_k[i]);
    ChannelPrior prior = build_prior(full_rank_profile(), {}, df, ks, 1e-12);

    std::vector<cplx> h = draw_from_prior(full_rank_profile(), df, ks, 77);
    std::vector<cplx> y(h.size());
    for (std::size_t i = 0; i < h.size(); ++i)
        y[i] = h[i] * m.values[i];
    ComplexGrid out = lmmse_estimate(y, m, prior);
    auto ls = ls_at_pilots(y, m);
    for (std::size_t i = 0; i < m.count(); ++i)
        CHECK(std::abs(out.at(m.omega_k[i], 0) - ls[i]) < 1e-6);
}

TEST_CASE("posterior-mean oracle equivalence on the toy instance") {
    const int K = 8;
    const double df = 15e3;
    const double sigma2 = 0.05;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        PilotMask m = single_symbol_mask(K, 2, {});
        m = gen_pilot_symbols(m, 100 + seed);
        std::vector<int> ks;
        for (std::size_t i = 0; i < m.count(); ++i)
            ks.push_back(m.omega_k[i]);
        ChannelPrior prior = build_prior(toy_profile(), {}, df, ks, sigma2);

        std::vector<cplx> h = draw_from_prior(toy_profile(), df, ks, 200 + seed);
        Rng noise(300 + seed);
        std::vector<cplx> y(h.size());
        for (std::size_t i = 0; i < h.size(); ++i)
            y[i] = h[i] * m.values[i] + noise.cgaussian(sigma2);

        ComplexGrid out = lmmse_estimate(y, m, prior);
        auto oracle = lmmse_oracle(prior, m.values, y);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < m.count(); ++i) {
            num += std::norm(out.at(m.omega_k[i], 0) - oracle[i]);
            den += std::norm(oracle[i]);
        }
        CHECK(std::sqrt(num / den) < 1e-8);
    }
}

TEST_CASE("estimation error is orthogonal to the observation") {
    const int K = 8;
    const double df = 15e3;
    const double sigma2 = 0.1;
    PilotMask m = single_symbol_mask(K, 2, {});
    m = gen_pilot_symbols(m, 9);
    std::vector<int> ks;
    for (std::size_t i = 0; i < m.count(); ++i)
        ks.push_back(m.omega_k[i]);
    ChannelPrior prior = build_prior(toy_profile(), {}, df, ks, sigma2);

    const int n_seeds = 4000;
    cplx acc(0, 0);
    double acc2 = 0.0;
    for (int s = 0; s < n_seeds; ++s) {
        std::vector<cplx> h = draw_from_prior(toy_profile(), df, ks, 5000 + s);
        Rng noise(9000 + s);
        std::vector<cplx> y(h.size());
        for (std::size_t i = 0; i < h.size(); ++i)
            y[i] = h[i] * m.values[i] + noise.cgaussian(sigma2);
        ComplexGrid out = lmmse_estimate(y, m, prior);
        // pick one representative cross moment
        const cplx v = (out.at(ks[1], 0) - h[1]) * std::conj(y[2]);
        acc += v;
        acc2 += std::norm(v);
    }
    const double mean_abs = std::abs(acc) / n_seeds;
    const double se = std::sqrt(acc2 / n_seeds) / std::sqrt(double(n_seeds));
    CHECK(mean_abs < 3.0 * se);
}

TEST_CASE("posterior mean beats least squares on average") {
    const int K = 8;
    const double df = 15e3;
    const double sigma2 = 0.1;
    PilotMask m = single_symbol_mask(K, 2, {});
    m = gen_pilot_symbols(m, 4);
    std::vector<int> ks;
    for (std::size_t i = 0; i < m.count(); ++i)
        ks.push_back(m.omega_k[i]);
    ChannelPrior prior = build_prior(toy_profile(), {}, df, ks, sigma2);

    double mse_lmmse = 0.0, mse_ls = 0.0;
    for (int s = 0; s < 500; ++s) {
        std::vector<cplx> h = draw_from_prior(toy_profile(), df, ks, 40000 + s);
        Rng noise(50000 + s);
        std::vector<cplx> y(h.size());
        for (std::size_t i = 0; i < h.size(); ++i)
            y[i] = h[i] * m.values[i] + noise.cgaussian(sigma2);
        ComplexGrid out = lmmse_estimate(y, m, prior);
        auto ls = ls_at_pilots(y, m);
        for (std::size_t i = 0; i < m.count(); ++i) {
            mse_lmmse += std::norm(out.at(ks[i], 0) - h[i]);
            mse_ls += std::norm(ls[i] - h[i]);
        }
    }
    CHECK(mse_lmmse < mse_ls);
}

TEST_CASE("divergence estimates for simple denoisers") {
    ComplexGrid x(GridShape(16, 2, 1, 1));
    Rng rng(8);
    for (auto& z : x.values())
        z = rng.cgaussian(1.0);

    Denoiser ident = make_denoiser("identity");
    CHECK(divergence_mc(ident, x, 0.1, 1) == doctest::Approx(1.0).epsilon(1e-6));

    Denoiser zero{"zero", [](const ComplexGrid& v, double) {
                      return ComplexGrid(v.shape());
                  }};
    CHECK(divergence_mc(zero, x, 0.1, 1) == doctest::Approx(0.0));

    Denoiser half{"half", [](const ComplexGrid& v, double) {
                      ComplexGrid o = v;
                      for (auto& z : o.values())
                          z *= 0.5;
                      return o;
                  }};
    CHECK(divergence_mc(half, x, 0.1, 1) == doctest::Approx(0.5).epsilon(1e-6));

    SUBCASE("zero input falls back to a fixed probe step") {
        ComplexGrid origin(GridShape(4, 1, 1, 1));
        CHECK(divergence_mc(ident, origin, 0.1, 2) ==
              doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK_THROWS_AS(make_denoiser("cnn"), usage_error);
}

TEST_CASE("full-sampling identity step lands on the observation") {
    const int K = 6, L = 3;
    PilotMask full;
    full.subcarriers = K;
    full.symbols = L;
    for (int l = 0; l < L; ++l)
        for (int k = 0; k < K; ++k) {
            full.omega_k.push_back(k);
            full.omega_l.push_back(l);
            full.values.push_back(cplx(1, 0));
        }
    Rng rng(15);
    std::vector<cplx> y(full.count());
    for (auto& v : y)
        v = rng.cgaussian(1.0);

    DampState st = damp_init(full, GridShape(K, L, 1, 1));
    CHECK(st.delta == 1.0);
    DampState nx = damp_iterate(st, y, full, make_denoiser("identity"), 0.0, 1);
    for (std::size_t i = 0; i < full.count(); ++i)
        CHECK(nx.x.at(full.omega_k[i], full.omega_l[i]) == y[i]);

    SUBCASE("noiseless truth is a fixed point") {
        DampState truth = st;
        truth.x = ComplexGrid(GridShape(K, L, 1, 1));
        for (std::size_t i = 0; i < full.count(); ++i)
            truth.x.at(full.omega_k[i], full.omega_l[i]) = y[i];
        DampState after =
            damp_iterate(truth, y, full, make_denoiser("identity"), 0.0, 1);
        for (std::size_t i = 0; i < after.x.size(); ++i)
            CHECK(std::abs(after.x.values()[i] - truth.x.values()[i]) < 1e-14);
    }
    SUBCASE("zero observation keeps the state at zero") {
        std::vector<cplx> zero_y(full.count(), cplx(0, 0));
        DampState nx0 =
            damp_iterate(st, zero_y, full, make_denoiser("identity"), 0.0, 1);
        for (const auto& z : nx0.x.values())
            CHECK(z == cplx(0.0, 0.0));
    }
}

TEST_CASE("delay-sparse toy channel improves over damp iterations") {
    // Scattered erasures keep the delay-domain sampling incoherent; a comb
    // would fold each tap onto an equal-magnitude alias the soft threshold
    // cannot split, freezing the error at the aliased floor after one step.
    const int K = 64, n_erased = 24;
    const double sigma2 = 0.02;
    const int n_seeds = 20, n_iter = 5;
    std::vector<std::vector<double>> nmse(n_iter + 1,
                                          std::vector<double>(n_seeds));
    for (int s = 0; s < n_seeds; ++s) {
        Rng rng(700 + s);
        std::vector<int> perm(K);
        std::iota(perm.begin(), perm.end(), 0);
        for (int k = K - 1; k > 0; --k)
            std::swap(perm[k], perm[rng.below(k + 1)]);
        std::vector<bool> keep(K, true);
        for (int i = 0; i < n_erased; ++i)
            keep[perm[i]] = false;
        PilotMask mask;
        mask.subcarriers = K;
        mask.symbols = 1;
        for (int k = 0; k < K; ++k)
            if (keep[k]) {
                mask.omega_k.push_back(k);
                mask.omega_l.push_back(0);
                mask.values.push_back(cplx(1, 0));
            }
        // three active delay bins in the first quarter of the window,
        // scaled for unit average power per RE
        std::vector<cplx> delay(K, cplx(0, 0));
        for (int i = 0; i < 3; ++i)
            delay[rng.below(K / 4)] += rng.cgaussian(double(K) / 3.0);
        ComplexGrid H(GridShape(K, 1, 1, 1));
        for (int k = 0; k < K; ++k) {
            cplx acc(0, 0);
            for (int d = 0; d < K; ++d)
                acc += delay[d] * std::polar(1.0, -2.0 * std::numbers::pi * k *
                                                      d / double(K));
            H.at(k, 0) = acc / std::sqrt(double(K));
        }
        std::vector<cplx> y(mask.count());
        for (std::size_t i = 0; i < mask.count(); ++i)
            y[i] = H.at(mask.omega_k[i], 0) + rng.cgaussian(sigma2);

        const double h_energy = fro_norm_sq(H);
        // start from the zero-filled observation so the first residual is
        // already small and the Onsager feedback stays in its stable range
        ComplexGrid x0(GridShape(K, 1, 1, 1));
        for (std::size_t i = 0; i < mask.count(); ++i)
            x0.at(mask.omega_k[i], 0) = y[i];
        DampState st = damp_init_from(x0, mask);
        {
            double err = 0.0;
            for (int k = 0; k < K; ++k)
                err += std::norm(st.x.at(k, 0) - H.at(k, 0));
            nmse[0][s] = err / h_energy;
        }
        for (int t = 0; t < n_iter; ++t) {
            st = damp_iterate(st, y, mask, make_denoiser("soft-delay"), sigma2,
                              42);
            double err = 0.0;
            for (int k = 0; k < K; ++k)
                err += std::norm(st.x.at(k, 0) - H.at(k, 0));
            nmse[t + 1][s] = err / h_energy;
        }
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return 0.5 * (v[v.size() / 2] + v[(v.size() - 1) / 2]);
    };
    double prev = median(nmse[0]);
    CHECK(prev > 0.2); // 3/8 of the subcarriers start blank
    for (int t = 1; t <= n_iter; ++t) {
        double cur = median(nmse[t]);
        CHECK(cur <= prev + 1e-9);
        prev = cur;
    }
    CHECK(median(nmse[n_iter]) < 0.1);
}

TEST_CASE("genie oracle is an independent copy of the truth") {
    ComplexGrid H(GridShape(4, 2, 1, 1));
    Rng rng(3);
    for (auto& z : H.values())
        z = rng.cgaussian(1.0);
    ComplexGrid g = genie_oracle(H);
    for (std::size_t i = 0; i < H.size(); ++i)
        CHECK(g.values()[i] == H.values()[i]);
    g.at(0, 0) = cplx(99, 0);
    CHECK(H.at(0, 0) != cplx(99, 0));
}

TEST_CASE("damp rejects malformed inputs") {
    PilotMask m = single_symbol_mask(8, 2, {});
    CHECK_THROWS_AS(damp_init(m, GridShape(16, 1, 1, 1)), data_error);
    CHECK_THROWS_AS(damp_init(m, GridShape(8, 1, 2, 1)), data_error);
    DampState st = damp_init(m, GridShape(8, 1, 1, 1));
    std::vector<cplx> y(3);
    CHECK_THROWS_AS(
        damp_iterate(st, y, m, make_denoiser("identity"), 0.0, 1), data_error);
}
