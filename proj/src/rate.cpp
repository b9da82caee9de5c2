// SPDX-License-Identifier: Apache-2.0
#include "csiforge/rate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "csiforge/parallel.hpp"
#include "csiforge/rng.hpp"
#include "csiforge/special.hpp"

namespace csiforge {

void RateParams::validate() const {
    if (t_c < 1)
        throw data_error("rate: coherence block length must be >= 1");
    if (!(rho >= 0.0))
        throw data_error("rate: SNR must be non-negative");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw data_error("rate: pilot fraction must lie in (0, 1)");
}

double sigma_e2(const RateParams& p) {
    p.validate();
    return 1.0 / (1.0 + p.rho * p.alpha * p.t_c);
}

double rho_eff_from(double rho, double s2) {
    if (!(rho >= 0.0) || !(s2 >= 0.0 && s2 <= 1.0))
        throw data_error("rate: invalid SNR or error variance");
    return rho * (1.0 - s2) / (1.0 + rho * s2);
}

double rho_eff(const RateParams& p) {
    return rho_eff_from(p.rho, sigma_e2(p));
}

double ergodic_rate_term(double x) {
    if (!(x >= 0.0))
        throw data_error("rate: effective SNR must be non-negative");
    if (x == 0.0)
        return 0.0;
    // E[log(1 + x v)] for v ~ Exp(1) equals e^{1/x} E1(1/x)
    return expint_e1_scaled(1.0 / x) / std::log(2.0);
}

McEstimate ergodic_rate_term_mc(double x, std::uint64_t samples,
                                std::uint64_t seed) {
    if (!(x >= 0.0))
        throw data_error("rate: effective SNR must be non-negative");
    if (samples == 0)
        throw data_error("rate: sample count must be positive");
    const std::uint64_t n_shards = 64;
    std::vector<double> sums(n_shards, 0.0), sq_sums(n_shards, 0.0);
    const std::uint64_t per = samples / n_shards,
                        extra = samples % n_shards;
    parallel_for(n_shards, [&](std::size_t s) {
        Rng rng(derive_seed(seed, stream::probe, s));
        const std::uint64_t count = per + (s < extra ? 1 : 0);
        double acc = 0.0, acc2 = 0.0;
        for (std::uint64_t i = 0; i < count; ++i) {
            const double v = -std::log(rng.uniform_pos());
            const double r = std::log2(1.0 + x * v);
            acc += r;
            acc2 += r * r;
        }
        sums[s] = acc;
        sq_sums[s] = acc2;
    });
    double total = 0.0, total_sq = 0.0;
    for (std::uint64_t s = 0; s < n_shards; ++s) {
        total += sums[s];
        total_sq += sq_sums[s];
    }
    McEstimate est;
    est.mean = total / double(samples);
    const double var =
        std::max(total_sq / double(samples) - est.mean * est.mean, 0.0);
    est.std_err = std::sqrt(var / double(samples));
    return est;
}

double rate(const RateParams& p) {
    p.validate();
    return (1.0 - p.alpha) * ergodic_rate_term(rho_eff(p));
}

GainReport gain_lower_bound(const RateParams& p0, const RateParams& p1,
                            std::optional<double> rho_eff_override) {
    p0.validate();
    p1.validate();
    if (!(p0.alpha > p1.alpha))
        throw data_error(
            "rate: the baseline pilot fraction must exceed the reduced one");
    GainReport rep;
    rep.rho_eff0 = rho_eff(p0);
    rep.rho_eff1 = rho_eff_override ? *rho_eff_override : rho_eff(p1);
    if (rep.rho_eff1 < 0.0)
        throw data_error("rate: effective SNR override must be >= 0");
    const double r0 = (1.0 - p0.alpha) * ergodic_rate_term(rep.rho_eff0);
    const double r1 = (1.0 - p1.alpha) * ergodic_rate_term(rep.rho_eff1);
    rep.gain = r1 - r0;
    rep.bound = (p0.alpha - p1.alpha) * std::log2(1.0 + rep.rho_eff1);
    rep.hypothesis_holds = rep.rho_eff1 >= rep.rho_eff0;
    return rep;
}

std::vector<RateRow> rate_sweep(double rho, int t_c,
                                const std::vector<double>& alphas) {
    std::vector<RateRow> rows;
    rows.reserve(alphas.size());
    for (double a : alphas) {
        RateParams p{t_c, rho, a};
        RateRow r;
        r.alpha = a;
        r.sigma_e2 = sigma_e2(p);
        r.rho_eff = rho_eff(p);
        r.rate = rate(p);
        rows.push_back(r);
    }
    return rows;
}

void write_rate_csv(const std::string& path,
                    const std::vector<RateRow>& rows) {
    std::ofstream out(path);
    if (!out)
        throw data_error("cannot open rate csv for writing: " + path);
    out << "alpha,sigma_e2,rho_eff,rate_bits_per_re\n";
    char line[160];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%.9g,%.9g,%.9g,%.9g\n", r.alpha,
                      r.sigma_e2, r.rho_eff, r.rate);
        out << line;
    }
    if (!out)
        throw data_error("rate csv write failed: " + path);
}

} // namespace csiforge
