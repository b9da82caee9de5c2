// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csiforge/errors.hpp"

namespace csiforge {

// Training-based link budget for one coherence block: t_c resource
// elements per block, per-element SNR rho (linear), pilot fraction alpha.
struct RateParams {
    int t_c = 1;
    double rho = 0.0;
    double alpha = 0.5;

    void validate() const;
};

// Channel-estimation error variance after MMSE pilot training.
double sigma_e2(const RateParams& p);

// Post-estimation effective SNR; the helper form takes the error
// variance directly so reconstruction overrides can reuse it.
double rho_eff(const RateParams& p);
double rho_eff_from(double rho, double s2);

// E[log2(1 + x |h|^2)] for Rayleigh |h|^2 ~ Exp(1), closed form.
double ergodic_rate_term(double x);

struct McEstimate {
    double mean = 0.0;
    double std_err = 0.0;
};

// Monte-Carlo oracle for the same expectation, sharded and deterministic.
McEstimate ergodic_rate_term_mc(double x, std::uint64_t samples,
                                std::uint64_t seed);

// Net rate in bits per resource element after pilot overhead.
double rate(const RateParams& p);

struct GainReport {
    double gain = 0.0;  // rate(p1) - rate(p0)
    double bound = 0.0; // (a0 - a1) * log2(1 + rho_eff1)
    bool hypothesis_holds = false;
    double rho_eff0 = 0.0;
    double rho_eff1 = 0.0;
};

// Rate gain from cutting pilot overhead from p0.alpha to p1.alpha.
// rho_eff_override replaces p1's effective SNR, modeling a learned
// reconstruction that restores dense-pilot estimation quality.
GainReport gain_lower_bound(const RateParams& p0, const RateParams& p1,
                            std::optional<double> rho_eff_override = {});

struct RateRow {
    double alpha = 0.0;
    double sigma_e2 = 0.0;
    double rho_eff = 0.0;
    double rate = 0.0;
};

std::vector<RateRow> rate_sweep(double rho, int t_c,
                                const std::vector<double>& alphas);
void write_rate_csv(const std::string& path,
                    const std::vector<RateRow>& rows);

} // namespace csiforge
