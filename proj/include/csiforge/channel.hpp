// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csiforge/grid.hpp"

namespace csiforge {

// Tapped-delay-line power/delay profile; delays in seconds, powers linear
// and normalized to unit sum.
struct TapProfile {
    std::vector<double> delays;
    std::vector<double> powers;
    double rms_delay_spread = 0.0; // seconds

    int n_taps() const { return int(delays.size()); }
    void validate() const;
};

// 3GPP TR 38.901 TDL-C 24-tap table with normalized delays scaled by tau_rms.
TapProfile make_tdlc_profile(double tau_rms);

// Custom table override: one "delay_ns power_db" pair per line.
TapProfile parse_tap_table(const std::string& text);
TapProfile load_tap_table(const std::string& path);

struct DopplerSpec {
    double f_d_max = 0.0;        // Hz
    std::vector<double> per_tap; // empty means every tap uses f_d_max
    int num_sinusoids = 64;

    double tap_doppler(int p) const {
        return per_tap.empty() ? f_d_max : per_tap.at(p);
    }
    void validate(int n_taps) const;
};

struct ChannelConfig {
    GridShape shape;
    double subcarrier_spacing = 15e3; // Hz
    double symbol_duration = 1.0 / 15e3;
    TapProfile profile;
    DopplerSpec doppler;
    double nominal_snr_db = 15.0;
    double shadowing_std_db = 0.0;

    void validate() const;
};

// Per-tap complex gain time series alpha_{p,r,t}[l].
struct TapGains {
    int n_taps = 0, n_rx = 0, n_tx = 0, n_symbols = 0;
    std::vector<cplx> g;

    TapGains() = default;
    TapGains(int p, int rx, int tx, int l)
        : n_taps(p), n_rx(rx), n_tx(tx), n_symbols(l),
          g(std::size_t(p) * rx * tx * l) {}

    std::size_t index(int p, int r, int t, int l) const {
        return ((std::size_t(p) * n_rx + r) * n_tx + t) * n_symbols + l;
    }
    cplx& at(int p, int r, int t, int l) { return g[index(p, r, t, l)]; }
    const cplx& at(int p, int r, int t, int l) const { return g[index(p, r, t, l)]; }
};

// Clarke sum-of-sinusoids synthesis; each (p, r, t) stream draws its own
// arrival angles and phases from a counter-derived seed, so generation is
// order-independent and parallel-safe.
TapGains gen_tap_gains(const TapProfile& profile, const DopplerSpec& doppler,
                       int l_total, double dt, uint64_t seed, int n_rx = 1,
                       int n_tx = 1);

// Render tap gains onto the grid: H[k,l,r,t] = sum_p alpha_{p,r,t}[l]
// exp(-j 2 pi k df tau_p).
ComplexGrid taps_to_grid(const TapGains& gains, const TapProfile& profile,
                         const ChannelConfig& config);

// Nominal SNR plus optional log-normal shadowing (dB domain Gaussian).
double draw_effective_snr(const ChannelConfig& config, uint64_t seed);

ComplexGrid gen_realization(const ChannelConfig& config, uint64_t seed);

inline double snr_db_to_noise_var(double snr_db) {
    return std::pow(10.0, -snr_db / 10.0);
}

} // namespace csiforge
