// SPDX-License-Identifier: Apache-2.0
#include "csiforge/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "csiforge/errors.hpp"
#include "csiforge/rng.hpp"

namespace csiforge {

void TapProfile::validate() const {
    if (delays.empty() || delays.size() != powers.size())
        throw data_error("TapProfile: empty or mismatched delay/power lists");
    double sum = 0.0;
    for (std::size_t p = 0; p < delays.size(); ++p) {
        if (delays[p] < 0.0)
            throw data_error("TapProfile: negative delay");
        if (p > 0 && delays[p] <= delays[p - 1])
            throw data_error("TapProfile: delays must be strictly increasing");
        if (powers[p] <= 0.0)
            throw data_error("TapProfile: powers must be positive");
        sum += powers[p];
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw data_error("TapProfile: powers must sum to 1");
}

void DopplerSpec::validate(int n_taps) const {
    if (f_d_max < 0.0)
        throw data_error("DopplerSpec: f_d_max must be nonnegative");
    if (num_sinusoids < 1)
        throw data_error("DopplerSpec: need at least one sinusoid");
    if (!per_tap.empty()) {
        if (int(per_tap.size()) != n_taps)
            throw data_error("DopplerSpec: per-tap list length mismatch");
        for (double f : per_tap)
            if (f < 0.0 || f > f_d_max)
                throw data_error("DopplerSpec: per-tap Doppler outside [0, f_d_max]");
    }
}

void ChannelConfig::validate() const {
    if (subcarrier_spacing <= 0.0)
        throw data_error("ChannelConfig: subcarrier spacing must be positive");
    if (symbol_duration <= 0.0)
        throw data_error("ChannelConfig: symbol duration must be positive");
    if (shadowing_std_db < 0.0)
        throw data_error("ChannelConfig: shadowing std must be nonnegative");
    profile.validate();
    doppler.validate(profile.n_taps());
}

namespace {

struct RawTap {
    double norm_delay;
    double power_db;
};

// TR 38.901 Table 7.7.2-3 (TDL-C, NLOS), normalized delays and powers.
constexpr RawTap kTdlC[24] = {
    {0.0000, -4.4},  {0.2099, -1.2},  {0.2219, -3.5},  {0.2329, -5.2},
    {0.2176, -2.5},  {0.6366, 0.0},   {0.6448, -2.2},  {0.6560, -3.9},
    {0.6584, -7.4},  {0.7935, -7.1},  {0.8213, -10.7}, {0.9336, -11.1},
    {1.1286, -5.1},  {1.2685, -6.8},  {2.1704, -8.7},  {2.7105, -13.2},
    {4.2589, -13.9}, {4.6003, -13.9}, {5.4902, -15.8}, {5.6077, -17.1},
    {6.3065, -16.0}, {6.6374, -15.7}, {7.0427, -21.6}, {8.5697, -22.8},
};

TapProfile finish_profile(std::vector<std::pair<double, double>> taps,
                          double rms_hint) {
    // sort by delay; the standard table lists one tap out of delay order
    std::sort(taps.begin(), taps.end());
    TapProfile prof;
    double sum = 0.0;
    for (const auto& [d, p] : taps) {
        prof.delays.push_back(d);
        prof.powers.push_back(p);
        sum += p;
    }
    if (sum <= 0.0)
        throw data_error("tap table: total power must be positive");
    for (double& p : prof.powers)
        p /= sum;
    if (rms_hint > 0.0) {
        prof.rms_delay_spread = rms_hint;
    } else {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < prof.delays.size(); ++i) {
            m1 += prof.powers[i] * prof.delays[i];
            m2 += prof.powers[i] * prof.delays[i] * prof.delays[i];
        }
        prof.rms_delay_spread = std::sqrt(std::max(0.0, m2 - m1 * m1));
    }
    prof.validate();
    return prof;
}

} // namespace

TapProfile make_tdlc_profile(double tau_rms) {
    if (tau_rms <= 0.0)
        throw data_error("make_tdlc_profile: tau_rms must be positive");
    std::vector<std::pair<double, double>> taps;
    taps.reserve(24);
    for (const auto& t : kTdlC)
        taps.emplace_back(t.norm_delay * tau_rms, std::pow(10.0, t.power_db / 10.0));
    return finish_profile(std::move(taps), tau_rms);
}

TapProfile parse_tap_table(const std::string& text) {
    std::vector<std::pair<double, double>> taps;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        double delay_ns, power_db;
        if (!(ls >> delay_ns))
            continue; // blank or comment-only line
        if (!(ls >> power_db))
            throw data_error("tap table line " + std::to_string(lineno) +
                             ": expected \"delay_ns power_db\"");
        std::string extra;
        if (ls >> extra)
            throw data_error("tap table line " + std::to_string(lineno) +
                             ": trailing tokens");
        taps.emplace_back(delay_ns * 1e-9, std::pow(10.0, power_db / 10.0));
    }
    if (taps.empty())
        throw data_error("tap table: no taps found");
    return finish_profile(std::move(taps), 0.0);
}

TapProfile load_tap_table(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw data_error("tap table: cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_tap_table(buf.str());
}

TapGains gen_tap_gains(const TapProfile& profile, const DopplerSpec& doppler,
                       int l_total, double dt, uint64_t seed, int n_rx,
                       int n_tx) {
    if (l_total < 1)
        throw data_error("gen_tap_gains: need at least one symbol");
    if (dt <= 0.0)
        throw data_error("gen_tap_gains: dt must be positive");
    profile.validate();
    doppler.validate(profile.n_taps());

    const int P = profile.n_taps();
    const int N = doppler.num_sinusoids;
    const double two_pi = 2.0 * std::numbers::pi;
    TapGains out(P, n_rx, n_tx, l_total);

    std::vector<cplx> acc(l_total);
    for (int p = 0; p < P; ++p) {
        const double amp = std::sqrt(profile.powers[p] / N);
        const double fd = doppler.tap_doppler(p);
        for (int r = 0; r < n_rx; ++r) {
            for (int t = 0; t < n_tx; ++t) {
                Rng rng(derive_seed(seed, stream::tap_gains, uint64_t(p),
                                    uint64_t(r), uint64_t(t)));
                std::fill(acc.begin(), acc.end(), cplx(0.0, 0.0));
                for (int n = 0; n < N; ++n) {
                    const double theta = rng.uniform(0.0, two_pi);
                    const double phi = rng.uniform(0.0, two_pi);
                    const double omega = two_pi * fd * std::cos(theta);
                    // advance exp(j(omega l dt + phi)) by one rotation per symbol
                    cplx cur = std::polar(1.0, phi);
                    const cplx step = std::polar(1.0, omega * dt);
                    for (int l = 0; l < l_total; ++l) {
                        acc[l] += cur;
                        cur *= step;
                    }
                }
                for (int l = 0; l < l_total; ++l)
                    out.at(p, r, t, l) = amp * acc[l];
            }
        }
    }
    return out;
}

ComplexGrid taps_to_grid(const TapGains& gains, const TapProfile& profile,
                         const ChannelConfig& config) {
    if (gains.n_taps != profile.n_taps())
        throw data_error("taps_to_grid: gain/profile tap count mismatch");
    const GridShape& s = config.shape;
    if (gains.n_rx != s.n_rx || gains.n_tx != s.n_tx ||
        gains.n_symbols != s.symbols)
        throw data_error("taps_to_grid: gain dimensions do not cover the grid");

    const int K = s.subcarriers, L = s.symbols, P = profile.n_taps();
    // steering phasor per tap and subcarrier: exp(-j 2 pi k df tau_p)
    std::vector<cplx> steer(std::size_t(P) * K);
    for (int p = 0; p < P; ++p) {
        const double slope = -2.0 * std::numbers::pi * config.subcarrier_spacing *
                             profile.delays[p];
        for (int k = 0; k < K; ++k)
            steer[std::size_t(p) * K + k] = std::polar(1.0, slope * k);
    }

    ComplexGrid H(s);
    for (int r = 0; r < s.n_rx; ++r)
        for (int t = 0; t < s.n_tx; ++t)
            for (int l = 0; l < L; ++l) {
                cplx* row = H.data() + H.index(0, l, r, t);
                for (int p = 0; p < P; ++p) {
                    const cplx a = gains.at(p, r, t, l);
                    const cplx* sp = steer.data() + std::size_t(p) * K;
                    for (int k = 0; k < K; ++k)
                        row[k] += a * sp[k];
                }
            }
    if (!H.finite())
        throw numeric_error("taps_to_grid: non-finite channel grid");
    return H;
}

double draw_effective_snr(const ChannelConfig& config, uint64_t seed) {
    config.validate();
    if (config.shadowing_std_db == 0.0)
        return config.nominal_snr_db;
    Rng rng(derive_seed(seed, stream::shadowing));
    return config.nominal_snr_db + config.shadowing_std_db * rng.gaussian();
}

ComplexGrid gen_realization(const ChannelConfig& config, uint64_t seed) {
    config.validate();
    TapGains gains =
        gen_tap_gains(config.profile, config.doppler, config.shape.symbols,
                      config.symbol_duration, seed, config.shape.n_rx,
                      config.shape.n_tx);
    return taps_to_grid(gains, config.profile, config);
}

} // namespace csiforge
