// SPDX-License-Identifier: Apache-2.0
#include "csiforge/pilots.hpp"

#include <algorithm>
#include <cmath>

#include "csiforge/rng.hpp"

namespace csiforge {

void PilotConfig::validate(const GridShape& slot_shape) const {
    if (comb != 2 && comb != 4)
        throw data_error("PilotConfig: comb factor must be 2 or 4");
    if (comb_offset < 0 || comb_offset >= comb)
        throw data_error("PilotConfig: comb offset outside [0, comb)");
    if (num_symbols < 1)
        throw data_error("PilotConfig: need at least one pilot symbol");
    if (start_symbol < 0 || start_symbol + num_symbols > slot_shape.symbols)
        throw data_error("PilotConfig: pilot symbols exceed the slot");
    if (slot_period < 1)
        throw data_error("PilotConfig: slot period must be >= 1");
}

PilotConfig dense_pilot_config() {
    return PilotConfig{2, 0, 4, 10, 1, "dense"};
}

PilotConfig sparse_pilot_config() {
    return PilotConfig{4, 0, 1, 10, 2, "sparse"};
}

bool PilotMask::contains(int k, int l) const {
    for (std::size_t i = 0; i < omega_k.size(); ++i)
        if (omega_k[i] == k && omega_l[i] == l)
            return true;
    return false;
}

std::vector<int> PilotMask::pilot_symbol_indices() const {
    std::vector<int> ls(omega_l);
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    return ls;
}

PilotMask build_mask(const PilotConfig& cfg, const GridShape& slot_shape,
                     int slot_index) {
    cfg.validate(slot_shape);
    if (slot_index < 0)
        throw data_error("build_mask: negative slot index");
    PilotMask m;
    m.subcarriers = slot_shape.subcarriers;
    m.symbols = slot_shape.symbols;
    if (slot_index % cfg.slot_period != 0)
        return m; // inactive slot
    for (int l = cfg.start_symbol; l < cfg.start_symbol + cfg.num_symbols; ++l)
        for (int k = cfg.comb_offset; k < slot_shape.subcarriers; k += cfg.comb) {
            m.omega_k.push_back(k);
            m.omega_l.push_back(l);
        }
    return m;
}

PilotMask build_window_mask(const PilotConfig& cfg, const GridShape& slot_shape,
                            int n_slots) {
    if (n_slots < 1)
        throw data_error("build_window_mask: need at least one slot");
    PilotMask w;
    w.subcarriers = slot_shape.subcarriers;
    w.symbols = slot_shape.symbols * n_slots;
    for (int s = 0; s < n_slots; ++s) {
        PilotMask m = build_mask(cfg, slot_shape, s);
        for (std::size_t i = 0; i < m.count(); ++i) {
            w.omega_k.push_back(m.omega_k[i]);
            w.omega_l.push_back(m.omega_l[i] + s * slot_shape.symbols);
        }
    }
    return w;
}

PilotMask gen_pilot_symbols(PilotMask mask, uint64_t seed) {
    Rng rng(derive_seed(seed, stream::pilot_symbols));
    mask.values.resize(mask.count());
    for (auto& s : mask.values)
        s = rng.qpsk();
    return mask;
}

NoiseSpec NoiseSpec::from_snr_db(double snr_db) {
    return NoiseSpec{std::pow(10.0, -snr_db / 10.0)};
}

void NoiseSpec::validate() const {
    if (!(sigma2 >= 0.0))
        throw data_error("NoiseSpec: variance must be nonnegative");
}

std::vector<cplx> observe(const ComplexGrid& h, const PilotMask& mask,
                          const NoiseSpec& noise, uint64_t seed) {
    noise.validate();
    const GridShape& s = h.shape();
    if (mask.subcarriers > s.subcarriers || mask.symbols > s.symbols)
        throw data_error("observe: mask exceeds grid");
    if (mask.values.size() != mask.count())
        throw data_error("observe: pilot values not generated");
    Rng rng(derive_seed(seed, stream::observation_noise));
    std::vector<cplx> y(mask.count());
    for (std::size_t i = 0; i < mask.count(); ++i) {
        cplx w = noise.sigma2 > 0.0 ? rng.cgaussian(noise.sigma2) : cplx(0, 0);
        y[i] = h.at(mask.omega_k[i], mask.omega_l[i]) * mask.values[i] + w;
    }
    return y;
}

std::vector<cplx> ls_at_pilots(const std::vector<cplx>& y,
                               const PilotMask& mask) {
    if (y.size() != mask.count())
        throw data_error("ls_at_pilots: observation length mismatch");
    if (mask.values.size() != mask.count())
        throw data_error("ls_at_pilots: pilot values not generated");
    std::vector<cplx> h(mask.count());
    for (std::size_t i = 0; i < mask.count(); ++i) {
        if (std::abs(mask.values[i]) == 0.0)
            throw data_error("ls_at_pilots: zero pilot symbol");
        h[i] = y[i] / mask.values[i];
    }
    return h;
}

ComplexGrid interp_sparse(const std::vector<cplx>& h_omega,
                          const PilotMask& mask, const GridShape& shape) {
    if (h_omega.size() != mask.count())
        throw data_error("interp_sparse: estimate length mismatch");
    if (mask.subcarriers != shape.subcarriers || mask.symbols != shape.symbols)
        throw data_error("interp_sparse: mask/shape mismatch");
    if (shape.n_rx != 1 || shape.n_tx != 1)
        throw data_error("interp_sparse: operates on one antenna pair");
    const std::vector<int> pls = mask.pilot_symbol_indices();
    if (pls.empty())
        throw data_error("interp_sparse: window contains no pilots");

    const int K = shape.subcarriers;
    ComplexGrid out(shape);

    // pass 1: frequency interpolation on each pilot-bearing symbol
    for (int l : pls) {
        std::vector<std::pair<int, cplx>> pts;
        for (std::size_t i = 0; i < mask.count(); ++i)
            if (mask.omega_l[i] == l)
                pts.emplace_back(mask.omega_k[i], h_omega[i]);
        std::sort(pts.begin(), pts.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::size_t seg = 0;
        for (int k = 0; k < K; ++k) {
            if (k <= pts.front().first) {
                out.at(k, l) = pts.front().second; // hold below the comb span
            } else if (k >= pts.back().first) {
                out.at(k, l) = pts.back().second; // hold above the comb span
            } else {
                while (pts[seg + 1].first < k)
                    ++seg;
                const auto& [k0, v0] = pts[seg];
                const auto& [k1, v1] = pts[seg + 1];
                if (k == k0) {
                    out.at(k, l) = v0;
                } else {
                    const double w = double(k - k0) / double(k1 - k0);
                    out.at(k, l) = v0 + (v1 - v0) * w;
                }
            }
        }
    }

    // pass 2: temporal hold, most recent pilot symbol at or before l,
    // earliest one for symbols before the first pilot
    for (int l = 0; l < shape.symbols; ++l) {
        if (std::binary_search(pls.begin(), pls.end(), l))
            continue;
        auto it = std::upper_bound(pls.begin(), pls.end(), l);
        const int src = (it == pls.begin()) ? pls.front() : *(it - 1);
        for (int k = 0; k < K; ++k)
            out.at(k, l) = out.at(k, src);
    }
    return out;
}

Rational overhead_fraction(const PilotConfig& cfg, const GridShape& slot_shape) {
    cfg.validate(slot_shape);
    // pilots per active slot, exact for any K and offset
    long long per_symbol = 0;
    for (int k = cfg.comb_offset; k < slot_shape.subcarriers; k += cfg.comb)
        ++per_symbol;
    const long long pilots = per_symbol * cfg.num_symbols;
    const long long res =
        (long long)cfg.slot_period * slot_shape.subcarriers * slot_shape.symbols;
    return Rational(pilots, res);
}

} // namespace csiforge
