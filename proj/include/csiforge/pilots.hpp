// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "csiforge/errors.hpp"
#include "csiforge/grid.hpp"

namespace csiforge {

// Exact fraction for pilot-overhead bookkeeping; always reduced, den > 0.
struct Rational {
    long long num = 0;
    long long den = 1;

    Rational() = default;
    Rational(long long n, long long d) : num(n), den(d) {
        if (den == 0)
            throw numeric_error("Rational: zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const long long g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }
    bool operator==(const Rational& o) const {
        return num == o.num && den == o.den;
    }
    Rational operator/(const Rational& o) const {
        if (o.num == 0)
            throw numeric_error("Rational: division by zero");
        return Rational(num * o.den, den * o.num);
    }
    double value() const { return double(num) / double(den); }
    std::string str() const {
        return std::to_string(num) + "/" + std::to_string(den);
    }
};

struct PilotConfig {
    int comb = 2;        // K_TC: pilots on every comb-th subcarrier
    int comb_offset = 0; // in [0, comb)
    int num_symbols = 4;
    int start_symbol = 10;
    int slot_period = 1; // pilots present every slot_period slots
    std::string label = "dense";

    void validate(const GridShape& slot_shape) const;
};

// SRS patterns used throughout: dense sounding every slot, sparse sounding
// every second slot on a coarser comb.
PilotConfig dense_pilot_config();
PilotConfig sparse_pilot_config();

// Pilot placement plus the unit-modulus pilot values on those REs.
struct PilotMask {
    int subcarriers = 0;
    int symbols = 0;
    std::vector<int> omega_k; // pilot RE coordinates, symbol-major, k ascending
    std::vector<int> omega_l;
    std::vector<cplx> values; // S, filled by gen_pilot_symbols

    std::size_t count() const { return omega_k.size(); }
    bool contains(int k, int l) const;
    std::vector<int> pilot_symbol_indices() const; // sorted distinct l
};

// Mask for one slot; inactive slots (slot_index % slot_period != 0) are empty.
PilotMask build_mask(const PilotConfig& cfg, const GridShape& slot_shape,
                     int slot_index);

// Mask covering n_slots consecutive slots laid out on one K x (n_slots*L) grid.
PilotMask build_window_mask(const PilotConfig& cfg, const GridShape& slot_shape,
                            int n_slots);

PilotMask gen_pilot_symbols(PilotMask mask, uint64_t seed);

struct NoiseSpec {
    double sigma2 = 0.0; // per-RE complex noise variance, linear

    static NoiseSpec from_snr_db(double snr_db);
    void validate() const;
};

// Y = H .* S + w on the pilot set, w ~ CN(0, sigma2) i.i.d.
std::vector<cplx> observe(const ComplexGrid& h, const PilotMask& mask,
                          const NoiseSpec& noise, uint64_t seed);

// Least-squares pilot-domain estimate Y / S.
std::vector<cplx> ls_at_pilots(const std::vector<cplx>& y,
                               const PilotMask& mask);

// Linear frequency interpolation through the comb per pilot-bearing symbol
// (nearest-pilot hold outside the comb span), then temporal hold onto the
// remaining symbols.
ComplexGrid interp_sparse(const std::vector<cplx>& h_omega,
                          const PilotMask& mask, const GridShape& shape);

Rational overhead_fraction(const PilotConfig& cfg, const GridShape& slot_shape);

} // namespace csiforge
