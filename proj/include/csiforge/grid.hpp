// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "csiforge/errors.hpp"

namespace csiforge {

using cplx = std::complex<double>;

// Resource-grid dimensions: K subcarriers x L OFDM symbols x nRx x nTx.
struct GridShape {
    int subcarriers = 1; // K
    int symbols = 1;     // L
    int n_rx = 1;
    int n_tx = 1;

    GridShape() = default;
    GridShape(int k, int l, int rx = 1, int tx = 1)
        : subcarriers(k), symbols(l), n_rx(rx), n_tx(tx) {
        if (k < 1 || l < 1 || rx < 1 || tx < 1)
            throw data_error("GridShape: all dimensions must be >= 1");
    }

    // NR carrier: 12 subcarriers per resource block.
    static GridShape from_resource_blocks(int n_rb, int l, int rx = 1, int tx = 1) {
        if (n_rb < 1)
            throw data_error("GridShape: resource block count must be >= 1");
        return GridShape(12 * n_rb, l, rx, tx);
    }

    std::size_t size() const {
        return std::size_t(subcarriers) * symbols * n_rx * n_tx;
    }
    bool operator==(const GridShape& o) const = default;

    std::string str() const {
        return std::to_string(subcarriers) + "x" + std::to_string(symbols) + "x" +
               std::to_string(n_rx) + "x" + std::to_string(n_tx);
    }
};

// Complex-valued resource grid; carries H, H-hat, Y and W alike.
// Memory layout is (r, t, l, k) with k fastest, fixed so that file formats
// are bit-exact across implementations.
class ComplexGrid {
public:
    ComplexGrid() = default;
    explicit ComplexGrid(const GridShape& shape)
        : shape_(shape), v_(shape.size(), cplx(0.0, 0.0)) {}

    const GridShape& shape() const { return shape_; }
    std::size_t size() const { return v_.size(); }

    std::size_t index(int k, int l, int r = 0, int t = 0) const {
        return ((std::size_t(r) * shape_.n_tx + t) * shape_.symbols + l) *
                   shape_.subcarriers +
               k;
    }

    cplx& at(int k, int l, int r = 0, int t = 0) { return v_[index(k, l, r, t)]; }
    const cplx& at(int k, int l, int r = 0, int t = 0) const {
        return v_[index(k, l, r, t)];
    }

    cplx* data() { return v_.data(); }
    const cplx* data() const { return v_.data(); }

    std::vector<cplx>& values() { return v_; }
    const std::vector<cplx>& values() const { return v_; }

    bool finite() const {
        for (const auto& z : v_)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
                return false;
        return true;
    }

    // K x L view of one antenna pair as a fresh single-pair grid.
    ComplexGrid slice(int r, int t) const {
        ComplexGrid out(GridShape(shape_.subcarriers, shape_.symbols, 1, 1));
        for (int l = 0; l < shape_.symbols; ++l)
            for (int k = 0; k < shape_.subcarriers; ++k)
                out.at(k, l) = at(k, l, r, t);
        return out;
    }

private:
    GridShape shape_;
    std::vector<cplx> v_;
};

// <a, b> = sum a * conj(b): linear in the first argument, conjugate-linear in
// the second, so that a = c*b gives <a, b> = c * ||b||^2.
inline cplx inner_product(const ComplexGrid& a, const ComplexGrid& b) {
    if (!(a.shape() == b.shape()))
        throw data_error("inner_product: shape mismatch " + a.shape().str() +
                         " vs " + b.shape().str());
    cplx acc(0.0, 0.0);
    const cplx* pa = a.data();
    const cplx* pb = b.data();
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i)
        acc += pa[i] * std::conj(pb[i]);
    return acc;
}

inline double fro_norm_sq(const ComplexGrid& a) {
    double acc = 0.0;
    for (const auto& z : a.values())
        acc += std::norm(z);
    return acc;
}

inline double to_db(double ratio) {
    if (!(ratio > 0.0))
        throw numeric_error("to_db: ratio must be positive, got " +
                            std::to_string(ratio));
    return 10.0 * std::log10(ratio);
}

} // namespace csiforge
