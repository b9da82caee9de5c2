// SPDX-License-Identifier: Apache-2.0
#include "csiforge/special.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

#include "csiforge/errors.hpp"

namespace csiforge {

namespace {

// Power series sum_m (-x^2/4)^m / (m!)^2; extended precision keeps the
// alternating-sum cancellation below the 1e-10 budget up to x = 16.
double j0_series(double x) {
    const long double q = -(long double)x * x / 4.0L;
    long double term = 1.0L, acc = 1.0L;
    for (int m = 1; m < 200; ++m) {
        term *= q / ((long double)m * m);
        acc += term;
        if (std::abs((double)term) < 1e-18)
            break;
    }
    return (double)acc;
}

// Hankel asymptotic form J0 = sqrt(2/(pi x)) (P cos(x - pi/4) - Q sin(x - pi/4))
// with A_m = prod_{j<=m} (2j-1)^2 / (m! 8^m); truncated at the smallest term.
double j0_asymptotic(double x) {
    long double P = 1.0L, Q = 0.0L;
    long double a = 1.0L; // A_m / x^m
    long double prev = std::numeric_limits<long double>::max();
    for (int m = 1; m < 80; ++m) {
        a *= (long double)(2 * m - 1) * (2 * m - 1) / (8.0L * m * x);
        if (std::abs((double)a) >= prev)
            break; // divergent tail of the asymptotic series
        prev = std::abs((double)a);
        const int r = m % 4;
        if (r == 1)
            Q -= a;
        else if (r == 2)
            P -= a;
        else if (r == 3)
            Q += a;
        else
            P += a;
        if (prev < 1e-18)
            break;
    }
    const long double chi = (long double)x - 0.78539816339744830961L; // x - pi/4
    const long double amp = std::sqrt(2.0L / (3.14159265358979323846L * x));
    return (double)(amp * (P * std::cos(chi) - Q * std::sin(chi)));
}

} // namespace

double bessel_j0(double x) {
    x = std::abs(x); // even function
    if (x <= 16.0)
        return j0_series(x);
    return j0_asymptotic(x);
}

double expint_e1(double z) {
    if (z > 700.0)
        return 0.0; // underflow; exp(-z) alone is below denormal range
    return expint_e1_scaled(z) * std::exp(-z);
}

double expint_e1_scaled(double z) {
    if (!(z > 0.0))
        throw numeric_error("expint_e1: argument must be positive");
    if (z <= 1.0) {
        // E1(z) = -gamma - ln z + sum_{n>=1} (-1)^{n+1} z^n / (n n!)
        const double euler_gamma = 0.57721566490153286061;
        double term = 1.0, acc = 0.0;
        for (int n = 1; n < 60; ++n) {
            term *= -z / n;
            acc -= term / n;
            if (std::abs(term) < 1e-20)
                break;
        }
        return std::exp(z) * (-euler_gamma - std::log(z) + acc);
    }
    // Modified Lentz evaluation of the continued fraction for exp(z) E1(z).
    const double tiny = 1e-300;
    double b = z + 1.0;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 300; ++i) {
        const double a = -(double)i * i;
        b += 2.0;
        d = a * d + b;
        if (std::abs(d) < tiny)
            d = tiny;
        c = b + a / c;
        if (std::abs(c) < tiny)
            c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16)
            return h;
    }
    throw numeric_error("expint_e1: continued fraction failed to converge");
}

} // namespace csiforge
