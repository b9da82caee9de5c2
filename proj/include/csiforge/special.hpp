// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace csiforge {

// Zeroth-order Bessel function of the first kind, <= 1e-10 absolute error.
double bessel_j0(double x);

// Exponential integral E1(z) for z > 0.
double expint_e1(double z);

// exp(z) * E1(z), stable for large z where E1 alone underflows.
double expint_e1_scaled(double z);

} // namespace csiforge
