// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "csiforge/rate.hpp"

using namespace csiforge;

TEST_CASE("rate parameter validation") {
    CHECK_THROWS_AS(sigma_e2({0, 1.0, 0.5}), data_error);
    CHECK_THROWS_AS(sigma_e2({10, -0.1, 0.5}), data_error);
    CHECK_THROWS_AS(sigma_e2({10, 1.0, 0.0}), data_error);
    CHECK_THROWS_AS(sigma_e2({10, 1.0, 1.0}), data_error);
    RateParams ok{112, 10.0, 0.1};
    ok.validate();
}

TEST_CASE("estimation error variance shrinks with pilots and SNR") {
    CHECK(sigma_e2({56, 0.0, 0.5}) == 1.0);
    CHECK(sigma_e2({56, 100.0, 1e-9}) == doctest::Approx(1.0));
    // rho = 10 with ten pilot-equivalent REs: 1/(1 + 100)
    CHECK(sigma_e2({112, 10.0, 10.0 / 112.0}) ==
          doctest::Approx(1.0 / 101.0).epsilon(1e-12));

    double prev = 2.0;
    for (double a : {0.05, 0.1, 0.2, 0.4, 0.8}) {
        const double s = sigma_e2({56, 5.0, a});
        CHECK(s < prev);
        CHECK(s > 0.0);
        CHECK(s <= 1.0);
        prev = s;
    }
    prev = 2.0;
    for (double rho : {0.5, 1.0, 4.0, 16.0}) {
        const double s = sigma_e2({56, rho, 0.25});
        CHECK(s < prev);
        prev = s;
    }
}

TEST_CASE("effective SNR interpolates between zero and the raw SNR") {
    CHECK(rho_eff_from(10.0, 0.0) == 10.0);
    CHECK(rho_eff_from(10.0, 1.0) == 0.0);
    CHECK(rho_eff_from(10.0, 1.0 / 101.0) ==
          doctest::Approx(1000.0 / 111.0).epsilon(1e-12));
    CHECK_THROWS_AS(rho_eff_from(10.0, 1.5), data_error);
    CHECK_THROWS_AS(rho_eff_from(-1.0, 0.5), data_error);

    double prev = -1.0;
    for (double a : {0.02, 0.05, 0.1, 0.3, 0.7}) {
        const double r = rho_eff({56, 8.0, a});
        CHECK(r > prev);
        CHECK(r <= 8.0);
        prev = r;
    }
}

TEST_CASE("ergodic rate term matches the closed form and Monte Carlo") {
    CHECK(ergodic_rate_term(0.0) == 0.0);
    CHECK(ergodic_rate_term(1.0) ==
          doctest::Approx(0.8603473822708868).epsilon(1e-9));
    CHECK_THROWS_AS(ergodic_rate_term(-0.5), data_error);

    for (double x : {1.0, 10.0}) {
        McEstimate mc = ergodic_rate_term_mc(x, 1000000, 99);
        CHECK(std::abs(ergodic_rate_term(x) - mc.mean) <=
              3.0 * mc.std_err);
        CHECK(mc.std_err > 0.0);
        McEstimate again = ergodic_rate_term_mc(x, 1000000, 99);
        CHECK(mc.mean == again.mean); // sharded but deterministic
    }

    // averaging a concave function keeps the result below the rate at
    // the mean fade, so the term sits under log2(1 + x) everywhere
    for (double x : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 100.0})
        CHECK(ergodic_rate_term(x) < std::log2(1.0 + x));
}

TEST_CASE("net rate vanishes at the pilot-only and zero-SNR corners") {
    CHECK(rate({56, 0.0, 0.3}) == 0.0);
    CHECK(rate({56, 10.0, 0.999999}) < 1e-4);

    double prev = -1.0;
    for (double rho : {0.0, 1.0, 3.0, 10.0, 30.0}) {
        const double r = rate({112, rho, 0.125});
        CHECK(r >= prev);
        prev = r;
    }
}

TEST_CASE("overhead-reduction gain under the reconstruction hypothesis") {
    const double a0 = 2.0 / 14.0, a1 = 1.0 / 112.0;
    RateParams p0{112, 10.0, a0}, p1{112, 10.0, a1};

    // without help the sparse pattern has the worse effective SNR
    GainReport raw = gain_lower_bound(p0, p1);
    CHECK_FALSE(raw.hypothesis_holds);
    CHECK(raw.rho_eff1 < raw.rho_eff0);

    // emulated reliable reconstruction: equal effective SNRs
    GainReport rep = gain_lower_bound(p0, p1, rho_eff(p0));
    CHECK(rep.hypothesis_holds);
    CHECK(rep.rho_eff1 == rep.rho_eff0);
    CHECK(rep.gain ==
          doctest::Approx((a0 - a1) * ergodic_rate_term(rep.rho_eff1))
              .epsilon(1e-12));
    CHECK(rep.gain > 0.0);

    for (double rho : {0.5, 2.0, 10.0, 50.0}) {
        RateParams q0{112, rho, a0}, q1{112, rho, a1};
        GainReport g = gain_lower_bound(q0, q1, rho_eff(q0));
        CHECK(g.gain > 0.0);
        CHECK(g.gain >=
              (a0 - a1) * ergodic_rate_term(g.rho_eff1) - 1e-12);
    }

    CHECK_THROWS_AS(gain_lower_bound(p1, p0), data_error);
    CHECK_THROWS_AS(gain_lower_bound(p0, p0), data_error);
    CHECK_THROWS_AS(gain_lower_bound(p0, p1, -1.0), data_error);
}

TEST_CASE("rate sweep rows and csv round trip") {
    const std::vector<double> alphas{0.05, 0.125, 0.25, 0.5};
    auto rows = rate_sweep(6.0, 56, alphas);
    REQUIRE(rows.size() == alphas.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        RateParams p{56, 6.0, alphas[i]};
        CHECK(rows[i].alpha == alphas[i]);
        CHECK(rows[i].sigma_e2 == sigma_e2(p));
        CHECK(rows[i].rho_eff == rho_eff(p));
        CHECK(rows[i].rate == rate(p));
    }

    const std::string path = "test_rate_sweep.csv";
    write_rate_csv(path, rows);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "alpha,sigma_e2,rho_eff,rate_bits_per_re");
    int n = 0;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ','))
            vals.push_back(std::stod(cell));
        REQUIRE(vals.size() == 4);
        CHECK(vals[0] == doctest::Approx(rows[n].alpha).epsilon(1e-8));
        CHECK(vals[3] == doctest::Approx(rows[n].rate).epsilon(1e-8));
        ++n;
    }
    CHECK(n == int(rows.size()));
    std::remove(path.c_str());
}
