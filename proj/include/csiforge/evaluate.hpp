// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csiforge/baselines.hpp"
#include "csiforge/dataset.hpp"

namespace csiforge {

struct EvalConfig {
    std::vector<double> snr_db_grid{15.0};
    std::vector<std::string> estimators{"input-interp", "lmmse", "damp",
                                        "lstm", "transformer", "genie"};
    std::string transformer_path;
    std::string lstm_path;
    TapProfile profile;
    DopplerSpec doppler;
    double subcarrier_spacing = 15e3;
    PilotConfig sparse = sparse_pilot_config();
    PilotConfig dense = dense_pilot_config();
    GridShape slot{48, 14, 1, 1};
    int n_slots = 2;
    std::uint64_t seed = 0;
    std::uint64_t ber_bits = 0; // total per estimator and SNR; 0 skips BER
};

struct EstimatorCurve {
    std::string name;
    std::vector<double> nmse_db;    // one entry per SNR, ratio of means
    std::vector<double> sp_nmse_db; // scale-projected variant
    std::vector<double> ber;        // empty when BER is skipped
    std::vector<double> subcarrier_abs_err; // at the first grid SNR
};

struct EvalReport {
    std::vector<double> snr_db;
    std::vector<EstimatorCurve> curves;
    Rational overhead_dense{1, 7};
    Rational overhead_sparse{1, 112};
    // first test sample at the first grid SNR, for magnitude heatmaps:
    // ("true", H) followed by one entry per estimator
    std::vector<std::pair<std::string, ComplexGrid>> views;
};

// Re-sounds every target at each grid SNR and scores the estimator suite.
// Learned estimators refine the interpolated input via their model files.
EvalReport evaluate(const std::vector<SamplePair>& test_set,
                    const EvalConfig& cfg);

// Uncoded QPSK link with per-RE zero-forcing by the estimated channel.
// A zero estimate at an RE counts its bits as half wrong. The bit and
// noise draws depend only on the seed, so runs with different estimates
// of the same channel are paired.
std::vector<double> ber_link_sim(const ComplexGrid& h_true,
                                 const ComplexGrid& h_est,
                                 const std::vector<double>& snr_db,
                                 std::uint64_t bits, std::uint64_t seed,
                                 const PilotMask* skip_pilots = nullptr);

// |H| magnitude map as CSV, K rows by L columns, 6 significant digits.
void export_heatmap(const ComplexGrid& grid, const std::string& path);

// dB of an energy ratio with the reporting floor at -100 dB.
double ratio_db_floored(double num, double den);

void write_nmse_csv(const EvalReport& report, const std::string& path);
void write_subcarrier_csv(const EvalReport& report, const std::string& path);
void write_ber_csv(const EvalReport& report, const std::string& path);

} // namespace csiforge
