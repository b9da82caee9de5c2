// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "csiforge/channel.hpp"
#include "csiforge/pilots.hpp"

namespace csiforge {

struct SampleMeta {
    int realization = 0;
    int rx = 0;
    int tx = 0;
    double snr_db = 0.0; // effective, after shadowing
};

// One training example: the interpolated sparse-pilot estimate and the
// clean channel it should be refined toward, both single antenna pair.
struct SamplePair {
    ComplexGrid input;
    ComplexGrid target;
    SampleMeta meta;
};

struct DatasetHeader {
    std::uint32_t version = 1;
    std::uint32_t subcarriers = 0;
    std::uint32_t symbols = 0; // per-window symbol count
    std::uint32_t n_rx = 1;
    std::uint32_t n_tx = 1;
    std::uint64_t count = 0;
    float nominal_snr_db = 15.0f;
};

// Runs the sounding chain per realization: clean window grid as target,
// observe -> least squares -> interpolate on the sparse pattern as input,
// one sample per antenna pair. snr_sweep_db rotates per realization;
// empty means the channel config's nominal SNR throughout.
std::vector<SamplePair> generate_dataset(
    const ChannelConfig& channel, const PilotConfig& sparse,
    const PilotConfig& dense, int count,
    const std::vector<double>& snr_sweep_db, std::uint64_t master_seed,
    int n_slots = 2);

void write_dataset(const std::vector<SamplePair>& samples,
                   const DatasetHeader& header, const std::string& path,
                   const std::string& sidecar_text = "");

std::pair<DatasetHeader, std::vector<SamplePair>>
read_dataset(const std::string& path);

// Disjoint 80/10/10 partition over realization indices, seed-stable.
struct Split {
    std::vector<int> train, val, test;
};

Split split_realizations(int n_realizations, std::uint64_t seed);

// Expands realization indices to sample indices for a fixed pair count.
std::vector<int> expand_split(const std::vector<int>& realizations,
                              int pairs_per_realization);

} // namespace csiforge
