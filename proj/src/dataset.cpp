// SPDX-License-Identifier: Apache-2.0
#include "csiforge/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>

#include "csiforge/parallel.hpp"
#include "csiforge/rng.hpp"

namespace csiforge {

std::vector<SamplePair> generate_dataset(
    const ChannelConfig& channel, const PilotConfig& sparse,
    const PilotConfig& dense, int count,
    const std::vector<double>& snr_sweep_db, std::uint64_t master_seed,
    int n_slots) {
    channel.validate();
    const GridShape slot{channel.shape.subcarriers, channel.shape.symbols,
                         1, 1};
    sparse.validate(slot);
    dense.validate(slot);
    if (count < 1)
        throw data_error("generate_dataset: count must be >= 1");
    if (n_slots < 1)
        throw data_error("generate_dataset: window needs >= 1 slot");

    ChannelConfig window = channel;
    window.shape.symbols = channel.shape.symbols * n_slots;
    const GridShape pair_shape{window.shape.subcarriers,
                               window.shape.symbols, 1, 1};
    const int pairs = channel.shape.n_rx * channel.shape.n_tx;

    std::vector<SamplePair> out(std::size_t(count) * pairs);
    parallel_for(std::size_t(count), [&](std::size_t i) {
        ChannelConfig cfg = window;
        if (!snr_sweep_db.empty())
            cfg.nominal_snr_db = snr_sweep_db[i % snr_sweep_db.size()];
        const std::uint64_t rseed =
            derive_seed(master_seed, stream::realization, i);
        ComplexGrid h = gen_realization(cfg, rseed);
        const double snr = draw_effective_snr(cfg, rseed);
        const NoiseSpec noise = NoiseSpec::from_snr_db(snr);
        PilotMask mask = gen_pilot_symbols(
            build_window_mask(sparse, slot, n_slots),
            derive_seed(master_seed, stream::pilot_symbols, i));

        for (int r = 0; r < channel.shape.n_rx; ++r)
            for (int t = 0; t < channel.shape.n_tx; ++t) {
                SamplePair& s = out[i * pairs + r * channel.shape.n_tx + t];
                s.target = h.slice(r, t);
                auto y = observe(
                    s.target, mask, noise,
                    derive_seed(master_seed, stream::observation_noise, i,
                                r, t));
                s.input =
                    interp_sparse(ls_at_pilots(y, mask), mask, pair_shape);
                s.meta = {int(i), r, t, snr};
            }
    });
    return out;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

void put_f32(std::ofstream& out, float v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t take_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

} // namespace

void write_dataset(const std::vector<SamplePair>& samples,
                   const DatasetHeader& header, const std::string& path,
                   const std::string& sidecar_text) {
    if (header.count != samples.size())
        throw data_error("write_dataset: header count disagrees with data");
    const GridShape want{int(header.subcarriers), int(header.symbols), 1, 1};
    for (const auto& s : samples) {
        if (!(s.input.shape() == want) || !(s.target.shape() == want))
            throw data_error("write_dataset: sample shape mismatch, want " +
                             want.str());
        if (!s.target.finite())
            throw data_error("write_dataset: non-finite target grid");
    }

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw data_error("cannot open dataset for writing: " + path);
    out.write("CSIDSET1", 8);
    put_u32(out, header.version);
    put_u32(out, header.subcarriers);
    put_u32(out, header.symbols);
    put_u32(out, header.n_rx);
    put_u32(out, header.n_tx);
    const std::uint64_t count = header.count;
    out.write(reinterpret_cast<const char*>(&count), 8);
    put_f32(out, header.nominal_snr_db);

    for (const auto& s : samples)
        for (const ComplexGrid* g : {&s.input, &s.target})
            for (const cplx& z : g->values()) {
                put_f32(out, float(z.real()));
                put_f32(out, float(z.imag()));
            }
    if (!out)
        throw data_error("dataset write failed: " + path);
    out.close();

    if (!sidecar_text.empty()) {
        std::ofstream side(path + ".meta.txt");
        if (!side)
            throw data_error("cannot open dataset sidecar: " + path);
        side << sidecar_text;
    }
}

std::pair<DatasetHeader, std::vector<SamplePair>>
read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in)
        throw data_error("cannot open dataset: " + path);
    const std::uint64_t fsize = std::uint64_t(in.tellg());
    in.seekg(0);

    char magic[8];
    if (fsize < 40 || !in.read(magic, 8) ||
        std::memcmp(magic, "CSIDSET1", 8) != 0)
        throw data_error("bad magic: not a dataset file: " + path);

    DatasetHeader h;
    h.version = take_u32(in);
    if (h.version != 1)
        throw data_error("unsupported dataset version " +
                         std::to_string(h.version) + " in " + path);
    h.subcarriers = take_u32(in);
    h.symbols = take_u32(in);
    h.n_rx = take_u32(in);
    h.n_tx = take_u32(in);
    in.read(reinterpret_cast<char*>(&h.count), 8);
    in.read(reinterpret_cast<char*>(&h.nominal_snr_db), 4);
    if (h.subcarriers == 0 || h.symbols == 0)
        throw data_error("corrupt dataset header (zero grid) in " + path);

    const std::uint64_t per =
        2ull * h.subcarriers * h.symbols * 8ull; // two f32 grids
    if (fsize != 40 + h.count * per)
        throw data_error("truncated dataset payload: " + path + " has " +
                         std::to_string(fsize) + " bytes, expected " +
                         std::to_string(40 + h.count * per));

    const GridShape shape{int(h.subcarriers), int(h.symbols), 1, 1};
    std::vector<SamplePair> samples(h.count);
    std::vector<float> buf(2ull * h.subcarriers * h.symbols * 2);
    for (auto& s : samples) {
        in.read(reinterpret_cast<char*>(buf.data()),
                std::streamsize(buf.size() * 4));
        if (!in)
            throw data_error("truncated dataset payload: " + path);
        s.input = ComplexGrid(shape);
        s.target = ComplexGrid(shape);
        const std::size_t n = s.input.size();
        for (std::size_t i = 0; i < n; ++i)
            s.input.values()[i] = cplx(buf[2 * i], buf[2 * i + 1]);
        for (std::size_t i = 0; i < n; ++i)
            s.target.values()[i] =
                cplx(buf[2 * n + 2 * i], buf[2 * n + 2 * i + 1]);
        s.meta.snr_db = h.nominal_snr_db;
    }
    return {h, std::move(samples)};
}

Split split_realizations(int n_realizations, std::uint64_t seed) {
    if (n_realizations < 3)
        throw data_error("split needs at least 3 realizations");
    std::vector<int> order(n_realizations);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, stream::split));
    for (int i = n_realizations - 1; i > 0; --i)
        std::swap(order[i], order[rng.below(std::uint64_t(i) + 1)]);

    const int n_val = std::max(n_realizations / 10, 1);
    const int n_test = n_val;
    Split s;
    s.train.assign(order.begin(), order.end() - n_val - n_test);
    s.val.assign(order.end() - n_val - n_test, order.end() - n_test);
    s.test.assign(order.end() - n_test, order.end());
    return s;
}

std::vector<int> expand_split(const std::vector<int>& realizations,
                              int pairs_per_realization) {
    if (pairs_per_realization < 1)
        throw data_error("expand_split: pair count must be >= 1");
    std::vector<int> out;
    out.reserve(realizations.size() * pairs_per_realization);
    for (int r : realizations)
        for (int p = 0; p < pairs_per_realization; ++p)
            out.push_back(r * pairs_per_realization + p);
    return out;
}

} // namespace csiforge
