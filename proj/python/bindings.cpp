// SPDX-License-Identifier: Apache-2.0
// Python bindings over the core operations: channel generation, pilot
// sounding, baseline and learned reconstruction, losses, link BER, and
// the rate analysis.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>
#include <cstdint>
#include <utility>

#include "csiforge/baselines.hpp"
#include "csiforge/channel.hpp"
#include "csiforge/dataset.hpp"
#include "csiforge/evaluate.hpp"
#include "csiforge/grid.hpp"
#include "csiforge/loss.hpp"
#include "csiforge/model.hpp"
#include "csiforge/pilots.hpp"
#include "csiforge/rate.hpp"
#include "csiforge/rng.hpp"
#include "csiforge/special.hpp"

namespace py = pybind11;
using namespace csiforge;

namespace {

using carr = py::array_t<std::complex<double>>;

carr grid_to_np(const ComplexGrid& g) {
    const int K = g.shape().subcarriers, L = g.shape().symbols;
    carr out({K, L});
    auto w = out.mutable_unchecked<2>();
    for (int k = 0; k < K; ++k)
        for (int l = 0; l < L; ++l)
            w(k, l) = g.at(k, l);
    return out;
}

ComplexGrid np_to_grid(const carr& a) {
    if (a.ndim() != 2)
        throw py::value_error("expected a 2-D complex array [subcarriers, symbols]");
    const int K = int(a.shape(0)), L = int(a.shape(1));
    ComplexGrid g(GridShape(K, L, 1, 1));
    auto r = a.unchecked<2>();
    for (int k = 0; k < K; ++k)
        for (int l = 0; l < L; ++l)
            g.at(k, l) = r(k, l);
    return g;
}

ChannelConfig make_channel(int subcarriers, int symbols, double tau_rms,
                           double doppler_hz, double snr_db,
                           double shadowing_std_db) {
    ChannelConfig ch;
    ch.shape = GridShape(subcarriers, symbols, 1, 1);
    ch.profile = make_tdlc_profile(tau_rms);
    ch.doppler.f_d_max = doppler_hz;
    ch.nominal_snr_db = snr_db;
    ch.shadowing_std_db = shadowing_std_db;
    ch.validate();
    return ch;
}

// Owns the parameters of a saved or freshly initialized network.
struct PyModel {
    ParamStore params;
    ModelConfig cfg;

    carr apply(const carr& grid) const {
        return grid_to_np(model_apply(np_to_grid(grid), params, cfg));
    }
    carr refine(const carr& grid) const {
        return grid_to_np(model_refine(np_to_grid(grid), params, cfg));
    }
    void save(const std::string& path) const {
        save_model(params, cfg, path);
    }
};

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "MIMO-OFDM channel estimation workbench core";
    m.attr("__version__") = "0.1.0";

    py::register_exception<usage_error>(m, "UsageError", PyExc_ValueError);
    py::register_exception<data_error>(m, "DataError", PyExc_ValueError);
    py::register_exception<numeric_error>(m, "NumericError",
                                          PyExc_ArithmeticError);

    // scalar helpers
    m.def("bessel_j0", &bessel_j0, py::arg("x"),
          "Zeroth-order Bessel function of the first kind.");
    m.def("expint_e1", &expint_e1, py::arg("z"),
          "Exponential integral E1(z) for z > 0.");
    m.def("expint_e1_scaled", &expint_e1_scaled, py::arg("z"),
          "exp(z) * E1(z), stable for large z.");
    m.def("to_db", &to_db, py::arg("ratio"));
    m.def("snr_db_to_noise_var", &snr_db_to_noise_var, py::arg("snr_db"));

    // pilot overhead fractions of the two sounding patterns
    m.def(
        "pilot_overhead",
        [](int subcarriers, int symbols) {
            const GridShape slot(subcarriers, symbols, 1, 1);
            const Rational d =
                overhead_fraction(dense_pilot_config(), slot);
            const Rational s =
                overhead_fraction(sparse_pilot_config(), slot);
            const Rational r = d / s;
            py::dict out;
            out["dense"] = py::make_tuple(d.num, d.den);
            out["sparse"] = py::make_tuple(s.num, s.den);
            out["ratio"] = py::make_tuple(r.num, r.den);
            return out;
        },
        py::arg("subcarriers") = 48, py::arg("symbols") = 14,
        "Pilot resource fractions as exact (numerator, denominator) pairs.");

    // channel generation
    m.def(
        "tap_gains",
        [](double tau_rms, double doppler_hz, int symbols, double dt,
           std::uint64_t seed) {
            TapProfile prof = make_tdlc_profile(tau_rms);
            DopplerSpec dop;
            dop.f_d_max = doppler_hz;
            TapGains g =
                gen_tap_gains(prof, dop, symbols, dt, seed);
            carr out({g.n_taps, g.n_symbols});
            auto w = out.mutable_unchecked<2>();
            for (int p = 0; p < g.n_taps; ++p)
                for (int l = 0; l < g.n_symbols; ++l)
                    w(p, l) = g.at(p, 0, 0, l);
            return out;
        },
        py::arg("tau_rms") = 251e-9, py::arg("doppler_hz") = 50.0,
        py::arg("symbols") = 28, py::arg("dt") = 1.0 / 15e3,
        py::arg("seed") = 1,
        "Per-tap Jakes gain series, shape [taps, symbols].");
    m.def(
        "channel_window",
        [](int subcarriers, int symbols, double tau_rms,
           double doppler_hz, std::uint64_t seed) {
            return grid_to_np(gen_realization(
                make_channel(subcarriers, symbols, tau_rms, doppler_hz,
                             15.0, 0.0),
                seed));
        },
        py::arg("subcarriers") = 48, py::arg("symbols") = 14,
        py::arg("tau_rms") = 251e-9, py::arg("doppler_hz") = 50.0,
        py::arg("seed") = 1,
        "One clean channel realization, shape [subcarriers, symbols].");

    // sounding chain: sparse-pilot inputs and clean targets
    m.def(
        "generate_samples",
        [](int count, std::uint64_t seed, int subcarriers, int symbols,
           int n_slots, double tau_rms, double doppler_hz, double snr_db,
           double shadowing_std_db) {
            const ChannelConfig ch =
                make_channel(subcarriers, symbols, tau_rms, doppler_hz,
                             snr_db, shadowing_std_db);
            const auto samples = generate_dataset(
                ch, sparse_pilot_config(), dense_pilot_config(), count,
                {}, seed, n_slots);
            const int N = int(samples.size());
            const int K = subcarriers, LT = symbols * n_slots;
            carr inp({N, K, LT}), tgt({N, K, LT});
            py::array_t<double> snrs(N);
            auto wi = inp.mutable_unchecked<3>();
            auto wt = tgt.mutable_unchecked<3>();
            auto ws = snrs.mutable_unchecked<1>();
            for (int i = 0; i < N; ++i) {
                for (int k = 0; k < K; ++k)
                    for (int l = 0; l < LT; ++l) {
                        wi(i, k, l) = samples[i].input.at(k, l);
                        wt(i, k, l) = samples[i].target.at(k, l);
                    }
                ws(i) = samples[i].meta.snr_db;
            }
            return py::make_tuple(inp, tgt, snrs);
        },
        py::arg("count"), py::arg("seed") = 1, py::arg("subcarriers") = 48,
        py::arg("symbols") = 14, py::arg("n_slots") = 2,
        py::arg("tau_rms") = 251e-9, py::arg("doppler_hz") = 50.0,
        py::arg("snr_db") = 15.0, py::arg("shadowing_std_db") = 0.0,
        "Sparse-pilot estimates and clean targets: (input, target, "
        "effective_snr_db) with grids shaped [count, subcarriers, "
        "symbols * n_slots].");

    // error measures
    m.def(
        "nmse_db",
        [](const carr& est, const carr& ref) {
            return to_db(nmse(np_to_grid(est), np_to_grid(ref)));
        },
        py::arg("est"), py::arg("ref"));
    m.def(
        "sp_nmse_db",
        [](const carr& est, const carr& ref) {
            return to_db(
                sp_nmse(np_to_grid(est), np_to_grid(ref)).first);
        },
        py::arg("est"), py::arg("ref"),
        "Scale-projected NMSE in dB: the error after the optimal real "
        "scaling of the estimate.");

    // QPSK link simulation
    m.def(
        "ber_link",
        [](const carr& h_true, const carr& h_est,
           const std::vector<double>& snr_db, std::uint64_t bits,
           std::uint64_t seed) {
            return ber_link_sim(np_to_grid(h_true), np_to_grid(h_est),
                                snr_db, bits, seed);
        },
        py::arg("h_true"), py::arg("h_est"), py::arg("snr_db"),
        py::arg("bits") = 100000, py::arg("seed") = 1,
        "QPSK bit error rate with the estimate used for equalization.");

    // achievable-rate analysis
    m.def("ergodic_rate_term", &ergodic_rate_term, py::arg("x"),
          "E[log2(1 + x |h|^2)] for Rayleigh |h|^2 ~ Exp(1).");
    m.def(
        "rate_gain",
        [](double alpha0, double alpha1, double rho_db, int t_c,
           bool assume_reliable) {
            RateParams p0{t_c, std::pow(10.0, rho_db / 10.0), alpha0};
            RateParams p1 = p0;
            p1.alpha = alpha1;
            std::optional<double> override;
            if (assume_reliable)
                override = rho_eff(p0);
            const GainReport r = gain_lower_bound(p0, p1, override);
            py::dict out;
            out["gain"] = r.gain;
            out["bound"] = r.bound;
            out["hypothesis_holds"] = r.hypothesis_holds;
            out["rho_eff_dense"] = r.rho_eff0;
            out["rho_eff_sparse"] = r.rho_eff1;
            return out;
        },
        py::arg("alpha0"), py::arg("alpha1"), py::arg("rho_db") = 15.0,
        py::arg("t_c") = 168, py::arg("assume_reliable") = false,
        "Net rate gain from cutting pilot overhead, with the "
        "log-comparison value alongside.");

    // learned estimators
    py::class_<PyModel>(m, "Model")
        .def_property_readonly(
            "kind", [](const PyModel& s) { return s.cfg.kind; })
        .def_property_readonly(
            "subcarriers",
            [](const PyModel& s) { return s.cfg.subcarriers; })
        .def_property_readonly(
            "symbols", [](const PyModel& s) { return s.cfg.symbols; })
        .def("apply", &PyModel::apply, py::arg("grid"),
             "Raw forward pass on an estimated grid [subcarriers, symbols].")
        .def("refine", &PyModel::refine, py::arg("grid"),
             "Forward pass plus scale restoration against the input grid.")
        .def("save", &PyModel::save, py::arg("path"));
    m.def(
        "init_model",
        [](const std::string& kind, int subcarriers, int symbols,
           std::uint64_t seed, int patch_k, int patch_l, int d_model,
           int n_layers, int n_heads, int d_ff, int lstm_hidden) {
            ModelConfig cfg;
            cfg.kind = kind;
            cfg.subcarriers = subcarriers;
            cfg.symbols = symbols;
            cfg.patch_k = patch_k;
            cfg.patch_l = patch_l;
            cfg.d_model = d_model;
            cfg.n_layers = n_layers;
            cfg.n_heads = n_heads;
            cfg.d_ff = d_ff;
            cfg.lstm_hidden = lstm_hidden;
            PyModel s;
            s.params = init_params(cfg, seed);
            s.cfg = cfg;
            return s;
        },
        py::arg("kind") = "transformer", py::arg("subcarriers") = 48,
        py::arg("symbols") = 28, py::arg("seed") = 1,
        py::arg("patch_k") = 4, py::arg("patch_l") = 2,
        py::arg("d_model") = 64, py::arg("n_layers") = 4,
        py::arg("n_heads") = 4, py::arg("d_ff") = 128,
        py::arg("lstm_hidden") = 32,
        "Freshly initialized, untrained network.");
    m.def(
        "load_model",
        [](const std::string& path) {
            auto [params, cfg] = load_model(path);
            PyModel s;
            s.params = std::move(params);
            s.cfg = cfg;
            return s;
        },
        py::arg("path"));

    // classical reconstruction from a stored sparse-pilot input
    m.def(
        "pilot_mask_seed",
        [](std::uint64_t master_seed, std::uint64_t sample_index) {
            return derive_seed(master_seed, stream::pilot_symbols,
                               sample_index);
        },
        py::arg("master_seed"), py::arg("sample_index"),
        "Seed of the pilot sequence used for a given sample of "
        "generate_samples(count, master_seed, ...).");
    m.def(
        "lmmse_refine",
        [](const carr& input, int slot_symbols, int n_slots,
           double tau_rms, double doppler_hz, double snr_db,
           std::uint64_t mask_seed) {
            const ComplexGrid in = np_to_grid(input);
            const GridShape slot(in.shape().subcarriers, slot_symbols,
                                 1, 1);
            PilotMask mask = gen_pilot_symbols(
                build_window_mask(sparse_pilot_config(), slot, n_slots),
                mask_seed);
            std::vector<cplx> y(mask.count());
            for (std::size_t i = 0; i < mask.count(); ++i)
                y[i] = in.at(mask.omega_k[i], mask.omega_l[i]) *
                       mask.values[i];
            std::vector<int> ks;
            const int l0 = mask.pilot_symbol_indices().front();
            for (std::size_t i = 0; i < mask.count(); ++i)
                if (mask.omega_l[i] == l0)
                    ks.push_back(mask.omega_k[i]);
            std::sort(ks.begin(), ks.end());
            TapProfile prof = make_tdlc_profile(tau_rms);
            DopplerSpec dop;
            dop.f_d_max = doppler_hz;
            const ChannelPrior prior =
                build_prior(prof, dop, 15e3, ks,
                            snr_db_to_noise_var(snr_db));
            return grid_to_np(lmmse_estimate(y, mask, prior));
        },
        py::arg("input"), py::arg("slot_symbols") = 14,
        py::arg("n_slots") = 2, py::arg("tau_rms") = 251e-9,
        py::arg("doppler_hz") = 50.0, py::arg("snr_db") = 15.0,
        py::arg("mask_seed") = 0,
        "Statistical re-estimate from the pilots embedded in a stored "
        "input grid. The mask seed must match the one the input was "
        "sounded with.");
}
