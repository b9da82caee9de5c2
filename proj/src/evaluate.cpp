// SPDX-License-Identifier: Apache-2.0
#include "csiforge/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "csiforge/loss.hpp"
#include "csiforge/model.hpp"
#include "csiforge/parallel.hpp"
#include "csiforge/rng.hpp"

namespace csiforge {

double ratio_db_floored(double num, double den) {
    if (!(den > 0.0))
        throw data_error("ratio_db_floored: reference energy must be > 0");
    if (!(num >= 0.0))
        throw numeric_error("ratio_db_floored: negative error energy");
    const double ratio = num / den;
    if (ratio < 1e-10)
        return -100.0;
    return std::max(10.0 * std::log10(ratio), -100.0);
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

struct BerCounts {
    std::uint64_t errors2 = 0; // doubled so the half-error case stays exact
    std::uint64_t bits = 0;
};

BerCounts ber_core(const ComplexGrid& h, const ComplexGrid& est,
                   double sigma2, std::uint64_t bits, std::uint64_t seed,
                   const PilotMask* skip_pilots) {
    if (!(h.shape() == est.shape()))
        throw data_error("ber: estimate shape differs from channel");
    const GridShape& s = h.shape();
    std::vector<std::size_t> data_res;
    for (int l = 0; l < s.symbols; ++l)
        for (int k = 0; k < s.subcarriers; ++k)
            if (!skip_pilots || !skip_pilots->contains(k, l))
                data_res.push_back(h.index(k, l));
    if (data_res.empty())
        throw data_error("ber: no data resource elements left");

    Rng rng(seed);
    BerCounts c;
    std::size_t pos = 0;
    while (c.bits < bits) {
        const std::size_t idx = data_res[pos];
        pos = (pos + 1) % data_res.size();
        const int b0 = int(rng.below(2)), b1 = int(rng.below(2));
        const cplx x((1 - 2 * b0) * kInvSqrt2, (1 - 2 * b1) * kInvSqrt2);
        const cplx w = rng.cgaussian(sigma2);
        const cplx y = h.values()[idx] * x + w;
        const cplx g = est.values()[idx];
        c.bits += 2;
        if (std::norm(g) == 0.0) {
            c.errors2 += 2; // half of two bits, doubled
            continue;
        }
        const cplx xhat = y / g;
        if ((xhat.real() < 0.0) != (b0 == 1))
            c.errors2 += 2;
        if ((xhat.imag() < 0.0) != (b1 == 1))
            c.errors2 += 2;
    }
    return c;
}

} // namespace

std::vector<double> ber_link_sim(const ComplexGrid& h_true,
                                 const ComplexGrid& h_est,
                                 const std::vector<double>& snr_db,
                                 std::uint64_t bits, std::uint64_t seed,
                                 const PilotMask* skip_pilots) {
    if (bits < 10000)
        throw data_error("ber: need at least 1e4 bits for a stable rate");
    std::vector<double> out;
    out.reserve(snr_db.size());
    for (std::size_t j = 0; j < snr_db.size(); ++j) {
        const BerCounts c =
            ber_core(h_true, h_est, snr_db_to_noise_var(snr_db[j]), bits,
                     derive_seed(seed, stream::link, j), skip_pilots);
        out.push_back(0.5 * double(c.errors2) / double(c.bits));
    }
    return out;
}

void export_heatmap(const ComplexGrid& grid, const std::string& path) {
    const GridShape& s = grid.shape();
    if (s.n_rx != 1 || s.n_tx != 1)
        throw data_error("export_heatmap expects a single antenna pair");
    std::ofstream out(path);
    if (!out)
        throw data_error("cannot open heatmap for writing: " + path);
    char cell[40];
    for (int k = 0; k < s.subcarriers; ++k) {
        for (int l = 0; l < s.symbols; ++l) {
            std::snprintf(cell, sizeof cell, "%.6g",
                          std::abs(grid.at(k, l)));
            out << (l ? "," : "") << cell;
        }
        out << "\n";
    }
    if (!out)
        throw data_error("heatmap write failed: " + path);
}

namespace {

struct Accum {
    double err_sq = 0.0, sp_err_sq = 0.0, ref_sq = 0.0;
    BerCounts ber;
    std::vector<double> sub_abs; // per subcarrier, first grid SNR only
};

} // namespace

EvalReport evaluate(const std::vector<SamplePair>& test_set,
                    const EvalConfig& cfg) {
    if (test_set.empty())
        throw data_error("evaluate: empty test set");
    if (cfg.snr_db_grid.empty())
        throw data_error("evaluate: empty SNR grid");
    cfg.profile.validate();
    const GridShape window{cfg.slot.subcarriers,
                           cfg.slot.symbols * cfg.n_slots, 1, 1};
    for (const auto& s : test_set)
        if (!(s.target.shape() == window))
            throw data_error("evaluate: sample shape " +
                             s.target.shape().str() +
                             " does not match the configured window " +
                             window.str());

    const std::set<std::string> known{"input-interp", "lmmse", "damp",
                                      "lstm", "transformer", "genie"};
    std::vector<std::string> missing;
    for (const auto& name : cfg.estimators) {
        if (!known.count(name))
            throw data_error("evaluate: unknown estimator: " + name);
        if (name == "transformer" && cfg.transformer_path.empty())
            missing.push_back("transformer model file");
        if (name == "lstm" && cfg.lstm_path.empty())
            missing.push_back("lstm model file");
    }
    if (!missing.empty()) {
        std::string what = "evaluate: missing inputs:";
        for (const auto& m : missing)
            what += " " + m;
        throw data_error(what);
    }

    auto load_net = [&](const std::string& path, const std::string& kind) {
        auto [params, mcfg] = load_model(path); // data_error when absent
        if (mcfg.kind != kind)
            throw data_error("evaluate: " + path + " holds a " + mcfg.kind +
                             " model, expected " + kind);
        if (mcfg.subcarriers != window.subcarriers ||
            mcfg.symbols != window.symbols)
            throw data_error("evaluate: model grid in " + path +
                             " does not match the evaluation window");
        return std::make_pair(std::move(params), mcfg);
    };
    const bool want_tf =
        std::count(cfg.estimators.begin(), cfg.estimators.end(),
                   "transformer") > 0;
    const bool want_lstm =
        std::count(cfg.estimators.begin(), cfg.estimators.end(), "lstm") >
        0;
    std::pair<ParamStore, ModelConfig> tf, lstm;
    if (want_tf)
        tf = load_net(cfg.transformer_path, "transformer");
    if (want_lstm)
        lstm = load_net(cfg.lstm_path, "lstm");

    const std::size_t n_est = cfg.estimators.size();
    const std::size_t n_snr = cfg.snr_db_grid.size();
    const std::size_t n_samples = test_set.size();
    const int K = window.subcarriers, L = window.symbols;

    // per-sample accumulators, merged in index order afterwards
    std::vector<std::vector<Accum>> per_sample(
        n_samples, std::vector<Accum>(n_est * n_snr));
    std::vector<ComplexGrid> first_views(n_est);
    const std::uint64_t ber_share =
        cfg.ber_bits ? (cfg.ber_bits + n_samples - 1) / n_samples : 0;

    parallel_for(n_samples, [&](std::size_t s) {
        const ComplexGrid& target = test_set[s].target;
        PilotMask mask = gen_pilot_symbols(
            build_window_mask(cfg.sparse, cfg.slot, cfg.n_slots),
            derive_seed(cfg.seed, stream::pilot_symbols, s));
        std::vector<int> comb_ks;
        {
            const int l0 = mask.pilot_symbol_indices().front();
            for (std::size_t i = 0; i < mask.count(); ++i)
                if (mask.omega_l[i] == l0)
                    comb_ks.push_back(mask.omega_k[i]);
            std::sort(comb_ks.begin(), comb_ks.end());
        }

        for (std::size_t j = 0; j < n_snr; ++j) {
            const double sigma2 = snr_db_to_noise_var(cfg.snr_db_grid[j]);
            auto y = observe(
                target, mask, NoiseSpec{sigma2},
                derive_seed(cfg.seed, stream::observation_noise, s, j));
            auto ls = ls_at_pilots(y, mask);
            ComplexGrid interp = interp_sparse(ls, mask, window);

            ChannelPrior prior =
                build_prior(cfg.profile, cfg.doppler,
                            cfg.subcarrier_spacing, comb_ks, sigma2);

            ComplexGrid x0(window);
            for (std::size_t i = 0; i < mask.count(); ++i)
                x0.at(mask.omega_k[i], mask.omega_l[i]) = ls[i];

            for (std::size_t e = 0; e < n_est; ++e) {
                const std::string& name = cfg.estimators[e];
                ComplexGrid est;
                if (name == "input-interp")
                    est = interp;
                else if (name == "lmmse")
                    est = lmmse_estimate(y, mask, prior);
                else if (name == "damp")
                    est = damp_run(y, mask, window,
                                   make_denoiser("soft-delay"), sigma2,
                                   derive_seed(cfg.seed, stream::probe, s,
                                               j),
                                   10, 1e-4, &x0);
                else if (name == "transformer")
                    est = model_refine(interp, tf.first, tf.second);
                else if (name == "lstm")
                    est = model_refine(interp, lstm.first, lstm.second);
                else
                    est = genie_oracle(target);

                Accum& acc = per_sample[s][e * n_snr + j];
                acc.ref_sq = fro_norm_sq(target);
                double err = 0.0;
                for (std::size_t i = 0; i < est.size(); ++i)
                    err += std::norm(est.values()[i] - target.values()[i]);
                acc.err_sq = err;
                const cplx dot = inner_product(est, target);
                acc.sp_err_sq = std::max(
                    fro_norm_sq(est) - std::norm(dot) / acc.ref_sq, 0.0);

                if (s == 0 && j == 0)
                    first_views[e] = est;
                if (j == 0) {
                    acc.sub_abs.assign(std::size_t(K), 0.0);
                    for (int l = 0; l < L; ++l)
                        for (int k = 0; k < K; ++k)
                            acc.sub_abs[k] += std::abs(est.at(k, l) -
                                                       target.at(k, l));
                }
                if (ber_share)
                    acc.ber = ber_core(
                        target, est, sigma2, ber_share,
                        derive_seed(cfg.seed, stream::link, s, j), &mask);
            }
        }
    });

    EvalReport rep;
    rep.snr_db = cfg.snr_db_grid;
    rep.overhead_dense = overhead_fraction(cfg.dense, cfg.slot);
    rep.overhead_sparse = overhead_fraction(cfg.sparse, cfg.slot);
    for (std::size_t e = 0; e < n_est; ++e) {
        EstimatorCurve curve;
        curve.name = cfg.estimators[e];
        for (std::size_t j = 0; j < n_snr; ++j) {
            double err = 0.0, sp = 0.0, ref = 0.0;
            BerCounts ber;
            for (std::size_t s = 0; s < n_samples; ++s) {
                const Accum& a = per_sample[s][e * n_snr + j];
                err += a.err_sq;
                sp += a.sp_err_sq;
                ref += a.ref_sq;
                ber.errors2 += a.ber.errors2;
                ber.bits += a.ber.bits;
            }
            curve.nmse_db.push_back(ratio_db_floored(err, ref));
            curve.sp_nmse_db.push_back(ratio_db_floored(sp, ref));
            if (ber_share)
                curve.ber.push_back(0.5 * double(ber.errors2) /
                                    double(ber.bits));
        }
        curve.subcarrier_abs_err.assign(std::size_t(K), 0.0);
        for (std::size_t s = 0; s < n_samples; ++s)
            for (int k = 0; k < K; ++k)
                curve.subcarrier_abs_err[k] +=
                    per_sample[s][e * n_snr].sub_abs[k] /
                    double(n_samples * L);
        rep.curves.push_back(std::move(curve));
    }
    rep.views.emplace_back("true", test_set[0].target);
    for (std::size_t e = 0; e < n_est; ++e)
        rep.views.emplace_back(cfg.estimators[e],
                               std::move(first_views[e]));
    return rep;
}

namespace {

std::ofstream open_csv(const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw data_error("cannot open csv for writing: " + path);
    return out;
}

} // namespace

void write_nmse_csv(const EvalReport& report, const std::string& path) {
    auto out = open_csv(path);
    out << "# error-to-channel energy ratios in dB, floored at -100\n";
    out << "estimator,snr_db,nmse_db,sp_nmse_db\n";
    char line[160];
    for (const auto& c : report.curves)
        for (std::size_t j = 0; j < report.snr_db.size(); ++j) {
            std::snprintf(line, sizeof line, "%s,%.6g,%.6g,%.6g\n",
                          c.name.c_str(), report.snr_db[j], c.nmse_db[j],
                          c.sp_nmse_db[j]);
            out << line;
        }
}

void write_subcarrier_csv(const EvalReport& report,
                          const std::string& path) {
    auto out = open_csv(path);
    out << "# mean absolute estimation error per subcarrier at the first "
           "grid SNR\n";
    out << "estimator,subcarrier,mean_abs_err\n";
    char line[120];
    for (const auto& c : report.curves)
        for (std::size_t k = 0; k < c.subcarrier_abs_err.size(); ++k) {
            std::snprintf(line, sizeof line, "%s,%zu,%.6g\n",
                          c.name.c_str(), k, c.subcarrier_abs_err[k]);
            out << line;
        }
}

void write_ber_csv(const EvalReport& report, const std::string& path) {
    auto out = open_csv(path);
    out << "# uncoded QPSK bit error rate with zero-forcing equalization\n";
    out << "estimator,snr_db,ber\n";
    char line[120];
    for (const auto& c : report.curves) {
        if (c.ber.empty())
            continue;
        for (std::size_t j = 0; j < report.snr_db.size(); ++j) {
            std::snprintf(line, sizeof line, "%s,%.6g,%.6g\n",
                          c.name.c_str(), report.snr_db[j], c.ber[j]);
            out << line;
        }
    }
}

} // namespace csiforge
