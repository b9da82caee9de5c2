// SPDX-License-Identifier: Apache-2.0
#include "csiforge/config.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "csiforge/errors.hpp"
#include "csiforge/rate.hpp"

namespace csiforge {

namespace {

const std::vector<std::pair<const char*, const char*>>& schema() {
    static const std::vector<std::pair<const char*, const char*>> s{
        {"channel.subcarriers", "48"},
        {"channel.symbols", "14"},
        {"channel.rx", "1"},
        {"channel.tx", "1"},
        {"channel.spacing_hz", "15000"},
        {"channel.delay_spread_ns", "251"},
        {"channel.doppler_hz", "50"},
        {"channel.sinusoids", "64"},
        {"channel.snr_db", "15"},
        {"channel.shadowing_std_db", "0"},
        {"channel.tap_table", ""},
        {"pilots.window_slots", "2"},
        {"gen.count", "16"},
        {"gen.seed", "1"},
        {"gen.out", "dataset.csid"},
        {"gen.snr_sweep_db", ""},
        {"model.kind", "transformer"},
        {"model.patch_k", "4"},
        {"model.patch_l", "2"},
        {"model.d_model", "64"},
        {"model.layers", "4"},
        {"model.heads", "4"},
        {"model.d_ff", "128"},
        {"model.lstm_hidden", "32"},
        {"train.data", ""},
        {"train.out", "model.csim"},
        {"train.history", "history.csv"},
        {"train.epochs", "30"},
        {"train.batch", "32"},
        {"train.lr", "0.001"},
        {"train.lr_final", "-1"},
        {"train.warmup_steps", "0"},
        {"train.gamma_final", "-1"},
        {"train.weight_decay", "0"},
        {"train.seed", "1"},
        {"train.beta", "0.05"},
        {"train.gamma", "0.1"},
        {"train.lambda_t", "1"},
        {"train.lambda_f", "1"},
        {"train.plain_nmse", "false"},
        {"eval.data", ""},
        {"eval.out_dir", "eval_out"},
        {"eval.snr_db", "15"},
        {"eval.estimators", "input-interp,lmmse,damp,genie"},
        {"eval.transformer", ""},
        {"eval.lstm", ""},
        {"eval.ber_bits", "0"},
        {"eval.seed", "1"},
        {"eval.split", "all"},
        {"eval.split_seed", "1"},
        {"rate.alpha0", "0.14285714285714285"},
        {"rate.alpha1", "0.008928571428571428"},
        {"rate.rho_db", "15"},
        {"rate.tc", "168"},
        {"rate.assume_reliable", "false"},
        {"rate.sweep_out", ""},
        {"rate.sweep_points", "25"},
    };
    return s;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty())
            out.push_back(item);
    }
    return out;
}

} // namespace

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    for (const auto& [k, v] : schema())
        cfg.values.emplace(k, v);
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    auto it = values.find(key);
    if (it == values.end())
        throw usage_error("unknown config key: " + key);
    it->second = value;
}

void RunConfig::set_pair(const std::string& key_eq_value) {
    const auto eq = key_eq_value.find('=');
    if (eq == std::string::npos)
        throw usage_error("expected key=value, got: " + key_eq_value);
    set(trim(key_eq_value.substr(0, eq)),
        trim(key_eq_value.substr(eq + 1)));
}

void RunConfig::load_text(const std::string& text,
                          const std::string& origin) {
    std::istringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos)
            line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw usage_error(origin + ":" + std::to_string(lineno) +
                              ": expected key = value");
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw data_error("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    load_text(buf.str(), path);
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end())
        throw usage_error("unknown config key: " + key);
    return it->second;
}

double RunConfig::num(const std::string& key) const {
    const std::string& v = get(key);
    std::size_t used = 0;
    double x = 0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = std::string::npos;
    }
    if (used != v.size() || v.empty())
        throw usage_error("config value " + key + " is not a number: '" +
                          v + "'");
    return x;
}

long RunConfig::integer(const std::string& key) const {
    const std::string& v = get(key);
    std::size_t used = 0;
    long x = 0;
    try {
        x = std::stol(v, &used);
    } catch (const std::exception&) {
        used = std::string::npos;
    }
    if (used != v.size() || v.empty())
        throw usage_error("config value " + key +
                          " is not an integer: '" + v + "'");
    return x;
}

bool RunConfig::flag(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes")
        return true;
    if (v == "false" || v == "0" || v == "no")
        return false;
    throw usage_error("config value " + key + " is not a boolean: '" + v +
                      "'");
}

std::vector<double> RunConfig::num_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_commas(get(key))) {
        std::size_t used = 0;
        double x = 0;
        try {
            x = std::stod(item, &used);
        } catch (const std::exception&) {
            used = std::string::npos;
        }
        if (used != item.size())
            throw usage_error("config value " + key +
                              " has a non-numeric entry: '" + item + "'");
        out.push_back(x);
    }
    return out;
}

std::vector<std::string>
RunConfig::name_list(const std::string& key) const {
    return split_commas(get(key));
}

std::string RunConfig::echo() const {
    std::string out;
    for (const auto& [k, v] : values)
        out += k + " = " + v + "\n";
    return out;
}

std::uint64_t RunConfig::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : echo()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

ChannelConfig RunConfig::channel() const {
    ChannelConfig ch;
    ch.shape = GridShape(int(integer("channel.subcarriers")),
                         int(integer("channel.symbols")),
                         int(integer("channel.rx")),
                         int(integer("channel.tx")));
    ch.subcarrier_spacing = num("channel.spacing_hz");
    ch.symbol_duration = 1.0 / ch.subcarrier_spacing;
    const std::string table = get("channel.tap_table");
    ch.profile = table.empty()
                     ? make_tdlc_profile(num("channel.delay_spread_ns") *
                                         1e-9)
                     : load_tap_table(table);
    ch.doppler.f_d_max = num("channel.doppler_hz");
    ch.doppler.num_sinusoids = int(integer("channel.sinusoids"));
    ch.nominal_snr_db = num("channel.snr_db");
    ch.shadowing_std_db = num("channel.shadowing_std_db");
    ch.validate();
    return ch;
}

ModelConfig RunConfig::model(int subcarriers, int symbols) const {
    ModelConfig m;
    m.kind = get("model.kind");
    m.subcarriers = subcarriers;
    m.symbols = symbols;
    m.patch_k = int(integer("model.patch_k"));
    m.patch_l = int(integer("model.patch_l"));
    m.d_model = int(integer("model.d_model"));
    m.n_layers = int(integer("model.layers"));
    m.n_heads = int(integer("model.heads"));
    m.d_ff = int(integer("model.d_ff"));
    m.lstm_hidden = int(integer("model.lstm_hidden"));
    m.validate();
    return m;
}

TrainConfig RunConfig::trainer(int subcarriers, int symbols) const {
    TrainConfig t;
    t.epochs = int(integer("train.epochs"));
    t.batch_size = int(integer("train.batch"));
    t.lr = num("train.lr");
    t.lr_final = num("train.lr_final");
    t.warmup_steps = int(integer("train.warmup_steps"));
    t.gamma_final = num("train.gamma_final");
    t.weight_decay = num("train.weight_decay");
    t.seed = std::uint64_t(integer("train.seed"));
    t.loss.beta = num("train.beta");
    t.loss.gamma = num("train.gamma");
    t.loss.lambda_t = num("train.lambda_t");
    t.loss.lambda_f = num("train.lambda_f");
    t.loss.plain_nmse = flag("train.plain_nmse");
    t.model = model(subcarriers, symbols);
    t.validate();
    return t;
}

EvalConfig RunConfig::eval() const {
    EvalConfig e;
    e.snr_db_grid = num_list("eval.snr_db");
    e.estimators = name_list("eval.estimators");
    e.transformer_path = get("eval.transformer");
    e.lstm_path = get("eval.lstm");
    const ChannelConfig ch = channel();
    e.profile = ch.profile;
    e.doppler = ch.doppler;
    e.subcarrier_spacing = ch.subcarrier_spacing;
    e.slot = GridShape(ch.shape.subcarriers, ch.shape.symbols, 1, 1);
    e.n_slots = int(integer("pilots.window_slots"));
    e.seed = std::uint64_t(integer("eval.seed"));
    e.ber_bits = std::uint64_t(integer("eval.ber_bits"));
    return e;
}

namespace {

void print_config(const RunConfig& cfg) {
    std::cout << cfg.echo();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(cfg.hash()));
    std::cout << "config-hash: " << buf << "\n";
}

std::string format_g(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

} // namespace

void cmd_gen(const RunConfig& cfg) {
    const ChannelConfig ch = cfg.channel();
    const int n_slots = int(cfg.integer("pilots.window_slots"));
    const int count = int(cfg.integer("gen.count"));
    const auto seed = std::uint64_t(cfg.integer("gen.seed"));
    const auto sweep = cfg.num_list("gen.snr_sweep_db");
    const std::string out = cfg.get("gen.out");

    auto samples = generate_dataset(ch, sparse_pilot_config(),
                                    dense_pilot_config(), count, sweep,
                                    seed, n_slots);
    DatasetHeader header;
    header.subcarriers = std::uint32_t(ch.shape.subcarriers);
    header.symbols = std::uint32_t(ch.shape.symbols * n_slots);
    header.n_rx = std::uint32_t(ch.shape.n_rx);
    header.n_tx = std::uint32_t(ch.shape.n_tx);
    header.count = samples.size();
    header.nominal_snr_db = float(ch.nominal_snr_db);
    write_dataset(samples, header, out,
                  "seed = " + std::to_string(seed) + "\n" + cfg.echo());

    const Rational dense = overhead_fraction(dense_pilot_config(),
                                             ch.shape);
    const Rational sparse = overhead_fraction(sparse_pilot_config(),
                                              ch.shape);
    std::cout << "eta_dense = " << dense.num << "/" << dense.den << "\n";
    std::cout << "eta_sparse = " << sparse.num << "/" << sparse.den
              << "\n";
    const long long rn = 1LL * dense.num * sparse.den;
    const long long rd = 1LL * dense.den * sparse.num;
    if (rn % rd == 0)
        std::cout << "overhead_ratio = " << rn / rd << "\n";
    else
        std::cout << "overhead_ratio = " << rn << "/" << rd << "\n";
    std::cout << "wrote " << out << " (" << samples.size()
              << " samples)\n";
}

void cmd_train(const RunConfig& cfg) {
    const std::string data = cfg.get("train.data");
    if (data.empty())
        throw data_error("train: no dataset given (train.data)");
    auto [header, samples] = read_dataset(data);

    const int pairs = int(header.n_rx * header.n_tx);
    const int n_real = int(header.count) / pairs;
    const Split split =
        split_realizations(n_real, std::uint64_t(cfg.integer("train.seed")));
    auto pick = [&](const std::vector<int>& reals) {
        std::vector<SamplePair> subset;
        for (int i : expand_split(reals, pairs))
            subset.push_back(samples[std::size_t(i)]);
        return subset;
    };
    const auto train_set = pick(split.train);
    const auto val_set = pick(split.val);

    const TrainConfig tc =
        cfg.trainer(int(header.subcarriers), int(header.symbols));
    std::cout << "training " << tc.model.kind << " on "
              << train_set.size() << " samples (" << val_set.size()
              << " validation)\n";
    TrainResult result =
        train(train_set, val_set, tc, [](int e, double tr, double va) {
            std::cout << "epoch " << e << " train " << format_g(tr)
                      << " val " << format_g(va) << "\n";
        });

    const std::string out = cfg.get("train.out");
    save_model(result.params, tc.model, out);

    const std::string hist = cfg.get("train.history");
    std::ofstream hout(hist);
    if (!hout)
        throw data_error("cannot open history csv: " + hist);
    hout << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
        hout << e + 1 << "," << format_g(result.loss_history[e]) << ",";
        if (e < result.val_history.size())
            hout << format_g(result.val_history[e]);
        hout << "\n";
    }
    std::cout << "wrote " << out << " and " << hist << "\n";
}

void cmd_eval(const RunConfig& cfg) {
    const std::string data = cfg.get("eval.data");
    if (data.empty())
        throw data_error("eval: no dataset given (eval.data)");
    auto [header, samples] = read_dataset(data);

    EvalConfig ec = cfg.eval();
    if (int(header.subcarriers) != ec.slot.subcarriers ||
        int(header.symbols) != ec.slot.symbols * ec.n_slots)
        throw data_error(
            "eval: dataset grid " + std::to_string(header.subcarriers) +
            "x" + std::to_string(header.symbols) +
            " does not match the configured window " +
            std::to_string(ec.slot.subcarriers) + "x" +
            std::to_string(ec.slot.symbols * ec.n_slots));

    const std::string which = cfg.get("eval.split");
    std::vector<SamplePair> subset;
    if (which == "all") {
        subset = samples;
    } else {
        const int pairs = int(header.n_rx * header.n_tx);
        const Split split = split_realizations(
            int(header.count) / pairs,
            std::uint64_t(cfg.integer("eval.split_seed")));
        const std::vector<int>* reals = nullptr;
        if (which == "train")
            reals = &split.train;
        else if (which == "val")
            reals = &split.val;
        else if (which == "test")
            reals = &split.test;
        else
            throw usage_error("eval.split must be all, train, val or "
                              "test, got: " +
                              which);
        for (int i : expand_split(*reals, pairs))
            subset.push_back(samples[std::size_t(i)]);
    }

    EvalReport report = evaluate(subset, ec);

    namespace fs = std::filesystem;
    const fs::path dir = cfg.get("eval.out_dir");
    std::error_code ec_fs;
    fs::create_directories(dir / "heatmaps", ec_fs);
    if (ec_fs)
        throw data_error("cannot create output directory: " +
                         dir.string());
    write_nmse_csv(report, (dir / "nmse_vs_snr.csv").string());
    write_subcarrier_csv(report, (dir / "subcarrier_error.csv").string());
    if (!report.curves.empty() && !report.curves.front().ber.empty())
        write_ber_csv(report, (dir / "ber_vs_snr.csv").string());
    for (const auto& [name, grid] : report.views)
        export_heatmap(grid,
                       (dir / "heatmaps" / (name + ".csv")).string());

    for (const auto& c : report.curves) {
        std::cout << c.name << ": nmse_db " << format_g(c.nmse_db.front())
                  << " sp_nmse_db " << format_g(c.sp_nmse_db.front());
        if (!c.ber.empty())
            std::cout << " ber " << format_g(c.ber.front());
        std::cout << " (at " << format_g(report.snr_db.front())
                  << " dB over " << subset.size() << " samples)\n";
    }
    std::cout << "wrote report to " << dir.string() << "\n";
}

void cmd_rate(const RunConfig& cfg) {
    const double a0 = cfg.num("rate.alpha0");
    const double a1 = cfg.num("rate.alpha1");
    const double rho = std::pow(10.0, cfg.num("rate.rho_db") / 10.0);
    const int tc = int(cfg.integer("rate.tc"));
    const bool reliable = cfg.flag("rate.assume_reliable");

    RateParams p0{tc, rho, a0};
    RateParams p1{tc, rho, a1};
    p0.validate();
    p1.validate();

    GainReport report;
    if (a0 == a1) {
        // no pilot reduction: zero gain, hypothesis trivially holds
        report.rho_eff0 = report.rho_eff1 = rho_eff(p0);
        report.hypothesis_holds = true;
    } else {
        report = gain_lower_bound(
            p0, p1,
            reliable ? std::optional<double>(rho_eff(p0)) : std::nullopt);
    }
    std::cout << "gain = " << format_g(report.gain) << "\n";
    std::cout << "bound = " << format_g(report.bound) << "\n";
    std::cout << "hypothesis_holds = "
              << (report.hypothesis_holds ? "true" : "false") << "\n";
    std::cout << "rho_eff_dense = " << format_g(report.rho_eff0)
              << " rho_eff_sparse = " << format_g(report.rho_eff1)
              << "\n";

    const std::string sweep_out = cfg.get("rate.sweep_out");
    if (!sweep_out.empty()) {
        const int points =
            std::max(2, int(cfg.integer("rate.sweep_points")));
        const double lo = std::min(a0, a1), hi = std::max(a0, a1);
        std::vector<double> alphas;
        if (lo == hi) {
            alphas.push_back(lo);
        } else {
            for (int i = 0; i < points; ++i)
                alphas.push_back(lo + (hi - lo) * double(i) /
                                          double(points - 1));
        }
        write_rate_csv(sweep_out, rate_sweep(rho, tc, alphas));
        std::cout << "wrote " << sweep_out << "\n";
    }
}

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"MIMO-OFDM channel estimation workbench"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path,
                   "flat key = value configuration file");
    app.add_option("--set", overrides, "override one config key=value");

    auto* gen = app.add_subcommand(
        "gen", "generate a sounding dataset (pilot overheads echoed)");
    std::string gen_out;
    long gen_seed = 0, gen_count = 0;
    auto* gen_out_opt = gen->add_option("--out", gen_out, "dataset path");
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "master seed");
    auto* gen_count_opt =
        gen->add_option("--count", gen_count, "realization count");

    auto* train = app.add_subcommand(
        "train", "fit a refinement model on a dataset");
    std::string train_data, train_out, train_kind;
    long train_epochs = 0, train_seed = 0;
    double train_lr = 0;
    auto* tr_data_opt =
        train->add_option("--data", train_data, "dataset path");
    auto* tr_out_opt =
        train->add_option("--out", train_out, "model output path");
    auto* tr_epochs_opt =
        train->add_option("--epochs", train_epochs, "epoch count");
    auto* tr_lr_opt = train->add_option("--lr", train_lr, "learning rate");
    auto* tr_seed_opt =
        train->add_option("--seed", train_seed, "training seed");
    auto* tr_kind_opt =
        train->add_option("--kind", train_kind, "transformer or lstm");

    auto* eval = app.add_subcommand(
        "eval", "score the estimator suite, write CSV reports");
    std::string eval_data, eval_dir, eval_tf, eval_lstm, eval_est;
    auto* ev_data_opt =
        eval->add_option("--data", eval_data, "dataset path");
    auto* ev_dir_opt =
        eval->add_option("--out-dir", eval_dir, "report directory");
    auto* ev_tf_opt = eval->add_option("--model", eval_tf,
                                       "transformer model file");
    auto* ev_lstm_opt =
        eval->add_option("--lstm-model", eval_lstm, "lstm model file");
    auto* ev_est_opt = eval->add_option("--estimators", eval_est,
                                        "comma list of estimators");

    auto* rate = app.add_subcommand(
        "rate", "pilot-reduction rate gain and lower bound");
    double ra0 = 0, ra1 = 0, rrho = 0;
    long rtc = 0;
    bool rassume = false;
    auto* ra0_opt = rate->add_option("--alpha0", ra0, "dense fraction");
    auto* ra1_opt = rate->add_option("--alpha1", ra1, "sparse fraction");
    auto* rrho_opt = rate->add_option("--rho-db", rrho, "per-element SNR");
    auto* rtc_opt = rate->add_option("--tc", rtc, "coherence block size");
    rate->add_flag("--assume-reliable", rassume,
                   "enforce the reliable-reconstruction hypothesis");
    std::string rsweep;
    auto* rsweep_opt =
        rate->add_option("--sweep-out", rsweep, "alpha sweep CSV path");

    std::vector<const char*> argv;
    argv.push_back("csiforge");
    for (const auto& a : args)
        argv.push_back(a.c_str());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = RunConfig::defaults();
        if (!config_path.empty())
            cfg.load_file(config_path);
        for (const auto& kv : overrides)
            cfg.set_pair(kv);

        if (gen->parsed()) {
            if (*gen_out_opt)
                cfg.set("gen.out", gen_out);
            if (*gen_seed_opt)
                cfg.set("gen.seed", std::to_string(gen_seed));
            if (*gen_count_opt)
                cfg.set("gen.count", std::to_string(gen_count));
            print_config(cfg);
            cmd_gen(cfg);
        } else if (train->parsed()) {
            if (*tr_data_opt)
                cfg.set("train.data", train_data);
            if (*tr_out_opt)
                cfg.set("train.out", train_out);
            if (*tr_epochs_opt)
                cfg.set("train.epochs", std::to_string(train_epochs));
            if (*tr_lr_opt)
                cfg.set("train.lr", format_g(train_lr));
            if (*tr_seed_opt)
                cfg.set("train.seed", std::to_string(train_seed));
            if (*tr_kind_opt)
                cfg.set("model.kind", train_kind);
            print_config(cfg);
            cmd_train(cfg);
        } else if (eval->parsed()) {
            if (*ev_data_opt)
                cfg.set("eval.data", eval_data);
            if (*ev_dir_opt)
                cfg.set("eval.out_dir", eval_dir);
            if (*ev_tf_opt)
                cfg.set("eval.transformer", eval_tf);
            if (*ev_lstm_opt)
                cfg.set("eval.lstm", eval_lstm);
            if (*ev_est_opt)
                cfg.set("eval.estimators", eval_est);
            print_config(cfg);
            cmd_eval(cfg);
        } else if (rate->parsed()) {
            if (*ra0_opt)
                cfg.set("rate.alpha0", format_g(ra0));
            if (*ra1_opt)
                cfg.set("rate.alpha1", format_g(ra1));
            if (*rrho_opt)
                cfg.set("rate.rho_db", format_g(rrho));
            if (*rtc_opt)
                cfg.set("rate.tc", std::to_string(rtc));
            if (rassume)
                cfg.set("rate.assume_reliable", "true");
            if (*rsweep_opt)
                cfg.set("rate.sweep_out", rsweep);
            print_config(cfg);
            cmd_rate(cfg);
        }
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}

} // namespace csiforge
