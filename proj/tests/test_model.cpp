// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "csiforge/model.hpp"
#include "csiforge/rng.hpp"

using namespace csiforge;
namespace ag = csiforge::autograd;

namespace {

ModelConfig tiny_transformer() {
    ModelConfig cfg;
    cfg.kind = "transformer";
    cfg.subcarriers = 8;
    cfg.symbols = 4;
    cfg.patch_k = 4;
    cfg.patch_l = 2;
    cfg.d_model = 8;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.d_ff = 16;
    return cfg;
}

ModelConfig tiny_lstm() {
    ModelConfig cfg;
    cfg.kind = "lstm";
    cfg.subcarriers = 6;
    cfg.symbols = 2;
    cfg.lstm_hidden = 4;
    cfg.lstm_layers = 2;
    return cfg;
}

ag::Tensor random_input(const ModelConfig& cfg, int batch, Rng& rng) {
    ag::Tensor t({batch, int(cfg.grid_values())});
    for (auto& v : t.v)
        v = rng.gaussian();
    return t;
}

ComplexGrid random_grid(int K, int L, Rng& rng) {
    ComplexGrid g(GridShape{K, L, 1, 1});
    for (int l = 0; l < L; ++l)
        for (int k = 0; k < K; ++k)
            g.at(k, l) = rng.cgaussian();
    return g;
}

double max_abs_diff(const std::vector<double>& a,
                    const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST_CASE("config validation and derived sizes") {
    ModelConfig cfg; // desk defaults
    cfg.validate();
    CHECK(cfg.tokens() == 12 * 14);
    CHECK(cfg.patch_dim() == 16);
    CHECK(cfg.grid_values() == 2u * 48 * 28);

    ModelConfig slot = cfg;
    slot.symbols = 14;
    CHECK(slot.tokens() == 84);

    ModelConfig bad = cfg;
    bad.patch_k = 5;
    CHECK_THROWS_AS(bad.validate(), data_error);
    bad = cfg;
    bad.n_heads = 5;
    CHECK_THROWS_AS(bad.validate(), data_error);
    bad = cfg;
    bad.kind = "mlp";
    CHECK_THROWS_AS(bad.validate(), data_error);
    bad = cfg;
    bad.d_model = 66; // divisible by heads needs 66%4 anyway; table needs %4
    bad.n_heads = 2;
    CHECK_THROWS_AS(bad.validate(), data_error);

    ModelConfig lcfg = tiny_lstm();
    lcfg.validate();
    lcfg.lstm_hidden = 0;
    CHECK_THROWS_AS(lcfg.validate(), data_error);
}

TEST_CASE("positional table is bounded and starts at the sin/cos origin") {
    ModelConfig cfg; // 168 tokens, d 64
    ag::Tensor pos = sinusoidal_positions(cfg);
    REQUIRE(pos.shape == std::vector<int>{cfg.tokens(), cfg.d_model});
    for (double v : pos.v)
        CHECK(std::abs(v) <= 1.0 + 1e-12);
    // token 0 sits at patch (0, 0): every sin channel 0, every cos channel 1
    for (int j = 0; j < cfg.d_model; ++j)
        CHECK(pos.v[j] == doctest::Approx(j % 2 == 0 ? 0.0 : 1.0));
    // rows for distinct patches differ
    bool all_equal = true;
    for (int j = 0; j < cfg.d_model; ++j)
        if (pos.v[j] != pos.v[cfg.d_model + j])
            all_equal = false;
    CHECK_FALSE(all_equal);
}

TEST_CASE("parameter init is seeded, shaped, and flagged") {
    ModelConfig cfg; // default transformer
    ParamStore a = init_params(cfg, 11);
    ParamStore b = init_params(cfg, 11);
    ParamStore c = init_params(cfg, 12);

    CHECK(a.params.size() == b.params.size());
    CHECK(a.finite());
    for (const auto& [name, node] : a.params) {
        CHECK(node->val.v == b.at(name)->val.v); // same seed, same bits
        CHECK(node->val.shape == b.at(name)->val.shape);
    }
    CHECK(a.at("embed.W")->val.v != c.at("embed.W")->val.v);

    CHECK_FALSE(a.at("pos.E")->requires_grad);
    CHECK(a.at("pos.E")->val.v == sinusoidal_positions(cfg).v);
    for (double v : a.at("enc0.ln1.g")->val.v)
        CHECK(v == 1.0);
    for (double v : a.at("enc2.attn.bq")->val.v)
        CHECK(v == 0.0);
    CHECK(a.at("dec.W")->val.shape == std::vector<int>{64, 16});

    // embed 1024 + 64, four encoder layers at 33472 each, decoder
    // 1024 + 16; the positional table is excluded
    CHECK(a.trainable_count() == 1024 + 64 + 4 * 33472 + 1024 + 16);

    ModelConfig lcfg = tiny_lstm();
    ParamStore lp = init_params(lcfg, 5);
    const int H = lcfg.lstm_hidden;
    CHECK(lp.at("lstm.l0.Wx")->val.shape == std::vector<int>{2, 4 * H});
    CHECK(lp.at("lstm.l1.Wx")->val.shape == std::vector<int>{H, 4 * H});
    const auto& bias = lp.at("lstm.l0.b")->val.v;
    for (int j = 0; j < 4 * H; ++j)
        CHECK(bias[j] == (j >= H && j < 2 * H ? 1.0 : 0.0));

    CHECK_THROWS_AS(lp.at("embed.W"), data_error);
    CHECK_THROWS_AS(lp.add("lstm.out.b", ag::Tensor({1, 2}), true),
                    data_error);
}

TEST_CASE("grid and tensor layouts round trip") {
    Rng rng(31);
    ComplexGrid g = random_grid(5, 3, rng);
    ag::Tensor t = grid_to_tensor(g);
    REQUIRE(t.shape == std::vector<int>{1, 30});
    // real plane first (symbol-major, subcarrier fastest), then imag plane
    CHECK(t.v[1 * 5 + 2] == g.at(2, 1).real());
    CHECK(t.v[15 + 1 * 5 + 2] == g.at(2, 1).imag());
    ComplexGrid back = tensor_to_grid(t, g.shape());
    for (int l = 0; l < 3; ++l)
        for (int k = 0; k < 5; ++k)
            CHECK(back.at(k, l) == g.at(k, l));
    CHECK_THROWS_AS(tensor_to_grid(t, GridShape{4, 3, 1, 1}), data_error);
    CHECK_THROWS_AS(grid_to_tensor(ComplexGrid(GridShape{2, 2, 2, 1})),
                    data_error);
}

TEST_CASE("identity-wired transformer reproduces its input exactly") {
    // zero layers, embedding that copies the patch into the first feature
    // slots and a decoder that copies it back; only the gather plumbing and
    // the zeroed positional table are left in the path
    ModelConfig cfg = tiny_transformer();
    cfg.n_layers = 0;
    cfg.d_model = 16; // equals patch_dim
    cfg.n_heads = 2;
    ParamStore ps = init_params(cfg, 3);
    const int pd = cfg.patch_dim(), d = cfg.d_model;
    auto& W = ps.at("embed.W")->val.v;
    std::fill(W.begin(), W.end(), 0.0);
    for (int i = 0; i < pd; ++i)
        W[std::size_t(i) * d + i] = 1.0;
    auto& D = ps.at("dec.W")->val.v;
    std::fill(D.begin(), D.end(), 0.0);
    for (int i = 0; i < pd; ++i)
        D[std::size_t(i) * pd + i] = 1.0;
    std::fill(ps.at("pos.E")->val.v.begin(), ps.at("pos.E")->val.v.end(),
              0.0);

    Rng rng(7);
    ag::Tensor x = random_input(cfg, 2, rng);
    auto out = forward_batch(ag::make_const(x), 2, ps, cfg);
    REQUIRE(out->val.shape == x.shape);
    CHECK(max_abs_diff(out->val.v, x.v) < 1e-15);
}

TEST_CASE("batched forward equals per-sample forward") {
    for (const ModelConfig& cfg : {tiny_transformer(), tiny_lstm()}) {
        ParamStore ps = init_params(cfg, 21);
        Rng rng(90);
        const int B = 3;
        ag::Tensor x = random_input(cfg, B, rng);
        auto batched = forward_batch(ag::make_const(x), B, ps, cfg);
        REQUIRE(batched->val.finite());
        const std::size_t n = cfg.grid_values();
        for (int b = 0; b < B; ++b) {
            ag::Tensor one({1, int(n)});
            std::copy(x.v.begin() + b * n, x.v.begin() + (b + 1) * n,
                      one.v.begin());
            auto single = forward_batch(ag::make_const(one), 1, ps, cfg);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(single->val.v[i] ==
                      doctest::Approx(batched->val.v[b * n + i])
                          .epsilon(1e-12));
        }
    }
}

TEST_CASE("token order does not matter once the positional table is off") {
    ModelConfig cfg = tiny_transformer();
    ParamStore ps = init_params(cfg, 77);
    std::fill(ps.at("pos.E")->val.v.begin(), ps.at("pos.E")->val.v.end(),
              0.0);

    const int K = cfg.subcarriers, L = cfg.symbols;
    const int pk = cfg.patch_k, pl = cfg.patch_l;
    Rng rng(5);
    ag::Tensor x = random_input(cfg, 1, rng);

    // swap two whole patches of the input: (0,0) <-> (1,1)
    ag::Tensor xs = x;
    for (int c = 0; c < 2; ++c)
        for (int dk = 0; dk < pk; ++dk)
            for (int dl = 0; dl < pl; ++dl) {
                const std::size_t i0 =
                    (std::size_t(c) * L + dl) * K + dk;
                const std::size_t i1 =
                    (std::size_t(c) * L + (pl + dl)) * K + (pk + dk);
                std::swap(xs.v[i0], xs.v[i1]);
            }

    auto y = forward_batch(ag::make_const(x), 1, ps, cfg);
    auto ys = forward_batch(ag::make_const(xs), 1, ps, cfg);

    // the outputs are the same patches, swapped the same way
    ag::Tensor expect = y->val;
    for (int c = 0; c < 2; ++c)
        for (int dk = 0; dk < pk; ++dk)
            for (int dl = 0; dl < pl; ++dl) {
                const std::size_t i0 =
                    (std::size_t(c) * L + dl) * K + dk;
                const std::size_t i1 =
                    (std::size_t(c) * L + (pl + dl)) * K + (pk + dk);
                std::swap(expect.v[i0], expect.v[i1]);
            }
    CHECK(max_abs_diff(ys->val.v, expect.v) < 1e-9);

    // with the positional table restored the same swap changes the output
    ParamStore ps2 = init_params(cfg, 77);
    auto y2 = forward_batch(ag::make_const(x), 1, ps2, cfg);
    auto ys2 = forward_batch(ag::make_const(xs), 1, ps2, cfg);
    CHECK(max_abs_diff(ys2->val.v, y2->val.v) > 1e-6);
}

TEST_CASE("lstm maps the zero grid to the zero grid at init") {
    // zero input keeps every cell update at tanh(0), so states stay zero
    // and the head bias (zero) is all that reaches the output
    ModelConfig cfg = tiny_lstm();
    ParamStore ps = init_params(cfg, 9);
    ag::Tensor x({1, int(cfg.grid_values())});
    auto out = forward_batch(ag::make_const(x), 1, ps, cfg);
    for (double v : out->val.v)
        CHECK(v == 0.0);
}

TEST_CASE("lstm output depends on the full subcarrier history") {
    ModelConfig cfg = tiny_lstm();
    ParamStore ps = init_params(cfg, 9);
    Rng rng(4);
    ag::Tensor x = random_input(cfg, 1, rng);
    auto base = forward_batch(ag::make_const(x), 1, ps, cfg);

    // perturbing subcarrier 0 of symbol 0 must reach the last subcarrier
    // of the same symbol row and leave the other symbol untouched
    ag::Tensor xp = x;
    xp.v[0] += 0.5;
    auto pert = forward_batch(ag::make_const(xp), 1, ps, cfg);
    const int K = cfg.subcarriers, L = cfg.symbols;
    const std::size_t last_k_sym0 = std::size_t(K) - 1;
    const std::size_t sym1 = std::size_t(K); // (c=0, l=1, k=0)
    CHECK(std::abs(pert->val.v[last_k_sym0] - base->val.v[last_k_sym0]) >
          1e-12);
    CHECK(pert->val.v[sym1] == base->val.v[sym1]);
}

TEST_CASE("forward stays finite on large but sane inputs") {
    for (const ModelConfig& cfg : {tiny_transformer(), tiny_lstm()}) {
        ParamStore ps = init_params(cfg, 1);
        Rng rng(13);
        ag::Tensor x = random_input(cfg, 2, rng);
        for (auto& v : x.v)
            v *= 10.0;
        auto out = forward_batch(ag::make_const(x), 2, ps, cfg);
        CHECK(out->val.finite());
    }
}

TEST_CASE("model_apply commutes with positive scaling") {
    // the per-sample rms standardization makes the network see the same
    // normalized grid either way
    ModelConfig cfg = tiny_transformer();
    ParamStore ps = init_params(cfg, 40);
    Rng rng(8);
    ComplexGrid g = random_grid(cfg.subcarriers, cfg.symbols, rng);
    ComplexGrid gs(g.shape());
    for (std::size_t i = 0; i < g.size(); ++i)
        gs.values()[i] = 3.7 * g.values()[i];

    ComplexGrid y = model_apply(g, ps, cfg);
    ComplexGrid ys = model_apply(gs, ps, cfg);
    double m = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        m = std::max(m, std::abs(ys.values()[i] - 3.7 * y.values()[i]));
    CHECK(m < 1e-9);

    // the all-zero grid takes the scale-1 path and must stay finite
    ComplexGrid z(g.shape());
    CHECK(model_apply(z, ps, cfg).finite());

    ComplexGrid wrong(GridShape{cfg.subcarriers + 4, cfg.symbols, 1, 1});
    CHECK_THROWS_AS(model_apply(wrong, ps, cfg), data_error);
}

TEST_CASE("model_refine restores the input's scale and phase") {
    ModelConfig cfg = tiny_transformer();
    ParamStore ps = init_params(cfg, 41);
    Rng rng(9);
    ComplexGrid g = random_grid(cfg.subcarriers, cfg.symbols, rng);

    ComplexGrid raw = model_apply(g, ps, cfg);
    ComplexGrid ref = model_refine(g, ps, cfg);
    CHECK(ref.finite());
    CHECK(fro_norm_sq(ref) > 0.0);

    // refined = beta * raw with the least-squares beta against the input:
    // the residual input - refined is orthogonal to the refined estimate
    const cplx resid = inner_product(g, ref) - fro_norm_sq(ref);
    CHECK(std::abs(resid) < 1e-9 * fro_norm_sq(g));

    // the refinement is exactly a global complex multiple of the raw output
    const cplx beta = inner_product(g, raw) / fro_norm_sq(raw);
    double m = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i)
        m = std::max(m,
                     std::abs(ref.values()[i] - beta * raw.values()[i]));
    CHECK(m < 1e-12);

    // rotating the raw output cannot change the refined estimate: feed a
    // phase-rotated input and compare against the same rotation applied
    // outside (model_apply commutes with any complex scalar through the
    // rms standardization only up to magnitude, so check the invariant
    // that beta-alignment undoes a global rotation of the estimate)
    ComplexGrid rot = raw;
    const cplx phase = std::polar(1.0, 1.1);
    for (auto& z : rot.values())
        z *= phase;
    const cplx beta2 = inner_product(g, rot) / fro_norm_sq(rot);
    double m2 = 0.0;
    for (std::size_t i = 0; i < rot.size(); ++i)
        m2 = std::max(m2, std::abs(beta2 * rot.values()[i] -
                                   beta * raw.values()[i]));
    CHECK(m2 < 1e-12);

    // zero-output networks are left untouched rather than divided by zero
    ParamStore zp = init_params(cfg, 41);
    for (auto& [name, node] : zp.params)
        if (name != "pos.E")
            for (auto& v : node->val.v)
                v = 0.0;
    CHECK(model_refine(g, zp, cfg).finite());
}

TEST_CASE("full transformer gradient matches finite differences") {
    ModelConfig cfg = tiny_transformer();
    ParamStore ps = init_params(cfg, 55);
    Rng rng(3);
    ag::Tensor x = random_input(cfg, 2, rng);

    auto loss_value = [&] {
        auto out = forward_batch(ag::make_const(x), 2, ps, cfg);
        auto l = ag::sum(ag::mul(out, out));
        return l;
    };

    auto loss = loss_value();
    ag::backward(loss);

    // probe a few coordinates of every parameter kind
    const char* names[] = {"embed.W",      "embed.b",      "enc0.ln1.g",
                           "enc0.attn.Wq", "enc0.attn.Wk", "enc0.attn.Wv",
                           "enc0.attn.Wo", "enc0.attn.bo", "enc0.ln2.b",
                           "enc0.ffn.W1",  "enc0.ffn.W2",  "enc0.ffn.b1",
                           "dec.W",        "dec.b"};
    Rng pick(17);
    for (const char* name : names) {
        auto& node = ps.at(name);
        const std::size_t n = node->val.size();
        const std::size_t i = pick.below(n);
        const double analytic = node->grad.size() ? node->grad.v[i] : 0.0;
        const double h = 1e-5;
        const double keep = node->val.v[i];
        node->val.v[i] = keep + h;
        const double up = loss_value()->val.v[0];
        node->val.v[i] = keep - h;
        const double dn = loss_value()->val.v[0];
        node->val.v[i] = keep;
        const double numeric = (up - dn) / (2 * h);
        const double rel = std::abs(analytic - numeric) /
                           std::max({std::abs(analytic), std::abs(numeric),
                                     1e-3});
        INFO(name << " coord " << i);
        CHECK(rel < 1e-4);
    }
    // the positional table must not accumulate a gradient
    CHECK(ps.at("pos.E")->grad.size() == 0);
}

TEST_CASE("full lstm gradient matches finite differences") {
    ModelConfig cfg = tiny_lstm();
    ParamStore ps = init_params(cfg, 66);
    Rng rng(14);
    ag::Tensor x = random_input(cfg, 2, rng);

    auto loss_value = [&] {
        auto out = forward_batch(ag::make_const(x), 2, ps, cfg);
        return ag::sum(ag::mul(out, out));
    };
    auto loss = loss_value();
    ag::backward(loss);

    const char* names[] = {"lstm.l0.Wx", "lstm.l0.Wh", "lstm.l0.b",
                           "lstm.l1.Wx", "lstm.l1.Wh", "lstm.l1.b",
                           "lstm.out.W", "lstm.out.b"};
    Rng pick(29);
    for (const char* name : names) {
        auto& node = ps.at(name);
        const std::size_t n = node->val.size();
        for (int probe = 0; probe < 2; ++probe) {
            const std::size_t i = pick.below(n);
            const double analytic = node->grad.size() ? node->grad.v[i] : 0.0;
            const double h = 1e-5;
            const double keep = node->val.v[i];
            node->val.v[i] = keep + h;
            const double up = loss_value()->val.v[0];
            node->val.v[i] = keep - h;
            const double dn = loss_value()->val.v[0];
            node->val.v[i] = keep;
            const double numeric = (up - dn) / (2 * h);
            const double rel = std::abs(analytic - numeric) /
                               std::max({std::abs(analytic),
                                         std::abs(numeric), 1e-3});
            INFO(name << " coord " << i);
            CHECK(rel < 1e-4);
        }
    }
}

TEST_CASE("model files round trip bit-exact and reject corruption") {
    const std::string path = "test_model_roundtrip.bin";
    ModelConfig cfg = tiny_transformer();
    ParamStore ps = init_params(cfg, 123);
    save_model(ps, cfg, path);

    auto [loaded, lcfg] = load_model(path);
    CHECK(lcfg.kind == cfg.kind);
    CHECK(lcfg.subcarriers == cfg.subcarriers);
    CHECK(lcfg.d_model == cfg.d_model);
    CHECK(loaded.params.size() == ps.params.size());
    for (const auto& [name, node] : ps.params) {
        const auto& back = loaded.at(name);
        CHECK(back->val.shape == node->val.shape);
        CHECK(back->val.v == node->val.v); // bit-exact doubles
        CHECK(back->requires_grad == node->requires_grad);
    }

    // lstm config round trips too
    ModelConfig lc = tiny_lstm();
    ParamStore lp = init_params(lc, 8);
    save_model(lp, lc, path);
    auto [lp2, lc2] = load_model(path);
    CHECK(lc2.kind == "lstm");
    CHECK(lp2.at("lstm.l1.Wh")->val.v == lp.at("lstm.l1.Wh")->val.v);

    save_model(ps, cfg, path);
    auto slurp = [&] {
        std::ifstream in(path, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    auto dump = [&](const std::string& bytes) {
        std::ofstream out(path, std::ios::binary);
        out.write(bytes.data(), std::streamsize(bytes.size()));
    };
    const std::string good = slurp();

    std::string bad = good;
    bad[0] = 'X';
    dump(bad);
    CHECK_THROWS_WITH_AS(load_model(path),
                         doctest::Contains("bad magic"), data_error);

    dump(good.substr(0, good.size() - 9));
    CHECK_THROWS_WITH_AS(load_model(path), doctest::Contains("truncated"),
                         data_error);

    bad = good;
    // the version field lives in the json manifest right after the header
    const auto vpos = bad.find("\"format_version\":1");
    REQUIRE(vpos != std::string::npos);
    bad[vpos + 17] = '9';
    dump(bad);
    CHECK_THROWS_WITH_AS(load_model(path),
                         doctest::Contains("unsupported"), data_error);

    CHECK_THROWS_AS(load_model("no_such_model_file.bin"), data_error);
    std::remove(path.c_str());
}
