// SPDX-License-Identifier: Apache-2.0
#include "csiforge/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include "json.hpp"

#include "csiforge/rng.hpp"

namespace csiforge {

namespace ag = autograd;
using ag::NodePtr;
using ag::Tensor;

static_assert(std::endian::native == std::endian::little,
              "model and dataset files assume a little-endian host");

void ModelConfig::validate() const {
    if (kind != "transformer" && kind != "lstm")
        throw data_error("model kind must be transformer or lstm");
    if (subcarriers < 1 || symbols < 1)
        throw data_error("model grid dimensions must be positive");
    if (kind == "transformer") {
        if (patch_k < 1 || patch_l < 1 || d_model < 1 || n_layers < 0 ||
            n_heads < 1 || d_ff < 1)
            throw data_error("transformer dimensions must be positive");
        if (subcarriers % patch_k != 0 || symbols % patch_l != 0)
            throw data_error("patch size must divide the grid dimensions");
        if (d_model % n_heads != 0)
            throw data_error("embed dim must be divisible by head count");
        if (d_model % 4 != 0)
            throw data_error(
                "embed dim must be a multiple of 4 for the 2-D positional "
                "table");
    } else {
        if (lstm_hidden < 1 || lstm_layers < 1)
            throw data_error("lstm dimensions must be positive");
    }
}

NodePtr& ParamStore::at(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end())
        throw data_error("unknown parameter: " + name);
    return it->second;
}

const NodePtr& ParamStore::at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end())
        throw data_error("unknown parameter: " + name);
    return it->second;
}

void ParamStore::add(const std::string& name, Tensor t, bool trainable) {
    if (params.count(name))
        throw data_error("duplicate parameter name: " + name);
    params.emplace(name, ag::make_leaf(std::move(t), trainable));
}

void ParamStore::zero_grad() {
    for (auto& [name, p] : params)
        p->zero_grad();
}

bool ParamStore::finite() const {
    for (const auto& [name, p] : params)
        if (!p->val.finite())
            return false;
    return true;
}

std::size_t ParamStore::trainable_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params)
        if (p->requires_grad)
            n += p->val.size();
    return n;
}

Tensor sinusoidal_positions(const ModelConfig& cfg) {
    const int P = cfg.tokens(), d = cfg.d_model, half = d / 2;
    const int lp = cfg.patches_l();
    Tensor t({P, d});
    for (int p = 0; p < P; ++p) {
        const int pf = p / lp, pt = p % lp;
        for (int i = 0; i < half / 2; ++i) {
            const double freq =
                std::pow(10000.0, -2.0 * i / static_cast<double>(half));
            t.v[std::size_t(p) * d + 2 * i] = std::sin(pf * freq);
            t.v[std::size_t(p) * d + 2 * i + 1] = std::cos(pf * freq);
            t.v[std::size_t(p) * d + half + 2 * i] = std::sin(pt * freq);
            t.v[std::size_t(p) * d + half + 2 * i + 1] = std::cos(pt * freq);
        }
    }
    return t;
}

namespace {

Tensor xavier(std::vector<int> shape, int fan_in, int fan_out, Rng& rng) {
    Tensor t(std::move(shape));
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : t.v)
        v = rng.uniform(-a, a);
    return t;
}

Tensor fill(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    for (auto& v : t.v)
        v = value;
    return t;
}

} // namespace

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ParamStore ps;
    int pi = 0;
    auto next_rng = [&] { return Rng(derive_seed(seed, stream::init, pi++)); };

    if (cfg.kind == "transformer") {
        const int d = cfg.d_model, pd = cfg.patch_dim(), ff = cfg.d_ff;
        {
            Rng r = next_rng();
            ps.add("embed.W", xavier({pd, d}, pd, d, r), true);
        }
        ps.add("embed.b", fill({1, d}, 0.0), true);
        ps.add("pos.E", sinusoidal_positions(cfg), false);
        for (int i = 0; i < cfg.n_layers; ++i) {
            const std::string pre = "enc" + std::to_string(i) + ".";
            ps.add(pre + "ln1.g", fill({1, d}, 1.0), true);
            ps.add(pre + "ln1.b", fill({1, d}, 0.0), true);
            for (const char* w : {"attn.Wq", "attn.Wk", "attn.Wv",
                                  "attn.Wo"}) {
                Rng r = next_rng();
                ps.add(pre + w, xavier({d, d}, d, d, r), true);
            }
            for (const char* b : {"attn.bq", "attn.bk", "attn.bv",
                                  "attn.bo"})
                ps.add(pre + b, fill({1, d}, 0.0), true);
            ps.add(pre + "ln2.g", fill({1, d}, 1.0), true);
            ps.add(pre + "ln2.b", fill({1, d}, 0.0), true);
            {
                Rng r = next_rng();
                ps.add(pre + "ffn.W1", xavier({d, ff}, d, ff, r), true);
            }
            ps.add(pre + "ffn.b1", fill({1, ff}, 0.0), true);
            {
                Rng r = next_rng();
                ps.add(pre + "ffn.W2", xavier({ff, d}, ff, d, r), true);
            }
            ps.add(pre + "ffn.b2", fill({1, d}, 0.0), true);
        }
        {
            Rng r = next_rng();
            ps.add("dec.W", xavier({d, pd}, d, pd, r), true);
        }
        ps.add("dec.b", fill({1, pd}, 0.0), true);
    } else {
        const int H = cfg.lstm_hidden;
        for (int layer = 0; layer < cfg.lstm_layers; ++layer) {
            const int in = layer == 0 ? 2 : H;
            const std::string pre = "lstm.l" + std::to_string(layer) + ".";
            {
                Rng r = next_rng();
                ps.add(pre + "Wx", xavier({in, 4 * H}, in, 4 * H, r), true);
            }
            {
                Rng r = next_rng();
                ps.add(pre + "Wh", xavier({H, 4 * H}, H, 4 * H, r), true);
            }
            Tensor b = fill({1, 4 * H}, 0.0);
            for (int j = H; j < 2 * H; ++j)
                b.v[j] = 1.0; // forget gate starts open
            ps.add(pre + "b", std::move(b), true);
        }
        {
            Rng r = next_rng();
            ps.add("lstm.out.W", xavier({H, 2}, H, 2, r), true);
        }
        ps.add("lstm.out.b", fill({1, 2}, 0.0), true);
    }
    return ps;
}

namespace {

// Token rows are b*P + (pf*Lp + pt); token features are (c*pk + dk)*pl + dl.
std::vector<std::size_t> patch_gather_index(const ModelConfig& cfg,
                                            int batch) {
    const int K = cfg.subcarriers, L = cfg.symbols;
    const int pk = cfg.patch_k, pl = cfg.patch_l, lp = cfg.patches_l();
    std::vector<std::size_t> idx;
    idx.reserve(std::size_t(batch) * cfg.tokens() * cfg.patch_dim());
    for (int b = 0; b < batch; ++b)
        for (int pf = 0; pf < cfg.patches_k(); ++pf)
            for (int pt = 0; pt < lp; ++pt)
                for (int c = 0; c < 2; ++c)
                    for (int dk = 0; dk < pk; ++dk)
                        for (int dl = 0; dl < pl; ++dl) {
                            const int k = pf * pk + dk, l = pt * pl + dl;
                            idx.push_back(
                                ((std::size_t(b) * 2 + c) * L + l) * K + k);
                        }
    return idx;
}

std::vector<std::size_t> patch_scatter_index(const ModelConfig& cfg,
                                             int batch) {
    const int K = cfg.subcarriers, L = cfg.symbols;
    const int pk = cfg.patch_k, pl = cfg.patch_l, lp = cfg.patches_l();
    const int P = cfg.tokens(), pd = cfg.patch_dim();
    std::vector<std::size_t> idx(std::size_t(batch) * 2 * K * L);
    for (int b = 0; b < batch; ++b)
        for (int c = 0; c < 2; ++c)
            for (int l = 0; l < L; ++l)
                for (int k = 0; k < K; ++k) {
                    const int p = (k / pk) * lp + (l / pl);
                    const int f = (c * pk + k % pk) * pl + (l % pl);
                    idx[((std::size_t(b) * 2 + c) * L + l) * K + k] =
                        (std::size_t(b) * P + p) * pd + f;
                }
    return idx;
}

NodePtr transformer_forward(const NodePtr& x, int batch,
                            const ParamStore& ps, const ModelConfig& cfg) {
    const int d = cfg.d_model, h = cfg.n_heads, dh = d / h;
    auto tokens = ag::gather(
        x, patch_gather_index(cfg, batch),
        {batch * cfg.tokens(), cfg.patch_dim()});
    auto z = ag::add_tiled(ag::matmul(tokens, ps.at("embed.W")),
                           ps.at("embed.b"));
    z = ag::add_tiled(z, ps.at("pos.E"));
    for (int i = 0; i < cfg.n_layers; ++i) {
        const std::string pre = "enc" + std::to_string(i) + ".";
        auto u = ag::add_tiled(
            ag::mul_tiled(ag::layernorm_rows(z), ps.at(pre + "ln1.g")),
            ps.at(pre + "ln1.b"));
        auto Q = ag::add_tiled(ag::matmul(u, ps.at(pre + "attn.Wq")),
                               ps.at(pre + "attn.bq"));
        auto Kt = ag::add_tiled(ag::matmul(u, ps.at(pre + "attn.Wk")),
                                ps.at(pre + "attn.bk"));
        auto V = ag::add_tiled(ag::matmul(u, ps.at(pre + "attn.Wv")),
                               ps.at(pre + "attn.bv"));
        std::vector<NodePtr> heads;
        heads.reserve(h);
        for (int g = 0; g < h; ++g) {
            auto Qg = ag::slice_cols(Q, g * dh, (g + 1) * dh);
            auto Kg = ag::slice_cols(Kt, g * dh, (g + 1) * dh);
            auto Vg = ag::slice_cols(V, g * dh, (g + 1) * dh);
            auto S = ag::affine(ag::bmm_nt(Qg, Kg, batch),
                                1.0 / std::sqrt(double(dh)), 0.0);
            heads.push_back(ag::bmm(ag::softmax_rows(S), Vg, batch));
        }
        auto O = ag::add_tiled(
            ag::matmul(ag::concat_cols(heads), ps.at(pre + "attn.Wo")),
            ps.at(pre + "attn.bo"));
        z = ag::add(z, O);
        auto v = ag::add_tiled(
            ag::mul_tiled(ag::layernorm_rows(z), ps.at(pre + "ln2.g")),
            ps.at(pre + "ln2.b"));
        auto f = ag::add_tiled(
            ag::matmul(ag::gelu(ag::add_tiled(
                           ag::matmul(v, ps.at(pre + "ffn.W1")),
                           ps.at(pre + "ffn.b1"))),
                       ps.at(pre + "ffn.W2")),
            ps.at(pre + "ffn.b2"));
        z = ag::add(z, f);
    }
    auto dec = ag::add_tiled(ag::matmul(z, ps.at("dec.W")), ps.at("dec.b"));
    return ag::gather(dec, patch_scatter_index(cfg, batch),
                      {batch, int(cfg.grid_values())});
}

NodePtr lstm_forward(const NodePtr& x, int batch, const ParamStore& ps,
                     const ModelConfig& cfg) {
    const int K = cfg.subcarriers, L = cfg.symbols, H = cfg.lstm_hidden;
    const int R = batch * L; // one row per (sample, symbol) sequence

    std::vector<NodePtr> h(cfg.lstm_layers), c(cfg.lstm_layers);
    for (int layer = 0; layer < cfg.lstm_layers; ++layer) {
        h[layer] = ag::make_const(Tensor({R, H}));
        c[layer] = ag::make_const(Tensor({R, H}));
    }
    std::vector<NodePtr> outputs;
    outputs.reserve(K);
    for (int k = 0; k < K; ++k) {
        std::vector<std::size_t> idx;
        idx.reserve(std::size_t(R) * 2);
        for (int b = 0; b < batch; ++b)
            for (int l = 0; l < L; ++l)
                for (int ch = 0; ch < 2; ++ch)
                    idx.push_back(((std::size_t(b) * 2 + ch) * L + l) * K + k);
        NodePtr step = ag::gather(x, std::move(idx), {R, 2});
        for (int layer = 0; layer < cfg.lstm_layers; ++layer) {
            const std::string pre = "lstm.l" + std::to_string(layer) + ".";
            auto gates = ag::add_tiled(
                ag::add(ag::matmul(step, ps.at(pre + "Wx")),
                        ag::matmul(h[layer], ps.at(pre + "Wh"))),
                ps.at(pre + "b"));
            auto ig = ag::sigmoid(ag::slice_cols(gates, 0, H));
            auto fg = ag::sigmoid(ag::slice_cols(gates, H, 2 * H));
            auto gg = ag::tanh_op(ag::slice_cols(gates, 2 * H, 3 * H));
            auto og = ag::sigmoid(ag::slice_cols(gates, 3 * H, 4 * H));
            c[layer] = ag::add(ag::mul(fg, c[layer]), ag::mul(ig, gg));
            h[layer] = ag::mul(og, ag::tanh_op(c[layer]));
            step = h[layer];
        }
        outputs.push_back(ag::add_tiled(
            ag::matmul(step, ps.at("lstm.out.W")), ps.at("lstm.out.b")));
    }
    auto stacked = ag::concat_cols(outputs); // [R, 2K], col = k*2 + c
    std::vector<std::size_t> idx(std::size_t(batch) * 2 * K * L);
    for (int b = 0; b < batch; ++b)
        for (int ch = 0; ch < 2; ++ch)
            for (int l = 0; l < L; ++l)
                for (int k = 0; k < K; ++k)
                    idx[((std::size_t(b) * 2 + ch) * L + l) * K + k] =
                        (std::size_t(b) * L + l) * (2 * K) + k * 2 + ch;
    return ag::gather(stacked, std::move(idx),
                      {batch, int(cfg.grid_values())});
}

} // namespace

NodePtr forward_batch(const NodePtr& x, int batch, const ParamStore& params,
                      const ModelConfig& cfg) {
    cfg.validate();
    if (batch < 1)
        throw data_error("forward_batch: batch must be positive");
    if (x->val.size() != std::size_t(batch) * cfg.grid_values())
        throw data_error("forward_batch: input size mismatch");
    if (cfg.kind == "transformer")
        return transformer_forward(x, batch, params, cfg);
    return lstm_forward(x, batch, params, cfg);
}

Tensor grid_to_tensor(const ComplexGrid& g) {
    const GridShape& s = g.shape();
    if (s.n_rx != 1 || s.n_tx != 1)
        throw data_error("grid_to_tensor expects a single antenna pair");
    const int K = s.subcarriers, L = s.symbols;
    Tensor t({1, 2 * K * L});
    for (int l = 0; l < L; ++l)
        for (int k = 0; k < K; ++k) {
            t.v[std::size_t(l) * K + k] = g.at(k, l).real();
            t.v[std::size_t(K) * L + std::size_t(l) * K + k] =
                g.at(k, l).imag();
        }
    return t;
}

ComplexGrid tensor_to_grid(const Tensor& t, const GridShape& shape) {
    if (shape.n_rx != 1 || shape.n_tx != 1)
        throw data_error("tensor_to_grid expects a single antenna pair");
    const int K = shape.subcarriers, L = shape.symbols;
    if (t.size() != std::size_t(2) * K * L)
        throw data_error("tensor_to_grid: size mismatch");
    ComplexGrid g(shape);
    for (int l = 0; l < L; ++l)
        for (int k = 0; k < K; ++k)
            g.at(k, l) = cplx(t.v[std::size_t(l) * K + k],
                              t.v[std::size_t(K) * L + std::size_t(l) * K + k]);
    return g;
}

ComplexGrid model_apply(const ComplexGrid& in, const ParamStore& params,
                        const ModelConfig& cfg) {
    const GridShape& s = in.shape();
    if (s.subcarriers != cfg.subcarriers || s.symbols != cfg.symbols)
        throw data_error("model_apply: grid does not match model config");
    Tensor t = grid_to_tensor(in);
    const double ms = fro_norm_sq(in) / double(t.size() / 2);
    const double rms = ms > 0.0 ? std::sqrt(0.5 * ms) : 0.0;
    const double scale = rms > 0.0 ? 1.0 / rms : 1.0;
    for (auto& v : t.v)
        v *= scale;
    auto out = forward_batch(ag::make_const(std::move(t)), 1, params, cfg);
    Tensor res = out->val;
    for (auto& v : res.v)
        v /= scale;
    return tensor_to_grid(res, s);
}

ComplexGrid model_refine(const ComplexGrid& in, const ParamStore& params,
                         const ModelConfig& cfg) {
    ComplexGrid out = model_apply(in, params, cfg);
    const double ee = fro_norm_sq(out);
    if (ee > 0.0) {
        const cplx beta = inner_product(in, out) / ee;
        for (auto& z : out.values())
            z *= beta;
    }
    return out;
}

void save_model(const ParamStore& params, const ModelConfig& cfg,
                const std::string& path) {
    nlohmann::json manifest;
    manifest["format_version"] = 1;
    manifest["config"] = {
        {"kind", cfg.kind},           {"subcarriers", cfg.subcarriers},
        {"symbols", cfg.symbols},     {"patch_k", cfg.patch_k},
        {"patch_l", cfg.patch_l},     {"d_model", cfg.d_model},
        {"n_layers", cfg.n_layers},   {"n_heads", cfg.n_heads},
        {"d_ff", cfg.d_ff},           {"lstm_hidden", cfg.lstm_hidden},
        {"lstm_layers", cfg.lstm_layers}};
    nlohmann::json plist = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& [name, node] : params.params) {
        plist.push_back({{"name", name},
                         {"shape", node->val.shape},
                         {"offset", offset},
                         {"count", node->val.size()},
                         {"trainable", node->requires_grad}});
        offset += node->val.size();
    }
    manifest["params"] = plist;
    const std::string mtext = manifest.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw data_error("cannot open model file for writing: " + path);
    out.write("CSIMODL1", 8);
    const std::uint64_t mlen = mtext.size();
    out.write(reinterpret_cast<const char*>(&mlen), 8);
    out.write(mtext.data(), std::streamsize(mtext.size()));
    for (const auto& [name, node] : params.params)
        out.write(reinterpret_cast<const char*>(node->val.v.data()),
                  std::streamsize(node->val.size() * sizeof(double)));
    if (!out)
        throw data_error("model file write failed: " + path);
}

std::pair<ParamStore, ModelConfig> load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw data_error("cannot open model file: " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, "CSIMODL1", 8) != 0)
        throw data_error("bad magic: not a model file: " + path);
    std::uint64_t mlen = 0;
    if (!in.read(reinterpret_cast<char*>(&mlen), 8))
        throw data_error("truncated model file (manifest length): " + path);
    std::string mtext(mlen, '\0');
    if (!in.read(mtext.data(), std::streamsize(mlen)))
        throw data_error("truncated model file (manifest): " + path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(mtext);
    } catch (const nlohmann::json::parse_error&) {
        throw data_error("corrupt model manifest: " + path);
    }
    if (manifest.value("format_version", 0) != 1)
        throw data_error("unsupported model format version in " + path);

    ModelConfig cfg;
    const auto& jc = manifest.at("config");
    cfg.kind = jc.at("kind").get<std::string>();
    cfg.subcarriers = jc.at("subcarriers").get<int>();
    cfg.symbols = jc.at("symbols").get<int>();
    cfg.patch_k = jc.at("patch_k").get<int>();
    cfg.patch_l = jc.at("patch_l").get<int>();
    cfg.d_model = jc.at("d_model").get<int>();
    cfg.n_layers = jc.at("n_layers").get<int>();
    cfg.n_heads = jc.at("n_heads").get<int>();
    cfg.d_ff = jc.at("d_ff").get<int>();
    cfg.lstm_hidden = jc.at("lstm_hidden").get<int>();
    cfg.lstm_layers = jc.at("lstm_layers").get<int>();
    cfg.validate();

    ParamStore ps;
    for (const auto& jp : manifest.at("params")) {
        const auto name = jp.at("name").get<std::string>();
        const auto shape = jp.at("shape").get<std::vector<int>>();
        const auto offset = jp.at("offset").get<std::size_t>();
        const auto count = jp.at("count").get<std::size_t>();
        if (count != ag::shape_size(shape))
            throw data_error("corrupt model manifest (shape/count): " + path);
        Tensor t(shape);
        in.seekg(std::streamoff(16 + mlen + offset * sizeof(double)));
        if (!in.read(reinterpret_cast<char*>(t.v.data()),
                     std::streamsize(count * sizeof(double))))
            throw data_error("truncated model file (parameter " + name +
                             "): " + path);
        ps.add(name, std::move(t), jp.at("trainable").get<bool>());
    }
    return {std::move(ps), cfg};
}

} // namespace csiforge
