// SPDX-License-Identifier: Apache-2.0
#include "csiforge/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "csiforge/rng.hpp"

namespace csiforge {

namespace ag = autograd;

void TrainConfig::validate() const {
    if (epochs < 1)
        throw data_error("train: epochs must be >= 1");
    if (batch_size < 1)
        throw data_error("train: batch size must be >= 1");
    if (!(lr >= 0.0))
        throw data_error("train: learning rate must be >= 0");
    if (lr_final >= 0.0 && lr_final > lr)
        throw data_error("train: final learning rate must not exceed lr");
    if (warmup_steps < 0)
        throw data_error("train: warmup steps must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw data_error("train: moment decays must lie in [0, 1)");
    if (!(eps > 0.0))
        throw data_error("train: eps must be positive");
    if (weight_decay < 0.0)
        throw data_error("train: weight decay must be >= 0");
    loss.validate();
    model.validate();
}

namespace {

struct Batch {
    ag::NodePtr input;  // standardized, {B, 2KL}
    ag::NodePtr scale;  // per-row rms to undo the standardization
    ag::NodePtr target; // original scale
    int size = 0;
};

Batch build_batch(const std::vector<SamplePair>& set,
                  const std::vector<int>& order, std::size_t first,
                  std::size_t last, const ModelConfig& model) {
    const int B = int(last - first);
    const std::size_t n = model.grid_values();
    ag::Tensor x({B, int(n)}), s({B, int(n)}), t({B, int(n)});
    for (int b = 0; b < B; ++b) {
        const SamplePair& sp = set[order[first + b]];
        if (sp.input.shape().subcarriers != model.subcarriers ||
            sp.input.shape().symbols != model.symbols)
            throw data_error("train: sample grid " +
                             sp.input.shape().str() +
                             " does not match the model config");
        ag::Tensor in = grid_to_tensor(sp.input);
        ag::Tensor tg = grid_to_tensor(sp.target);
        double ms = 0.0;
        for (double v : in.v)
            ms += v * v;
        const double rms = ms > 0.0 ? std::sqrt(ms / double(n)) : 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            x.v[std::size_t(b) * n + i] = in.v[i] / rms;
            s.v[std::size_t(b) * n + i] = rms;
            t.v[std::size_t(b) * n + i] = tg.v[i];
        }
    }
    return {ag::make_const(std::move(x)), ag::make_const(std::move(s)),
            ag::make_const(std::move(t)), B};
}

double batch_total(const Batch& batch, const ParamStore& params,
                   const TrainConfig& cfg, bool want_grad) {
    auto out = forward_batch(batch.input, batch.size, params, cfg.model);
    auto scaled = ag::mul(out, batch.scale);
    auto terms = lossgraph::batch_loss(scaled, batch.target,
                                       cfg.model.subcarriers,
                                       cfg.model.symbols, cfg.loss);
    const double value = terms.total->val.v[0];
    if (want_grad)
        ag::backward(terms.total);
    return value;
}

} // namespace

TrainResult train(
    const std::vector<SamplePair>& train_set,
    const std::vector<SamplePair>& val_set, const TrainConfig& cfg,
    const std::function<void(int, double, double)>& on_epoch) {
    cfg.validate();
    if (train_set.empty())
        throw data_error("train: empty training set");

    TrainResult res;
    res.params = init_params(cfg.model, cfg.seed);

    // adaptive-moment state per trainable parameter, in name order
    struct Moment {
        ag::Node* node;
        std::vector<double> m, v;
    };
    std::vector<Moment> moments;
    for (auto& [name, node] : res.params.params)
        if (node->requires_grad)
            moments.push_back({node.get(),
                               std::vector<double>(node->val.size(), 0.0),
                               std::vector<double>(node->val.size(), 0.0)});

    std::vector<int> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::uint64_t step = 0;
    const std::uint64_t batches_per_epoch =
        (train_set.size() + std::size_t(cfg.batch_size) - 1) /
        std::size_t(cfg.batch_size);
    const std::uint64_t total_steps =
        std::uint64_t(cfg.epochs) * batches_per_epoch;
    const std::uint64_t warmup =
        std::min<std::uint64_t>(std::uint64_t(cfg.warmup_steps),
                                total_steps);
    auto step_lr = [&](std::uint64_t s) {
        if (warmup > 0 && s <= warmup)
            return cfg.lr * double(s) / double(warmup);
        if (cfg.lr_final < 0.0 || total_steps <= warmup)
            return cfg.lr;
        const double p =
            double(s - warmup) / double(total_steps - warmup);
        return cfg.lr_final + (cfg.lr - cfg.lr_final) * 0.5 *
                                  (1.0 + std::cos(p * 3.14159265358979323846));
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, stream::shuffle, epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);

        TrainConfig ecfg = cfg;
        if (cfg.gamma_final >= 0.0 && cfg.epochs > 1)
            ecfg.loss.gamma =
                cfg.loss.gamma + (cfg.gamma_final - cfg.loss.gamma) *
                                     double(epoch) / double(cfg.epochs - 1);

        double epoch_loss = 0.0;
        for (std::size_t first = 0; first < order.size();
             first += std::size_t(cfg.batch_size)) {
            const std::size_t last =
                std::min(first + std::size_t(cfg.batch_size), order.size());
            Batch batch =
                build_batch(train_set, order, first, last, cfg.model);
            res.params.zero_grad();
            const double value =
                batch_total(batch, res.params, ecfg, true);
            if (!std::isfinite(value))
                throw numeric_error(
                    "training diverged: non-finite loss at epoch " +
                    std::to_string(epoch) + ", batch starting at sample " +
                    std::to_string(first));
            epoch_loss += value * double(batch.size);

            ++step;
            const double lr_t = step_lr(step);
            const double c1 = 1.0 - std::pow(cfg.beta1, double(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, double(step));
            for (auto& mo : moments) {
                const bool has_grad = mo.node->grad.size() > 0;
                for (std::size_t j = 0; j < mo.m.size(); ++j) {
                    double g = has_grad ? mo.node->grad.v[j] : 0.0;
                    g += cfg.weight_decay * mo.node->val.v[j];
                    mo.m[j] = cfg.beta1 * mo.m[j] + (1.0 - cfg.beta1) * g;
                    mo.v[j] =
                        cfg.beta2 * mo.v[j] + (1.0 - cfg.beta2) * g * g;
                    mo.node->val.v[j] -=
                        lr_t * (mo.m[j] / c1) /
                        (std::sqrt(mo.v[j] / c2) + cfg.eps);
                }
            }
        }
        res.loss_history.push_back(epoch_loss / double(train_set.size()));

        double val_loss = std::nan("");
        if (!val_set.empty()) {
            std::vector<int> vorder(val_set.size());
            std::iota(vorder.begin(), vorder.end(), 0);
            double acc = 0.0;
            for (std::size_t first = 0; first < vorder.size();
                 first += std::size_t(cfg.batch_size)) {
                const std::size_t last = std::min(
                    first + std::size_t(cfg.batch_size), vorder.size());
                Batch batch =
                    build_batch(val_set, vorder, first, last, cfg.model);
                acc += batch_total(batch, res.params, ecfg, false) *
                       double(batch.size);
            }
            val_loss = acc / double(val_set.size());
            res.val_history.push_back(val_loss);
        }
        if (on_epoch)
            on_epoch(epoch, res.loss_history.back(), val_loss);
    }
    return res;
}

} // namespace csiforge
