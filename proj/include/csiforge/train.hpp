// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "csiforge/dataset.hpp"
#include "csiforge/loss.hpp"
#include "csiforge/model.hpp"

namespace csiforge {

struct TrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double lr = 1e-3;
    double lr_final = -1.0; // >= 0 enables cosine decay down to this value
    int warmup_steps = 0;   // linear ramp over the first optimizer steps
    // >= 0 anneals the correlation weight linearly from loss.gamma to this
    // value across epochs; direction is learned early, the primary term
    // then dominates late
    double gamma_final = -1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    LossWeights loss;
    ModelConfig model;

    void validate() const;
};

struct TrainResult {
    ParamStore params;
    std::vector<double> loss_history; // mean training loss per epoch
    std::vector<double> val_history;  // empty when no validation set
};

// Mini-batch optimization with adaptive moments. Inputs are standardized
// per sample by their rms and the network output is scaled back before
// the loss, matching model_apply at inference. Single-threaded and
// bit-deterministic for a fixed config and seed.
TrainResult train(
    const std::vector<SamplePair>& train_set,
    const std::vector<SamplePair>& val_set, const TrainConfig& cfg,
    const std::function<void(int, double, double)>& on_epoch = {});

} // namespace csiforge
