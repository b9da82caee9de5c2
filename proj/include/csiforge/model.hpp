// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "csiforge/autograd.hpp"
#include "csiforge/grid.hpp"

namespace csiforge {

// Estimator network description. kind is "transformer" or "lstm"; the
// transformer fields follow the patch-token design, the lstm fields the
// two-layer recurrent baseline.
struct ModelConfig {
    std::string kind = "transformer";
    int subcarriers = 48;
    int symbols = 28; // per processing window
    int patch_k = 4;
    int patch_l = 2;
    int d_model = 64;
    int n_layers = 4;
    int n_heads = 4;
    int d_ff = 128;
    int lstm_hidden = 32;
    int lstm_layers = 2;

    void validate() const;
    int patches_k() const { return subcarriers / patch_k; }
    int patches_l() const { return symbols / patch_l; }
    int tokens() const { return patches_k() * patches_l(); }
    int patch_dim() const { return 2 * patch_k * patch_l; }
    std::size_t grid_values() const {
        return 2ull * subcarriers * symbols;
    }
};

// Named parameter tensors. Entries with requires_grad are trainable;
// fixed tables (the sinusoidal positional encoding) ride along untouched.
struct ParamStore {
    std::map<std::string, autograd::NodePtr> params;

    autograd::NodePtr& at(const std::string& name);
    const autograd::NodePtr& at(const std::string& name) const;
    void add(const std::string& name, autograd::Tensor t, bool trainable);
    void zero_grad();
    bool finite() const;
    std::size_t trainable_count() const; // total scalar parameters
};

// Fixed 2-D sinusoidal positional table: the first half of the channels
// encodes the frequency-patch index, the second half the time-patch index.
autograd::Tensor sinusoidal_positions(const ModelConfig& cfg);

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);

// Differentiable forward pass over a batch. x has shape
// {B, 2*K*L} laid out channel (re, im), then symbol, then subcarrier
// fastest, matching ComplexGrid order per plane. Output shape equals
// input shape.
autograd::NodePtr forward_batch(const autograd::NodePtr& x, int batch,
                                const ParamStore& params,
                                const ModelConfig& cfg);

// Convenience wrappers for a single antenna-pair slice, with the
// per-sample rms standardization applied and undone internally.
ComplexGrid model_apply(const ComplexGrid& in, const ParamStore& params,
                        const ModelConfig& cfg);

// Forward pass followed by scale restoration. The refinement objective
// scores an estimate after optimally rescaling the reference, which makes
// it blind to a global phase and lets the net keep conservative amplitudes
// on hard samples, so the raw output is not on the physical scale. Rescale
// it by the least-squares complex factor that matches the input estimate,
// which carries that scale. Uses no reference information.
ComplexGrid model_refine(const ComplexGrid& in, const ParamStore& params,
                         const ModelConfig& cfg);

// Grid <-> real-tensor conversions (one sample, layout as above).
autograd::Tensor grid_to_tensor(const ComplexGrid& g);
ComplexGrid tensor_to_grid(const autograd::Tensor& t, const GridShape& shape);

// Model file round trip: magic, length-prefixed manifest, 64-bit blob.
void save_model(const ParamStore& params, const ModelConfig& cfg,
                const std::string& path);
std::pair<ParamStore, ModelConfig> load_model(const std::string& path);

} // namespace csiforge
