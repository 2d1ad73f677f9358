#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedcast/signals.hpp"
#include "fedcast/tokenizer.hpp"

namespace fedcast {

/// Shape of the desk-scale autoregressive token model: the last `receptive`
/// context-token embeddings are concatenated, passed through one tanh hidden
/// layer, and projected to next-token logits over n_bins.
struct ModelConfig {
    int n_bins = 128;
    int embed_dim = 16;
    int hidden_dim = 64;
    int receptive = 32;
};

void validate(const ModelConfig& cfg);

struct ParamSegment {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
    bool operator==(const ParamSegment&) const = default;
};

/// Named segments (embedding, hidden weights/bias, output weights/bias) with
/// offsets into the flat parameter vector. A pure function of ModelConfig.
struct ParamLayout {
    std::vector<ParamSegment> segments;
    std::size_t total = 0;

    static ParamLayout for_config(const ModelConfig& cfg);
    const ParamSegment& segment(const std::string& name) const;
    bool operator==(const ParamLayout&) const = default;
};

/// Flat ordered model parameters; the unit of exchange between clients and
/// the server.
struct ParamVector {
    std::vector<double> values;
    ParamLayout layout;
};

ParamVector zero_params(const ModelConfig& cfg);

struct LossGrad {
    double loss = 0.0;
    ParamVector grad;
};

struct PretrainedCheckpoint {
    ParamVector params;
    std::string provenance;
    std::uint64_t seed = 0;
};

/// Uniform init in [-s, s] with s = 1/sqrt(fan_in) per segment; deterministic
/// in (cfg, seed).
ParamVector init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Mean cross-entropy of next-token predictions over all target positions of
/// all windows (teacher forcing on true tokens), plus the matching gradient.
/// Windows are reduced in a canonical content order, so the result is
/// invariant to batch permutation and exactly invariant to duplication.
LossGrad loss_and_grad(const ParamVector& params, std::span<const Window> batch,
                       const TokenizerConfig& tok_cfg, const ModelConfig& cfg);

/// out[j] = params[j] - eta * grad[j]; eta must be > 0.
ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, double eta);

/// Greedy autoregressive rollout: tokenize the context once, then repeatedly
/// predict, take the argmax token, feed it back, and detokenize with the
/// original scale factor.
std::vector<double> forecast(const ParamVector& params, std::span<const double> context,
                             std::size_t horizon, const TokenizerConfig& tok_cfg,
                             const ModelConfig& cfg);

struct PretrainOptions {
    std::size_t l_ctx = 64;
    std::size_t l_hor = 16;
    std::size_t stride = 16;
    int batch_size = 16;
    std::size_t series_length = 2048;
    int n_generators = 12;
};

/// SGD on windows drawn from a broad synthetic mixture (both modalities,
/// beat rates spanning the valid range). steps == 0 returns the init
/// unchanged. The per-step training loss is appended to *loss_curve when
/// given.
PretrainedCheckpoint pretrain(const ModelConfig& cfg, const TokenizerConfig& tok_cfg,
                              std::uint64_t mixture_seed, long steps, double eta,
                              const PretrainOptions& opts = {},
                              std::vector<double>* loss_curve = nullptr);

/// Binary checkpoint: magic "FEDCAST1", model config, seed, provenance,
/// parameters as little-endian 64-bit reals. Round-trips bitwise.
void save_checkpoint(const std::filesystem::path& path,
                     const PretrainedCheckpoint& ckpt, const ModelConfig& cfg);
std::pair<PretrainedCheckpoint, ModelConfig>
load_checkpoint(const std::filesystem::path& path);

} // namespace fedcast
