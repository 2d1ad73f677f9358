#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedcast/metrics.hpp"
#include "fedcast/model.hpp"
#include "fedcast/signals.hpp"
#include "fedcast/tokenizer.hpp"

namespace fedcast {

enum class StrategyKind { FedAvg, FedProx, FedLA, LocalOnly, ZeroShot };
enum class WeightMode { TrainSize, TestSize };

std::string to_string(StrategyKind k);

struct StrategyConfig {
    StrategyKind kind = StrategyKind::FedAvg;
    int rounds = 30;
    double eta = 0.05;
    double alpha = 0.1;          // FedProx proximal strength, in [0, 1]
    double lambda = 1.0;         // Fed-LA anchor strength, >= 0
    int global_rounds = 20;      // Fed-LA phase-1 length, < rounds
    WeightMode weight_mode = WeightMode::TrainSize;
    double sample_fraction = 1.0;
};

void validate(const StrategyConfig& cfg);

struct ClientState {
    int id = 0;
    std::vector<Window> train_windows;
    std::vector<Window> test_windows;
    int steps_per_round = 50;
    int batch_size = 16;
    ParamVector local_params;
    Modality modality = Modality::OTHER;
};

struct GlobalState {
    int round = 0; // completed rounds
    ParamVector global_params;
    std::optional<ParamVector> anchor; // theta_G, set when Fed-LA enters phase 2
    std::vector<RoundReport> history;
};

/// Local training objective. Proximal adds (coeff/2)|theta - ref|^2 (gradient
/// coeff * (theta - ref)); Anchored adds coeff * |theta - ref|^2 (gradient
/// 2 * coeff * (theta - ref)).
struct Objective {
    enum class Kind { Plain, Proximal, Anchored } kind = Kind::Plain;
    double coeff = 0.0;
    const ParamVector* reference = nullptr;
};

/// Tokenizer/model wiring shared by every client plus the loss seam. Tests
/// may replace loss_grad (e.g. with a zero stub) to probe the update rule.
struct FederationContext {
    TokenizerConfig tokenizer;
    ModelConfig model;
    std::function<LossGrad(const ParamVector&, std::span<const Window>)> loss_grad;

    static FederationContext make(TokenizerConfig tok, ModelConfig model);
};

/// `steps` SGD steps from start_params on batches sampled deterministically
/// from seed (without replacement per step when enough windows exist, with
/// replacement otherwise; indices sorted ascending for a fixed reduction
/// order). Returns the final local parameters.
ParamVector local_train(const FederationContext& ctx, const ClientState& client,
                        const ParamVector& start_params, const Objective& objective,
                        int steps, int batch_size, double eta, std::uint64_t seed);

struct ClientUpdate {
    ParamVector params;
    std::size_t weight = 1;
};

/// Weighted average, accumulated in list order (callers pass ascending client
/// id). A single update is returned bitwise unchanged.
ParamVector aggregate(std::span<const ClientUpdate> updates);

/// One federated round: broadcast, local training per strategy, optional
/// aggregation, then every client evaluates on its test windows. Mutates the
/// clients' persisted local parameters and returns the advanced state.
GlobalState run_round(const FederationContext& ctx, GlobalState state,
                      std::vector<ClientState>& clients, const StrategyConfig& strategy,
                      std::uint64_t round_seed);

/// Forecast metrics of `params` over the client's test windows (per-window
/// metrics averaged unweighted within the client).
ClientMetrics evaluate_client(const FederationContext& ctx, const ParamVector& params,
                              const ClientState& client);

/// Runs R rounds from the checkpoint over pre-materialized clients and
/// returns the per-round history. Client batch randomness derives only from
/// (master_seed, client id, round).
std::vector<RoundReport> run_experiment(const FederationContext& ctx,
                                        std::vector<ClientState>& clients,
                                        const StrategyConfig& strategy,
                                        const PretrainedCheckpoint& checkpoint,
                                        std::uint64_t master_seed);

} // namespace fedcast
