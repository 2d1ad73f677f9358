#include "fedcast/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedcast/errors.hpp"
#include "fedcast/parallel.hpp"
#include "fedcast/rng.hpp"

namespace fedcast {

namespace {
constexpr double kDivergenceLossLimit = 1e12;
}

std::string to_string(StrategyKind k) {
    switch (k) {
    case StrategyKind::FedAvg: return "fedavg";
    case StrategyKind::FedProx: return "fedprox";
    case StrategyKind::FedLA: return "fedla";
    case StrategyKind::LocalOnly: return "local";
    case StrategyKind::ZeroShot: return "zeroshot";
    }
    return "unknown";
}

void validate(const StrategyConfig& cfg) {
    if (cfg.rounds < 0)
        throw std::invalid_argument("strategy: rounds must be >= 0");
    if (!(cfg.eta > 0.0))
        throw std::invalid_argument("strategy: eta must be > 0");
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0))
        throw std::invalid_argument("strategy: alpha must be in [0, 1]");
    if (!(cfg.lambda >= 0.0))
        throw std::invalid_argument("strategy: lambda must be >= 0");
    if (cfg.kind == StrategyKind::FedLA &&
        !(cfg.global_rounds >= 0 && cfg.global_rounds < cfg.rounds))
        throw std::invalid_argument("strategy: Fed-LA needs 0 <= global_rounds < rounds");
    if (!(cfg.sample_fraction > 0.0 && cfg.sample_fraction <= 1.0))
        throw std::invalid_argument("strategy: sample_fraction must be in (0, 1]");
}

FederationContext FederationContext::make(TokenizerConfig tok, ModelConfig model) {
    validate(tok);
    validate(model);
    FederationContext ctx;
    ctx.tokenizer = tok;
    ctx.model = model;
    ctx.loss_grad = [tok, model](const ParamVector& p, std::span<const Window> batch) {
        return loss_and_grad(p, batch, tok, model);
    };
    return ctx;
}

ParamVector local_train(const FederationContext& ctx, const ClientState& client,
                        const ParamVector& start_params, const Objective& objective,
                        int steps, int batch_size, double eta, std::uint64_t seed) {
    if (steps < 1)
        throw std::invalid_argument("local_train: steps must be >= 1");
    if (batch_size < 1)
        throw std::invalid_argument("local_train: batch_size must be >= 1");
    if (!(eta > 0.0))
        throw std::invalid_argument("local_train: eta must be > 0");
    if (client.train_windows.empty())
        throw std::invalid_argument("local_train: client has no train windows");
    const bool regularized = objective.kind != Objective::Kind::Plain;
    if (regularized) {
        if (objective.reference == nullptr)
            throw std::invalid_argument("local_train: regularized objective needs a reference");
        if (objective.reference->layout != start_params.layout)
            throw ProtocolError("local_train: objective reference layout mismatch");
    }

    ParamVector theta = start_params;
    Rng rng(seed);
    const std::size_t n = client.train_windows.size();
    const auto batch = static_cast<std::size_t>(batch_size);

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> picked(batch);
    std::vector<Window> batch_windows;
    batch_windows.reserve(batch);

    for (int step = 0; step < steps; ++step) {
        if (n >= batch) {
            for (std::size_t j = 0; j < batch; ++j)
                std::swap(all[j], all[j + rng.index(n - j)]);
            std::copy(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(batch),
                      picked.begin());
        } else {
            for (std::size_t j = 0; j < batch; ++j) picked[j] = rng.index(n);
        }
        std::sort(picked.begin(), picked.end());
        batch_windows.clear();
        for (std::size_t idx : picked) batch_windows.push_back(client.train_windows[idx]);

        LossGrad lg;
        try {
            lg = ctx.loss_grad(theta, batch_windows);
        } catch (const std::runtime_error&) {
            throw DivergenceError(client.id, step,
                                  "client " + std::to_string(client.id) +
                                      " diverged (non-finite loss) at local step " +
                                      std::to_string(step));
        }

        double total_loss = lg.loss;
        if (regularized && objective.coeff != 0.0) {
            double sq = 0.0;
            for (std::size_t j = 0; j < theta.values.size(); ++j) {
                double d = theta.values[j] - objective.reference->values[j];
                sq += d * d;
            }
            const double grad_scale = (objective.kind == Objective::Kind::Proximal)
                                          ? objective.coeff
                                          : 2.0 * objective.coeff;
            total_loss += (objective.kind == Objective::Kind::Proximal)
                              ? 0.5 * objective.coeff * sq
                              : objective.coeff * sq;
            for (std::size_t j = 0; j < theta.values.size(); ++j)
                lg.grad.values[j] +=
                    grad_scale * (theta.values[j] - objective.reference->values[j]);
        }

        if (!std::isfinite(total_loss) || total_loss > kDivergenceLossLimit)
            throw DivergenceError(client.id, step,
                                  "client " + std::to_string(client.id) +
                                      " diverged at local step " + std::to_string(step));

        theta = sgd_step(theta, lg.grad, eta);
        for (double v : theta.values)
            if (!std::isfinite(v))
                throw DivergenceError(client.id, step,
                                      "client " + std::to_string(client.id) +
                                          " non-finite parameter after local step " +
                                          std::to_string(step));
    }
    return theta;
}

ParamVector aggregate(std::span<const ClientUpdate> updates) {
    if (updates.empty())
        throw std::invalid_argument("aggregate: no updates");
    for (const ClientUpdate& u : updates) {
        if (u.weight < 1)
            throw std::invalid_argument("aggregate: weights must be >= 1");
        if (u.params.layout != updates.front().params.layout)
            throw ProtocolError("aggregate: parameter layout mismatch between updates");
    }
    if (updates.size() == 1) return updates.front().params; // exact identity

    ParamVector out = updates.front().params;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    double total_weight = 0.0;
    for (const ClientUpdate& u : updates) {
        const double w = static_cast<double>(u.weight);
        total_weight += w;
        for (std::size_t j = 0; j < out.values.size(); ++j)
            out.values[j] += w * u.params.values[j];
    }
    for (double& v : out.values) v /= total_weight;
    return out;
}

ClientMetrics evaluate_client(const FederationContext& ctx, const ParamVector& params,
                              const ClientState& client) {
    if (client.test_windows.empty())
        throw std::invalid_argument("evaluate_client: client has no test windows");
    double sum_rmse = 0.0, sum_mae = 0.0, sum_smape = 0.0;
    for (const Window& w : client.test_windows) {
        std::vector<double> f =
            forecast(params, w.context, w.target.size(), ctx.tokenizer, ctx.model);
        double r = rmse(f, w.target);
        double m = mae(f, w.target);
        double s = smape(f, w.target);
        if (r < m - 1e-9 * std::max(1.0, m))
            throw std::logic_error("evaluate_client: per-window rmse < mae");
        sum_rmse += r;
        sum_mae += m;
        sum_smape += s;
    }
    const double n = static_cast<double>(client.test_windows.size());
    return {client.id, client.test_windows.size(),
            sum_rmse / n, sum_mae / n, sum_smape / n, client.modality};
}

GlobalState run_round(const FederationContext& ctx, GlobalState state,
                      std::vector<ClientState>& clients, const StrategyConfig& strategy,
                      std::uint64_t round_seed) {
    validate(strategy);
    if (clients.empty())
        throw std::invalid_argument("run_round: no clients");
    if (state.round >= strategy.rounds)
        throw std::invalid_argument("run_round: all rounds already completed");
    const int r_next = state.round + 1;

    const bool aggregating_phase =
        strategy.kind == StrategyKind::FedAvg || strategy.kind == StrategyKind::FedProx ||
        (strategy.kind == StrategyKind::FedLA && r_next <= strategy.global_rounds);

    // Fed-LA with global_rounds == 0: the pretrained model itself is theta_G.
    if (strategy.kind == StrategyKind::FedLA && !state.anchor &&
        r_next > strategy.global_rounds)
        state.anchor = state.global_params;

    std::vector<const ParamVector*> eval_params(clients.size(), nullptr);

    if (aggregating_phase) {
        std::vector<std::size_t> participants(clients.size());
        std::iota(participants.begin(), participants.end(), std::size_t{0});
        if (strategy.sample_fraction < 1.0) {
            const auto k = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(
                       strategy.sample_fraction * static_cast<double>(clients.size()))));
            Rng prng(mix_seed(round_seed, 0x53414d50ULL));
            for (std::size_t j = 0; j < k; ++j)
                std::swap(participants[j],
                          participants[j + prng.index(clients.size() - j)]);
            participants.resize(k);
            std::sort(participants.begin(), participants.end());
        }

        Objective obj;
        if (strategy.kind == StrategyKind::FedProx)
            obj = {Objective::Kind::Proximal, strategy.alpha, &state.global_params};

        parallel_for(participants.size(), [&](std::size_t i) {
            ClientState& c = clients[participants[i]];
            c.local_params = local_train(
                ctx, c, state.global_params, obj, c.steps_per_round, c.batch_size,
                strategy.eta, mix_seed(round_seed, static_cast<std::uint64_t>(c.id)));
        });

        std::vector<ClientUpdate> updates;
        updates.reserve(participants.size());
        for (std::size_t i : participants) {
            const ClientState& c = clients[i];
            const std::size_t w = strategy.weight_mode == WeightMode::TrainSize
                                      ? c.train_windows.size()
                                      : c.test_windows.size();
            updates.push_back({c.local_params, w});
        }
        state.global_params = aggregate(updates);

        if (strategy.kind == StrategyKind::FedLA && r_next == strategy.global_rounds) {
            state.anchor = state.global_params;
            for (ClientState& c : clients) c.local_params = state.global_params;
        }
        for (std::size_t i = 0; i < clients.size(); ++i)
            eval_params[i] = &state.global_params;
    } else if (strategy.kind == StrategyKind::FedLA) {
        // phase 2: per-client fine-tuning anchored at theta_G, no aggregation
        Objective obj{Objective::Kind::Anchored, strategy.lambda, &*state.anchor};
        parallel_for(clients.size(), [&](std::size_t i) {
            ClientState& c = clients[i];
            c.local_params = local_train(
                ctx, c, c.local_params, obj, c.steps_per_round, c.batch_size,
                strategy.eta, mix_seed(round_seed, static_cast<std::uint64_t>(c.id)));
        });
        for (std::size_t i = 0; i < clients.size(); ++i)
            eval_params[i] = &clients[i].local_params;
    } else if (strategy.kind == StrategyKind::LocalOnly) {
        parallel_for(clients.size(), [&](std::size_t i) {
            ClientState& c = clients[i];
            c.local_params = local_train(
                ctx, c, c.local_params, Objective{}, c.steps_per_round, c.batch_size,
                strategy.eta, mix_seed(round_seed, static_cast<std::uint64_t>(c.id)));
        });
        for (std::size_t i = 0; i < clients.size(); ++i)
            eval_params[i] = &clients[i].local_params;
    } else { // ZeroShot: evaluate the unchanged pretrained parameters
        for (std::size_t i = 0; i < clients.size(); ++i)
            eval_params[i] = &clients[i].local_params;
    }

    std::vector<ClientMetrics> per_client(clients.size());
    parallel_for(clients.size(), [&](std::size_t i) {
        per_client[i] = evaluate_client(ctx, *eval_params[i], clients[i]);
    });

    state.history.push_back(weighted_report(r_next, std::move(per_client)));
    state.round = r_next;
    return state;
}

std::vector<RoundReport> run_experiment(const FederationContext& ctx,
                                        std::vector<ClientState>& clients,
                                        const StrategyConfig& strategy,
                                        const PretrainedCheckpoint& checkpoint,
                                        std::uint64_t master_seed) {
    validate(strategy);
    if (clients.empty())
        throw std::invalid_argument("run_experiment: no clients");
    if (checkpoint.params.layout != ParamLayout::for_config(ctx.model))
        throw ProtocolError("run_experiment: checkpoint layout does not match model config");

    GlobalState state;
    state.global_params = checkpoint.params;
    for (ClientState& c : clients) c.local_params = checkpoint.params;
    if (strategy.kind == StrategyKind::FedLA && strategy.global_rounds == 0)
        state.anchor = checkpoint.params;

    for (int r = 0; r < strategy.rounds; ++r)
        state = run_round(ctx, std::move(state), clients, strategy,
                          mix_seed(master_seed, static_cast<std::uint64_t>(r + 1)));
    return std::move(state.history);
}

} // namespace fedcast
