#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedcast/federation.hpp"
#include "fedcast/signals.hpp"

namespace fedcast {

enum class PartitionStrategy { S1_IID, S2_SiteNonIID, S3_ModalityOutlier };

std::string to_string(PartitionStrategy s);

/// Declarative description of how series are assigned to clients.
struct PartitionSpec {
    PartitionStrategy strategy = PartitionStrategy::S1_IID;
    int n_clients = 20;
    std::size_t l_ctx = 64;
    std::size_t l_hor = 16;
    std::size_t stride = 16;
    double train_fraction = 0.7;
    std::optional<std::vector<std::size_t>> site_sizes; // S2 only
    std::uint64_t seed = 0;
};

void validate(const PartitionSpec& spec);

/// Heavy-tailed default for S2: log-uniform site sizes between lo and hi.
std::vector<std::size_t> default_site_sizes(int n_clients, std::uint64_t seed,
                                            std::size_t lo = 10, std::size_t hi = 8910);

/// IID partition: one or two subjects per client, round-robin; every client
/// is truncated to the same number of training windows.
std::vector<ClientState> build_s1(const std::vector<Series>& pool,
                                  const PartitionSpec& spec, int steps_per_round,
                                  int batch_size);

/// Site partition: one client per site, client i holding site_sizes[i]
/// training windows and training for that many steps per round. Sites with
/// fewer than min_site_windows declared windows are rejected.
std::vector<ClientState> build_s2(const std::vector<std::vector<Series>>& site_pools,
                                  const PartitionSpec& spec,
                                  const std::vector<std::size_t>& site_sizes,
                                  int batch_size, std::size_t min_site_windows = 10);

/// Modality-outlier partition: n_clients - 1 ECG clients built as in S1 plus
/// exactly one client holding only ICG windows; equal steps for everyone.
std::vector<ClientState> build_s3(const std::vector<Series>& ecg_pool,
                                  const std::vector<Series>& icg_pool,
                                  const PartitionSpec& spec, int steps_per_round,
                                  int batch_size);

/// Generates the synthetic pools for the spec's strategy and dispatches to
/// the matching builder. Deterministic in (spec, steps, batch).
std::vector<ClientState> materialize_clients(const PartitionSpec& spec,
                                             int steps_per_round, int batch_size);

/// Audit table: one row per client (id, modality, n_train, n_test,
/// steps_per_round).
std::string manifest_table(const std::vector<ClientState>& clients);

/// Materializes clients from the partition spec and runs the experiment.
std::vector<RoundReport> run_partitioned_experiment(
    const FederationContext& ctx, const PartitionSpec& partition,
    const StrategyConfig& strategy, const PretrainedCheckpoint& checkpoint,
    std::uint64_t master_seed, int steps_per_round, int batch_size);

} // namespace fedcast
