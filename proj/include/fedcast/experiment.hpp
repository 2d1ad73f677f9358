#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fedcast/config.hpp"
#include "fedcast/federation.hpp"
#include "fedcast/metrics.hpp"
#include "fedcast/model.hpp"
#include "fedcast/partition.hpp"
#include "fedcast/tokenizer.hpp"

namespace fedcast {

struct PretrainSettings {
    long steps = 1500;
    double eta = 0.05;
    std::uint64_t mixture_seed = 1;
    int batch_size = 16;
};

/// Everything one run needs; a single config file fully determines it.
struct ExperimentConfig {
    PartitionSpec partition;
    StrategyConfig strategy;
    ModelConfig model;
    TokenizerConfig tokenizer;
    PretrainSettings pretrain;
    int steps_per_round = 50;
    int batch_size = 16;
    std::uint64_t master_seed = 1;
    std::filesystem::path output_dir = "out";
};

/// Builds and validates an ExperimentConfig; unknown or ill-typed keys raise
/// ConfigError naming the key.
ExperimentConfig experiment_config_from(const KeyValueConfig& kv);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Pretrained checkpoint for this config, cached in output_dir under a
/// content hash of (model, tokenizer, pretrain settings, window shape) so
/// grids and repeated runs reuse one pretraining pass. Also written to
/// output_dir/checkpoint.bin.
PretrainedCheckpoint get_or_pretrain(const ExperimentConfig& cfg);

struct StrategyRun {
    std::string strategy;
    std::vector<RoundReport> history;
};

/// rounds.csv: header round,strategy,rmse,mae,smape_pct; one row per round
/// per run. with_modality adds per-modality columns (S3 runs).
void write_round_csv(std::span<const StrategyRun> runs, bool with_modality,
                     const std::filesystem::path& path);

/// summary.csv: final-round weighted metrics, one row per strategy.
void write_summary_csv(std::span<const StrategyRun> runs, bool with_modality,
                       const std::filesystem::path& path);

/// One experiment: materialize, pretrain (cached), run, persist manifest.txt,
/// checkpoint.bin, rounds.csv and summary.csv under cfg.output_dir.
std::vector<RoundReport> run_single(const ExperimentConfig& cfg);

/// All five strategies on one partition and one checkpoint; combined
/// rounds.csv/summary.csv mirroring the comparison-table layout.
std::vector<StrategyRun> run_grid(const ExperimentConfig& cfg);

} // namespace fedcast
