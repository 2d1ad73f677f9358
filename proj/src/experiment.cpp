#include "fedcast/experiment.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "fedcast/errors.hpp"

namespace fedcast {

namespace {

StrategyKind parse_kind(const std::string& s) {
    if (s == "fedavg") return StrategyKind::FedAvg;
    if (s == "fedprox") return StrategyKind::FedProx;
    if (s == "fedla") return StrategyKind::FedLA;
    if (s == "local") return StrategyKind::LocalOnly;
    if (s == "zeroshot") return StrategyKind::ZeroShot;
    throw ConfigError("strategy.kind", "config: strategy.kind must be one of "
                                       "fedavg|fedprox|fedla|local|zeroshot, got: " + s);
}

PartitionStrategy parse_partition(const std::string& s) {
    if (s == "s1") return PartitionStrategy::S1_IID;
    if (s == "s2") return PartitionStrategy::S2_SiteNonIID;
    if (s == "s3") return PartitionStrategy::S3_ModalityOutlier;
    throw ConfigError("partition.strategy",
                      "config: partition.strategy must be s1|s2|s3, got: " + s);
}

WeightMode parse_weight_mode(const std::string& s) {
    if (s == "train") return WeightMode::TrainSize;
    if (s == "test") return WeightMode::TestSize;
    throw ConfigError("strategy.weight_mode",
                      "config: strategy.weight_mode must be train|test, got: " + s);
}

template <typename Fn>
void check(const char* section, Fn&& fn) {
    try {
        fn();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(section, std::string("config: ") + e.what());
    }
}

} // namespace

ExperimentConfig experiment_config_from(const KeyValueConfig& kv) {
    ExperimentConfig cfg;

    cfg.partition.strategy = parse_partition(kv.get_string("partition.strategy", "s1"));
    cfg.partition.n_clients = static_cast<int>(kv.get_int("partition.n_clients", 20));
    cfg.partition.l_ctx = static_cast<std::size_t>(kv.get_int("partition.l_ctx", 64));
    cfg.partition.l_hor = static_cast<std::size_t>(kv.get_int("partition.l_hor", 16));
    cfg.partition.stride = static_cast<std::size_t>(kv.get_int("partition.stride", 16));
    cfg.partition.train_fraction = kv.get_double("partition.train_fraction", 0.7);
    cfg.partition.seed = kv.get_u64("partition.seed", 42);
    if (kv.has("partition.site_sizes"))
        cfg.partition.site_sizes = kv.get_size_list("partition.site_sizes");

    cfg.strategy.kind = parse_kind(kv.get_string("strategy.kind", "fedavg"));
    cfg.strategy.rounds = static_cast<int>(kv.get_int("strategy.rounds", 30));
    cfg.strategy.eta = kv.get_double("strategy.eta", 0.05);
    cfg.strategy.alpha = kv.get_double("strategy.alpha", 0.1);
    cfg.strategy.lambda = kv.get_double("strategy.lambda", 1.0);
    cfg.strategy.global_rounds = static_cast<int>(
        kv.get_int("strategy.global_rounds", cfg.strategy.rounds * 2 / 3));
    cfg.strategy.weight_mode =
        parse_weight_mode(kv.get_string("strategy.weight_mode", "train"));
    cfg.strategy.sample_fraction = kv.get_double("strategy.sample_fraction", 1.0);

    cfg.tokenizer.n_bins = static_cast<int>(kv.get_int("tokenizer.n_bins", 128));
    cfg.tokenizer.clip = kv.get_double("tokenizer.clip", 4.0);
    cfg.tokenizer.epsilon = kv.get_double("tokenizer.epsilon", 1e-8);

    cfg.model.n_bins = static_cast<int>(kv.get_int("model.n_bins", cfg.tokenizer.n_bins));
    cfg.model.embed_dim = static_cast<int>(kv.get_int("model.embed_dim", 16));
    cfg.model.hidden_dim = static_cast<int>(kv.get_int("model.hidden_dim", 64));
    cfg.model.receptive = static_cast<int>(kv.get_int("model.receptive", 32));
    if (cfg.model.n_bins != cfg.tokenizer.n_bins)
        throw ConfigError("model.n_bins",
                          "config: model.n_bins must match tokenizer.n_bins");

    cfg.pretrain.steps = kv.get_int("pretrain.steps", 1500);
    cfg.pretrain.eta = kv.get_double("pretrain.eta", 0.05);
    cfg.pretrain.mixture_seed = kv.get_u64("pretrain.seed", 1);
    cfg.pretrain.batch_size = static_cast<int>(kv.get_int("pretrain.batch_size", 16));

    cfg.steps_per_round = static_cast<int>(kv.get_int("train.steps_per_round", 50));
    cfg.batch_size = static_cast<int>(kv.get_int("train.batch_size", 16));
    cfg.master_seed = kv.get_u64("master_seed", 1);
    cfg.output_dir = kv.get_string("output_dir", "out");

    const std::vector<std::string> unread = kv.unread_keys();
    if (!unread.empty())
        throw ConfigError(unread.front(),
                          "config: unknown key '" + unread.front() + "'");

    check("partition", [&] { validate(cfg.partition); });
    check("strategy", [&] { validate(cfg.strategy); });
    check("tokenizer", [&] { validate(cfg.tokenizer); });
    check("model", [&] { validate(cfg.model); });
    if (cfg.pretrain.steps < 0)
        throw ConfigError("pretrain.steps", "config: pretrain.steps must be >= 0");
    if (cfg.pretrain.batch_size < 1)
        throw ConfigError("pretrain.batch_size", "config: pretrain.batch_size must be >= 1");
    if (cfg.steps_per_round < 1)
        throw ConfigError("train.steps_per_round",
                          "config: train.steps_per_round must be >= 1");
    if (cfg.batch_size < 1)
        throw ConfigError("train.batch_size", "config: train.batch_size must be >= 1");
    if (static_cast<int>(cfg.partition.l_ctx) < cfg.model.receptive)
        throw ConfigError("partition.l_ctx",
                          "config: partition.l_ctx must be >= model.receptive");
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return experiment_config_from(KeyValueConfig::parse_file(path));
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

template <typename T>
std::uint64_t fnv1a_value(std::uint64_t h, const T& v) {
    return fnv1a(h, &v, sizeof(v));
}

PretrainOptions pretrain_options(const ExperimentConfig& cfg) {
    PretrainOptions opts;
    opts.l_ctx = cfg.partition.l_ctx;
    opts.l_hor = cfg.partition.l_hor;
    opts.stride = cfg.partition.l_hor;
    opts.batch_size = cfg.pretrain.batch_size;
    return opts;
}

std::uint64_t checkpoint_content_hash(const ExperimentConfig& cfg) {
    const PretrainOptions opts = pretrain_options(cfg);
    std::uint64_t h = 1469598103934665603ULL;
    h = fnv1a_value(h, cfg.model.n_bins);
    h = fnv1a_value(h, cfg.model.embed_dim);
    h = fnv1a_value(h, cfg.model.hidden_dim);
    h = fnv1a_value(h, cfg.model.receptive);
    h = fnv1a_value(h, cfg.tokenizer.n_bins);
    h = fnv1a_value(h, cfg.tokenizer.clip);
    h = fnv1a_value(h, cfg.tokenizer.epsilon);
    h = fnv1a_value(h, cfg.pretrain.steps);
    h = fnv1a_value(h, cfg.pretrain.eta);
    h = fnv1a_value(h, cfg.pretrain.mixture_seed);
    h = fnv1a_value(h, opts.l_ctx);
    h = fnv1a_value(h, opts.l_hor);
    h = fnv1a_value(h, opts.stride);
    h = fnv1a_value(h, opts.batch_size);
    h = fnv1a_value(h, opts.series_length);
    h = fnv1a_value(h, opts.n_generators);
    return h;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path.string());
    out << text;
    if (!out)
        throw std::runtime_error("write failed for: " + path.string());
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void append_metric_columns(std::string& row, const RoundReport& report,
                           bool with_modality) {
    row += ',' + fmt(report.weighted.rmse) + ',' + fmt(report.weighted.mae) + ',' +
           fmt(report.weighted.smape_pct);
    if (with_modality) {
        for (Modality m : {Modality::ECG, Modality::ICG}) {
            auto it = report.per_modality.find(m);
            if (it == report.per_modality.end())
                throw std::logic_error("round report lacks modality breakdown");
            row += ',' + fmt(it->second.rmse) + ',' + fmt(it->second.mae) + ',' +
                   fmt(it->second.smape_pct);
        }
    }
}

std::string metric_header(bool with_modality) {
    std::string h = "rmse,mae,smape_pct";
    if (with_modality)
        h += ",rmse_ecg,mae_ecg,smape_ecg,rmse_icg,mae_icg,smape_icg";
    return h;
}

} // namespace

PretrainedCheckpoint get_or_pretrain(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016" PRIx64, checkpoint_content_hash(cfg));
    const std::filesystem::path cache_path =
        cfg.output_dir / (std::string("checkpoint_") + hex + ".bin");

    PretrainedCheckpoint ckpt;
    if (std::filesystem::exists(cache_path)) {
        auto [loaded, loaded_cfg] = load_checkpoint(cache_path);
        if (loaded_cfg.n_bins != cfg.model.n_bins ||
            loaded_cfg.embed_dim != cfg.model.embed_dim ||
            loaded_cfg.hidden_dim != cfg.model.hidden_dim ||
            loaded_cfg.receptive != cfg.model.receptive)
            throw std::runtime_error("checkpoint cache collision at " + cache_path.string());
        ckpt = std::move(loaded);
    } else {
        ckpt = pretrain(cfg.model, cfg.tokenizer, cfg.pretrain.mixture_seed,
                        cfg.pretrain.steps, cfg.pretrain.eta, pretrain_options(cfg));
        save_checkpoint(cache_path, ckpt, cfg.model);
    }
    save_checkpoint(cfg.output_dir / "checkpoint.bin", ckpt, cfg.model);
    return ckpt;
}

void write_round_csv(std::span<const StrategyRun> runs, bool with_modality,
                     const std::filesystem::path& path) {
    std::string text = "round,strategy," + metric_header(with_modality) + "\n";
    bool any = false;
    for (const StrategyRun& run : runs) {
        for (const RoundReport& report : run.history) {
            any = true;
            std::string row = std::to_string(report.round) + ',' + run.strategy;
            append_metric_columns(row, report, with_modality);
            text += row + '\n';
        }
    }
    if (!any)
        throw std::invalid_argument("write_round_csv: empty history");
    write_text_file(path, text);
}

void write_summary_csv(std::span<const StrategyRun> runs, bool with_modality,
                       const std::filesystem::path& path) {
    std::string text = "strategy," + metric_header(with_modality) + "\n";
    for (const StrategyRun& run : runs) {
        if (run.history.empty())
            throw std::invalid_argument("write_summary_csv: empty history for " +
                                        run.strategy);
        std::string row = run.strategy;
        append_metric_columns(row, run.history.back(), with_modality);
        text += row + '\n';
    }
    write_text_file(path, text);
}

namespace {

std::vector<RoundReport> run_one_strategy(const ExperimentConfig& cfg,
                                          std::vector<ClientState>& clients,
                                          const PretrainedCheckpoint& ckpt,
                                          StrategyKind kind) {
    FederationContext ctx = FederationContext::make(cfg.tokenizer, cfg.model);
    StrategyConfig strategy = cfg.strategy;
    strategy.kind = kind;
    return run_experiment(ctx, clients, strategy, ckpt, cfg.master_seed);
}

} // namespace

std::vector<RoundReport> run_single(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
    std::vector<ClientState> clients =
        materialize_clients(cfg.partition, cfg.steps_per_round, cfg.batch_size);
    write_text_file(cfg.output_dir / "manifest.txt", manifest_table(clients));

    PretrainedCheckpoint ckpt = get_or_pretrain(cfg);
    std::vector<RoundReport> history =
        run_one_strategy(cfg, clients, ckpt, cfg.strategy.kind);

    const bool with_modality =
        cfg.partition.strategy == PartitionStrategy::S3_ModalityOutlier;
    std::vector<StrategyRun> runs{{to_string(cfg.strategy.kind), history}};
    write_round_csv(runs, with_modality, cfg.output_dir / "rounds.csv");
    write_summary_csv(runs, with_modality, cfg.output_dir / "summary.csv");
    return history;
}

std::vector<StrategyRun> run_grid(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
    std::vector<ClientState> clients =
        materialize_clients(cfg.partition, cfg.steps_per_round, cfg.batch_size);
    write_text_file(cfg.output_dir / "manifest.txt", manifest_table(clients));

    PretrainedCheckpoint ckpt = get_or_pretrain(cfg);
    std::vector<StrategyRun> runs;
    for (StrategyKind kind :
         {StrategyKind::FedAvg, StrategyKind::FedProx, StrategyKind::FedLA,
          StrategyKind::LocalOnly, StrategyKind::ZeroShot})
        runs.push_back({to_string(kind), run_one_strategy(cfg, clients, ckpt, kind)});

    const bool with_modality =
        cfg.partition.strategy == PartitionStrategy::S3_ModalityOutlier;
    write_round_csv(runs, with_modality, cfg.output_dir / "rounds.csv");
    write_summary_csv(runs, with_modality, cfg.output_dir / "summary.csv");
    return runs;
}

} // namespace fedcast
