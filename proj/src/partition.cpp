#include "fedcast/partition.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fedcast/errors.hpp"
#include "fedcast/rng.hpp"

namespace fedcast {

std::string to_string(PartitionStrategy s) {
    switch (s) {
    case PartitionStrategy::S1_IID: return "s1";
    case PartitionStrategy::S2_SiteNonIID: return "s2";
    case PartitionStrategy::S3_ModalityOutlier: return "s3";
    }
    return "unknown";
}

void validate(const PartitionSpec& spec) {
    if (spec.n_clients < 2)
        throw std::invalid_argument("partition: n_clients must be >= 2");
    if (spec.l_ctx < 1 || spec.l_hor < 1 || spec.stride < 1)
        throw std::invalid_argument("partition: l_ctx, l_hor, stride must be >= 1");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw std::invalid_argument("partition: train_fraction must be in (0, 1)");
    if (spec.site_sizes) {
        if (static_cast<int>(spec.site_sizes->size()) != spec.n_clients)
            throw std::invalid_argument("partition: site_sizes length must equal n_clients");
        for (std::size_t s : *spec.site_sizes)
            if (s < 1)
                throw std::invalid_argument("partition: site_sizes entries must be >= 1");
    }
}

std::vector<std::size_t> default_site_sizes(int n_clients, std::uint64_t seed,
                                            std::size_t lo, std::size_t hi) {
    Rng rng(mix_seed(seed, 0x53495445ULL)); // "SITE"
    std::vector<std::size_t> sizes(static_cast<std::size_t>(n_clients));
    const double log_lo = std::log(static_cast<double>(lo));
    const double log_hi = std::log(static_cast<double>(hi));
    for (auto& s : sizes) {
        auto v = static_cast<std::size_t>(std::llround(std::exp(rng.uniform(log_lo, log_hi))));
        s = std::clamp(v, lo, hi);
    }
    return sizes;
}

namespace {

struct SplitPools {
    std::vector<Window> train;
    std::vector<Window> test;
};

// Windows of one series, split chronologically.
SplitPools windows_of(const Series& s, const PartitionSpec& spec) {
    std::vector<Window> all = make_windows(s, spec.l_ctx, spec.l_hor, spec.stride);
    auto [train, test] = split_train_test(all, spec.train_fraction);
    return {std::move(train), std::move(test)};
}

// Core of S1, reused by S3 for its ECG block: round-robin subjects over
// `n_clients` clients starting at id `first_id`, train counts equalized by
// truncation to the minimum.
std::vector<ClientState> assign_round_robin(const std::vector<Series>& pool,
                                            const PartitionSpec& spec, int n_clients,
                                            int first_id, int steps_per_round,
                                            int batch_size) {
    if (static_cast<int>(pool.size()) < n_clients)
        throw PartitionError("partition: pool of " + std::to_string(pool.size()) +
                             " series cannot feed " + std::to_string(n_clients) +
                             " clients");
    std::vector<ClientState> clients(static_cast<std::size_t>(n_clients));
    for (int i = 0; i < n_clients; ++i) {
        clients[static_cast<std::size_t>(i)].id = first_id + i;
        clients[static_cast<std::size_t>(i)].steps_per_round = steps_per_round;
        clients[static_cast<std::size_t>(i)].batch_size = batch_size;
        clients[static_cast<std::size_t>(i)].modality = pool.front().modality;
    }
    for (std::size_t j = 0; j < pool.size(); ++j) {
        SplitPools sp = windows_of(pool[j], spec);
        ClientState& c = clients[j % static_cast<std::size_t>(n_clients)];
        c.train_windows.insert(c.train_windows.end(), sp.train.begin(), sp.train.end());
        c.test_windows.insert(c.test_windows.end(), sp.test.begin(), sp.test.end());
    }
    std::size_t min_train = clients.front().train_windows.size();
    for (const ClientState& c : clients)
        min_train = std::min(min_train, c.train_windows.size());
    for (ClientState& c : clients) c.train_windows.resize(min_train);
    return clients;
}

} // namespace

std::vector<ClientState> build_s1(const std::vector<Series>& pool,
                                  const PartitionSpec& spec, int steps_per_round,
                                  int batch_size) {
    validate(spec);
    if (pool.empty())
        throw PartitionError("build_s1: empty pool");
    for (const Series& s : pool)
        if (s.modality != Modality::ECG)
            throw PartitionError("build_s1: pool must be all ECG");
    return assign_round_robin(pool, spec, spec.n_clients, 0, steps_per_round, batch_size);
}

std::vector<ClientState> build_s2(const std::vector<std::vector<Series>>& site_pools,
                                  const PartitionSpec& spec,
                                  const std::vector<std::size_t>& site_sizes,
                                  int batch_size, std::size_t min_site_windows) {
    validate(spec);
    if (static_cast<int>(site_pools.size()) != spec.n_clients)
        throw PartitionError("build_s2: need one site pool per client");
    if (site_sizes.size() != site_pools.size())
        throw PartitionError("build_s2: site_sizes length must equal number of sites");

    std::vector<ClientState> clients;
    clients.reserve(site_pools.size());
    for (std::size_t i = 0; i < site_pools.size(); ++i) {
        if (site_sizes[i] < min_site_windows)
            throw PartitionError("build_s2: site " + std::to_string(i) + " has " +
                                 std::to_string(site_sizes[i]) +
                                 " training windows, below the minimum of " +
                                 std::to_string(min_site_windows));
        if (site_pools[i].empty())
            throw PartitionError("build_s2: site " + std::to_string(i) + " has no series");

        ClientState c;
        c.id = static_cast<int>(i);
        c.batch_size = batch_size;
        c.modality = site_pools[i].front().modality;
        for (const Series& s : site_pools[i]) {
            SplitPools sp = windows_of(s, spec);
            c.train_windows.insert(c.train_windows.end(), sp.train.begin(), sp.train.end());
            c.test_windows.insert(c.test_windows.end(), sp.test.begin(), sp.test.end());
        }
        if (c.train_windows.size() < site_sizes[i])
            throw PartitionError("build_s2: site " + std::to_string(i) + " yields only " +
                                 std::to_string(c.train_windows.size()) +
                                 " train windows, needs " + std::to_string(site_sizes[i]));
        c.train_windows.resize(site_sizes[i]);
        // per-round step budget tracks the client's data volume
        c.steps_per_round = static_cast<int>(site_sizes[i]);
        clients.push_back(std::move(c));
    }
    return clients;
}

std::vector<ClientState> build_s3(const std::vector<Series>& ecg_pool,
                                  const std::vector<Series>& icg_pool,
                                  const PartitionSpec& spec, int steps_per_round,
                                  int batch_size) {
    validate(spec);
    if (icg_pool.empty())
        throw PartitionError("build_s3: empty ICG pool");
    for (const Series& s : icg_pool)
        if (s.modality != Modality::ICG)
            throw PartitionError("build_s3: ICG pool must be all ICG");
    for (const Series& s : ecg_pool)
        if (s.modality != Modality::ECG)
            throw PartitionError("build_s3: ECG pool must be all ECG");

    std::vector<ClientState> clients = assign_round_robin(
        ecg_pool, spec, spec.n_clients - 1, 0, steps_per_round, batch_size);

    ClientState icg;
    icg.id = spec.n_clients - 1;
    icg.steps_per_round = steps_per_round;
    icg.batch_size = batch_size;
    icg.modality = Modality::ICG;
    for (const Series& s : icg_pool) {
        SplitPools sp = windows_of(s, spec);
        icg.train_windows.insert(icg.train_windows.end(), sp.train.begin(), sp.train.end());
        icg.test_windows.insert(icg.test_windows.end(), sp.test.begin(), sp.test.end());
    }
    clients.push_back(std::move(icg));
    return clients;
}

namespace {

std::size_t samples_for_windows(std::size_t n_windows, const PartitionSpec& spec) {
    return (n_windows - 1) * spec.stride + spec.l_ctx + spec.l_hor;
}

Series make_subject(Modality mod, std::uint64_t seed, const std::string& id,
                    std::size_t n_samples, double rate_lo, double rate_hi,
                    double noise_lo, double noise_hi, double amplitude) {
    Rng rng(mix_seed(seed, 0x4d4f5250ULL)); // "MORP"
    MorphologyParams mp;
    mp.beat_rate_hz = rng.uniform(rate_lo, rate_hi);
    mp.noise_sigma = rng.uniform(noise_lo, noise_hi);
    mp.wander_amplitude = rng.uniform(0.02, 0.05);
    mp.wander_freq_hz = rng.uniform(0.05, 0.12);
    mp.amplitude = amplitude;
    Series s = generate_synthetic(mod, seed, n_samples, mp);
    s.subject_id = id;
    return s;
}

} // namespace

std::vector<ClientState> materialize_clients(const PartitionSpec& spec,
                                             int steps_per_round, int batch_size) {
    validate(spec);
    constexpr std::size_t kWindowsPerSubject = 48;

    switch (spec.strategy) {
    case PartitionStrategy::S1_IID: {
        const int n_subjects = spec.n_clients + spec.n_clients / 2;
        const std::size_t n_samples = samples_for_windows(kWindowsPerSubject, spec);
        std::vector<Series> pool;
        pool.reserve(static_cast<std::size_t>(n_subjects));
        for (int j = 0; j < n_subjects; ++j)
            pool.push_back(make_subject(Modality::ECG, mix_seed(spec.seed, 1000 + j),
                                        "s1_ecg_" + std::to_string(j), n_samples,
                                        0.9, 1.3, 0.01, 0.03, 1.0));
        return build_s1(pool, spec, steps_per_round, batch_size);
    }
    case PartitionStrategy::S2_SiteNonIID: {
        const std::vector<std::size_t> sizes =
            spec.site_sizes ? *spec.site_sizes
                            : default_site_sizes(spec.n_clients, spec.seed);
        std::vector<std::vector<Series>> site_pools;
        site_pools.reserve(sizes.size());
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            // enough windows that the chronological split leaves `sizes[i]`
            // training windows, with margin
            const auto want = static_cast<std::size_t>(std::ceil(
                                  static_cast<double>(sizes[i]) / spec.train_fraction)) +
                              3;
            const std::size_t n_samples = samples_for_windows(want, spec);
            site_pools.push_back({make_subject(
                Modality::ECG, mix_seed(spec.seed, 2000 + static_cast<int>(i)),
                "s2_site_" + std::to_string(i), n_samples, 0.8, 2.0, 0.01, 0.05, 1.0)});
        }
        return build_s2(site_pools, spec, sizes, batch_size);
    }
    case PartitionStrategy::S3_ModalityOutlier: {
        const int n_ecg_clients = spec.n_clients - 1;
        const int n_subjects = n_ecg_clients + (n_ecg_clients + 1) / 2;
        const std::size_t n_samples = samples_for_windows(kWindowsPerSubject, spec);
        std::vector<Series> ecg_pool;
        ecg_pool.reserve(static_cast<std::size_t>(n_subjects));
        for (int j = 0; j < n_subjects; ++j)
            ecg_pool.push_back(make_subject(Modality::ECG, mix_seed(spec.seed, 1000 + j),
                                            "s3_ecg_" + std::to_string(j), n_samples,
                                            0.9, 1.3, 0.01, 0.03, 1.0));
        // a strongly distinct generator for the outlier modality: different
        // template, faster beats, larger amplitude
        std::vector<Series> icg_pool;
        for (int j = 0; j < 2; ++j)
            icg_pool.push_back(make_subject(Modality::ICG, mix_seed(spec.seed, 3000 + j),
                                            "s3_icg_" + std::to_string(j), n_samples,
                                            1.6, 2.0, 0.01, 0.02, 1.3));
        return build_s3(ecg_pool, icg_pool, spec, steps_per_round, batch_size);
    }
    }
    throw std::invalid_argument("materialize_clients: unknown strategy");
}

std::string manifest_table(const std::vector<ClientState>& clients) {
    std::ostringstream out;
    out << "# partition manifest: one row per client\n";
    out << "# smape columns downstream use the 0-200% variant (zero-denominator terms count as 0)\n";
    out << "client_id modality n_train n_test steps_per_round\n";
    for (const ClientState& c : clients)
        out << c.id << ' ' << to_string(c.modality) << ' ' << c.train_windows.size()
            << ' ' << c.test_windows.size() << ' ' << c.steps_per_round << '\n';
    return out.str();
}

std::vector<RoundReport> run_partitioned_experiment(
    const FederationContext& ctx, const PartitionSpec& partition,
    const StrategyConfig& strategy, const PretrainedCheckpoint& checkpoint,
    std::uint64_t master_seed, int steps_per_round, int batch_size) {
    std::vector<ClientState> clients =
        materialize_clients(partition, steps_per_round, batch_size);
    return run_experiment(ctx, clients, strategy, checkpoint, master_seed);
}

} // namespace fedcast
