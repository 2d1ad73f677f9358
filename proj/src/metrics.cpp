#include "fedcast/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace fedcast {

namespace {

void check_lengths(std::span<const double> f, std::span<const double> t) {
    if (f.size() != t.size())
        throw std::invalid_argument("metrics: forecast/target length mismatch");
    if (f.empty())
        throw std::invalid_argument("metrics: empty inputs");
}

} // namespace

double rmse(std::span<const double> forecast, std::span<const double> target) {
    check_lengths(forecast, target);
    double acc = 0.0;
    for (std::size_t i = 0; i < forecast.size(); ++i) {
        double d = forecast[i] - target[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(forecast.size()));
}

double mae(std::span<const double> forecast, std::span<const double> target) {
    check_lengths(forecast, target);
    double acc = 0.0;
    for (std::size_t i = 0; i < forecast.size(); ++i)
        acc += std::fabs(forecast[i] - target[i]);
    return acc / static_cast<double>(forecast.size());
}

double smape(std::span<const double> forecast, std::span<const double> target) {
    check_lengths(forecast, target);
    double acc = 0.0;
    for (std::size_t i = 0; i < forecast.size(); ++i) {
        double denom = std::fabs(forecast[i]) + std::fabs(target[i]);
        if (denom > 0.0) acc += 2.0 * std::fabs(forecast[i] - target[i]) / denom;
    }
    return 100.0 * acc / static_cast<double>(forecast.size());
}

RoundReport weighted_report(int round, std::vector<ClientMetrics> per_client) {
    if (per_client.empty())
        throw std::invalid_argument("weighted_report: no client metrics");

    RoundReport report;
    report.round = round;

    struct Acc {
        double w = 0.0, rmse = 0.0, mae = 0.0, smape = 0.0;
        void add(const ClientMetrics& m) {
            double wi = static_cast<double>(m.n_test);
            w += wi;
            rmse += wi * m.rmse;
            mae += wi * m.mae;
            smape += wi * m.smape_pct;
        }
        MetricTriple finish() const { return {rmse / w, mae / w, smape / w}; }
    };

    Acc total;
    std::map<Modality, Acc> by_modality;
    for (const ClientMetrics& m : per_client) {
        if (m.n_test < 1)
            throw std::invalid_argument("weighted_report: client weight must be >= 1");
        total.add(m);
        by_modality[m.modality].add(m);
    }
    report.weighted = total.finish();
    for (const auto& [mod, acc] : by_modality)
        report.per_modality[mod] = acc.finish();
    report.per_client = std::move(per_client);
    return report;
}

} // namespace fedcast
