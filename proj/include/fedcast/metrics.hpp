#pragma once

#include <map>
#include <span>
#include <vector>

#include "fedcast/signals.hpp"

namespace fedcast {

struct MetricTriple {
    double rmse = 0.0;
    double mae = 0.0;
    double smape_pct = 0.0;
};

struct ClientMetrics {
    int client_id = 0;
    std::size_t n_test = 0;
    double rmse = 0.0;
    double mae = 0.0;
    double smape_pct = 0.0;
    Modality modality = Modality::OTHER;
};

/// Per-round evaluation summary: per-client metrics, their test-size-weighted
/// average, and the same weighted average restricted to each modality.
struct RoundReport {
    int round = 0;
    std::vector<ClientMetrics> per_client;
    MetricTriple weighted;
    std::map<Modality, MetricTriple> per_modality;
};

double rmse(std::span<const double> forecast, std::span<const double> target);
double mae(std::span<const double> forecast, std::span<const double> target);

/// sMAPE, 0-200% variant: (100/n) * sum 2|f-t| / (|f|+|t|), terms with a zero
/// denominator contributing 0.
double smape(std::span<const double> forecast, std::span<const double> target);

/// Weighted averages with weights = n_test, overall and per modality.
RoundReport weighted_report(int round, std::vector<ClientMetrics> per_client);

} // namespace fedcast
