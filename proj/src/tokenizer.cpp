#include "fedcast/tokenizer.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedcast {

void validate(const TokenizerConfig& cfg) {
    if (cfg.n_bins < 2)
        throw std::invalid_argument("tokenizer: n_bins must be >= 2");
    if (!(cfg.clip > 0.0))
        throw std::invalid_argument("tokenizer: clip must be > 0");
    if (!(cfg.epsilon > 0.0))
        throw std::invalid_argument("tokenizer: epsilon must be > 0");
}

ScaledContext scale(std::span<const double> context, const TokenizerConfig& cfg) {
    if (context.empty())
        throw std::invalid_argument("scale: context is empty");
    double sum_abs = 0.0;
    for (double v : context) {
        if (!std::isfinite(v))
            throw std::invalid_argument("scale: non-finite value in context");
        sum_abs += std::fabs(v);
    }
    ScaledContext out;
    out.scale_factor = sum_abs / static_cast<double>(context.size()) + cfg.epsilon;
    out.values.resize(context.size());
    for (std::size_t i = 0; i < context.size(); ++i)
        out.values[i] = context[i] / out.scale_factor;
    return out;
}

int tokenize_value(double scaled_value, const TokenizerConfig& cfg) {
    double v = scaled_value;
    if (v < -cfg.clip) v = -cfg.clip;
    if (v > cfg.clip) v = cfg.clip;
    double u = (v + cfg.clip) / (2.0 * cfg.clip) * static_cast<double>(cfg.n_bins);
    int bin = static_cast<int>(std::floor(u));
    if (bin >= cfg.n_bins) bin = cfg.n_bins - 1;
    if (bin < 0) bin = 0;
    return bin;
}

std::vector<int> tokenize(std::span<const double> scaled, const TokenizerConfig& cfg) {
    std::vector<int> out(scaled.size());
    for (std::size_t i = 0; i < scaled.size(); ++i)
        out[i] = tokenize_value(scaled[i], cfg);
    return out;
}

double detokenize(int token, double scale_factor, const TokenizerConfig& cfg) {
    if (token < 0 || token >= cfg.n_bins)
        throw std::domain_error("detokenize: token " + std::to_string(token) +
                                " outside [0, " + std::to_string(cfg.n_bins) + ")");
    double bin_width = 2.0 * cfg.clip / static_cast<double>(cfg.n_bins);
    double center = -cfg.clip + (static_cast<double>(token) + 0.5) * bin_width;
    return center * scale_factor;
}

} // namespace fedcast
