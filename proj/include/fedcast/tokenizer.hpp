#pragma once

#include <span>
#include <vector>

namespace fedcast {

/// Uniform quantizer over [-clip, +clip] in mean-scaled units.
struct TokenizerConfig {
    int n_bins = 128;
    double clip = 4.0;
    double epsilon = 1e-8;
};

void validate(const TokenizerConfig& cfg);

struct ScaledContext {
    std::vector<double> values;
    double scale_factor = 1.0;
};

/// scale_factor = mean(|context|) + epsilon; values divided by it.
ScaledContext scale(std::span<const double> context, const TokenizerConfig& cfg);

/// floor((clamp(v) + clip) / (2 clip) * n_bins), right edge folded into the
/// last bin. Monotone in v.
int tokenize_value(double scaled_value, const TokenizerConfig& cfg);

std::vector<int> tokenize(std::span<const double> scaled, const TokenizerConfig& cfg);

/// Bin center in scaled units times scale_factor. Throws std::domain_error
/// for tokens outside [0, n_bins).
double detokenize(int token, double scale_factor, const TokenizerConfig& cfg);

} // namespace fedcast
