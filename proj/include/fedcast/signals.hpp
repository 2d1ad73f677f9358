#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fedcast {

enum class Modality { ECG, ICG, OTHER };

std::string to_string(Modality m);

/// One recorded (or generated) signal, normalized amplitude.
struct Series {
    std::vector<double> values;
    double sample_rate_hz = 25.0;
    Modality modality = Modality::OTHER;
    std::string subject_id;
};

/// A contiguous context/target slice of a series. `offset` and `source_id`
/// record where the slice came from so partition disjointness is auditable.
struct Window {
    std::vector<double> context;
    std::vector<double> target;
    Modality modality = Modality::OTHER;
    std::size_t offset = 0;
    std::string source_id;
};

/// Shape parameters for the synthetic quasi-periodic generators.
/// beat_rate_hz must stay in [0.8, 2.0]; noise and wander are additive on top
/// of the periodic template.
struct MorphologyParams {
    double beat_rate_hz = 1.2;
    double noise_sigma = 0.02;
    double wander_amplitude = 0.05;
    double wander_freq_hz = 0.08;
    double amplitude = 1.0;
    double sample_rate_hz = 25.0;
};

/// Samples per beat for the template tiling: round(sample_rate / beat_rate).
/// With noise_sigma == 0 and wander_amplitude == 0 the generated series is
/// exactly periodic with this period.
std::size_t beat_period_samples(const MorphologyParams& params);

/// Generates an ECG-like spike train or an ICG-like biphasic bump train:
/// periodic template + white noise + slow baseline wander. Identical
/// (modality, seed, params) produce bit-identical output.
Series generate_synthetic(Modality modality, std::uint64_t subject_seed,
                          std::size_t n_samples, const MorphologyParams& params);

/// Reads one sample per line ("value" header optional) or the two-column
/// "t,value" layout (first column ignored). Malformed or non-finite rows
/// raise IngestError naming the line.
Series ingest_csv(const std::filesystem::path& path, Modality modality,
                  double sample_rate_hz = 25.0);

/// All windows at offsets 0, stride, 2*stride, ... that fit entirely inside
/// the series; count = floor((len - l_ctx - l_hor) / stride) + 1.
std::vector<Window> make_windows(const Series& series, std::size_t l_ctx,
                                 std::size_t l_hor, std::size_t stride);

/// Chronological split: the earliest round(train_fraction * n) windows go to
/// train, the rest to test; both halves are non-empty for n >= 2. The seed
/// parameter is kept for interface stability but unused (no shuffling, so
/// forecast targets never leak into later training contexts).
std::pair<std::vector<Window>, std::vector<Window>>
split_train_test(const std::vector<Window>& windows, double train_fraction,
                 std::uint64_t seed = 0);

} // namespace fedcast
