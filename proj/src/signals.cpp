#include "fedcast/signals.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedcast/errors.hpp"
#include "fedcast/rng.hpp"

namespace fedcast {

std::string to_string(Modality m) {
    switch (m) {
    case Modality::ECG: return "ECG";
    case Modality::ICG: return "ICG";
    default: return "OTHER";
    }
}

namespace {

double gauss_bump(double phase, double center, double width) {
    double d = phase - center;
    return std::exp(-0.5 * (d / width) * (d / width));
}

// One beat of ECG-like morphology over phase in [0, 1): P, Q, R, S, T waves,
// the R spike dominant and narrow.
double ecg_template(double phase) {
    double v = 0.0;
    v += 0.15 * gauss_bump(phase, 0.18, 0.040);  // P
    v -= 0.15 * gauss_bump(phase, 0.275, 0.012); // Q
    v += 1.00 * gauss_bump(phase, 0.30, 0.018);  // R
    v -= 0.25 * gauss_bump(phase, 0.33, 0.014);  // S
    v += 0.35 * gauss_bump(phase, 0.52, 0.060);  // T
    return v;
}

// Smoother biphasic bump train for ICG-like signals.
double icg_template(double phase) {
    double v = 0.0;
    v += 0.90 * gauss_bump(phase, 0.32, 0.090);
    v -= 0.45 * gauss_bump(phase, 0.55, 0.120);
    v += 0.20 * gauss_bump(phase, 0.78, 0.100);
    return v;
}

void validate_params(const MorphologyParams& p) {
    if (!(p.beat_rate_hz >= 0.8 && p.beat_rate_hz <= 2.0))
        throw std::invalid_argument("generate_synthetic: beat_rate_hz outside [0.8, 2.0]");
    if (!(p.noise_sigma >= 0.0))
        throw std::invalid_argument("generate_synthetic: noise_sigma must be >= 0");
    if (!(p.wander_amplitude >= 0.0))
        throw std::invalid_argument("generate_synthetic: wander_amplitude must be >= 0");
    if (!(p.wander_freq_hz > 0.0))
        throw std::invalid_argument("generate_synthetic: wander_freq_hz must be > 0");
    if (!(p.amplitude > 0.0))
        throw std::invalid_argument("generate_synthetic: amplitude must be > 0");
    if (!(p.sample_rate_hz > 0.0))
        throw std::invalid_argument("generate_synthetic: sample_rate_hz must be > 0");
}

} // namespace

std::size_t beat_period_samples(const MorphologyParams& params) {
    validate_params(params);
    return static_cast<std::size_t>(
        std::llround(params.sample_rate_hz / params.beat_rate_hz));
}

Series generate_synthetic(Modality modality, std::uint64_t subject_seed,
                          std::size_t n_samples, const MorphologyParams& params) {
    validate_params(params);
    if (n_samples < 1)
        throw std::invalid_argument("generate_synthetic: n_samples must be >= 1");

    const std::size_t period = beat_period_samples(params);
    std::vector<double> beat(period);
    for (std::size_t k = 0; k < period; ++k) {
        double phase = static_cast<double>(k) / static_cast<double>(period);
        double t = (modality == Modality::ICG) ? icg_template(phase) : ecg_template(phase);
        beat[k] = params.amplitude * t;
    }

    Rng rng(mix_seed(subject_seed, static_cast<std::uint64_t>(modality)));
    const double wander_phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);

    Series out;
    out.values.resize(n_samples);
    out.sample_rate_hz = params.sample_rate_hz;
    out.modality = modality;

    for (std::size_t i = 0; i < n_samples; ++i) {
        double v = beat[i % period];
        if (params.wander_amplitude > 0.0) {
            double t = static_cast<double>(i) / params.sample_rate_hz;
            v += params.wander_amplitude *
                 std::sin(2.0 * 3.14159265358979323846 * params.wander_freq_hz * t +
                          wander_phase);
        }
        if (params.noise_sigma > 0.0) v += params.noise_sigma * rng.normal();
        out.values[i] = v;
    }
    return out;
}

Series ingest_csv(const std::filesystem::path& path, Modality modality,
                  double sample_rate_hz) {
    std::ifstream in(path);
    if (!in)
        throw IngestError("ingest_csv: cannot open file: " + path.string());

    Series out;
    out.sample_rate_hz = sample_rate_hz;
    out.modality = modality;
    out.subject_id = path.stem().string();

    std::string line;
    std::size_t line_no = 0;
    bool first_content_line = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        // trim spaces
        std::size_t b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        std::size_t e = line.find_last_not_of(" \t");
        std::string cell = line.substr(b, e - b + 1);

        if (first_content_line) {
            first_content_line = false;
            if (cell == "value" || cell == "t,value") continue; // header
        }

        // two-column variant: time column ignored
        std::size_t comma = cell.find(',');
        if (comma != std::string::npos) cell = cell.substr(comma + 1);

        const char* s = cell.c_str();
        char* endp = nullptr;
        double v = std::strtod(s, &endp);
        if (endp == s || *endp != '\0')
            throw IngestError("ingest_csv: malformed row at line " +
                              std::to_string(line_no) + " in " + path.string());
        if (!std::isfinite(v))
            throw IngestError("ingest_csv: non-finite value at line " +
                              std::to_string(line_no) + " in " + path.string());
        out.values.push_back(v);
    }
    if (out.values.empty())
        throw IngestError("ingest_csv: no samples in " + path.string());
    return out;
}

std::vector<Window> make_windows(const Series& series, std::size_t l_ctx,
                                 std::size_t l_hor, std::size_t stride) {
    if (l_ctx < 1 || l_hor < 1 || stride < 1)
        throw std::invalid_argument("make_windows: l_ctx, l_hor, stride must be >= 1");
    const std::size_t len = series.values.size();
    if (len < l_ctx + l_hor)
        throw std::invalid_argument("make_windows: series shorter than l_ctx + l_hor");

    const std::size_t count = (len - l_ctx - l_hor) / stride + 1;
    std::vector<Window> out;
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t off = w * stride;
        Window win;
        win.context.assign(series.values.begin() + off,
                           series.values.begin() + off + l_ctx);
        win.target.assign(series.values.begin() + off + l_ctx,
                          series.values.begin() + off + l_ctx + l_hor);
        win.modality = series.modality;
        win.offset = off;
        win.source_id = series.subject_id;
        out.push_back(std::move(win));
    }
    return out;
}

std::pair<std::vector<Window>, std::vector<Window>>
split_train_test(const std::vector<Window>& windows, double train_fraction,
                 std::uint64_t /*seed*/) {
    if (windows.size() < 2)
        throw std::invalid_argument("split_train_test: need at least 2 windows");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split_train_test: train_fraction must be in (0, 1)");

    const std::size_t n = windows.size();
    auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(n)));
    if (n_train < 1) n_train = 1;
    if (n_train > n - 1) n_train = n - 1;

    std::vector<Window> train(windows.begin(), windows.begin() + n_train);
    std::vector<Window> test(windows.begin() + n_train, windows.end());
    return {std::move(train), std::move(test)};
}

} // namespace fedcast
