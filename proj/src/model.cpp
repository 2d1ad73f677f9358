#include "fedcast/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fedcast/errors.hpp"
#include "fedcast/rng.hpp"

namespace fedcast {

namespace {

// Training loss beyond this is treated as divergence even while still finite
// (a blown-up step can saturate tanh and then grow the loss linearly without
// ever reaching infinity).
constexpr double kDivergenceLossLimit = 1e12;

} // namespace

void validate(const ModelConfig& cfg) {
    if (cfg.n_bins < 2 || cfg.embed_dim < 1 || cfg.hidden_dim < 1 || cfg.receptive < 1)
        throw std::invalid_argument("model: all ModelConfig counts must be >= 1 (n_bins >= 2)");
}

ParamLayout ParamLayout::for_config(const ModelConfig& cfg) {
    validate(cfg);
    const auto bins = static_cast<std::size_t>(cfg.n_bins);
    const auto embed = static_cast<std::size_t>(cfg.embed_dim);
    const auto hidden = static_cast<std::size_t>(cfg.hidden_dim);
    const auto input = static_cast<std::size_t>(cfg.receptive) * embed;

    ParamLayout layout;
    std::size_t off = 0;
    auto push = [&](const char* name, std::size_t rows, std::size_t cols) {
        layout.segments.push_back({name, off, rows, cols});
        off += rows * cols;
    };
    push("embedding", bins, embed);
    push("hidden_w", input, hidden);
    push("hidden_b", 1, hidden);
    push("output_w", hidden, bins);
    push("output_b", 1, bins);
    layout.total = off;
    return layout;
}

const ParamSegment& ParamLayout::segment(const std::string& name) const {
    for (const ParamSegment& s : segments)
        if (s.name == name) return s;
    throw std::invalid_argument("ParamLayout: no segment named " + name);
}

ParamVector zero_params(const ModelConfig& cfg) {
    ParamVector p;
    p.layout = ParamLayout::for_config(cfg);
    p.values.assign(p.layout.total, 0.0);
    return p;
}

ParamVector init_params(const ModelConfig& cfg, std::uint64_t seed) {
    ParamVector p = zero_params(cfg);
    const auto input = static_cast<std::size_t>(cfg.receptive) *
                       static_cast<std::size_t>(cfg.embed_dim);
    Rng rng(mix_seed(seed, 0x494e4954ULL)); // "INIT"
    auto fill = [&](const char* name, std::size_t fan_in) {
        const ParamSegment& s = p.layout.segment(name);
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t i = 0; i < s.size(); ++i)
            p.values[s.offset + i] = rng.uniform(-bound, bound);
    };
    fill("embedding", static_cast<std::size_t>(cfg.embed_dim));
    fill("hidden_w", input);
    fill("hidden_b", input);
    fill("output_w", static_cast<std::size_t>(cfg.hidden_dim));
    fill("output_b", static_cast<std::size_t>(cfg.hidden_dim));
    return p;
}

namespace {

// Scratch buffers reused across positions of one loss/forecast call.
struct Workspace {
    std::vector<double> x;      // concatenated input embeddings
    std::vector<double> h;      // tanh activations
    std::vector<double> logits; // also reused for softmax probabilities
    std::vector<double> dpre;   // backward: d loss / d pre-activation

    explicit Workspace(const ModelConfig& cfg)
        : x(static_cast<std::size_t>(cfg.receptive) * cfg.embed_dim),
          h(static_cast<std::size_t>(cfg.hidden_dim)),
          logits(static_cast<std::size_t>(cfg.n_bins)),
          dpre(static_cast<std::size_t>(cfg.hidden_dim)) {}
};

struct SegmentPtrs {
    const double* embedding;
    const double* hidden_w;
    const double* hidden_b;
    const double* output_w;
    const double* output_b;
};

SegmentPtrs segment_ptrs(const ParamVector& p) {
    return {p.values.data() + p.layout.segment("embedding").offset,
            p.values.data() + p.layout.segment("hidden_w").offset,
            p.values.data() + p.layout.segment("hidden_b").offset,
            p.values.data() + p.layout.segment("output_w").offset,
            p.values.data() + p.layout.segment("output_b").offset};
}

// Forward pass for one position: tokens are the `receptive` most recent ids.
// Returns log-sum-exp of the logits (softmax normalizer).
double forward(const SegmentPtrs& sp, const ModelConfig& cfg,
               std::span<const int> tokens, Workspace& ws) {
    const std::size_t embed = static_cast<std::size_t>(cfg.embed_dim);
    const std::size_t hidden = static_cast<std::size_t>(cfg.hidden_dim);
    const std::size_t bins = static_cast<std::size_t>(cfg.n_bins);
    const std::size_t input = static_cast<std::size_t>(cfg.receptive) * embed;

    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const double* row = sp.embedding + static_cast<std::size_t>(tokens[t]) * embed;
        std::memcpy(ws.x.data() + t * embed, row, embed * sizeof(double));
    }
    for (std::size_t b = 0; b < hidden; ++b) ws.h[b] = sp.hidden_b[b];
    for (std::size_t a = 0; a < input; ++a) {
        const double xa = ws.x[a];
        const double* w_row = sp.hidden_w + a * hidden;
        for (std::size_t b = 0; b < hidden; ++b) ws.h[b] += xa * w_row[b];
    }
    for (std::size_t b = 0; b < hidden; ++b) ws.h[b] = std::tanh(ws.h[b]);

    for (std::size_t j = 0; j < bins; ++j) ws.logits[j] = sp.output_b[j];
    for (std::size_t b = 0; b < hidden; ++b) {
        const double hb = ws.h[b];
        const double* w_row = sp.output_w + b * bins;
        for (std::size_t j = 0; j < bins; ++j) ws.logits[j] += hb * w_row[j];
    }

    double max_logit = ws.logits[0];
    for (std::size_t j = 1; j < bins; ++j) max_logit = std::max(max_logit, ws.logits[j]);
    double sum_exp = 0.0;
    for (std::size_t j = 0; j < bins; ++j) sum_exp += std::exp(ws.logits[j] - max_logit);
    return max_logit + std::log(sum_exp);
}

bool window_content_less(const Window& a, const Window& b) {
    if (a.context != b.context)
        return std::lexicographical_compare(a.context.begin(), a.context.end(),
                                            b.context.begin(), b.context.end());
    return std::lexicographical_compare(a.target.begin(), a.target.end(),
                                        b.target.begin(), b.target.end());
}

bool window_content_equal(const Window& a, const Window& b) {
    return a.context == b.context && a.target == b.target;
}

} // namespace

LossGrad loss_and_grad(const ParamVector& params, std::span<const Window> batch,
                       const TokenizerConfig& tok_cfg, const ModelConfig& cfg) {
    validate(cfg);
    validate(tok_cfg);
    if (batch.empty())
        throw std::invalid_argument("loss_and_grad: empty batch");
    if (params.layout != ParamLayout::for_config(cfg))
        throw std::invalid_argument("loss_and_grad: params layout does not match config");
    const std::size_t receptive = static_cast<std::size_t>(cfg.receptive);
    for (const Window& w : batch) {
        if (w.context.size() < receptive)
            throw std::invalid_argument("loss_and_grad: window context shorter than receptive field");
        if (w.target.empty())
            throw std::invalid_argument("loss_and_grad: window with empty target");
    }

    // Canonical reduction order: sort by content, collapse duplicates into
    // integer multiplicities. Makes the result independent of batch order and
    // exactly halves/doubles under batch duplication.
    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return window_content_less(batch[i], batch[j]);
    });

    const std::size_t embed = static_cast<std::size_t>(cfg.embed_dim);
    const std::size_t hidden = static_cast<std::size_t>(cfg.hidden_dim);
    const std::size_t bins = static_cast<std::size_t>(cfg.n_bins);
    const std::size_t input = receptive * embed;

    LossGrad out;
    out.grad = zero_params(cfg);
    SegmentPtrs sp = segment_ptrs(params);
    double* g_embedding = out.grad.values.data() + out.grad.layout.segment("embedding").offset;
    double* g_hidden_w = out.grad.values.data() + out.grad.layout.segment("hidden_w").offset;
    double* g_hidden_b = out.grad.values.data() + out.grad.layout.segment("hidden_b").offset;
    double* g_output_w = out.grad.values.data() + out.grad.layout.segment("output_w").offset;
    double* g_output_b = out.grad.values.data() + out.grad.layout.segment("output_b").offset;

    Workspace ws(cfg);
    std::vector<int> seq;
    std::vector<double> dlogits(bins), dx(input);

    double loss_sum = 0.0;
    std::size_t total_positions = 0;

    for (std::size_t u = 0; u < order.size();) {
        const Window& w = batch[order[u]];
        std::size_t mult = 1;
        while (u + mult < order.size() &&
               window_content_equal(batch[order[u + mult]], w))
            ++mult;
        u += mult;
        const double m = static_cast<double>(mult);

        ScaledContext sc = scale(w.context, tok_cfg);
        seq = tokenize(sc.values, tok_cfg);
        const std::size_t ctx_len = seq.size();
        for (double t : w.target)
            seq.push_back(tokenize_value(t / sc.scale_factor, tok_cfg));

        double window_ce = 0.0;
        for (std::size_t k = 0; k < w.target.size(); ++k) {
            std::span<const int> inputs(seq.data() + ctx_len + k - receptive, receptive);
            const int label = seq[ctx_len + k];
            double lse = forward(sp, cfg, inputs, ws);
            window_ce += lse - ws.logits[static_cast<std::size_t>(label)];

            // softmax - one-hot, scaled by the window multiplicity; every
            // downstream gradient is linear in dlogits.
            for (std::size_t j = 0; j < bins; ++j)
                dlogits[j] = m * std::exp(ws.logits[j] - lse);
            dlogits[static_cast<std::size_t>(label)] -= m;

            for (std::size_t b = 0; b < hidden; ++b) {
                const double hb = ws.h[b];
                double* gw_row = g_output_w + b * bins;
                const double* w_row = sp.output_w + b * bins;
                double dh = 0.0;
                for (std::size_t j = 0; j < bins; ++j) {
                    gw_row[j] += hb * dlogits[j];
                    dh += w_row[j] * dlogits[j];
                }
                ws.dpre[b] = dh * (1.0 - hb * hb);
            }
            for (std::size_t j = 0; j < bins; ++j) g_output_b[j] += dlogits[j];

            for (std::size_t a = 0; a < input; ++a) {
                const double xa = ws.x[a];
                double* gw_row = g_hidden_w + a * hidden;
                const double* w_row = sp.hidden_w + a * hidden;
                double dxa = 0.0;
                for (std::size_t b = 0; b < hidden; ++b) {
                    gw_row[b] += xa * ws.dpre[b];
                    dxa += w_row[b] * ws.dpre[b];
                }
                dx[a] = dxa;
            }
            for (std::size_t b = 0; b < hidden; ++b) g_hidden_b[b] += ws.dpre[b];

            for (std::size_t t = 0; t < receptive; ++t) {
                double* ge_row = g_embedding +
                                 static_cast<std::size_t>(inputs[t]) * embed;
                const double* dx_row = dx.data() + t * embed;
                for (std::size_t e = 0; e < embed; ++e) ge_row[e] += dx_row[e];
            }
        }
        loss_sum += m * window_ce;
        total_positions += mult * w.target.size();
    }

    const double inv = 1.0 / static_cast<double>(total_positions);
    out.loss = loss_sum * inv;
    for (double& g : out.grad.values) g *= inv;
    if (!std::isfinite(out.loss))
        throw std::runtime_error("loss_and_grad: non-finite loss");
    return out;
}

ParamVector sgd_step(const ParamVector& params, const ParamVector& grad, double eta) {
    if (params.layout != grad.layout)
        throw std::invalid_argument("sgd_step: layout mismatch");
    if (!(eta > 0.0))
        throw std::invalid_argument("sgd_step: eta must be > 0");
    ParamVector out = params;
    for (std::size_t j = 0; j < out.values.size(); ++j)
        out.values[j] -= eta * grad.values[j];
    return out;
}

std::vector<double> forecast(const ParamVector& params, std::span<const double> context,
                             std::size_t horizon, const TokenizerConfig& tok_cfg,
                             const ModelConfig& cfg) {
    validate(cfg);
    validate(tok_cfg);
    const std::size_t receptive = static_cast<std::size_t>(cfg.receptive);
    if (context.size() < receptive)
        throw std::invalid_argument("forecast: context shorter than receptive field");
    if (horizon < 1)
        throw std::invalid_argument("forecast: horizon must be >= 1");
    if (params.layout != ParamLayout::for_config(cfg))
        throw std::invalid_argument("forecast: params layout does not match config");

    ScaledContext sc = scale(context, tok_cfg);
    std::vector<int> tokens = tokenize(sc.values, tok_cfg);

    SegmentPtrs sp = segment_ptrs(params);
    Workspace ws(cfg);
    const std::size_t bins = static_cast<std::size_t>(cfg.n_bins);

    std::vector<double> out;
    out.reserve(horizon);
    for (std::size_t step = 0; step < horizon; ++step) {
        std::span<const int> inputs(tokens.data() + tokens.size() - receptive, receptive);
        forward(sp, cfg, inputs, ws);
        std::size_t best = 0;
        for (std::size_t j = 1; j < bins; ++j)
            if (ws.logits[j] > ws.logits[best]) best = j;
        tokens.push_back(static_cast<int>(best));
        out.push_back(detokenize(static_cast<int>(best), sc.scale_factor, tok_cfg));
    }
    return out;
}

PretrainedCheckpoint pretrain(const ModelConfig& cfg, const TokenizerConfig& tok_cfg,
                              std::uint64_t mixture_seed, long steps, double eta,
                              const PretrainOptions& opts,
                              std::vector<double>* loss_curve) {
    validate(cfg);
    validate(tok_cfg);
    if (steps < 0)
        throw std::invalid_argument("pretrain: steps must be >= 0");

    PretrainedCheckpoint ckpt;
    ckpt.params = init_params(cfg, mix_seed(mixture_seed, 0x505245ULL)); // "PRE"
    ckpt.seed = mixture_seed;
    ckpt.provenance = "synthetic-mixture pretrain: steps=" + std::to_string(steps) +
                      " eta=" + std::to_string(eta) +
                      " seed=" + std::to_string(mixture_seed);
    if (steps == 0) return ckpt;

    // Broad mixture: both modalities, beat rates spanning the valid range,
    // varied noise and wander.
    std::vector<Window> pool;
    for (int g = 0; g < opts.n_generators; ++g) {
        MorphologyParams mp;
        mp.beat_rate_hz = 0.8 + 1.2 * static_cast<double>(g) /
                                    static_cast<double>(std::max(1, opts.n_generators - 1));
        mp.noise_sigma = 0.01 + 0.01 * static_cast<double>(g % 3);
        mp.wander_amplitude = 0.02 * static_cast<double>(g % 2);
        Modality mod = (g % 2 == 0) ? Modality::ECG : Modality::ICG;
        Series s = generate_synthetic(mod, mix_seed(mixture_seed, 100 + g),
                                      opts.series_length, mp);
        s.subject_id = "mixture_" + std::to_string(g);
        std::vector<Window> ws = make_windows(s, opts.l_ctx, opts.l_hor, opts.stride);
        pool.insert(pool.end(), ws.begin(), ws.end());
    }

    Rng rng(mix_seed(mixture_seed, 0xBA7C48ULL));
    const std::size_t n = pool.size();
    const std::size_t batch = static_cast<std::size_t>(opts.batch_size);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::vector<std::size_t> picked(batch);
    std::vector<Window> batch_windows;

    for (long step = 0; step < steps; ++step) {
        if (n >= batch) {
            for (std::size_t j = 0; j < batch; ++j)
                std::swap(all[j], all[j + rng.index(n - j)]);
            std::copy(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(batch),
                      picked.begin());
        } else {
            for (std::size_t j = 0; j < batch; ++j) picked[j] = rng.index(n);
        }
        std::sort(picked.begin(), picked.end());
        batch_windows.clear();
        for (std::size_t idx : picked) batch_windows.push_back(pool[idx]);

        LossGrad lg;
        try {
            lg = loss_and_grad(ckpt.params, batch_windows, tok_cfg, cfg);
        } catch (const std::runtime_error&) {
            throw DivergenceError(-1, step,
                                  "pretrain: diverged (non-finite loss) at step " +
                                      std::to_string(step));
        }
        if (!std::isfinite(lg.loss) || lg.loss > kDivergenceLossLimit)
            throw DivergenceError(-1, step,
                                  "pretrain: diverged at step " + std::to_string(step));
        if (loss_curve) loss_curve->push_back(lg.loss);
        ckpt.params = sgd_step(ckpt.params, lg.grad, eta);
        for (double v : ckpt.params.values)
            if (!std::isfinite(v))
                throw DivergenceError(-1, step,
                                      "pretrain: non-finite parameter after step " +
                                          std::to_string(step));
    }
    return ckpt;
}

namespace {

constexpr char kMagic[8] = {'F', 'E', 'D', 'C', 'A', 'S', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    put_u64(out, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    explicit Reader(const std::string& b) : buf(b) {}
    void need(std::size_t n) const {
        if (pos + n > buf.size())
            throw std::runtime_error("checkpoint: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, sizeof(d));
        return d;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

} // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const PretrainedCheckpoint& ckpt, const ModelConfig& cfg) {
    if (ckpt.params.layout != ParamLayout::for_config(cfg))
        throw std::invalid_argument("save_checkpoint: params layout does not match config");
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, static_cast<std::uint32_t>(cfg.n_bins));
    put_u32(out, static_cast<std::uint32_t>(cfg.embed_dim));
    put_u32(out, static_cast<std::uint32_t>(cfg.hidden_dim));
    put_u32(out, static_cast<std::uint32_t>(cfg.receptive));
    put_u64(out, ckpt.seed);
    put_u32(out, static_cast<std::uint32_t>(ckpt.provenance.size()));
    out.append(ckpt.provenance);
    put_u64(out, static_cast<std::uint64_t>(ckpt.params.values.size()));
    for (double v : ckpt.params.values) put_f64(out, v);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw std::runtime_error("save_checkpoint: cannot open " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f)
        throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

std::pair<PretrainedCheckpoint, ModelConfig>
load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("load_checkpoint: cannot open " + path.string());
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r(buf);
    if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
        throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
    ModelConfig cfg;
    cfg.n_bins = static_cast<int>(r.u32());
    cfg.embed_dim = static_cast<int>(r.u32());
    cfg.hidden_dim = static_cast<int>(r.u32());
    cfg.receptive = static_cast<int>(r.u32());

    PretrainedCheckpoint ckpt;
    ckpt.seed = r.u64();
    ckpt.provenance = r.bytes(r.u32());
    ckpt.params.layout = ParamLayout::for_config(cfg);
    const std::uint64_t count = r.u64();
    if (count != ckpt.params.layout.total)
        throw std::runtime_error("load_checkpoint: parameter count does not match layout");
    ckpt.params.values.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) ckpt.params.values[i] = r.f64();
    return {std::move(ckpt), cfg};
}

} // namespace fedcast
