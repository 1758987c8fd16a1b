#include "speechshape/smoothing.hpp"

#include <algorithm>
#include <cmath>

namespace speechshape {

void SmoothingConfig::validate() const {
    if (dead_zone_eps < 0.0 || dead_zone_eps >= 0.5)
        throw Error("dead_zone_eps must be in [0, 0.5)");
    if (gaussian_sigma <= 0.0) throw Error("gaussian_sigma must be > 0");
    if (sg_window < 3 || sg_window % 2 == 0) throw Error("sg_window must be odd and >= 3");
    if (sg_order < 1 || sg_order >= sg_window)
        throw Error("sg_order must be >= 1 and < sg_window");
    if (crossfade_frames < 0) throw Error("crossfade_frames must be >= 0");
}

BlendshapeSequence dead_zone(const BlendshapeSequence& seq, double eps) {
    if (eps < 0.0 || eps >= 0.5) throw Error("dead_zone eps must be in [0, 0.5)");
    BlendshapeSequence out = seq;
    for (double& v : out.values)
        if (std::abs(v) < eps) v = 0.0;
    return out;
}

namespace {

/// Convolve one channel with a symmetric unit-sum kernel, replicating the
/// edge samples beyond the boundaries.
std::vector<double> convolve_replicated(const std::vector<double>& x,
                                        const std::vector<double>& kernel) {
    const int n = static_cast<int>(x.size());
    const int radius = static_cast<int>(kernel.size() / 2);
    std::vector<double> out(x.size());
    for (int t = 0; t < n; ++t) {
        double acc = 0.0;
        for (int j = -radius; j <= radius; ++j) {
            int idx = std::clamp(t + j, 0, n - 1);
            acc += kernel[static_cast<std::size_t>(j + radius)] * x[static_cast<std::size_t>(idx)];
        }
        out[static_cast<std::size_t>(t)] = acc;
    }
    return out;
}

BlendshapeSequence filter_channels(const BlendshapeSequence& seq,
                                   const std::vector<double>& kernel) {
    BlendshapeSequence out = seq;
    for (std::size_t k = 0; k < seq.channels(); ++k)
        out.set_channel(k, convolve_replicated(seq.channel(k), kernel));
    return out;
}

} // namespace

std::vector<double> gaussian_kernel(double sigma) {
    if (sigma <= 0.0) throw Error("gaussian sigma must be > 0");
    int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma - 1e-12)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int j = -radius; j <= radius; ++j) {
        double w = std::exp(-0.5 * (j / sigma) * (j / sigma));
        kernel[static_cast<std::size_t>(j + radius)] = w;
        sum += w;
    }
    for (double& w : kernel) w /= sum;
    return kernel;
}

BlendshapeSequence gaussian_dequantize(const BlendshapeSequence& seq, double sigma) {
    return filter_channels(seq, gaussian_kernel(sigma));
}

std::vector<double> savgol_coefficients(int window, int order) {
    if (window < 3 || window % 2 == 0) throw Error("savgol window must be odd and >= 3");
    if (order < 1 || order >= window) throw Error("savgol order must be >= 1 and < window");

    // Discrete orthogonal (Gram) polynomials on {-m..m}:
    //   p_{k+1}(x) = x p_k(x) - b_k p_{k-1}(x),
    //   b_k = k^2 ((2m+1)^2 - k^2) / (4 (4k^2 - 1)).
    // The smoothing weight is h_i = sum_k p_k(x_i) p_k(0) / <p_k, p_k>, a
    // well-conditioned route even at order = window - 1.
    const int m = window / 2;
    const int n = window;
    std::vector<double> prev(static_cast<std::size_t>(n), 1.0); // p_0
    std::vector<double> cur(static_cast<std::size_t>(n));       // p_1 = x
    for (int i = 0; i < n; ++i) cur[static_cast<std::size_t>(i)] = i - m;

    std::vector<double> h(static_cast<std::size_t>(n), 1.0 / n); // k = 0 term
    auto accumulate = [&](const std::vector<double>& p) {
        double norm = 0.0;
        for (double v : p) norm += v * v;
        double center = p[static_cast<std::size_t>(m)];
        if (center == 0.0) return; // odd polynomials vanish at the center
        for (int i = 0; i < n; ++i)
            h[static_cast<std::size_t>(i)] += p[static_cast<std::size_t>(i)] * center / norm;
    };

    for (int k = 1; k <= order; ++k) {
        if (k == 1) {
            accumulate(cur);
            continue;
        }
        double kk = static_cast<double>(k - 1);
        double b = kk * kk * (static_cast<double>(n) * n - kk * kk) / (4.0 * (4.0 * kk * kk - 1.0));
        std::vector<double> next(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            double x = i - m;
            next[static_cast<std::size_t>(i)] =
                x * cur[static_cast<std::size_t>(i)] - b * prev[static_cast<std::size_t>(i)];
        }
        prev = std::move(cur);
        cur = std::move(next);
        accumulate(cur);
    }
    return h;
}

BlendshapeSequence savgol_filter(const BlendshapeSequence& seq, int window, int order,
                                 std::vector<std::string>* warnings) {
    if (seq.frames < static_cast<std::size_t>(window)) {
        if (warnings)
            warnings->push_back("sequence of " + std::to_string(seq.frames) +
                                " frames shorter than savgol window " + std::to_string(window) +
                                "; returned unchanged");
        return seq;
    }
    return filter_channels(seq, savgol_coefficients(window, order));
}

BlendshapeSequence concat_segments(const std::vector<BlendshapeSequence>& segments,
                                   int crossfade_frames, const std::vector<int>& overlaps) {
    if (segments.empty()) throw Error("concat_segments needs at least one segment");
    if (!overlaps.empty() && overlaps.size() != segments.size() - 1)
        throw Error("overlaps must have one entry per junction");
    if (crossfade_frames < 0) throw Error("crossfade_frames must be >= 0");

    const auto& first = segments.front();
    for (const auto& seg : segments) {
        if (seg.schema != first.schema) throw SchemaError("concat: schema mismatch");
        if (seg.fps != first.fps) throw Error("concat: fps mismatch");
    }

    BlendshapeSequence out = first;
    for (std::size_t s = 1; s < segments.size(); ++s) {
        const auto& next = segments[s];
        int overlap = overlaps.empty() ? 0 : overlaps[s - 1];
        int blend = std::max(overlap, std::min<int>({crossfade_frames,
                                                     static_cast<int>(out.frames),
                                                     static_cast<int>(next.frames)}));
        blend = std::min<int>({blend, static_cast<int>(out.frames), static_cast<int>(next.frames)});

        std::size_t keep = out.frames - static_cast<std::size_t>(blend);
        BlendshapeSequence merged = BlendshapeSequence::zeros(
            out.schema, out.fps, keep + next.frames);
        std::copy(out.values.begin(),
                  out.values.begin() + static_cast<std::ptrdiff_t>(keep * out.channels()),
                  merged.values.begin());
        // blended junction frames, then the remainder of the next segment
        for (int j = 0; j < blend; ++j) {
            double w = static_cast<double>(j + 1) / (blend + 1);
            for (std::size_t k = 0; k < out.channels(); ++k) {
                double a = out.at(keep + static_cast<std::size_t>(j), k);
                double b = next.at(static_cast<std::size_t>(j), k);
                merged.at(keep + static_cast<std::size_t>(j), k) = (1.0 - w) * a + w * b;
            }
        }
        for (std::size_t t = static_cast<std::size_t>(blend); t < next.frames; ++t)
            for (std::size_t k = 0; k < out.channels(); ++k)
                merged.at(keep + t, k) = next.at(t, k);
        out = std::move(merged);
    }
    return out;
}

BlendshapeSequence smooth_pipeline(const BlendshapeSequence& seq, const SmoothingConfig& cfg,
                                   std::vector<std::string>* warnings) {
    cfg.validate();
    auto out = dead_zone(seq, cfg.dead_zone_eps);
    out = gaussian_dequantize(out, cfg.gaussian_sigma);
    out = savgol_filter(out, cfg.sg_window, cfg.sg_order, warnings);
    return clip_sequence(out);
}

} // namespace speechshape
