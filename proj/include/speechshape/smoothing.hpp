#pragma once

#include <vector>

#include "speechshape/blendshape.hpp"

namespace speechshape {

struct SmoothingConfig {
    double dead_zone_eps = 0.02;
    double gaussian_sigma = 1.0; // frames
    int sg_window = 7;           // odd, >= 3
    int sg_order = 2;            // >= 1, < sg_window
    int crossfade_frames = 2;

    void validate() const;
};

/// Zero values with |v| < eps; values at or above eps pass through.
BlendshapeSequence dead_zone(const BlendshapeSequence& seq, double eps);

/// Per-channel convolution with a unit-sum Gaussian kernel (stddev in
/// frames, truncated at +/-4 sigma), edge-replicated boundaries.
BlendshapeSequence gaussian_dequantize(const BlendshapeSequence& seq, double sigma);

/// Unit-sum Gaussian kernel of standard deviation sigma frames.
std::vector<double> gaussian_kernel(double sigma);

/// Savitzky-Golay smoothing weights: the least-squares polynomial fit of
/// the given order over the window, evaluated at the center sample.
std::vector<double> savgol_coefficients(int window, int order);

/// Per-channel Savitzky-Golay filtering with edge replication. Sequences
/// shorter than the window pass through unchanged (warning appended).
BlendshapeSequence savgol_filter(const BlendshapeSequence& seq, int window, int order,
                                 std::vector<std::string>* warnings = nullptr);

/// Ordered concatenation. At each junction, blend_j = max(overlap_j,
/// min(crossfade, len_a, len_b)) frames are merged with linear weights
/// (k+1)/(n+1); slicing overlaps are never duplicated.
BlendshapeSequence concat_segments(const std::vector<BlendshapeSequence>& segments,
                                   int crossfade_frames,
                                   const std::vector<int>& overlaps = {});

/// The full post-processing chain, in fixed order:
/// dead-zone -> Gaussian de-quantization -> Savitzky-Golay -> clip.
BlendshapeSequence smooth_pipeline(const BlendshapeSequence& seq, const SmoothingConfig& cfg,
                                   std::vector<std::string>* warnings = nullptr);

} // namespace speechshape
