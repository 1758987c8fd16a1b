#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "speechshape/blendshape.hpp"
#include "speechshape/errors.hpp"

namespace speechshape {

/// Windowed feature vectors extracted from a coefficient sequence, one row
/// per window.
struct FeatureSet {
    Eigen::MatrixXd vectors; // N x D
    int window = 0;
    int hop = 0;
};

struct GaussianStats {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance; // symmetric PSD
};

enum class OtMethod { exact, sinkhorn };

struct MetricsConfig {
    int window = 20;
    int hop = 10;
    int subsample = 64; // 0 = use every vector (deterministic)
    int repeats = 5;
    std::uint64_t seed = 42;
    OtMethod method = OtMethod::exact;

    nlohmann::json to_json() const;
    static MetricsConfig from_json(const nlohmann::json& j);
};

struct MetricReport {
    double mse = 0.0;
    double mae = 0.0;
    double fd = 0.0;
    double wind_mean = 0.0;
    double wind_std = 0.0;
    std::size_t n_frames = 0;
    MetricsConfig config;
    bool approximate_ot = false;

    nlohmann::json to_json() const;
    static MetricReport from_json(const nlohmann::json& j);
};

/// Frame-level accuracy over all T*K entries.
double mse(const BlendshapeSequence& pred, const BlendshapeSequence& gt);
double mae(const BlendshapeSequence& pred, const BlendshapeSequence& gt);

/// Default extractor: sliding windows of `window` frames with stride `hop`;
/// each vector concatenates per-channel window means and per-channel mean
/// absolute first differences (D = 2K).
FeatureSet extract_features(const BlendshapeSequence& seq, int window, int hop);

/// Sample mean and covariance (1/(N-1)), symmetrized.
GaussianStats gaussian_stats(const FeatureSet& features);

/// Principal square root of a symmetric PSD matrix via eigendecomposition.
/// Eigenvalues within -1e-8 (relative to the spectral radius) clamp to zero;
/// anything more negative is an error.
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& a);

/// |mu_r - mu_g|^2 + Tr(S_r + S_g - 2 (S_r S_g)^{1/2}), computed through the
/// symmetrized similarity form sqrt(S_r)^T S_g sqrt(S_r).
double frechet_distance(const GaussianStats& a, const GaussianStats& b);

struct SinkhornParams {
    double epsilon_scale = 0.01; // epsilon = scale * median cost
    int max_iterations = 1000;
    double marginal_tolerance = 1e-9;
    bool debias = true;
};

/// Empirical 2-Wasserstein distance between uniform point clouds. The exact
/// method solves the transportation problem with a successive-shortest-path
/// min-cost flow; sinkhorn is an opt-in entropic approximation.
double wasserstein2_empirical(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                              OtMethod method = OtMethod::exact,
                              const SinkhornParams& params = {});

/// Bootstrap W2: per repeat, draw `subsample` vectors without replacement
/// from each set (seeded, reproducible) and solve exactly; returns sample
/// mean and std over repeats. subsample 0 uses all vectors.
std::pair<double, double> wind(const FeatureSet& pred, const FeatureSet& gt, int subsample,
                               int repeats, std::uint64_t seed);

/// Full evaluation: MSE/MAE plus FD and WInD over extracted features.
MetricReport evaluate(const BlendshapeSequence& pred, const BlendshapeSequence& gt,
                      const MetricsConfig& config);

} // namespace speechshape
