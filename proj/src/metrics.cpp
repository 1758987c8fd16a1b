#include "speechshape/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace speechshape {

using nlohmann::json;

nlohmann::json MetricsConfig::to_json() const {
    return {{"window", window},       {"hop", hop},
            {"subsample", subsample}, {"repeats", repeats},
            {"seed", seed},           {"method", method == OtMethod::exact ? "exact" : "sinkhorn"}};
}

MetricsConfig MetricsConfig::from_json(const nlohmann::json& j) {
    MetricsConfig c;
    c.window = j.value("window", c.window);
    c.hop = j.value("hop", c.hop);
    c.subsample = j.value("subsample", c.subsample);
    c.repeats = j.value("repeats", c.repeats);
    c.seed = j.value("seed", c.seed);
    std::string m = j.value("method", "exact");
    if (m == "exact") c.method = OtMethod::exact;
    else if (m == "sinkhorn") c.method = OtMethod::sinkhorn;
    else throw ConfigError("unknown OT method \"" + m + "\"");
    return c;
}

nlohmann::json MetricReport::to_json() const {
    return {{"mse", mse},
            {"mae", mae},
            {"fd", fd},
            {"wind_mean", wind_mean},
            {"wind_std", wind_std},
            {"n_frames", n_frames},
            {"approximate_ot", approximate_ot},
            {"config", config.to_json()}};
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
    MetricReport r;
    r.mse = j.at("mse").get<double>();
    r.mae = j.at("mae").get<double>();
    r.fd = j.at("fd").get<double>();
    r.wind_mean = j.at("wind_mean").get<double>();
    r.wind_std = j.at("wind_std").get<double>();
    r.n_frames = j.at("n_frames").get<std::size_t>();
    r.approximate_ot = j.value("approximate_ot", false);
    if (j.contains("config")) r.config = MetricsConfig::from_json(j["config"]);
    return r;
}

namespace {

void check_same_shape(const BlendshapeSequence& pred, const BlendshapeSequence& gt) {
    if (pred.schema != gt.schema) throw MetricError("schema mismatch between pred and gt");
    if (pred.fps != gt.fps)
        throw MetricError("fps mismatch: " + std::to_string(pred.fps) + " vs " +
                          std::to_string(gt.fps));
    if (pred.frames != gt.frames)
        throw MetricError("frame count mismatch: " + std::to_string(pred.frames) + " vs " +
                          std::to_string(gt.frames));
    if (pred.frames == 0) throw MetricError("empty sequences");
}

} // namespace

double mse(const BlendshapeSequence& pred, const BlendshapeSequence& gt) {
    check_same_shape(pred, gt);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        double d = pred.values[i] - gt.values[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.values.size());
}

double mae(const BlendshapeSequence& pred, const BlendshapeSequence& gt) {
    check_same_shape(pred, gt);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.values.size(); ++i)
        acc += std::abs(pred.values[i] - gt.values[i]);
    return acc / static_cast<double>(pred.values.size());
}

FeatureSet extract_features(const BlendshapeSequence& seq, int window, int hop) {
    if (window < 2) throw MetricError("feature window must be >= 2");
    if (hop < 1) throw MetricError("feature hop must be >= 1");
    if (seq.frames < static_cast<std::size_t>(window))
        throw MetricError("sequence of " + std::to_string(seq.frames) +
                          " frames is shorter than feature window " + std::to_string(window));

    const auto K = static_cast<Eigen::Index>(seq.channels());
    const auto n = static_cast<Eigen::Index>((seq.frames - static_cast<std::size_t>(window)) /
                                                 static_cast<std::size_t>(hop) +
                                             1);
    FeatureSet out;
    out.window = window;
    out.hop = hop;
    out.vectors.resize(n, 2 * K);
    for (Eigen::Index w = 0; w < n; ++w) {
        std::size_t begin = static_cast<std::size_t>(w) * static_cast<std::size_t>(hop);
        for (Eigen::Index k = 0; k < K; ++k) {
            double sum = 0.0, diff_sum = 0.0;
            for (int t = 0; t < window; ++t) {
                double v = seq.at(begin + static_cast<std::size_t>(t), static_cast<std::size_t>(k));
                sum += v;
                if (t > 0)
                    diff_sum += std::abs(
                        v - seq.at(begin + static_cast<std::size_t>(t - 1), static_cast<std::size_t>(k)));
            }
            out.vectors(w, k) = sum / window;
            out.vectors(w, K + k) = diff_sum / (window - 1);
        }
    }
    return out;
}

GaussianStats gaussian_stats(const FeatureSet& features) {
    const auto n = features.vectors.rows();
    if (n < 2) throw MetricError("need at least 2 feature vectors for Gaussian stats");
    GaussianStats out;
    out.mean = features.vectors.colwise().mean();
    Eigen::MatrixXd centered = features.vectors.rowwise() - out.mean.transpose();
    out.covariance = centered.transpose() * centered / static_cast<double>(n - 1);
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()); // symmetrize
    return out;
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw MetricError("matrix_sqrt_psd needs a square matrix");
    double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw MetricError("matrix_sqrt_psd input is not symmetric");
    Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw MetricError("eigendecomposition failed");
    Eigen::VectorXd lambda = es.eigenvalues();
    double lmax = std::max(1.0, lambda.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (lambda(i) < -1e-8 * lmax)
            throw MetricError("matrix_sqrt_psd input has a significantly negative eigenvalue: " +
                              std::to_string(lambda(i)));
        if (lambda(i) < 0.0) lambda(i) = 0.0;
    }
    Eigen::VectorXd root = lambda.cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
    if (a.mean.size() != b.mean.size() || a.covariance.rows() != b.covariance.rows())
        throw MetricError("frechet_distance dimension mismatch");
    if (a.mean == b.mean && a.covariance == b.covariance) return 0.0;

    double mean_term = (a.mean - b.mean).squaredNorm();
    Eigen::MatrixXd s = matrix_sqrt_psd(a.covariance);
    Eigen::MatrixXd m = s * b.covariance * s;
    m = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw MetricError("eigendecomposition failed");
    double lmax = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    double tr_sqrt = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        double l = es.eigenvalues()(i);
        if (l < -1e-8 * lmax)
            throw MetricError("(S_r S_g) has a significantly negative eigenvalue");
        tr_sqrt += std::sqrt(std::max(0.0, l));
    }
    double fd = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * tr_sqrt;
    double scale = std::max(1.0, a.covariance.trace() + b.covariance.trace());
    if (fd < 0.0) {
        if (fd < -1e-8 * scale) throw MetricError("frechet_distance came out negative: " +
                                                  std::to_string(fd));
        fd = 0.0;
    }
    return fd;
}

namespace {

/// Successive-shortest-path min-cost flow on the dense bipartite
/// transportation graph. Supplies: every x node ships M units, every y node
/// receives N units (total flow N*M), so uniform 1/N and 1/M marginals stay
/// integral.
class TransportSolver {
public:
    TransportSolver(const Eigen::MatrixXd& cost, long long supply_per_x, long long demand_per_y)
        : n_(cost.rows()), m_(cost.cols()),
          total_(static_cast<long long>(cost.rows()) * supply_per_x), cost_(cost),
          flow_(Eigen::MatrixXd::Zero(cost.rows(), cost.cols())),
          x_remaining_(static_cast<std::size_t>(cost.rows()), supply_per_x),
          y_remaining_(static_cast<std::size_t>(cost.cols()), demand_per_y),
          pot_x_(static_cast<std::size_t>(cost.rows()), 0.0),
          pot_y_(static_cast<std::size_t>(cost.cols()), 0.0) {}

    double solve() {
        long long shipped = 0;
        while (shipped < total_) shipped += augment();
        double acc = 0.0;
        for (Eigen::Index i = 0; i < n_; ++i)
            for (Eigen::Index j = 0; j < m_; ++j) acc += flow_(i, j) * cost_(i, j);
        return acc;
    }

private:
    long long augment();

    Eigen::Index n_, m_;
    long long total_;
    Eigen::MatrixXd cost_;
    Eigen::MatrixXd flow_;
    std::vector<long long> x_remaining_, y_remaining_;
    std::vector<double> pot_x_, pot_y_;
};

double exact_ot_mean_cost(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

/// Dense Dijkstra over source -> X -> Y -> sink with reduced costs.
/// Returns units pushed this round.
long long TransportSolver::augment() {
    const double inf = std::numeric_limits<double>::infinity();
    const auto n = static_cast<std::size_t>(n_);
    const auto m = static_cast<std::size_t>(m_);

    std::vector<double> dist_x(n, inf), dist_y(m, inf);
    std::vector<int> from_y(m, -1);          // X node feeding the best path into y
    std::vector<int> from_x(n, -1);          // Y node feeding x on a reverse arc, -1 = source
    std::vector<bool> done_x(n, false), done_y(m, false);

    for (std::size_t i = 0; i < n; ++i)
        if (x_remaining_[i] > 0) dist_x[i] = 0.0;

    // Dijkstra without a heap: at most n+m settle rounds, each O(n*m)
    for (;;) {
        double best = inf;
        int bi = -1;
        bool is_x = true;
        for (std::size_t i = 0; i < n; ++i)
            if (!done_x[i] && dist_x[i] < best) { best = dist_x[i]; bi = static_cast<int>(i); is_x = true; }
        for (std::size_t j = 0; j < m; ++j)
            if (!done_y[j] && dist_y[j] < best) { best = dist_y[j]; bi = static_cast<int>(j); is_x = false; }
        if (bi < 0) break;
        if (is_x) {
            auto i = static_cast<std::size_t>(bi);
            done_x[i] = true;
            for (std::size_t j = 0; j < m; ++j) {
                if (done_y[j]) continue;
                // forward arc x->y is always present (capacity effectively unbounded
                // once supplies bound the flow)
                double rc = cost_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                            pot_x_[i] - pot_y_[j];
                if (rc < 0.0) rc = 0.0; // floating-point guard
                if (dist_x[i] + rc < dist_y[j]) {
                    dist_y[j] = dist_x[i] + rc;
                    from_y[j] = static_cast<int>(i);
                }
            }
        } else {
            auto j = static_cast<std::size_t>(bi);
            done_y[j] = true;
            for (std::size_t i = 0; i < n; ++i) {
                if (done_x[i]) continue;
                if (flow_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) <= 0.0)
                    continue; // reverse arc requires existing flow
                double rc = -(cost_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                              pot_x_[i] - pot_y_[j]);
                if (rc < 0.0) rc = 0.0;
                if (dist_y[j] + rc < dist_x[i]) {
                    dist_x[i] = dist_y[j] + rc;
                    from_x[i] = static_cast<int>(j);
                }
            }
        }
    }

    // cheapest reachable y with remaining demand
    int target = -1;
    double best = inf;
    for (std::size_t j = 0; j < m; ++j)
        if (y_remaining_[j] > 0 && dist_y[j] < best) { best = dist_y[j]; target = static_cast<int>(j); }
    if (target < 0) throw MetricError("transport network disconnected");

    // walk back to a source-fed x, tracking the bottleneck
    long long bottleneck = y_remaining_[static_cast<std::size_t>(target)];
    std::vector<std::pair<int, int>> forward_arcs;  // (i, j) gaining flow
    std::vector<std::pair<int, int>> backward_arcs; // (i, j) losing flow
    int j = target;
    for (;;) {
        int i = from_y[static_cast<std::size_t>(j)];
        forward_arcs.push_back({i, j});
        int prev_j = from_x[static_cast<std::size_t>(i)];
        if (prev_j < 0) {
            bottleneck = std::min(bottleneck, x_remaining_[static_cast<std::size_t>(i)]);
            break;
        }
        backward_arcs.push_back({i, prev_j});
        bottleneck = std::min(bottleneck, static_cast<long long>(std::llround(
                                              flow_(i, prev_j))));
        j = prev_j;
    }

    for (auto [i, jj] : forward_arcs) flow_(i, jj) += static_cast<double>(bottleneck);
    for (auto [i, jj] : backward_arcs) flow_(i, jj) -= static_cast<double>(bottleneck);
    x_remaining_[static_cast<std::size_t>(forward_arcs.back().first)] -= bottleneck;
    y_remaining_[static_cast<std::size_t>(target)] -= bottleneck;

    // potential update keeps reduced costs non-negative for the next round
    for (std::size_t i = 0; i < n; ++i)
        if (dist_x[i] < inf) pot_x_[i] += dist_x[i];
    for (std::size_t jj = 0; jj < m; ++jj)
        if (dist_y[jj] < inf) pot_y_[jj] += dist_y[jj];
    return bottleneck;
}

Eigen::MatrixXd pairwise_sq_dists(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    Eigen::MatrixXd cost(x.rows(), y.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < y.rows(); ++j)
            cost(i, j) = (x.row(i) - y.row(j)).squaredNorm();
    return cost;
}

double exact_ot_mean_cost(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    const auto n = x.rows(), m = y.rows();
    Eigen::MatrixXd cost = pairwise_sq_dists(x, y);
    // gcd scaling keeps the unit count small for equal sizes
    long long g = std::gcd(static_cast<long long>(n), static_cast<long long>(m));
    long long supply = m / g; // per x node
    long long demand = n / g; // per y node

    TransportSolver solver(cost, supply, demand);
    double total = solver.solve();
    double units = static_cast<double>(n / g) * static_cast<double>(m); // n*m/g
    return total / units;
}

double sinkhorn_cost(const Eigen::MatrixXd& cost, double epsilon, int max_iter, double tol) {
    const auto n = cost.rows(), m = cost.cols();
    const double la = -std::log(static_cast<double>(n)); // log(1/n)
    const double lb = -std::log(static_cast<double>(m));
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n), g = Eigen::VectorXd::Zero(m);

    auto logsumexp_rows = [&](const Eigen::VectorXd& gg) {
        Eigen::VectorXd out(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < m; ++j)
                mx = std::max(mx, (gg(j) - cost(i, j)) / epsilon + lb);
            double acc = 0.0;
            for (Eigen::Index j = 0; j < m; ++j)
                acc += std::exp((gg(j) - cost(i, j)) / epsilon + lb - mx);
            out(i) = mx + std::log(acc);
        }
        return out;
    };
    auto logsumexp_cols = [&](const Eigen::VectorXd& ff) {
        Eigen::VectorXd out(m);
        for (Eigen::Index j = 0; j < m; ++j) {
            double mx = -std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < n; ++i)
                mx = std::max(mx, (ff(i) - cost(i, j)) / epsilon + la);
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                acc += std::exp((ff(i) - cost(i, j)) / epsilon + la - mx);
            out(j) = mx + std::log(acc);
        }
        return out;
    };

    for (int it = 0; it < max_iter; ++it) {
        f = -epsilon * logsumexp_rows(g);
        g = -epsilon * logsumexp_cols(f);
        // marginal check on the row sums of the implied plan
        double worst = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double row = 0.0;
            for (Eigen::Index j = 0; j < m; ++j)
                row += std::exp((f(i) + g(j) - cost(i, j)) / epsilon + la + lb);
            worst = std::max(worst, std::abs(row - std::exp(la)));
        }
        if (worst < tol) break;
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            acc += std::exp((f(i) + g(j) - cost(i, j)) / epsilon + la + lb) * cost(i, j);
    return acc;
}

double median_of(Eigen::MatrixXd values) {
    std::vector<double> v(values.data(), values.data() + values.size());
    std::sort(v.begin(), v.end());
    return v.empty() ? 0.0 : v[v.size() / 2];
}

} // namespace

double wasserstein2_empirical(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                              OtMethod method, const SinkhornParams& params) {
    if (x.rows() == 0 || y.rows() == 0) throw MetricError("empty point sets");
    if (x.cols() != y.cols()) throw MetricError("point dimension mismatch");

    if (method == OtMethod::exact) return std::sqrt(std::max(0.0, exact_ot_mean_cost(x, y)));

    Eigen::MatrixXd cost_xy = pairwise_sq_dists(x, y);
    double med = median_of(cost_xy);
    double epsilon = params.epsilon_scale * (med > 0.0 ? med : 1.0);
    double xy = sinkhorn_cost(cost_xy, epsilon, params.max_iterations, params.marginal_tolerance);
    if (!params.debias) return std::sqrt(std::max(0.0, xy));
    double xx = sinkhorn_cost(pairwise_sq_dists(x, x), epsilon, params.max_iterations,
                              params.marginal_tolerance);
    double yy = sinkhorn_cost(pairwise_sq_dists(y, y), epsilon, params.max_iterations,
                              params.marginal_tolerance);
    return std::sqrt(std::max(0.0, xy - 0.5 * (xx + yy)));
}

namespace {

/// Partial Fisher-Yates with a fully specified RNG stream; std::sample and
/// uniform_int_distribution are implementation-defined, this is not.
std::vector<Eigen::Index> sample_without_replacement(Eigen::Index n, Eigen::Index k,
                                                     std::mt19937_64& rng) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (Eigen::Index i = 0; i < k; ++i) {
        auto j = i + static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n - i));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(k));
    std::sort(idx.begin(), idx.end());
    return idx;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& src, const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), src.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = src.row(rows[i]);
    return out;
}

} // namespace

std::pair<double, double> wind(const FeatureSet& pred, const FeatureSet& gt, int subsample,
                               int repeats, std::uint64_t seed) {
    if (repeats < 2) throw MetricError("wind needs at least 2 repeats");
    if (subsample < 0) throw MetricError("subsample must be >= 0");
    const auto n = pred.vectors.rows(), m = gt.vectors.rows();
    if (n == 0 || m == 0) throw MetricError("empty feature sets");
    if (subsample > 0 && (n < subsample || m < subsample))
        throw MetricError("subsample " + std::to_string(subsample) +
                          " exceeds available vectors (" + std::to_string(n) + ", " +
                          std::to_string(m) + ")");

    std::vector<double> results;
    results.reserve(static_cast<std::size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
        Eigen::MatrixXd xs, ys;
        if (subsample == 0) {
            xs = pred.vectors;
            ys = gt.vectors;
        } else {
            // identical per-repeat streams so equal inputs draw equal subsets
            std::mt19937_64 rng_x(seed + static_cast<std::uint64_t>(r));
            std::mt19937_64 rng_y(seed + static_cast<std::uint64_t>(r));
            xs = take_rows(pred.vectors, sample_without_replacement(n, subsample, rng_x));
            ys = take_rows(gt.vectors, sample_without_replacement(m, subsample, rng_y));
        }
        results.push_back(wasserstein2_empirical(xs, ys, OtMethod::exact));
    }
    double mean = std::accumulate(results.begin(), results.end(), 0.0) /
                  static_cast<double>(results.size());
    double var = 0.0;
    for (double v : results) var += (v - mean) * (v - mean);
    var /= static_cast<double>(results.size() - 1);
    return {mean, std::sqrt(var)};
}

MetricReport evaluate(const BlendshapeSequence& pred, const BlendshapeSequence& gt,
                      const MetricsConfig& config) {
    MetricReport report;
    report.config = config;
    report.n_frames = pred.frames;
    report.mse = mse(pred, gt);
    report.mae = mae(pred, gt);

    auto pf = extract_features(pred, config.window, config.hop);
    auto gf = extract_features(gt, config.window, config.hop);
    report.fd = frechet_distance(gaussian_stats(pf), gaussian_stats(gf));

    if (config.method == OtMethod::sinkhorn) {
        // approximate path: full sets through the entropic solver
        report.wind_mean = wasserstein2_empirical(pf.vectors, gf.vectors, OtMethod::sinkhorn);
        report.wind_std = 0.0;
        report.approximate_ot = true;
    } else {
        auto [mean, std] = wind(pf, gf, config.subsample, config.repeats, config.seed);
        report.wind_mean = mean;
        report.wind_std = std;
    }
    return report;
}

} // namespace speechshape
