#include "madloop/gmm.hpp"

#include "madloop/errors.hpp"
#include "madloop/knn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace madloop {

GmmParams::GmmParams(Eigen::VectorXd weights, std::vector<GaussianParams> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
    if (components_.empty()) {
        throw InvalidDataError("mixture needs at least one component");
    }
    if (static_cast<std::size_t>(weights_.size()) != components_.size()) {
        throw InvalidDataError("mixture has " + std::to_string(weights_.size()) + " weights for " +
                               std::to_string(components_.size()) + " components");
    }
    if (!weights_.allFinite() || weights_.minCoeff() < 0.0) {
        throw InvalidDataError("mixture weights must be finite and nonnegative");
    }
    if (std::abs(weights_.sum() - 1.0) > 1e-12) {
        throw InvalidDataError("mixture weights must sum to 1");
    }
    const int d = components_.front().dim();
    for (const auto& c : components_) {
        if (c.dim() != d) {
            throw InvalidDataError("mixture components must share one dimension");
        }
    }
}

GaussianParams GmmParams::moment_matched() const {
    const int d = dim();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (std::size_t k = 0; k < size(); ++k) {
        mean += weights_(static_cast<Eigen::Index>(k)) * components_[k].mean();
    }
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t k = 0; k < size(); ++k) {
        const Eigen::VectorXd delta = components_[k].mean() - mean;
        cov += weights_(static_cast<Eigen::Index>(k)) * (components_[k].cov() + delta * delta.transpose());
    }
    return GaussianParams(std::move(mean), 0.5 * (cov + cov.transpose()));
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kLogUnderflow = -700.0;

double squared_norm_row(const PointMatrix& x, Eigen::Index i, const Eigen::VectorXd& c) {
    return squared_distance(x.row(i).data(), c.data(), x.cols());
}

// Greedy k-means++ seeding (each step keeps the best of 2 + ln m candidates,
// which rarely leaves a well-separated cluster without a center) followed by
// Lloyd iterations. Returns hard labels.
std::vector<int> kmeans_labels(const PointMatrix& x, int m, Rng& rng, int lloyd_iterations) {
    const Eigen::Index n = x.rows();
    const int candidates = 2 + static_cast<int>(std::log(static_cast<double>(m)));
    std::vector<Eigen::VectorXd> centers;
    centers.reserve(static_cast<std::size_t>(m));
    centers.push_back(x.row(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)))).transpose());

    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        d2[static_cast<std::size_t>(i)] = squared_norm_row(x, i, centers.back());
    }
    std::vector<double> trial(static_cast<std::size_t>(n));
    std::vector<double> best_d2(static_cast<std::size_t>(n));
    while (static_cast<int>(centers.size()) < m) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        Eigen::Index best_pick = 0;
        double best_potential = std::numeric_limits<double>::infinity();
        for (int c = 0; c < candidates; ++c) {
            Eigen::Index pick = 0;
            if (total > 0.0) {
                const double target = rng.uniform() * total;
                double acc = 0.0;
                pick = n - 1;
                for (Eigen::Index i = 0; i < n; ++i) {
                    acc += d2[static_cast<std::size_t>(i)];
                    if (acc > target) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
            }
            const Eigen::VectorXd candidate = x.row(pick).transpose();
            double potential = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const auto is = static_cast<std::size_t>(i);
                trial[is] = std::min(d2[is], squared_norm_row(x, i, candidate));
                potential += trial[is];
            }
            if (potential < best_potential) {
                best_potential = potential;
                best_pick = pick;
                best_d2.swap(trial);
            }
        }
        centers.push_back(x.row(best_pick).transpose());
        d2 = best_d2;
    }

    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < lloyd_iterations; ++iter) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int k = 0; k < m; ++k) {
                const double dk = squared_norm_row(x, i, centers[static_cast<std::size_t>(k)]);
                if (dk < best_d) {
                    best_d = dk;
                    best = k;
                }
            }
            if (labels[static_cast<std::size_t>(i)] != best) {
                labels[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
            d2[static_cast<std::size_t>(i)] = best_d;
        }
        if (!changed) {
            break;
        }
        std::vector<Eigen::VectorXd> sums(static_cast<std::size_t>(m), Eigen::VectorXd::Zero(x.cols()));
        std::vector<int> counts(static_cast<std::size_t>(m), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]);
            sums[k] += x.row(i).transpose();
            ++counts[k];
        }
        for (int k = 0; k < m; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            if (counts[ks] > 0) {
                centers[ks] = sums[ks] / counts[ks];
            } else {
                // Empty cluster: move it to the point farthest from its center.
                const auto far = std::max_element(d2.begin(), d2.end()) - d2.begin();
                centers[ks] = x.row(far).transpose();
                d2[static_cast<std::size_t>(far)] = 0.0;
            }
        }
    }
    return labels;
}

struct EmState {
    Eigen::VectorXd weights;
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
};

// Fills log_resp (n x m) with log w_k + log N(x_i | k); returns per-row log-likelihood.
Eigen::VectorXd e_step(const PointMatrix& x, const EmState& s, Eigen::MatrixXd& log_resp) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    const auto m = static_cast<Eigen::Index>(s.means.size());
    log_resp.resize(n, m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        Eigen::LLT<Eigen::MatrixXd> llt(s.covs[ks]);
        if (llt.info() != Eigen::Success) {
            throw InvariantViolation("regularized component covariance is not positive definite");
        }
        const Eigen::MatrixXd& l = llt.matrixLLT();
        double log_det = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            log_det += 2.0 * std::log(l(j, j));
        }
        Eigen::MatrixXd diff = (x.rowwise() - s.means[ks].transpose()).transpose();
        llt.matrixL().solveInPlace(diff);
        const double log_w = s.weights(k) > 0.0 ? std::log(s.weights(k)) : -std::numeric_limits<double>::infinity();
        const double c = log_w - 0.5 * (static_cast<double>(d) * kLog2Pi + log_det);
        log_resp.col(k) = (c - 0.5 * diff.colwise().squaredNorm().array()).matrix().transpose();
    }
    const Eigen::VectorXd top = log_resp.rowwise().maxCoeff();
    Eigen::ArrayXXd shifted = log_resp.array().colwise() - top.array();
    shifted = (shifted < kLogUnderflow).select(0.0, shifted.exp());
    const Eigen::VectorXd ll = top.array() + shifted.rowwise().sum().log();
    log_resp.colwise() -= ll;
    return ll;
}

void m_step(const PointMatrix& x, const Eigen::MatrixXd& log_resp, double floor, EmState& s) {
    const Eigen::Index n = x.rows();
    // Responsibilities below exp(-700) are dropped: they would only feed
    // subnormal arithmetic.
    const Eigen::MatrixXd resp =
        (log_resp.array() < kLogUnderflow).select(0.0, log_resp.array().exp()).matrix();
    for (Eigen::Index k = 0; k < resp.cols(); ++k) {
        const auto ks = static_cast<std::size_t>(k);
        const double nk = resp.col(k).sum();
        s.weights(k) = nk / static_cast<double>(n);
        if (nk <= 0.0) {
            continue;
        }
        s.means[ks] = (x.transpose() * resp.col(k)) / nk;
        const Eigen::MatrixXd centered = x.rowwise() - s.means[ks].transpose();
        const Eigen::MatrixXd weighted = centered.array().colwise() * resp.col(k).array();
        Eigen::MatrixXd cov = centered.transpose() * weighted / nk;
        cov = (0.5 * (cov + cov.transpose())).eval();
        cov.diagonal().array() += floor;
        s.covs[ks] = std::move(cov);
    }
    s.weights /= s.weights.sum();
}

GmmParams to_params(const EmState& s) {
    std::vector<GaussianParams> comps;
    comps.reserve(s.means.size());
    for (std::size_t k = 0; k < s.means.size(); ++k) {
        comps.emplace_back(s.means[k], s.covs[k]);
    }
    Eigen::VectorXd w = s.weights / s.weights.sum();
    return GmmParams(std::move(w), std::move(comps));
}

} // namespace

EmResult fit_gmm(const SampleSet& data, int components, Rng& rng, const EmConfig& config) {
    const PointMatrix& x = data.points();
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    if (components < 1) {
        throw DomainError("component count must be >= 1");
    }
    if (n < static_cast<Eigen::Index>(components) * (d + 1)) {
        throw InsufficientDataError("fit_gmm needs n >= m * (d + 1) = " +
                                    std::to_string(static_cast<Eigen::Index>(components) * (d + 1)) +
                                    " rows, got " + std::to_string(n));
    }
    const int m = components;

    // Initial parameters from hard k-means labels.
    const std::vector<int> labels = kmeans_labels(x, m, rng, config.kmeans_iterations);
    Eigen::MatrixXd log_resp = Eigen::MatrixXd::Constant(n, m, -std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < n; ++i) {
        log_resp(i, labels[static_cast<std::size_t>(i)]) = 0.0;
    }
    EmState state{Eigen::VectorXd::Zero(m), std::vector<Eigen::VectorXd>(static_cast<std::size_t>(m), Eigen::VectorXd::Zero(d)),
                  std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(m), Eigen::MatrixXd::Identity(d, d) * config.covariance_floor)};
    m_step(x, log_resp, config.covariance_floor, state);

    EmResult result{to_params(state), {}, 0, 0, false};
    EmState best = state;
    for (int iter = 0; iter < config.max_iterations; ++iter) {
        // Re-seed collapsed components at the worst-explained point.
        bool reseeded = false;
        for (Eigen::Index k = 0; k < m; ++k) {
            if (state.weights(k) >= config.min_weight) {
                continue;
            }
            Eigen::MatrixXd scratch;
            const Eigen::VectorXd ll = e_step(x, state, scratch);
            Eigen::Index worst = 0;
            ll.minCoeff(&worst);
            Eigen::MatrixXd avg_cov = Eigen::MatrixXd::Zero(d, d);
            int others = 0;
            for (Eigen::Index j = 0; j < m; ++j) {
                if (j != k && state.weights(j) >= config.min_weight) {
                    avg_cov += state.covs[static_cast<std::size_t>(j)];
                    ++others;
                }
            }
            avg_cov = others > 0 ? Eigen::MatrixXd(avg_cov / others)
                                 : Eigen::MatrixXd(Eigen::MatrixXd::Identity(d, d) * config.covariance_floor);
            state.means[static_cast<std::size_t>(k)] = x.row(worst).transpose();
            state.covs[static_cast<std::size_t>(k)] = avg_cov;
            state.weights(k) = 1.0 / m;
            state.weights /= state.weights.sum();
            ++result.reseeds;
            reseeded = true;
        }
        if (reseeded) {
            result.log_likelihood.clear();
        }

        const double ll = e_step(x, state, log_resp).mean();
        ++result.iterations;
        if (!result.log_likelihood.empty()) {
            const double prev = result.log_likelihood.back();
            if (ll < prev) {
                // The covariance floor makes the M-step inexact; a decrease means
                // the previous parameters were the local optimum.
                state = best;
                result.converged = true;
                break;
            }
            result.log_likelihood.push_back(ll);
            best = state;
            if (ll - prev < config.tolerance) {
                result.converged = true;
                break;
            }
        } else {
            result.log_likelihood.push_back(ll);
            best = state;
        }
        m_step(x, log_resp, config.covariance_floor, state);
    }
    if (!result.converged) {
        state = best;
    }
    result.model = to_params(state);
    return result;
}

LabelledSamples draw_gmm(const GmmParams& model, double lambda, std::size_t n, Rng& rng) {
    check_lambda(lambda);
    if (n < 1) {
        throw DomainError("sample count must be >= 1");
    }
    const std::size_t m = model.size();
    std::vector<double> cumulative(m);
    std::partial_sum(model.weights().data(), model.weights().data() + m, cumulative.begin());

    LabelledSamples out;
    out.labels.resize(n);
    std::vector<std::size_t> counts(m, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform() * cumulative.back();
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), m - 1);
        out.labels[i] = static_cast<int>(k);
        ++counts[k];
    }

    // Draw per component in component order, then scatter back to row order.
    out.points.resize(static_cast<Eigen::Index>(n), model.dim());
    std::vector<std::vector<std::size_t>> rows(m);
    for (std::size_t i = 0; i < n; ++i) {
        rows[static_cast<std::size_t>(out.labels[i])].push_back(i);
    }
    for (std::size_t k = 0; k < m; ++k) {
        if (counts[k] == 0) {
            continue;
        }
        const PointMatrix draws = draw_gaussian(model.component(k), lambda, counts[k], rng);
        for (std::size_t r = 0; r < rows[k].size(); ++r) {
            out.points.row(static_cast<Eigen::Index>(rows[k][r])) = draws.row(static_cast<Eigen::Index>(r));
        }
    }
    return out;
}

SampleSet sample_gmm(const GmmParams& model, double lambda, std::size_t n, Rng& rng, int generation) {
    return SampleSet(draw_gmm(model, lambda, n, rng).points, Provenance::synthetic, generation);
}

GmmParams reference_grid_gmm() {
    constexpr double kSpacing = 2.0;
    constexpr double kVariance = 0.05 * 0.05;
    std::vector<GaussianParams> comps;
    for (int i = -2; i <= 2; ++i) {
        for (int j = -2; j <= 2; ++j) {
            comps.emplace_back(Eigen::Vector2d(kSpacing * i, kSpacing * j), Eigen::Matrix2d::Identity() * kVariance);
        }
    }
    return GmmParams(Eigen::VectorXd::Constant(25, 1.0 / 25.0), std::move(comps));
}

} // namespace madloop
