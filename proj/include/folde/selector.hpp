#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "folde/error.hpp"

namespace folde {

inline constexpr double kNegativeVarianceTolerance = 1e-12;
inline constexpr double kDefaultUcbBeta = 1.0;

// mean_i + beta * sqrt(cov_ii); variances in (-1e-12, 0) are clamped to 0.
inline Eigen::VectorXd ucb_score(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, double beta) {
    if (cov.rows() != mean.size() || cov.cols() != mean.size()) throw InvariantError("UCB: shape mismatch");
    Eigen::VectorXd out(mean.size());
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
        double var = cov(i, i);
        if (var < -kNegativeVarianceTolerance) throw NumericError("UCB: negative variance " + std::to_string(var));
        out(i) = mean(i) + beta * std::sqrt(std::max(var, 0.0));
    }
    return out;
}

// Indices of the n largest scores, best first; equal scores keep lower index first.
inline std::vector<std::size_t> top_n_select(std::span<const double> scores, std::size_t n) {
    if (n > scores.size()) throw InvariantError("top-N: n exceeds number of scores");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    order.resize(n);
    return order;
}

inline std::vector<std::size_t> top_n_select(const Eigen::VectorXd& scores, std::size_t n) {
    return top_n_select(std::span<const double>(scores.data(), std::size_t(scores.size())), n);
}

// Where the alpha * median-variance observation noise enters.
enum class NoisePlacement {
    per_step,       // added to the chosen candidate's variance at every update
    diagonal_once,  // added once to the whole diagonal when the state is built
};

// Posterior over the not-yet-selected candidates during constant-liar batch
// construction. `remaining` maps rows of mean/cov back to candidate indices.
struct CLState {
    std::vector<std::size_t> remaining;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    double alpha = 0.0;
    double lie_value = 0.0;
    NoisePlacement placement = NoisePlacement::per_step;

    // The lie is the pessimistic minimum of the initial candidate means.
    static CLState make(Eigen::VectorXd mean, Eigen::MatrixXd cov, double alpha,
                        NoisePlacement placement = NoisePlacement::per_step) {
        CLState s;
        s.remaining.resize(std::size_t(mean.size()));
        std::iota(s.remaining.begin(), s.remaining.end(), std::size_t{0});
        s.lie_value = mean.size() ? mean.minCoeff() : 0.0;
        s.alpha = alpha;
        s.placement = placement;
        s.mean = std::move(mean);
        s.cov = std::move(cov);
        s.validate();
        if (placement == NoisePlacement::diagonal_once && s.mean.size() > 0)
            s.cov.diagonal().array() += alpha * s.median_variance();
        return s;
    }

    void validate() const {
        if (!std::isfinite(alpha) || alpha < 0.0) throw InvariantError("alpha must be finite and >= 0");
        if (cov.rows() != mean.size() || cov.cols() != mean.size() || remaining.size() != std::size_t(mean.size()))
            throw InvariantError("constant-liar state has inconsistent shapes");
        for (Eigen::Index i = 0; i < cov.rows(); ++i) {
            if (cov(i, i) < -kNegativeVarianceTolerance) throw InvariantError("covariance has negative variance");
            for (Eigen::Index j = 0; j < i; ++j)
                if (std::abs(cov(i, j) - cov(j, i)) > 1e-9 * std::max(1.0, std::abs(cov(i, j))))
                    throw InvariantError("covariance is not symmetric");
        }
    }

    double median_variance() const {
        if (cov.rows() == 0) return 0.0;
        std::vector<double> d(std::size_t(cov.rows()));
        for (Eigen::Index r = 0; r < cov.rows(); ++r) d[std::size_t(r)] = cov(r, r);
        const auto mid = d.size() / 2;
        std::nth_element(d.begin(), d.begin() + std::ptrdiff_t(mid), d.end());
        if (d.size() % 2 == 1) return d[mid];
        const double upper = d[mid];
        const double lower = *std::max_element(d.begin(), d.begin() + std::ptrdiff_t(mid));
        return 0.5 * (lower + upper);
    }

    std::size_t row_of(std::size_t candidate) const {
        const auto it = std::find(remaining.begin(), remaining.end(), candidate);
        if (it == remaining.end()) throw InvariantError("candidate " + std::to_string(candidate) + " is not remaining");
        return std::size_t(it - remaining.begin());
    }
};

// Conditions the remaining candidates on the imagined observation lie_value
// for `chosen` and removes it:
//   cov'  = cov_rest - v v^T / s
//   mean' = mean_rest + v (lie - mean_chosen) / s
// where v is the chosen column and s the chosen variance plus observation noise.
inline void apply_cl_update(CLState& state, std::size_t chosen) {
    const std::size_t i = state.row_of(chosen);
    const auto n = state.mean.size();
    double s = state.cov(Eigen::Index(i), Eigen::Index(i));
    if (state.placement == NoisePlacement::per_step) s += state.alpha * state.median_variance();

    const double scale = std::max(1.0, state.cov.diagonal().cwiseAbs().maxCoeff());
    const bool singular = !(s > 1e-12 * scale);
    if (singular && state.alpha == 0.0)
        throw NumericError("singular constant-liar update: chosen candidate has zero variance and alpha = 0");

    Eigen::VectorXd v(n - 1);
    Eigen::VectorXd mean(n - 1);
    Eigen::MatrixXd cov(n - 1, n - 1);
    std::vector<std::size_t> remaining;
    remaining.reserve(std::size_t(n - 1));
    std::vector<Eigen::Index> keep;
    keep.reserve(std::size_t(n - 1));
    for (Eigen::Index r = 0; r < n; ++r) {
        if (std::size_t(r) == i) continue;
        keep.push_back(r);
        remaining.push_back(state.remaining[std::size_t(r)]);
    }
    for (std::size_t a = 0; a < keep.size(); ++a) {
        v(Eigen::Index(a)) = state.cov(keep[a], Eigen::Index(i));
        mean(Eigen::Index(a)) = state.mean(keep[a]);
        for (std::size_t b = 0; b < keep.size(); ++b) cov(Eigen::Index(a), Eigen::Index(b)) = state.cov(keep[a], keep[b]);
    }
    if (!singular) {
        const double shift = (state.lie_value - state.mean(Eigen::Index(i))) / s;
        mean += v * shift;
        for (Eigen::Index a = 0; a < cov.rows(); ++a)
            for (Eigen::Index b = 0; b < cov.cols(); ++b) cov(a, b) -= v(a) * v(b) / s;
    }
    state.mean = std::move(mean);
    state.cov = std::move(cov);
    state.remaining = std::move(remaining);
}

inline CLState cl_update(const CLState& state, std::size_t chosen) {
    CLState next = state;
    apply_cl_update(next, chosen);
    return next;
}

// Greedy batch: repeatedly take the UCB-maximizing remaining candidate, then
// condition on its pessimistic lie. Returns candidate indices in pick order.
inline std::vector<std::size_t> constant_liar_select(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                                     std::size_t n, double alpha, double beta = kDefaultUcbBeta,
                                                     NoisePlacement placement = NoisePlacement::per_step) {
    if (n > std::size_t(mean.size())) throw InvariantError("constant-liar: batch larger than candidate set");
    CLState state = CLState::make(mean, cov, alpha, placement);
    std::vector<std::size_t> batch;
    batch.reserve(n);
    while (batch.size() < n) {
        const Eigen::VectorXd ucb = ucb_score(state.mean, state.cov, beta);
        Eigen::Index best = 0;
        for (Eigen::Index r = 1; r < ucb.size(); ++r)
            if (ucb(r) > ucb(best)) best = r;
        const std::size_t chosen = state.remaining[std::size_t(best)];
        batch.push_back(chosen);
        if (batch.size() < n) apply_cl_update(state, chosen);
    }
    return batch;
}

}  // namespace folde
