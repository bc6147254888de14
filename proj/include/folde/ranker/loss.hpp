#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "folde/error.hpp"
#include "folde/ranker/pairs.hpp"

namespace folde {

enum class LossKind { bradley_terry, mse };

namespace detail {

// log(1 + exp(z)) without overflow.
inline double softplus(double z) noexcept { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) noexcept {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace detail

// Mean over pairs of -log sigmoid(s_winner - s_loser).
inline double bt_loss(std::span<const double> scores, std::span<const Pair> pairs) {
    if (pairs.empty()) throw InvariantError("Bradley-Terry loss over an empty pair set is undefined");
    double total = 0.0;
    for (const auto& p : pairs) total += detail::softplus(-(scores[p.winner] - scores[p.loser]));
    return total / double(pairs.size());
}

// Same loss; writes dLoss/dScores into grad (resized to scores.size()).
inline double bt_loss_grad(std::span<const double> scores, std::span<const Pair> pairs, std::vector<double>& grad) {
    if (pairs.empty()) throw InvariantError("Bradley-Terry loss over an empty pair set is undefined");
    grad.assign(scores.size(), 0.0);
    const double inv = 1.0 / double(pairs.size());
    double total = 0.0;
    for (const auto& p : pairs) {
        const double d = scores[p.winner] - scores[p.loser];
        total += detail::softplus(-d);
        const double g = -detail::sigmoid(-d) * inv;
        grad[p.winner] += g;
        grad[p.loser] -= g;
    }
    return total * inv;
}

// Mean squared error over the listed items.
inline double mse_loss_grad(std::span<const double> scores, std::span<const double> labels,
                            std::span<const std::uint32_t> items, std::vector<double>& grad) {
    if (items.empty()) throw InvariantError("MSE over an empty item set is undefined");
    grad.assign(scores.size(), 0.0);
    const double inv = 1.0 / double(items.size());
    double total = 0.0;
    for (auto i : items) {
        const double r = scores[i] - labels[i];
        total += r * r;
        grad[i] += 2.0 * r * inv;
    }
    return total * inv;
}

}  // namespace folde
