#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "folde/error.hpp"
#include "folde/random.hpp"

namespace folde {

struct ForestConfig {
    std::size_t n_trees = 100;
    double max_features_fraction = 1.0 / 3.0;
    std::size_t min_samples_leaf = 1;
};

// Bagged CART regression trees with variance-reduction splits.
class RandomForest {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        float threshold = 0.0f;
        std::uint32_t left = 0, right = 0;
        double value = 0.0;
    };
    using Tree = std::vector<Node>;

    RandomForest(std::size_t dim, std::vector<Tree> trees) : dim_(dim), trees_(std::move(trees)) {}

    std::size_t dim() const noexcept { return dim_; }
    const std::vector<Tree>& trees() const noexcept { return trees_; }

    double predict_row(const float* x) const {
        double total = 0.0;
        for (const auto& t : trees_) {
            std::uint32_t i = 0;
            while (t[i].feature >= 0) i = x[t[i].feature] <= t[i].threshold ? t[i].left : t[i].right;
            total += t[i].value;
        }
        return total / double(trees_.size());
    }

    friend bool operator==(const RandomForest& a, const RandomForest& b) {
        if (a.dim_ != b.dim_ || a.trees_.size() != b.trees_.size()) return false;
        for (std::size_t t = 0; t < a.trees_.size(); ++t) {
            if (a.trees_[t].size() != b.trees_[t].size()) return false;
            for (std::size_t i = 0; i < a.trees_[t].size(); ++i) {
                const auto &x = a.trees_[t][i], &y = b.trees_[t][i];
                if (x.feature != y.feature || x.threshold != y.threshold || x.left != y.left || x.right != y.right ||
                    x.value != y.value)
                    return false;
            }
        }
        return true;
    }

private:
    std::size_t dim_;
    std::vector<Tree> trees_;
};

namespace detail {

class TreeBuilder {
public:
    using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    TreeBuilder(const RowMatrix& x, std::span<const double> y, const ForestConfig& cfg, Rng& rng)
        : x_(x), y_(y), cfg_(cfg), rng_(rng) {
        const auto d = std::size_t(x.cols());
        mtry_ = std::clamp<std::size_t>(std::size_t(cfg.max_features_fraction * double(d)), 1, d);
        features_.resize(d);
        std::iota(features_.begin(), features_.end(), std::size_t{0});
    }

    RandomForest::Tree build(std::vector<std::uint32_t> samples) {
        tree_.clear();
        grow(std::move(samples));
        return std::move(tree_);
    }

private:
    std::uint32_t grow(std::vector<std::uint32_t> idx) {
        const auto node = std::uint32_t(tree_.size());
        tree_.emplace_back();
        double mean = 0.0;
        for (auto i : idx) mean += y_[i];
        mean /= double(idx.size());
        tree_[node].value = mean;

        const bool pure = std::all_of(idx.begin(), idx.end(), [&](auto i) { return y_[i] == y_[idx.front()]; });
        if (pure || idx.size() < 2 * cfg_.min_samples_leaf) return node;

        // Partial Fisher-Yates: first mtry_ entries become the sampled features.
        for (std::size_t k = 0; k < mtry_; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, features_.size() - 1);
            std::swap(features_[k], features_[pick(rng_)]);
        }

        double best_gain = 0.0;
        int best_feature = -1;
        float best_threshold = 0.0f;
        std::vector<std::uint32_t> order(idx);
        double total_sum = 0.0, total_sq = 0.0;
        for (auto i : idx) {
            total_sum += y_[i];
            total_sq += y_[i] * y_[i];
        }
        const double n = double(idx.size());
        const double parent_sse = total_sq - total_sum * total_sum / n;
        for (std::size_t k = 0; k < mtry_; ++k) {
            const auto f = Eigen::Index(features_[k]);
            std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x_(a, f) < x_(b, f); });
            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t j = 0; j + 1 < order.size(); ++j) {
                const double yj = y_[order[j]];
                left_sum += yj;
                left_sq += yj * yj;
                const std::size_t nl = j + 1, nr = order.size() - nl;
                if (nl < cfg_.min_samples_leaf || nr < cfg_.min_samples_leaf) continue;
                const float a = x_(order[j], f), b = x_(order[j + 1], f);
                if (!(a < b)) continue;
                const double right_sum = total_sum - left_sum, right_sq = total_sq - left_sq;
                const double sse = (left_sq - left_sum * left_sum / double(nl)) +
                                   (right_sq - right_sum * right_sum / double(nr));
                const double gain = parent_sse - sse;
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best_feature = int(f);
                    best_threshold = a + (b - a) / 2.0f;
                    if (!(best_threshold < b)) best_threshold = a;
                }
            }
        }
        if (best_feature < 0) return node;

        std::vector<std::uint32_t> left, right;
        for (auto i : idx) (x_(i, best_feature) <= best_threshold ? left : right).push_back(i);
        tree_[node].feature = best_feature;
        tree_[node].threshold = best_threshold;
        const auto l = grow(std::move(left));
        const auto r = grow(std::move(right));
        tree_[node].left = l;
        tree_[node].right = r;
        return node;
    }

    const RowMatrix& x_;
    std::span<const double> y_;
    const ForestConfig& cfg_;
    Rng& rng_;
    std::size_t mtry_ = 1;
    std::vector<std::size_t> features_;
    RandomForest::Tree tree_;
};

}  // namespace detail

inline RandomForest rf_fit(const Eigen::MatrixXf& inputs, std::span<const double> labels, const ForestConfig& cfg,
                           std::uint64_t seed) {
    if (inputs.rows() == 0 || labels.empty()) throw InvariantError("random forest needs training samples");
    if (std::size_t(inputs.rows()) != labels.size()) throw InvariantError("inputs and labels differ in length");
    if (cfg.n_trees == 0 || cfg.min_samples_leaf == 0) throw InvariantError("bad forest configuration");
    const detail::TreeBuilder::RowMatrix x = inputs;
    Rng rng(seed);
    detail::TreeBuilder builder(x, labels, cfg, rng);
    std::vector<RandomForest::Tree> trees;
    std::uniform_int_distribution<std::uint32_t> draw(0, std::uint32_t(labels.size() - 1));
    for (std::size_t t = 0; t < cfg.n_trees; ++t) {
        std::vector<std::uint32_t> sample(labels.size());
        for (auto& s : sample) s = draw(rng);
        trees.push_back(builder.build(std::move(sample)));
    }
    return RandomForest(std::size_t(inputs.cols()), std::move(trees));
}

inline Eigen::VectorXd rf_predict(const RandomForest& forest, const Eigen::MatrixXf& inputs) {
    if (std::size_t(inputs.cols()) != forest.dim()) throw InvariantError("forest input dimension mismatch");
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> x = inputs;
    Eigen::VectorXd out(inputs.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = forest.predict_row(x.row(i).data());
    return out;
}

}  // namespace folde
