#pragma once

#include <future>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "folde/core/embeddings.hpp"
#include "folde/core/logprobs.hpp"
#include "folde/error.hpp"
#include "folde/random.hpp"
#include "folde/ranker/mlp.hpp"
#include "folde/ranker/train.hpp"
#include "folde/zeroshot.hpp"

namespace folde {

// k independently seeded rankers sharing one architecture.
template <class T = float>
class Ensemble {
public:
    using Model = Mlp<T>;
    using Matrix = typename Model::Matrix;

    Ensemble(MlpConfig config, std::size_t k, std::uint64_t seed) : config_(std::move(config)) {
        if (k == 0) throw InvariantError("ensemble needs at least one member");
        members_.reserve(k);
        for (std::size_t m = 0; m < k; ++m) {
            MlpConfig c = config_;
            c.seed = derive_seed(seed, {tag(Stream::member_init), m});
            members_.emplace_back(std::move(c));
        }
    }

    std::size_t size() const noexcept { return members_.size(); }
    const MlpConfig& config() const noexcept { return config_; }
    std::vector<Model>& members() noexcept { return members_; }
    const std::vector<Model>& members() const noexcept { return members_; }

    // (k x n) eval-mode predictions.
    Eigen::MatrixXd member_predictions(const Matrix& inputs) const {
        Eigen::MatrixXd out(Eigen::Index(members_.size()), inputs.rows());
        for (std::size_t m = 0; m < members_.size(); ++m)
            out.row(Eigen::Index(m)) = members_[m].predict(inputs).template cast<double>().transpose();
        return out;
    }

    // Trains every member on the same data with its own stream (base seed,
    // member index). Members can run concurrently without changing results.
    std::vector<TrainHistory> train(const Matrix& inputs, std::span<const double> labels,
                                    const TrainPhaseConfig& phase, std::uint64_t seed, Stream stream,
                                    bool parallel = false) {
        std::vector<TrainHistory> histories(members_.size());
        auto run = [&](std::size_t m) {
            histories[m] = train_model(members_[m], inputs, labels, phase, derive_seed(seed, {tag(stream), m}));
        };
        if (parallel && members_.size() > 1) {
            std::vector<std::future<void>> jobs;
            for (std::size_t m = 0; m < members_.size(); ++m) jobs.push_back(std::async(std::launch::async, run, m));
            for (auto& j : jobs) j.get();
        } else {
            for (std::size_t m = 0; m < members_.size(); ++m) run(m);
        }
        return histories;
    }

private:
    MlpConfig config_;
    std::vector<Model> members_;
};

// Rows are members. Each row is de-meaned, then rows are averaged.
inline Eigen::VectorXd predict_consensus(const Eigen::MatrixXd& member_predictions) {
    if (member_predictions.rows() == 0 || member_predictions.cols() == 0)
        throw InvariantError("consensus of empty predictions");
    const Eigen::MatrixXd centered = member_predictions.colwise() - member_predictions.rowwise().mean();
    return centered.colwise().mean().transpose();
}

// Sample covariance (divisor k-1) across members of the de-meaned predictions;
// candidates x candidates.
inline Eigen::MatrixXd prediction_covariance(const Eigen::MatrixXd& member_predictions) {
    const auto k = member_predictions.rows();
    if (k < 2) throw InvariantError("prediction covariance needs at least 2 ensemble members");
    Eigen::MatrixXd centered = member_predictions.colwise() - member_predictions.rowwise().mean();
    centered.rowwise() -= centered.colwise().mean();
    Eigen::MatrixXd cov = (centered.transpose() * centered) / double(k - 1);
    // Enforce exact symmetry of the floating-point product.
    return (cov + cov.transpose()) * 0.5;
}

template <class T>
Eigen::VectorXd predict_consensus(const Ensemble<T>& ensemble, const typename Ensemble<T>::Matrix& inputs) {
    return predict_consensus(ensemble.member_predictions(inputs));
}

template <class T>
Eigen::MatrixXd prediction_covariance(const Ensemble<T>& ensemble, const typename Ensemble<T>::Matrix& inputs) {
    return prediction_covariance(ensemble.member_predictions(inputs));
}

struct WarmStartTarget {
    Variant variant;
    double naturalness = 0.0;
};

// All 19*L singles of the reference with their naturalness scores.
inline std::vector<WarmStartTarget> warm_start_targets(std::string_view reference, const LogProbMatrix& logprobs) {
    if (logprobs.length() < reference.size())
        throw InvariantError("log-prob matrix does not cover the reference");
    std::vector<WarmStartTarget> out;
    for (auto& v : all_single_mutants(reference)) {
        const double s = naturalness_score(v, logprobs, reference);
        out.push_back({std::move(v), s});
    }
    return out;
}

struct EnsembleSpec {
    std::size_t members = 5;
    std::vector<std::size_t> hidden_dims{100, 50};
    double dropout_p = 0.2;
    TrainPhaseConfig warm = TrainPhaseConfig::warm_start();
    TrainPhaseConfig activity = TrainPhaseConfig::activity();
    bool parallel = false;
};

struct WarmStartData {
    Eigen::MatrixXf inputs;
    std::vector<double> labels;
};

inline WarmStartData warm_start_data(std::string_view reference, const LogProbMatrix& logprobs,
                                     const EmbeddingStore& embeddings) {
    const auto targets = warm_start_targets(reference, logprobs);
    std::vector<Variant> vs;
    WarmStartData d;
    for (const auto& t : targets) {
        vs.push_back(t.variant);
        d.labels.push_back(t.naturalness);
    }
    d.inputs = embeddings.gather(vs);
    return d;
}

inline Ensemble<float> make_ensemble(const EnsembleSpec& spec, std::size_t input_dim, std::uint64_t seed) {
    MlpConfig c;
    c.input_dim = input_dim;
    c.hidden_dims = spec.hidden_dims;
    c.dropout_p = spec.dropout_p;
    return Ensemble<float>(c, spec.members, seed);
}

}  // namespace folde
