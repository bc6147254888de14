#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "folde/error.hpp"
#include "folde/random.hpp"
#include "folde/ranker/loss.hpp"
#include "folde/ranker/mlp.hpp"
#include "folde/ranker/pairs.hpp"

namespace folde {

struct TrainPhaseConfig {
    std::size_t max_epochs = 200;
    std::size_t patience_epochs = 40;
    std::size_t validate_every = 10;
    double learning_rate = 3e-4;
    double weight_decay = 1e-5;
    double train_fraction = 0.8;
    // Items per minibatch; pairs are formed within a batch. 0 means full batch.
    std::size_t batch_items = 64;
    LossKind loss = LossKind::bradley_terry;

    static TrainPhaseConfig warm_start() { return {50, 20, 5}; }
    static TrainPhaseConfig activity() { return {200, 40, 10}; }

    void validate() const {
        if (max_epochs == 0) return;
        if (patience_epochs == 0 || validate_every == 0) throw InvariantError("patience and validate_every must be positive");
        if (patience_epochs < validate_every) throw InvariantError("patience must be >= validate_every");
        if (!(learning_rate > 0.0) || weight_decay < 0.0) throw InvariantError("bad optimizer settings");
        if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw InvariantError("train fraction must be in (0, 1]");
    }
};

inline constexpr std::size_t kMinTrainBatch = 4;
inline constexpr double kMinImprovement = 1e-6;

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::optional<double> validation_loss;
};

struct TrainHistory {
    std::vector<EpochLog> epochs;
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;  // 0 when no validation was possible
    std::optional<double> best_validation_loss;
    bool early_stopped = false;
    std::size_t train_pairs = 0;
    std::size_t validation_pairs = 0;
};

namespace detail {

// Splits `items` into minibatches; a tail smaller than kMinTrainBatch joins the previous batch.
inline std::vector<std::vector<std::uint32_t>> make_batches(std::vector<std::uint32_t> items, std::size_t batch_items,
                                                            Rng* shuffle_rng) {
    if (batch_items == 0 || items.size() <= batch_items) return {std::move(items)};
    if (shuffle_rng) std::shuffle(items.begin(), items.end(), *shuffle_rng);
    const std::size_t size = std::max(batch_items, kMinTrainBatch);
    std::vector<std::vector<std::uint32_t>> batches;
    for (std::size_t start = 0; start < items.size(); start += size) {
        const std::size_t end = std::min(items.size(), start + size);
        if (end - start < kMinTrainBatch && !batches.empty())
            batches.back().insert(batches.back().end(), items.begin() + std::ptrdiff_t(start), items.begin() + std::ptrdiff_t(end));
        else
            batches.emplace_back(items.begin() + std::ptrdiff_t(start), items.begin() + std::ptrdiff_t(end));
    }
    return batches;
}

template <class T>
std::vector<double> to_double(const typename Mlp<T>::Vector& v) {
    std::vector<double> out(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) out[std::size_t(i)] = double(v(i));
    return out;
}

}  // namespace detail

// Adam on the pairwise ranking loss (or MSE for the regression ablation),
// with early stopping on validation loss and best-validation weights restored.
template <class T>
TrainHistory train_model(Mlp<T>& model, const typename Mlp<T>::Matrix& inputs, std::span<const double> labels,
                         const TrainPhaseConfig& phase, std::uint64_t seed) {
    using Matrix = typename Mlp<T>::Matrix;
    using Vector = typename Mlp<T>::Vector;
    phase.validate();
    if (static_cast<std::size_t>(inputs.rows()) != labels.size())
        throw InvariantError("inputs and labels differ in length");
    if (static_cast<std::size_t>(inputs.cols()) != model.config().input_dim)
        throw InvariantError("input dimension does not match model");
    const auto n = static_cast<std::uint32_t>(labels.size());

    TrainHistory history;
    const std::vector<Pair> pairs = enumerate_pairs(labels);
    if (pairs.empty()) throw InvariantError("degenerate training set: all labels tie");
    if (phase.max_epochs == 0) return history;

    Rng rng(seed);
    std::vector<Pair> train_pairs, validation_pairs;
    std::vector<std::uint32_t> train_items, validation_items;
    if (phase.loss == LossKind::bradley_terry) {
        auto split = split_pairs(pairs, phase.train_fraction, rng());
        train_pairs = std::move(split.train);
        validation_pairs = std::move(split.validation);
        std::vector<char> used(n, 0);
        for (const auto& p : train_pairs) used[p.winner] = used[p.loser] = 1;
        for (std::uint32_t i = 0; i < n; ++i)
            if (used[i]) train_items.push_back(i);
    } else {
        std::vector<std::uint32_t> items(n);
        std::iota(items.begin(), items.end(), 0u);
        std::shuffle(items.begin(), items.end(), rng);
        const auto n_train = std::clamp<std::size_t>(std::size_t(std::llround(phase.train_fraction * n)), 1, n);
        train_items.assign(items.begin(), items.begin() + std::ptrdiff_t(n_train));
        validation_items.assign(items.begin() + std::ptrdiff_t(n_train), items.end());
        std::sort(train_items.begin(), train_items.end());
    }
    history.train_pairs = train_pairs.size();
    history.validation_pairs = validation_pairs.size();
    const bool can_validate = phase.loss == LossKind::bradley_terry ? !validation_pairs.empty() : !validation_items.empty();

    Adam<T> adam(model.parameters().size(), phase.learning_rate, phase.weight_decay);
    std::vector<T> best_params, best_running;
    double best = std::numeric_limits<double>::infinity();
    std::size_t last_improvement = 0;

    std::vector<std::int32_t> local(n, -1);
    std::vector<Pair> local_pairs;
    std::vector<std::uint32_t> local_items;
    std::vector<double> local_labels, grad;

    for (std::size_t epoch = 1; epoch <= phase.max_epochs; ++epoch) {
        const auto batches = detail::make_batches(train_items, phase.batch_items, &rng);
        double epoch_loss = 0.0;
        std::size_t epoch_terms = 0;
        for (const auto& batch : batches) {
            for (std::size_t k = 0; k < batch.size(); ++k) local[batch[k]] = std::int32_t(k);
            local_pairs.clear();
            local_items.clear();
            local_labels.assign(batch.size(), 0.0);
            for (std::size_t k = 0; k < batch.size(); ++k) {
                local_items.push_back(std::uint32_t(k));
                local_labels[k] = labels[batch[k]];
            }
            if (phase.loss == LossKind::bradley_terry) {
                for (const auto& p : train_pairs)
                    if (local[p.winner] >= 0 && local[p.loser] >= 0)
                        local_pairs.push_back({std::uint32_t(local[p.winner]), std::uint32_t(local[p.loser])});
            }
            for (auto i : batch) local[i] = -1;
            if (phase.loss == LossKind::bradley_terry && local_pairs.empty()) continue;

            Matrix xb(Eigen::Index(batch.size()), inputs.cols());
            for (std::size_t k = 0; k < batch.size(); ++k) xb.row(Eigen::Index(k)) = inputs.row(Eigen::Index(batch[k]));
            const auto scores = detail::to_double<T>(model.forward_train(xb, rng));
            double loss = 0.0;
            std::size_t terms = 0;
            if (phase.loss == LossKind::bradley_terry) {
                loss = bt_loss_grad(scores, local_pairs, grad);
                terms = local_pairs.size();
            } else {
                loss = mse_loss_grad(scores, local_labels, local_items, grad);
                terms = local_items.size();
            }
            Vector ds(Eigen::Index(grad.size()));
            for (std::size_t k = 0; k < grad.size(); ++k) ds(Eigen::Index(k)) = T(grad[k]);
            model.backward(ds);
            adam.step(model.parameters(), model.gradient());
            epoch_loss += loss * double(terms);
            epoch_terms += terms;
        }

        EpochLog log{epoch, epoch_terms ? epoch_loss / double(epoch_terms) : 0.0, std::nullopt};
        history.epochs_run = epoch;
        if (can_validate && epoch % phase.validate_every == 0) {
            const auto scores = detail::to_double<T>(model.predict(inputs));
            double vloss = 0.0;
            if (phase.loss == LossKind::bradley_terry) {
                vloss = bt_loss(scores, validation_pairs);
            } else {
                for (auto i : validation_items) vloss += (scores[i] - labels[i]) * (scores[i] - labels[i]);
                vloss /= double(validation_items.size());
            }
            log.validation_loss = vloss;
            if (vloss < best - kMinImprovement) {
                best = vloss;
                last_improvement = epoch;
                history.best_epoch = epoch;
                history.best_validation_loss = vloss;
                best_params.assign(model.parameters().begin(), model.parameters().end());
                best_running.assign(model.running_stats().begin(), model.running_stats().end());
            } else if (epoch - last_improvement >= phase.patience_epochs) {
                history.epochs.push_back(log);
                history.early_stopped = true;
                break;
            }
        }
        history.epochs.push_back(log);
    }
    if (!best_params.empty()) {
        std::copy(best_params.begin(), best_params.end(), model.parameters().begin());
        std::copy(best_running.begin(), best_running.end(), model.running_stats().begin());
    }
    return history;
}

}  // namespace folde
