#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "folde/core/dataset.hpp"
#include "folde/core/embeddings.hpp"
#include "folde/core/logprobs.hpp"
#include "folde/error.hpp"
#include "folde/random.hpp"
#include "folde/ranker/ensemble.hpp"
#include "folde/selector.hpp"
#include "folde/sim/candidates.hpp"
#include "folde/sim/forest.hpp"
#include "folde/sim/metrics.hpp"
#include "folde/sim/stats.hpp"
#include "folde/zeroshot.hpp"

namespace folde {

enum class Policy {
    random,
    zero_shot,
    random_forest,
    folde,
    folde_no_warmstart,
    folde_no_cl,
    ucb_topn,
    mse_net,
};

inline constexpr std::array kAllPolicies = {Policy::random,  Policy::zero_shot,          Policy::random_forest,
                                            Policy::folde,   Policy::folde_no_warmstart, Policy::folde_no_cl,
                                            Policy::ucb_topn, Policy::mse_net};

inline std::string_view policy_name(Policy p) {
    switch (p) {
        case Policy::random: return "random";
        case Policy::zero_shot: return "zero_shot";
        case Policy::random_forest: return "random_forest";
        case Policy::folde: return "folde";
        case Policy::folde_no_warmstart: return "folde_no_warmstart";
        case Policy::folde_no_cl: return "folde_no_cl";
        case Policy::ucb_topn: return "ucb_topn";
        case Policy::mse_net: return "mse_net";
    }
    return "?";
}

inline Policy parse_policy(std::string_view name) {
    for (auto p : kAllPolicies)
        if (policy_name(p) == name) return p;
    throw ParseError("unknown policy '" + std::string(name) + "'");
}

// Round 1 of these policies is naturalness zero-shot; the rest start random.
inline bool starts_zero_shot(Policy p) {
    return p == Policy::zero_shot || p == Policy::folde || p == Policy::folde_no_warmstart ||
           p == Policy::folde_no_cl || p == Policy::ucb_topn;
}

inline bool is_folde_family(Policy p) {
    return p == Policy::folde || p == Policy::folde_no_warmstart || p == Policy::folde_no_cl || p == Policy::ucb_topn;
}

inline constexpr double kExploitAlpha = 100.0;

struct SimConfig {
    std::size_t rounds = 3;
    std::size_t batch_size = 16;
    std::size_t replicates = 20;
    Policy policy = Policy::folde;
    // Alpha for rounds 2, 3, ...; the last entry repeats.
    std::vector<double> alpha_schedule{6.0, kExploitAlpha};
    std::uint64_t seed = 0;
    double holdout_fraction = 0.5;
    double ucb_beta = kDefaultUcbBeta;
    NoisePlacement noise_placement = NoisePlacement::per_step;
    std::size_t parents_per_round = kDefaultParentsPerRound;
    EnsembleSpec ensemble{};
    ForestConfig forest{};
    bool heldout_spearman = true;

    void validate() const {
        if (rounds < 1 || batch_size < 1 || replicates < 1) throw InvariantError("rounds, batch_size and replicates must be >= 1");
        if (alpha_schedule.empty()) throw InvariantError("alpha schedule is empty");
        for (double a : alpha_schedule)
            if (!std::isfinite(a) || a < 0) throw InvariantError("alpha values must be finite and >= 0");
        if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) throw InvariantError("holdout fraction must be in [0, 1)");
    }

    double alpha_for_round(std::size_t round, Policy p) const {
        if (p == Policy::folde_no_cl) return kExploitAlpha;
        const std::size_t k = round >= 2 ? round - 2 : 0;
        return alpha_schedule[std::min(k, alpha_schedule.size() - 1)];
    }
};

struct SimInputs {
    const Dataset* dataset = nullptr;
    const EmbeddingStore* embeddings = nullptr;
    const LogProbMatrix* logprobs = nullptr;
    std::string target = "target";
};

// Dataset with a random visible/holdout split. Only visible variants may be
// selected; hit thresholds always come from the whole dataset.
class LandscapeOracle {
public:
    LandscapeOracle(const Dataset& ds, std::uint64_t seed, double holdout_fraction = 0.5)
        : dataset_(&ds), thresholds_(HitThresholds::of(ds)), visible_mask_(ds.size(), 0) {
        std::vector<std::size_t> idx(ds.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        Rng rng(seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto n_hold = std::size_t(std::llround(holdout_fraction * double(ds.size())));
        holdout_.assign(idx.begin(), idx.begin() + std::ptrdiff_t(n_hold));
        visible_.assign(idx.begin() + std::ptrdiff_t(n_hold), idx.end());
        std::sort(holdout_.begin(), holdout_.end());
        std::sort(visible_.begin(), visible_.end());
        for (auto i : visible_) visible_mask_[i] = 1;
    }

    const Dataset& dataset() const noexcept { return *dataset_; }
    const std::vector<std::size_t>& visible() const noexcept { return visible_; }
    const std::vector<std::size_t>& holdout() const noexcept { return holdout_; }
    bool is_visible(std::size_t record) const { return visible_mask_.at(record) != 0; }
    const HitThresholds& thresholds() const noexcept { return thresholds_; }

    double measure(std::size_t record) const {
        if (!is_visible(record)) throw InvariantError("attempted to measure a held-out variant");
        return (*dataset_)[record].activity;
    }

private:
    const Dataset* dataset_;
    HitThresholds thresholds_;
    std::vector<char> visible_mask_;
    std::vector<std::size_t> visible_, holdout_;
};

struct RoundRecord {
    std::size_t round = 0;
    std::vector<Variant> batch;
    std::vector<double> activities;
    std::optional<double> heldout_spearman;
    std::size_t unique_loci = 0;
    std::size_t new_loci = 0;
    std::size_t round_hits = 0;
    std::size_t cumulative_hits = 0;
    bool cumulative_top1 = false;
    std::optional<double> alpha;
};

// Candidates and model outputs for the upcoming round.
struct RoundPlan {
    std::size_t round = 0;
    std::vector<std::size_t> candidates;  // dataset record indices
    Eigen::VectorXd scores;               // naturalness, consensus or forest prediction; empty for random
    Eigen::MatrixXd cov;                  // ensemble covariance (folde family only)
    std::optional<double> heldout_spearman;
    std::optional<double> alpha;
};

// Per-replicate iterative benchmark: plan a round, select a batch, measure it.
class SimCampaign {
public:
    SimCampaign(const SimInputs& inputs, const SimConfig& config, std::size_t replicate)
        : in_(inputs),
          cfg_(config),
          replicate_(replicate),
          oracle_(*inputs.dataset, derive_seed(config.seed, {tag(Stream::holdout), replicate}), config.holdout_fraction),
          measured_(inputs.dataset->size(), 0) {
        cfg_.validate();
        if (oracle_.visible().size() < cfg_.rounds * cfg_.batch_size)
            throw InvariantError("visible pool smaller than rounds x batch_size");
    }

    const LandscapeOracle& oracle() const noexcept { return oracle_; }
    const std::vector<RoundRecord>& rounds() const noexcept { return rounds_; }
    std::size_t next_round() const noexcept { return rounds_.size() + 1; }
    bool done() const noexcept { return rounds_.size() >= cfg_.rounds; }

    RoundPlan plan() {
        RoundPlan plan;
        plan.round = next_round();
        const Policy p = cfg_.policy;
        const auto available = available_records();
        if (plan.round == 1) {
            if (starts_zero_shot(p)) {
                for (auto i : available)
                    if (dataset()[i].variant.size() == 1) plan.candidates.push_back(i);
                if (plan.candidates.empty()) plan.candidates = available;
                plan.scores = naturalness_of(plan.candidates);
                if (cfg_.heldout_spearman) plan.heldout_spearman = safe_spearman(naturalness_of(oracle_.holdout()));
            } else {
                plan.candidates = available;
            }
            return plan;
        }
        switch (p) {
            case Policy::random:
                plan.candidates = available;
                break;
            case Policy::zero_shot:
                plan.candidates = available;
                plan.scores = naturalness_of(plan.candidates);
                break;
            case Policy::random_forest: {
                plan.candidates = available;
                const auto [x, y] = training_data();
                const auto forest =
                    rf_fit(x, y, cfg_.forest, derive_seed(cfg_.seed, {tag(Stream::forest), replicate_, plan.round}));
                plan.scores = rf_predict(forest, inputs_of(plan.candidates));
                if (cfg_.heldout_spearman)
                    plan.heldout_spearman = safe_spearman(rf_predict(forest, inputs_of(oracle_.holdout())));
                break;
            }
            case Policy::mse_net: {
                plan.candidates = available;
                auto ens = trained_ensemble(plan.round, /*warm=*/false, LossKind::mse);
                plan.scores = predict_consensus(ens, inputs_of(plan.candidates));
                if (cfg_.heldout_spearman)
                    plan.heldout_spearman = safe_spearman(predict_consensus(ens, inputs_of(oracle_.holdout())));
                break;
            }
            default: {
                plan.candidates = expanded_candidates(plan.round, available);
                auto ens = trained_ensemble(plan.round, p != Policy::folde_no_warmstart, LossKind::bradley_terry);
                const Eigen::MatrixXd preds = ens.member_predictions(inputs_of(plan.candidates));
                plan.scores = predict_consensus(preds);
                plan.cov = prediction_covariance(preds);
                if (p != Policy::ucb_topn) plan.alpha = cfg_.alpha_for_round(plan.round, p);
                if (cfg_.heldout_spearman)
                    plan.heldout_spearman = safe_spearman(predict_consensus(ens, inputs_of(oracle_.holdout())));
                break;
            }
        }
        return plan;
    }

    // Policy selection rule applied to a plan; returns record indices.
    std::vector<std::size_t> select(const RoundPlan& plan) const {
        const std::size_t n = std::min(cfg_.batch_size, plan.candidates.size());
        const Policy p = cfg_.policy;
        const bool zero_shot_round = plan.round == 1 ? starts_zero_shot(p) : p == Policy::zero_shot;
        if (plan.scores.size() == 0 && !zero_shot_round) {
            auto pool = plan.candidates;
            Rng rng(derive_seed(cfg_.seed, {tag(Stream::random_batch), replicate_, plan.round}));
            std::shuffle(pool.begin(), pool.end(), rng);
            pool.resize(n);
            return pool;
        }
        if (zero_shot_round) {
            std::vector<Variant> vs;
            for (auto i : plan.candidates) vs.push_back(dataset()[i].variant);
            const auto chosen = zero_shot_select(vs, *in_.logprobs, dataset().reference(), n, std::nullopt);
            std::vector<std::size_t> out;
            for (const auto& v : chosen) out.push_back(*dataset().find(v));
            return out;
        }
        std::vector<std::size_t> picks;
        if (p == Policy::ucb_topn)
            picks = top_n_select(ucb_score(plan.scores, plan.cov, cfg_.ucb_beta), n);
        else if (is_folde_family(p))
            picks = constant_liar_select(plan.scores, plan.cov, n, *plan.alpha, cfg_.ucb_beta, cfg_.noise_placement);
        else
            picks = top_n_select(plan.scores, n);
        std::vector<std::size_t> out;
        for (auto k : picks) out.push_back(plan.candidates[k]);
        return out;
    }

    const RoundRecord& commit(const RoundPlan& plan, const std::vector<std::size_t>& batch) {
        if (plan.round != next_round()) throw StateError("plan is not for the next round");
        RoundRecord rec;
        rec.round = plan.round;
        rec.heldout_spearman = plan.heldout_spearman;
        rec.alpha = plan.alpha;
        std::vector<Record> measured;
        for (auto i : batch) {
            if (measured_.at(i)) throw InvariantError("variant selected twice: " + render(dataset()[i].variant));
            const double a = oracle_.measure(i);
            measured_[i] = 1;
            rec.batch.push_back(dataset()[i].variant);
            rec.activities.push_back(a);
            measured.push_back({dataset()[i].variant, a});
            if (a >= oracle_.thresholds().top_decile) ++rec.round_hits;
            if (a >= oracle_.thresholds().top_percentile) rec.cumulative_top1 = true;
        }
        const auto div = batch_loci_diversity(rec.batch, history_);
        rec.unique_loci = div.unique_loci;
        rec.new_loci = div.new_loci;
        if (!rounds_.empty()) {
            rec.cumulative_hits = rounds_.back().cumulative_hits;
            rec.cumulative_top1 = rec.cumulative_top1 || rounds_.back().cumulative_top1;
        }
        rec.cumulative_hits += rec.round_hits;
        history_.insert(history_.end(), rec.batch.begin(), rec.batch.end());
        measured_by_round_.push_back(std::move(measured));
        rounds_.push_back(std::move(rec));
        return rounds_.back();
    }

    const RoundRecord& step() {
        const auto p = plan();
        return commit(p, select(p));
    }

    std::vector<RoundRecord> run() {
        while (!done()) step();
        return rounds_;
    }

    const Dataset& dataset() const noexcept { return *in_.dataset; }

    std::vector<std::size_t> available_records() const {
        std::vector<std::size_t> out;
        for (auto i : oracle_.visible())
            if (!measured_[i]) out.push_back(i);
        return out;
    }

private:
    Eigen::VectorXd naturalness_of(std::span<const std::size_t> records) const {
        Eigen::VectorXd s(Eigen::Index(records.size()));
        for (std::size_t k = 0; k < records.size(); ++k)
            s(Eigen::Index(k)) = naturalness_score(dataset()[records[k]].variant, *in_.logprobs, dataset().reference());
        return s;
    }

    Eigen::MatrixXf inputs_of(std::span<const std::size_t> records) const {
        std::vector<Variant> vs;
        vs.reserve(records.size());
        for (auto i : records) vs.push_back(dataset()[i].variant);
        return in_.embeddings->gather(vs);
    }

    std::pair<Eigen::MatrixXf, std::vector<double>> training_data() const {
        std::vector<std::size_t> idx;
        std::vector<double> y;
        for (const auto& round : measured_by_round_)
            for (const auto& r : round) {
                idx.push_back(*dataset().find(r.variant));
                y.push_back(r.activity);
            }
        return {inputs_of(idx), y};
    }

    std::optional<double> safe_spearman(const Eigen::VectorXd& predicted) const {
        const auto& hold = oracle_.holdout();
        if (hold.size() < 2) return std::nullopt;
        std::vector<double> a(predicted.data(), predicted.data() + predicted.size()), b;
        for (auto i : hold) b.push_back(dataset()[i].activity);
        try {
            return spearman(a, b);
        } catch (const NumericError&) {
            return std::nullopt;
        }
    }

    const Ensemble<float>& warm_snapshot() {
        if (!warm_) {
            const auto data = warm_start_data(dataset().reference(), *in_.logprobs, *in_.embeddings);
            auto ens = make_ensemble(cfg_.ensemble, in_.embeddings->dim(),
                                     derive_seed(cfg_.seed, {tag(Stream::warm_start), replicate_}));
            ens.train(data.inputs, data.labels, cfg_.ensemble.warm,
                      derive_seed(cfg_.seed, {tag(Stream::warm_start), replicate_, 1}), Stream::warm_start,
                      cfg_.ensemble.parallel);
            warm_ = std::make_unique<Ensemble<float>>(std::move(ens));
        }
        return *warm_;
    }

    // The warm-started snapshot depends only on the reference, so it is
    // trained once per replicate and copied before each round's fine-tune.
    Ensemble<float> trained_ensemble(std::size_t round, bool warm, LossKind loss) {
        Ensemble<float> ens = warm ? warm_snapshot()
                                   : make_ensemble(cfg_.ensemble, in_.embeddings->dim(),
                                                   derive_seed(cfg_.seed, {tag(Stream::member_init), replicate_, round}));
        const auto [x, y] = training_data();
        TrainPhaseConfig phase = cfg_.ensemble.activity;
        phase.loss = loss;
        ens.train(x, y, phase, derive_seed(cfg_.seed, {tag(Stream::activity), replicate_, round}), Stream::activity,
                  cfg_.ensemble.parallel);
        return ens;
    }

    std::vector<std::size_t> expanded_candidates(std::size_t round, const std::vector<std::size_t>& available) const {
        VariantSet pool;
        for (auto i : available) pool.insert(dataset()[i].variant);
        try {
            const auto vs = expand_candidates(measured_by_round_, dataset().reference(), pool, round,
                                              cfg_.parents_per_round);
            std::vector<std::size_t> out;
            for (const auto& v : vs) out.push_back(*dataset().find(v));
            return out;
        } catch (const StateError&) {
            return available;
        }
    }

    SimInputs in_;
    SimConfig cfg_;
    std::size_t replicate_;
    LandscapeOracle oracle_;
    std::vector<char> measured_;
    std::vector<std::vector<Record>> measured_by_round_;
    std::vector<Variant> history_;
    std::vector<RoundRecord> rounds_;
    std::unique_ptr<Ensemble<float>> warm_;
};

// Per-replicate summary of a finished campaign.
struct CampaignMetrics {
    std::vector<std::size_t> cumulative_hits;  // per round
    bool top_percentile_found = false;
};

struct CampaignOutcome {
    std::vector<RoundRecord> rounds;
    CampaignMetrics metrics;
};

inline CampaignOutcome run_campaign(const SimInputs& inputs, const SimConfig& config, std::size_t replicate) {
    SimCampaign c(inputs, config, replicate);
    CampaignOutcome out;
    out.rounds = c.run();
    for (const auto& r : out.rounds) out.metrics.cumulative_hits.push_back(r.cumulative_hits);
    out.metrics.top_percentile_found = !out.rounds.empty() && out.rounds.back().cumulative_top1;
    return out;
}

}  // namespace folde
