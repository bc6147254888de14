#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "folde/core/dataset.hpp"
#include "folde/core/embeddings.hpp"
#include "folde/core/logprobs.hpp"
#include "folde/ranker/ensemble.hpp"
#include "folde/selector.hpp"
#include "folde/service/state.hpp"
#include "folde/service/store.hpp"
#include "folde/sim/candidates.hpp"
#include "folde/sim/metrics.hpp"
#include "folde/sim/stats.hpp"
#include "folde/zeroshot.hpp"

namespace folde::service {

struct Artifacts {
    EmbeddingStore embeddings{1};
    LogProbMatrix logprobs;
    std::optional<Dataset> ground_truth;
};

inline Artifacts load_artifacts(const CampaignState& s) {
    Artifacts a{load_embeddings(s.embeddings_path), load_logprobs(s.logprobs_path), std::nullopt};
    a.logprobs.check_covers(s.reference);
    if (!s.ground_truth_path.empty()) {
        a.ground_truth = load_dataset(s.ground_truth_path);
        if (a.ground_truth->reference() != s.reference)
            throw InvariantError("ground-truth dataset has a different reference sequence");
    }
    return a;
}

// Model outputs over the round's candidate set (rounds >= 2).
struct LivePlan {
    std::vector<Variant> candidates;
    Eigen::VectorXd consensus;
    Eigen::MatrixXd cov;
    double alpha = 0.0;
};

inline VariantSet proposed_so_far(const CampaignState& s) {
    VariantSet seen;
    for (const auto& r : s.rounds)
        for (const auto& p : r.proposal) seen.insert(p.variant);
    return seen;
}

// Successful measurements grouped by round; failed entries are left out.
inline std::vector<std::vector<Record>> measured_records(const CampaignState& s) {
    std::vector<std::vector<Record>> out;
    for (const auto& r : s.rounds) {
        std::vector<Record> round;
        for (const auto& m : r.measurements)
            if (m.activity) round.push_back({m.variant, *m.activity});
        out.push_back(std::move(round));
    }
    return out;
}

inline EnsembleSpec live_ensemble_spec(const CampaignConfig& c) {
    EnsembleSpec spec;
    spec.members = c.ensemble_members;
    return spec;
}

inline LivePlan plan_live_round(const CampaignState& s, const Artifacts& a) {
    const std::size_t round = s.next_round();
    if (round < 2) throw InvariantError("model-based planning starts at round 2");
    const auto by_round = measured_records(s);
    std::vector<Variant> train_variants;
    std::vector<double> labels;
    for (const auto& r : by_round)
        for (const auto& rec : r) {
            train_variants.push_back(rec.variant);
            labels.push_back(rec.activity);
        }
    if (std::adjacent_find(labels.begin(), labels.end(), std::not_equal_to<>()) == labels.end())
        throw StateError("need at least two distinct measured activities to train");

    const auto seen = proposed_so_far(s);
    VariantSet pool;
    for (const auto& v : a.embeddings.ids()) {
        check_against_reference(v, s.reference);
        if (!v.is_wild_type() && !seen.contains(v)) pool.insert(v);
    }

    LivePlan plan;
    plan.candidates = expand_candidates(by_round, s.reference, pool, round, s.config.parents_per_round);
    plan.alpha = s.config.alpha_for_round(round);

    const auto spec = live_ensemble_spec(s.config);
    const auto warm = warm_start_data(s.reference, a.logprobs, a.embeddings);
    auto ens = make_ensemble(spec, a.embeddings.dim(), derive_seed(s.config.seed, {tag(Stream::warm_start)}));
    ens.train(warm.inputs, warm.labels, spec.warm, derive_seed(s.config.seed, {tag(Stream::warm_start), 1}),
              Stream::warm_start, true);
    ens.train(a.embeddings.gather(train_variants), labels, spec.activity,
              derive_seed(s.config.seed, {tag(Stream::activity), round}), Stream::activity, true);

    const Eigen::MatrixXd preds = ens.member_predictions(a.embeddings.gather(plan.candidates));
    plan.consensus = predict_consensus(preds);
    plan.cov = prediction_covariance(preds);
    return plan;
}

inline std::vector<ProposedVariant> compute_proposal(const CampaignState& s, const Artifacts& a, LiveRound& round) {
    std::vector<ProposedVariant> out;
    if (s.next_round() == 1) {
        const auto seen = proposed_so_far(s);
        std::vector<Variant> singles;
        for (auto& v : all_single_mutants(s.reference))
            if (!seen.contains(v)) singles.push_back(std::move(v));
        const auto n = std::min(s.config.batch_size, singles.size());
        for (auto& v : zero_shot_select(singles, a.logprobs, s.reference, n, s.config.per_locus_cap)) {
            const double nat = naturalness_score(v, a.logprobs, s.reference);
            out.push_back({std::move(v), nat, std::nullopt, std::nullopt});
        }
        return out;
    }
    const auto plan = plan_live_round(s, a);
    round.alpha = plan.alpha;
    const auto n = std::min(s.config.batch_size, plan.candidates.size());
    const Eigen::VectorXd ucb = ucb_score(plan.consensus, plan.cov, s.config.ucb_beta);
    for (auto k : constant_liar_select(plan.consensus, plan.cov, n, plan.alpha, s.config.ucb_beta)) {
        const auto& v = plan.candidates[k];
        out.push_back({v, naturalness_score(v, a.logprobs, s.reference), plan.consensus(Eigen::Index(k)),
                       ucb(Eigen::Index(k))});
    }
    return out;
}

struct MeasurementInput {
    std::string variant;
    std::optional<double> activity;  // empty = failed
};

struct CreateRequest {
    std::string id;  // empty = generated
    std::string reference;  // empty = taken from the ground-truth dataset
    std::string embeddings;
    std::string logprobs;
    std::string ground_truth;
    CampaignConfig config;
};

// Campaign operations over a Store. Each mutating call holds the campaign's
// file lock for its whole duration, so requests on one campaign serialize.
class CampaignService {
public:
    explicit CampaignService(std::filesystem::path data_dir) : store_(std::move(data_dir)) {}

    const Store& store() const noexcept { return store_; }

    std::vector<std::string> list() const { return store_.list(); }

    CampaignState get(const std::string& id) const { return store_.load(id); }

    CampaignState create(CreateRequest req) {
        FileLock global(store_.dir() / ".create.lock");
        CampaignState s;
        s.id = req.id.empty() ? store_.next_free_id() : req.id;
        if (!valid_campaign_id(s.id)) throw ParseError("invalid campaign id '" + s.id + "'");
        FileLock lock(store_.lock_path(s.id));
        if (store_.exists(s.id)) throw StateError("campaign '" + s.id + "' already exists");
        if (req.embeddings.empty() || req.logprobs.empty())
            throw ParseError("embeddings and logprobs paths are required");
        s.embeddings_path = std::filesystem::absolute(req.embeddings).string();
        s.logprobs_path = std::filesystem::absolute(req.logprobs).string();
        if (!req.ground_truth.empty()) s.ground_truth_path = std::filesystem::absolute(req.ground_truth).string();
        s.reference = req.reference;
        if (s.reference.empty()) {
            if (s.ground_truth_path.empty()) throw ParseError("reference sequence is required");
            s.reference = load_dataset(s.ground_truth_path).reference();
        }
        check_sequence(s.reference);
        req.config.validate();
        s.config = req.config;
        s.status = Status::ready_to_propose;
        (void)load_artifacts(s);
        store_.save(s);
        return s;
    }

    // The proposal is written to disk before it is returned.
    LiveRound propose(const std::string& id) {
        FileLock lock(store_.lock_path(id));
        auto s = store_.load(id);
        if (s.status == Status::awaiting_measurements)
            throw StateError("round " + std::to_string(s.rounds.size()) + " is still awaiting measurements");
        if (s.status == Status::complete) throw StateError("campaign is complete");
        const auto artifacts = load_artifacts(s);
        LiveRound round;
        round.round = s.next_round();
        round.proposal = compute_proposal(s, artifacts, round);
        if (round.proposal.empty()) throw StateError("candidate pool exhausted");
        s.rounds.push_back(round);
        s.status = Status::awaiting_measurements;
        store_.save(s);
        return round;
    }

    // Variants of the open batch that are not submitted are marked failed.
    CampaignState record(const std::string& id, std::span<const MeasurementInput> inputs) {
        FileLock lock(store_.lock_path(id));
        auto s = store_.load(id);
        if (s.status != Status::awaiting_measurements || s.rounds.empty())
            throw StateError("no proposal is awaiting measurements");
        auto& round = s.rounds.back();
        std::unordered_map<Variant, std::optional<double>, VariantHash> given;
        for (const auto& in : inputs) {
            auto v = parse_variant(in.variant, s.reference);
            if (in.activity && !std::isfinite(*in.activity))
                throw ParseError("activity for " + in.variant + " is not finite");
            const bool in_batch = std::any_of(round.proposal.begin(), round.proposal.end(),
                                              [&](const ProposedVariant& p) { return p.variant == v; });
            if (!in_batch) throw InvariantError("variant " + render(v) + " is not in the current batch");
            if (!given.emplace(v, in.activity).second)
                throw InvariantError("duplicate measurement for " + render(v));
        }
        round.measurements.clear();
        for (const auto& p : round.proposal) {
            const auto it = given.find(p.variant);
            round.measurements.push_back({p.variant, it == given.end() ? std::nullopt : it->second});
        }
        round.measured = true;
        s.status = s.config.max_rounds && s.rounds.size() >= s.config.max_rounds ? Status::complete
                                                                                   : Status::ready_to_propose;
        store_.save(s);
        return s;
    }

    json metrics(const std::string& id) const {
        const auto s = store_.load(id);
        std::optional<Dataset> truth;
        if (!s.ground_truth_path.empty()) truth = load_dataset(s.ground_truth_path);
        std::optional<HitThresholds> thr;
        if (truth) thr = HitThresholds::of(*truth);
        json rounds = json::array();
        std::vector<Variant> history;
        std::size_t cumulative = 0;
        bool top1 = false;
        for (const auto& r : s.rounds) {
            std::vector<Variant> batch;
            std::vector<double> acts;
            std::size_t failed = 0;
            for (const auto& p : r.proposal) batch.push_back(p.variant);
            for (const auto& m : r.measurements) {
                if (m.activity)
                    acts.push_back(*m.activity);
                else
                    ++failed;
            }
            const auto div = batch_loci_diversity(batch, history);
            json jr{{"round", r.round},
                    {"alpha", optional_json(r.alpha)},
                    {"proposed", r.proposal.size()},
                    {"measured", acts.size()},
                    {"failed", failed},
                    {"complete", r.measured},
                    {"unique_loci", div.unique_loci},
                    {"new_loci", div.new_loci},
                    {"best_activity", acts.empty() ? json(nullptr) : json(*std::max_element(acts.begin(), acts.end()))},
                    {"mean_activity", acts.empty() ? json(nullptr) : json(mean_of(acts))}};
            if (truth) {
                std::size_t hits = 0;
                for (const auto& v : batch) {
                    const auto i = truth->find(v);
                    if (!i) continue;
                    const double act = (*truth)[*i].activity;
                    hits += act >= thr->top_decile;
                    top1 = top1 || act >= thr->top_percentile;
                }
                cumulative += hits;
                jr["round_hits"] = hits;
                jr["cumulative_hits"] = cumulative;
                jr["cumulative_top1"] = top1;
            }
            history.insert(history.end(), batch.begin(), batch.end());
            rounds.push_back(std::move(jr));
        }
        return json{{"id", s.id}, {"status", status_name(s.status)}, {"ground_truth", truth.has_value()},
                    {"rounds", rounds}};
    }

private:
    Store store_;
};

}  // namespace folde::service
