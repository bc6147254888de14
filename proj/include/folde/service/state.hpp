#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "folde/core/variant.hpp"
#include "folde/error.hpp"

namespace folde::service {

using nlohmann::json;

enum class Status { ready_to_propose, awaiting_measurements, complete };

inline std::string_view status_name(Status s) {
    switch (s) {
        case Status::ready_to_propose: return "ready_to_propose";
        case Status::awaiting_measurements: return "awaiting_measurements";
        case Status::complete: return "complete";
    }
    return "?";
}

inline Status parse_status(std::string_view s) {
    for (auto v : {Status::ready_to_propose, Status::awaiting_measurements, Status::complete})
        if (status_name(v) == s) return v;
    throw ParseError("unknown status '" + std::string(s) + "'");
}

struct CampaignConfig {
    std::size_t batch_size = 16;
    std::vector<double> alpha_schedule{6.0, 100.0};  // rounds 2, 3, ...; last entry repeats
    std::optional<std::size_t> per_locus_cap = 3;     // round-1 zero-shot only
    std::size_t max_rounds = 0;                       // 0 = open-ended
    std::size_t ensemble_members = 5;
    std::size_t parents_per_round = 4;
    double ucb_beta = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw InvariantError("batch_size must be >= 1");
        if (alpha_schedule.empty()) throw InvariantError("alpha_schedule is empty");
        for (double a : alpha_schedule)
            if (!std::isfinite(a) || a < 0) throw InvariantError("alpha values must be finite and >= 0");
        if (per_locus_cap && *per_locus_cap < 1) throw InvariantError("per_locus_cap must be >= 1");
        if (ensemble_members < 2) throw InvariantError("ensemble needs at least 2 members");
        if (!std::isfinite(ucb_beta) || ucb_beta < 0) throw InvariantError("ucb_beta must be finite and >= 0");
    }

    double alpha_for_round(std::size_t round) const {
        const std::size_t k = round >= 2 ? round - 2 : 0;
        return alpha_schedule[std::min(k, alpha_schedule.size() - 1)];
    }

    friend bool operator==(const CampaignConfig&, const CampaignConfig&) = default;
};

struct ProposedVariant {
    Variant variant;
    double naturalness = 0.0;
    std::optional<double> consensus;  // model outputs, absent in zero-shot rounds
    std::optional<double> ucb;

    friend bool operator==(const ProposedVariant&, const ProposedVariant&) = default;
};

struct Measurement {
    Variant variant;
    std::optional<double> activity;  // empty = failed / not measured

    friend bool operator==(const Measurement&, const Measurement&) = default;
};

struct LiveRound {
    std::size_t round = 0;
    std::optional<double> alpha;
    std::vector<ProposedVariant> proposal;
    std::vector<Measurement> measurements;  // empty until recorded; then one per proposed variant
    bool measured = false;

    friend bool operator==(const LiveRound&, const LiveRound&) = default;
};

struct CampaignState {
    std::string id;
    std::string reference;
    std::string embeddings_path;
    std::string logprobs_path;
    std::string ground_truth_path;  // optional dataset used only for metrics
    CampaignConfig config;
    std::vector<LiveRound> rounds;
    Status status = Status::ready_to_propose;

    std::size_t next_round() const noexcept { return rounds.size() + 1; }

    friend bool operator==(const CampaignState&, const CampaignState&) = default;
};

inline bool valid_campaign_id(std::string_view id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
    return true;
}

// ---- JSON mapping -------------------------------------------------------

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> optional_real(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    if (!j.at(key).is_number()) throw ParseError(std::string(key) + " must be a number");
    const double v = j.at(key).get<double>();
    if (!std::isfinite(v)) throw ParseError(std::string(key) + " must be finite");
    return v;
}

inline json to_json(const CampaignConfig& c) {
    return json{{"batch_size", c.batch_size},
                {"alpha_schedule", c.alpha_schedule},
                {"per_locus_cap", c.per_locus_cap ? json(*c.per_locus_cap) : json(nullptr)},
                {"max_rounds", c.max_rounds},
                {"ensemble_members", c.ensemble_members},
                {"parents_per_round", c.parents_per_round},
                {"ucb_beta", c.ucb_beta},
                {"seed", c.seed}};
}

// Missing keys keep their defaults, so requests may pass a partial config.
inline CampaignConfig config_from_json(const json& j, CampaignConfig c = {}) {
    if (!j.is_object()) throw ParseError("config must be an object");
    try {
        if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
        if (j.contains("alpha_schedule")) c.alpha_schedule = j.at("alpha_schedule").get<std::vector<double>>();
        if (j.contains("per_locus_cap"))
            c.per_locus_cap = j.at("per_locus_cap").is_null() ? std::nullopt
                                                              : std::optional(j.at("per_locus_cap").get<std::size_t>());
        if (j.contains("max_rounds")) c.max_rounds = j.at("max_rounds").get<std::size_t>();
        if (j.contains("ensemble_members")) c.ensemble_members = j.at("ensemble_members").get<std::size_t>();
        if (j.contains("parents_per_round")) c.parents_per_round = j.at("parents_per_round").get<std::size_t>();
        if (j.contains("ucb_beta")) c.ucb_beta = j.at("ucb_beta").get<double>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline json to_json(const ProposedVariant& p) {
    return json{{"variant", render(p.variant)},
                {"naturalness", p.naturalness},
                {"consensus", optional_json(p.consensus)},
                {"ucb", optional_json(p.ucb)}};
}

inline json to_json(const LiveRound& r) {
    json proposal = json::array(), measurements = json::array();
    for (const auto& p : r.proposal) proposal.push_back(to_json(p));
    for (const auto& m : r.measurements)
        measurements.push_back({{"variant", render(m.variant)}, {"activity", optional_json(m.activity)}});
    return json{{"round", r.round},
                {"alpha", optional_json(r.alpha)},
                {"measured", r.measured},
                {"proposal", proposal},
                {"measurements", measurements}};
}

inline json to_json(const CampaignState& s) {
    json rounds = json::array();
    for (const auto& r : s.rounds) rounds.push_back(to_json(r));
    return json{{"id", s.id},
                {"reference", s.reference},
                {"embeddings", s.embeddings_path},
                {"logprobs", s.logprobs_path},
                {"ground_truth", s.ground_truth_path},
                {"config", to_json(s.config)},
                {"status", status_name(s.status)},
                {"rounds", rounds}};
}

inline CampaignState state_from_json(const json& j) {
    try {
        CampaignState s;
        s.id = j.at("id").get<std::string>();
        s.reference = j.at("reference").get<std::string>();
        check_sequence(s.reference);
        s.embeddings_path = j.at("embeddings").get<std::string>();
        s.logprobs_path = j.at("logprobs").get<std::string>();
        s.ground_truth_path = j.value("ground_truth", std::string());
        s.config = config_from_json(j.at("config"));
        s.status = parse_status(j.at("status").get<std::string>());
        for (const auto& jr : j.at("rounds")) {
            LiveRound r;
            r.round = jr.at("round").get<std::size_t>();
            r.alpha = optional_real(jr, "alpha");
            r.measured = jr.at("measured").get<bool>();
            for (const auto& jp : jr.at("proposal"))
                r.proposal.push_back({parse_variant(jp.at("variant").get<std::string>(), s.reference),
                                      jp.at("naturalness").get<double>(), optional_real(jp, "consensus"),
                                      optional_real(jp, "ucb")});
            for (const auto& jm : jr.at("measurements"))
                r.measurements.push_back(
                    {parse_variant(jm.at("variant").get<std::string>(), s.reference), optional_real(jm, "activity")});
            s.rounds.push_back(std::move(r));
        }
        for (std::size_t i = 0; i < s.rounds.size(); ++i)
            if (s.rounds[i].round != i + 1) throw ParseError("rounds are not consecutive");
        return s;
    } catch (const json::exception& e) {
        throw ParseError(std::string("campaign state: ") + e.what());
    }
}

}  // namespace folde::service
