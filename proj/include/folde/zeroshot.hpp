#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "folde/core/logprobs.hpp"
#include "folde/core/variant.hpp"
#include "folde/error.hpp"

namespace folde {

// Sum over mutated positions of log P(mutant) - log P(wild type), taken from
// a single wild-type-conditioned log-probability matrix.
inline double naturalness_score(const Variant& variant, const LogProbMatrix& logprobs,
                                std::string_view reference) {
    double total = 0.0;
    for (const auto& m : variant.mutations()) {
        if (m.position > logprobs.length() || m.position > reference.size())
            throw InvariantError("position " + std::to_string(m.position) + " outside log-prob matrix of length " +
                                 std::to_string(logprobs.length()));
        const char wt = reference[m.position - 1];
        total += logprobs.at(m.position, m.to_aa) - logprobs.at(m.position, wt);
    }
    return total;
}

using NaturalnessTable = std::unordered_map<Variant, double, VariantHash>;

inline NaturalnessTable naturalness_table(std::span<const Variant> variants, const LogProbMatrix& logprobs,
                                          std::string_view reference) {
    NaturalnessTable table;
    table.reserve(variants.size());
    for (const auto& v : variants) table.emplace(v, naturalness_score(v, logprobs, reference));
    return table;
}

// Orders candidate indices by descending score; ties resolved by tie_break_less.
inline std::vector<std::size_t> rank_by_score(std::span<const Variant> candidates, std::span<const double> scores) {
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return tie_break_less(candidates[a], candidates[b]);
    });
    return order;
}

// Top-n candidates by naturalness, best first. With a per-locus cap, a
// candidate is skipped when any of its positions already has `cap` picks; the
// result may then be shorter than n.
inline std::vector<Variant> zero_shot_select(std::span<const Variant> candidates, const LogProbMatrix& logprobs,
                                             std::string_view reference, std::size_t n,
                                             std::optional<std::size_t> per_locus_cap = std::nullopt) {
    if (candidates.empty()) throw InvariantError("zero-shot selection needs candidates");
    if (n > candidates.size())
        throw InvariantError("cannot select " + std::to_string(n) + " of " + std::to_string(candidates.size()) +
                             " candidates");
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const auto& v : candidates) scores.push_back(naturalness_score(v, logprobs, reference));

    std::vector<Variant> out;
    out.reserve(n);
    std::unordered_map<std::uint32_t, std::size_t> per_locus;
    for (std::size_t idx : rank_by_score(candidates, scores)) {
        if (out.size() == n) break;
        const auto& v = candidates[idx];
        if (per_locus_cap) {
            const bool full = std::any_of(v.mutations().begin(), v.mutations().end(), [&](const Mutation& m) {
                return per_locus[m.position] >= *per_locus_cap;
            });
            if (full) continue;
            for (const auto& m : v.mutations()) ++per_locus[m.position];
        }
        out.push_back(v);
    }
    return out;
}

// Every single substitution of the reference, position-major in alphabet order.
inline std::vector<Variant> all_single_mutants(std::string_view reference) {
    std::vector<Variant> out;
    out.reserve(reference.size() * (kAlphabetSize - 1));
    for (std::size_t p = 0; p < reference.size(); ++p) {
        for (char aa : kAlphabet) {
            if (aa == reference[p]) continue;
            out.push_back(Variant::single(static_cast<std::uint32_t>(p + 1), reference[p], aa));
        }
    }
    return out;
}

}  // namespace folde
