#pragma once

#include <algorithm>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "folde/core/dataset.hpp"
#include "folde/core/variant.hpp"
#include "folde/error.hpp"

namespace folde {

inline constexpr std::size_t kDefaultParentsPerRound = 4;

using VariantSet = std::unordered_set<Variant, VariantHash>;

// Variants one substitution away: revert a mutation, change its residue, or
// add a mutation at an unmutated position.
inline std::vector<Variant> single_mutation_neighbors(const Variant& v, std::string_view reference) {
    std::vector<Variant> out;
    const auto& ms = v.mutations();
    for (std::size_t i = 0; i < ms.size(); ++i) {
        std::vector<Mutation> rest;
        for (std::size_t j = 0; j < ms.size(); ++j)
            if (j != i) rest.push_back(ms[j]);
        out.emplace_back(rest);
        for (char aa : kAlphabet) {
            if (aa == ms[i].from_aa || aa == ms[i].to_aa) continue;
            auto changed = ms;
            changed[i].to_aa = aa;
            out.emplace_back(std::move(changed));
        }
    }
    for (std::size_t p = 0; p < reference.size(); ++p) {
        const auto pos = std::uint32_t(p + 1);
        if (v.mutates(pos)) continue;
        for (char aa : kAlphabet) {
            if (aa == reference[p]) continue;
            auto added = ms;
            added.push_back(Mutation{pos, reference[p], aa});
            out.emplace_back(std::move(added));
        }
    }
    return out;
}

// Wild type plus the top `per_round` measured variants of every completed round.
inline std::vector<Variant> expansion_parents(std::span<const std::vector<Record>> measured_by_round,
                                              std::size_t per_round = kDefaultParentsPerRound) {
    std::vector<Variant> parents{Variant::wild_type()};
    for (const auto& round : measured_by_round) {
        std::vector<const Record*> sorted;
        for (const auto& r : round) sorted.push_back(&r);
        std::sort(sorted.begin(), sorted.end(), [](const Record* a, const Record* b) {
            if (a->activity != b->activity) return a->activity > b->activity;
            return tie_break_less(a->variant, b->variant);
        });
        for (std::size_t k = 0; k < std::min(per_round, sorted.size()); ++k) parents.push_back(sorted[k]->variant);
    }
    return parents;
}

// Deduplicated single-mutation neighbours of the wild type and the expansion
// parents, restricted to `pool` (unmeasured, selectable variants), in
// generation order. Throws StateError when nothing is left.
inline std::vector<Variant> expand_candidates(std::span<const std::vector<Record>> measured_by_round,
                                              std::string_view reference, const VariantSet& pool, std::size_t round,
                                              std::size_t parents_per_round = kDefaultParentsPerRound) {
    if (round < 2) throw InvariantError("candidate expansion applies from round 2 on");
    VariantSet measured;
    for (const auto& r : measured_by_round)
        for (const auto& rec : r) measured.insert(rec.variant);
    VariantSet emitted;
    std::vector<Variant> out;
    for (const auto& parent : expansion_parents(measured_by_round, parents_per_round)) {
        for (auto& n : single_mutation_neighbors(parent, reference)) {
            if (!pool.contains(n) || measured.contains(n) || emitted.contains(n)) continue;
            emitted.insert(n);
            out.push_back(std::move(n));
        }
    }
    if (out.empty()) throw StateError("candidate pool exhausted");
    return out;
}

}  // namespace folde
