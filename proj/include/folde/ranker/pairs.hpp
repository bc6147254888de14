#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "folde/error.hpp"
#include "folde/random.hpp"

namespace folde {

// Directed comparison: item `winner` has the strictly higher label.
struct Pair {
    std::uint32_t winner = 0;
    std::uint32_t loser = 0;

    friend bool operator==(const Pair&, const Pair&) = default;
};

// Result of split_pairs. Candidates that the training edges already imply
// through transitivity are set aside in `discarded`.
struct PairSplit {
    std::vector<Pair> train;
    std::vector<Pair> validation;
    std::vector<Pair> discarded;

    std::size_t total() const noexcept { return train.size() + validation.size() + discarded.size(); }
};

// One pair per unordered couple with unequal labels; ties produce nothing.
inline std::vector<Pair> enumerate_pairs(std::span<const double> labels) {
    if (labels.size() < 2) throw InvariantError("need at least 2 labels to form pairs");
    std::vector<Pair> pairs;
    for (std::uint32_t i = 0; i < labels.size(); ++i) {
        for (std::uint32_t j = i + 1; j < labels.size(); ++j) {
            if (labels[i] > labels[j])
                pairs.push_back({i, j});
            else if (labels[j] > labels[i])
                pairs.push_back({j, i});
        }
    }
    return pairs;
}

// Nodes reachable from `source` along winner->loser edges.
class ReachabilityIndex {
public:
    ReachabilityIndex(std::size_t item_count, std::span<const Pair> edges) : adjacency_(item_count) {
        for (const auto& e : edges) adjacency_[e.winner].push_back(e.loser);
    }

    std::vector<char> reachable_from(std::uint32_t source) const {
        std::vector<char> seen(adjacency_.size(), 0);
        std::deque<std::uint32_t> queue{source};
        seen[source] = 1;
        while (!queue.empty()) {
            const auto u = queue.front();
            queue.pop_front();
            for (auto w : adjacency_[u]) {
                if (!seen[w]) {
                    seen[w] = 1;
                    queue.push_back(w);
                }
            }
        }
        return seen;
    }

private:
    std::vector<std::vector<std::uint32_t>> adjacency_;
};

// Shuffles the pairs, assigns round(fraction * n) of them to training, and
// keeps a remaining pair for validation only if its winner cannot reach its
// loser through training edges (breadth-first search).
inline PairSplit split_pairs(std::span<const Pair> pairs, double fraction, std::uint64_t seed) {
    if (pairs.empty()) throw InvariantError("cannot split an empty pair set");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InvariantError("train fraction must be in (0, 1]");

    std::vector<Pair> shuffled(pairs.begin(), pairs.end());
    Rng rng(seed);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);

    const auto n = shuffled.size();
    const auto n_train = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * double(n))), 1, n);

    std::uint32_t max_item = 0;
    for (const auto& p : shuffled) max_item = std::max({max_item, p.winner, p.loser});

    PairSplit split;
    split.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    const ReachabilityIndex reach(max_item + 1, split.train);

    // Group candidates by winner so each source is searched once.
    std::vector<Pair> candidates(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return candidates[a].winner < candidates[b].winner; });
    std::vector<char> implied(candidates.size(), 0);
    std::vector<char> seen;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& c = candidates[order[k]];
        if (k == 0 || candidates[order[k - 1]].winner != c.winner) seen = reach.reachable_from(c.winner);
        implied[order[k]] = seen[c.loser];
    }
    for (std::size_t i = 0; i < candidates.size(); ++i)
        (implied[i] ? split.discarded : split.validation).push_back(candidates[i]);
    return split;
}

}  // namespace folde
