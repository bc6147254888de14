#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "folde/core/dataset.hpp"
#include "folde/core/embeddings.hpp"
#include "folde/core/logprobs.hpp"
#include "folde/error.hpp"
#include "folde/random.hpp"
#include "folde/sim/stats.hpp"
#include "folde/zeroshot.hpp"

namespace folde {

struct SynthConfig {
    std::size_t length = 24;
    std::size_t n_variants = 0;  // 0: every allowed single (and no doubles)
    std::size_t max_order = 1;   // 1 or 2
    std::size_t subs_per_site = 19;
    double epistasis_strength = 0.0;
    double epistasis_density = 0.2;  // fraction of site pairs that couple
    double noise_sd = 0.1;
    double rho_target = 0.48;
    double rho_tolerance = 0.05;
    std::size_t embed_dim = 32;
    double embed_noise = 0.05;
    std::uint64_t seed = 1;

    void validate() const {
        if (length == 0 || embed_dim == 0) throw InvariantError("landscape length and embed_dim must be positive");
        if (max_order < 1 || max_order > 2) throw InvariantError("max_order must be 1 or 2");
        if (subs_per_site == 0 || subs_per_site > kAlphabetSize - 1) throw InvariantError("subs_per_site must be in [1, 19]");
        if (epistasis_strength < 0 || noise_sd < 0 || embed_noise < 0) throw InvariantError("scales must be >= 0");
        if (!(rho_target > -1.0 && rho_target < 1.0)) throw InvariantError("rho_target must be in (-1, 1)");
    }
};

// Ground truth behind a synthetic landscape.
struct LandscapeMetadata {
    std::vector<double> additive;   // L x 20 per-substitution effect, 0 for wild-type residues
    std::vector<double> epistasis;  // per dataset record
    std::vector<double> noise;      // per dataset record
    double naturalness_weight = 0.0;
    double naturalness_spearman = 0.0;  // over dataset singles

    double effect(std::uint32_t position, char aa) const {
        return additive[(position - 1) * kAlphabetSize + std::size_t(aa_index(aa))];
    }
};

struct SyntheticLandscape {
    Dataset dataset;
    EmbeddingStore embeddings;
    LogProbMatrix logprobs;
    LandscapeMetadata meta;
};

namespace detail {

inline std::vector<double> standardized(std::vector<double> v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double sd = std::sqrt(ss / double(v.size()));
    for (double& x : v) x = sd > 0 ? (x - m) / sd : 0.0;
    return v;
}

}  // namespace detail

// Desk-scale stand-in for a deep mutational scan: additive per-site effects,
// sparse pairwise epistasis and Gaussian noise; a log-probability matrix whose
// naturalness is calibrated to a target rank correlation with activity over
// the singles; embeddings that are a fixed random linear map of mutation
// indicators plus noise. Fully determined by the config.
inline SyntheticLandscape synth_landscape(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, {tag(Stream::landscape)}));
    std::normal_distribution<double> normal;
    const std::size_t L = cfg.length;

    std::string reference(L, 'A');
    {
        std::uniform_int_distribution<std::size_t> aa(0, kAlphabetSize - 1);
        for (auto& c : reference) c = kAlphabet[aa(rng)];
    }

    // Additive effects: site sensitivity x residue property plus idiosyncratic term.
    std::vector<double> site(L), prop(kAlphabetSize);
    for (auto& s : site) s = std::abs(normal(rng)) + 0.2;
    for (auto& h : prop) h = normal(rng);
    LandscapeMetadata meta;
    meta.additive.assign(L * kAlphabetSize, 0.0);
    for (std::size_t p = 0; p < L; ++p)
        for (std::size_t a = 0; a < kAlphabetSize; ++a)
            if (kAlphabet[a] != reference[p])
                meta.additive[p * kAlphabetSize + a] = site[p] * prop[a] + 0.5 * normal(rng);

    // Allowed substitutions per site.
    std::vector<std::vector<char>> allowed(L);
    for (std::size_t p = 0; p < L; ++p) {
        std::vector<char> subs;
        for (char c : kAlphabet)
            if (c != reference[p]) subs.push_back(c);
        std::shuffle(subs.begin(), subs.end(), rng);
        subs.resize(cfg.subs_per_site);
        std::sort(subs.begin(), subs.end());
        allowed[p] = std::move(subs);
    }

    std::vector<Variant> singles;
    for (std::size_t p = 0; p < L; ++p)
        for (char c : allowed[p]) singles.push_back(Variant::single(std::uint32_t(p + 1), reference[p], c));

    std::vector<Variant> variants;
    if (cfg.max_order == 1) {
        variants = singles;
        if (cfg.n_variants != 0) {
            if (cfg.n_variants > singles.size())
                throw InvariantError("n_variants exceeds the number of allowed singles");
            std::shuffle(variants.begin(), variants.end(), rng);
            variants.resize(cfg.n_variants);
            std::sort(variants.begin(), variants.end(), tie_break_less);
        }
    } else {
        variants = singles;
        const double max_doubles = double(L) * double(L - 1) / 2.0 * double(cfg.subs_per_site * cfg.subs_per_site);
        if (cfg.n_variants < singles.size() || double(cfg.n_variants - singles.size()) > 0.9 * max_doubles)
            throw InvariantError("n_variants must cover the singles and leave room to sample doubles");
        std::unordered_set<Variant, VariantHash> chosen;
        std::uniform_int_distribution<std::size_t> pos(0, L - 1), sub(0, cfg.subs_per_site - 1);
        std::vector<Variant> doubles;
        while (singles.size() + doubles.size() < cfg.n_variants) {
            const auto p = pos(rng), q = pos(rng);
            if (p == q) continue;
            Variant v({Mutation{std::uint32_t(p + 1), reference[p], allowed[p][sub(rng)]},
                       Mutation{std::uint32_t(q + 1), reference[q], allowed[q][sub(rng)]}});
            if (chosen.insert(v).second) doubles.push_back(std::move(v));
        }
        std::sort(doubles.begin(), doubles.end(), tie_break_less);
        variants.insert(variants.end(), doubles.begin(), doubles.end());
    }

    std::vector<double> coupling(L * L, 0.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t p = 0; p < L; ++p)
        for (std::size_t q = p + 1; q < L; ++q)
            if (unit(rng) < cfg.epistasis_density) coupling[p * L + q] = normal(rng);

    std::vector<Record> records;
    for (const auto& v : variants) {
        double a = 0.0;
        for (const auto& m : v.mutations()) a += meta.effect(m.position, m.to_aa);
        double epi = 0.0;
        const auto& ms = v.mutations();
        for (std::size_t i = 0; i < ms.size(); ++i)
            for (std::size_t j = i + 1; j < ms.size(); ++j) {
                const double c = coupling[(ms[i].position - 1) * L + (ms[j].position - 1)];
                if (c != 0.0) epi += cfg.epistasis_strength * c * normal(rng);
            }
        const double noise = cfg.noise_sd * normal(rng);
        meta.epistasis.push_back(epi);
        meta.noise.push_back(noise);
        records.push_back({v, a + epi + noise});
    }
    Dataset dataset(reference, std::move(records));

    // Naturalness = w * z(effect) + sqrt(1 - w^2) * xi, calibrated by bisection on w.
    std::vector<double> effects, xi;
    for (std::size_t p = 0; p < L; ++p)
        for (std::size_t a = 0; a < kAlphabetSize; ++a)
            if (kAlphabet[a] != reference[p]) {
                effects.push_back(meta.additive[p * kAlphabetSize + a]);
                xi.push_back(normal(rng));
            }
    const auto z = detail::standardized(effects);
    auto build_logprobs = [&](double w) {
        std::vector<double> logits(L * kAlphabetSize, 0.0);
        std::size_t k = 0;
        const double r = std::sqrt(std::max(0.0, 1.0 - w * w));
        for (std::size_t p = 0; p < L; ++p)
            for (std::size_t a = 0; a < kAlphabetSize; ++a)
                if (kAlphabet[a] != reference[p]) {
                    logits[p * kAlphabetSize + a] = w * z[k] + r * xi[k];
                    ++k;
                }
        return LogProbMatrix::from_logits(L, std::move(logits));
    };
    std::vector<std::size_t> single_records;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (dataset[i].variant.size() == 1) single_records.push_back(i);
    if (single_records.size() < 3) throw NumericError("calibration needs at least 3 singles in the dataset");
    auto measure = [&](const LogProbMatrix& lp) {
        std::vector<double> nat, act;
        for (auto i : single_records) {
            nat.push_back(naturalness_score(dataset[i].variant, lp, reference));
            act.push_back(dataset[i].activity);
        }
        return spearman(nat, act);
    };
    double lo = cfg.rho_target < 0 ? -1.0 : 0.0, hi = cfg.rho_target < 0 ? 0.0 : 1.0;
    double w = 0.5 * (lo + hi);
    double rho = 0.0;
    bool ok = false;
    for (int iter = 0; iter < 60; ++iter) {
        w = 0.5 * (lo + hi);
        rho = measure(build_logprobs(w));
        if (std::abs(rho - cfg.rho_target) <= cfg.rho_tolerance / 4) {
            ok = true;
            break;
        }
        (rho < cfg.rho_target ? lo : hi) = w;
    }
    if (!ok && std::abs(rho - cfg.rho_target) > cfg.rho_tolerance)
        throw NumericError("naturalness calibration failed: reached rho " + std::to_string(rho));
    meta.naturalness_weight = w;
    meta.naturalness_spearman = rho;
    LogProbMatrix logprobs = build_logprobs(w);

    // Embeddings: base + sum of mutation columns + per-variant noise.
    const std::size_t d = cfg.embed_dim;
    auto gaussian_block = [&](std::size_t n, double sd) {
        std::vector<double> v(n);
        for (auto& x : v) x = sd * normal(rng);
        return v;
    };
    const auto base = gaussian_block(d, 1.0);
    const auto site_vec = gaussian_block(L * d, 1.0);
    const auto aa_vec = gaussian_block(kAlphabetSize * d, 1.0);
    const auto own_vec = gaussian_block(L * kAlphabetSize * d, 0.5);
    EmbeddingStore embeddings(d);
    std::vector<float> row(d);
    auto embed = [&](const Variant& v) {
        Rng noise_rng(derive_seed(cfg.seed, {tag(Stream::landscape), VariantHash{}(v)}));
        std::normal_distribution<double> nd;
        for (std::size_t j = 0; j < d; ++j) {
            double x = base[j];
            for (const auto& m : v.mutations()) {
                const std::size_t p = m.position - 1, a = std::size_t(aa_index(m.to_aa));
                x += site_vec[p * d + j] + aa_vec[a * d + j] + own_vec[(p * kAlphabetSize + a) * d + j];
            }
            row[j] = float(x + cfg.embed_noise * nd(noise_rng));
        }
        embeddings.add(v, row);
    };
    for (const auto& v : all_single_mutants(reference)) embed(v);
    for (const auto& r : dataset.records())
        if (r.variant.size() > 1) embed(r.variant);

    return {std::move(dataset), std::move(embeddings), std::move(logprobs), std::move(meta)};
}

}  // namespace folde
