#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "folde/core/dataset.hpp"
#include "folde/error.hpp"
#include "folde/sim/campaign.hpp"
#include "folde/sim/stats.hpp"

namespace folde {

using detail::format_real;

// Results file: one tab-separated row per (target, policy, replicate, round).
// Empty cells mean "not applicable" (no model Spearman, no alpha).
inline constexpr std::string_view kResultsHeader =
    "target\tpolicy\treplicate\tround\tn_selected\tround_hits\tcumulative_hits\tcumulative_top1\t"
    "heldout_spearman\tunique_loci\tnew_loci\talpha\tbatch";

struct ResultRow {
    std::string target;
    std::string policy;
    std::size_t replicate = 0;
    std::size_t round = 0;
    std::size_t n_selected = 0;
    std::size_t round_hits = 0;
    std::size_t cumulative_hits = 0;
    bool cumulative_top1 = false;
    std::optional<double> heldout_spearman;
    std::size_t unique_loci = 0;
    std::size_t new_loci = 0;
    std::optional<double> alpha;
    std::string batch;  // variants joined with ','

    friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct ReplicateResult {
    std::string target;
    Policy policy = Policy::random;
    std::size_t replicate = 0;
    std::vector<RoundRecord> rounds;
};

inline std::vector<ResultRow> to_rows(const ReplicateResult& r) {
    std::vector<ResultRow> rows;
    for (const auto& rec : r.rounds) {
        ResultRow row;
        row.target = r.target;
        row.policy = std::string(policy_name(r.policy));
        row.replicate = r.replicate;
        row.round = rec.round;
        row.n_selected = rec.batch.size();
        row.round_hits = rec.round_hits;
        row.cumulative_hits = rec.cumulative_hits;
        row.cumulative_top1 = rec.cumulative_top1;
        row.heldout_spearman = rec.heldout_spearman;
        row.unique_loci = rec.unique_loci;
        row.new_loci = rec.new_loci;
        row.alpha = rec.alpha;
        for (std::size_t i = 0; i < rec.batch.size(); ++i) row.batch += (i ? "," : "") + render(rec.batch[i]);
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace detail {

inline std::string format_optional(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) return out;
        start = tab + 1;
    }
}

inline std::size_t parse_count(std::string_view text, std::string_view what) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ParseError("bad " + std::string(what) + " '" + std::string(text) + "'");
    return v;
}

}  // namespace detail

inline void write_results_header(std::ostream& out) { out << kResultsHeader << '\n'; }

inline void write_result_row(std::ostream& out, const ResultRow& r) {
    out << r.target << '\t' << r.policy << '\t' << r.replicate << '\t' << r.round << '\t' << r.n_selected << '\t'
        << r.round_hits << '\t' << r.cumulative_hits << '\t' << (r.cumulative_top1 ? 1 : 0) << '\t'
        << detail::format_optional(r.heldout_spearman) << '\t' << r.unique_loci << '\t' << r.new_loci << '\t'
        << detail::format_optional(r.alpha) << '\t' << r.batch << '\n';
}

inline void write_results(std::ostream& out, std::span<const ResultRow> rows) {
    write_results_header(out);
    for (const auto& r : rows) write_result_row(out, r);
}

inline std::vector<ResultRow> read_results(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || detail::strip_cr(line) != kResultsHeader) throw ParseError("results: bad header");
    std::vector<ResultRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = detail::strip_cr(line);
        if (text.empty()) continue;
        const auto f = detail::split_tabs(text);
        if (f.size() != 13) throw ParseError("results line " + std::to_string(lineno) + ": expected 13 fields");
        ResultRow r;
        r.target = std::string(f[0]);
        r.policy = std::string(f[1]);
        r.replicate = detail::parse_count(f[2], "replicate");
        r.round = detail::parse_count(f[3], "round");
        r.n_selected = detail::parse_count(f[4], "n_selected");
        r.round_hits = detail::parse_count(f[5], "round_hits");
        r.cumulative_hits = detail::parse_count(f[6], "cumulative_hits");
        const auto top1 = detail::parse_count(f[7], "cumulative_top1");
        if (top1 > 1) throw ParseError("cumulative_top1 must be 0 or 1");
        r.cumulative_top1 = top1 == 1;
        if (!f[8].empty()) r.heldout_spearman = detail::parse_real(f[8], "heldout_spearman");
        r.unique_loci = detail::parse_count(f[9], "unique_loci");
        r.new_loci = detail::parse_count(f[10], "new_loci");
        if (!f[11].empty()) r.alpha = detail::parse_real(f[11], "alpha");
        r.batch = std::string(f[12]);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::vector<ResultRow> load_results(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return read_results(in);
}

// Aggregates over replicates for one (target, policy, round).
struct PolicyRoundSummary {
    std::string target;
    std::string policy;
    std::size_t round = 0;
    std::size_t replicates = 0;
    double mean_cumulative_hits = 0.0;
    double sem_cumulative_hits = 0.0;
    double top1_probability = 0.0;
    std::optional<double> mean_heldout_spearman;
    double mean_unique_loci = 0.0;
    double mean_new_loci = 0.0;
};

inline std::vector<PolicyRoundSummary> summarize(std::span<const ResultRow> rows) {
    std::map<std::tuple<std::string, std::string, std::size_t>, std::vector<const ResultRow*>> groups;
    for (const auto& r : rows) groups[{r.target, r.policy, r.round}].push_back(&r);
    std::vector<PolicyRoundSummary> out;
    for (const auto& [key, members] : groups) {
        PolicyRoundSummary s;
        std::tie(s.target, s.policy, s.round) = key;
        s.replicates = members.size();
        std::vector<double> hits, rho;
        double top1 = 0, uniq = 0, fresh = 0;
        for (const auto* r : members) {
            hits.push_back(double(r->cumulative_hits));
            if (r->heldout_spearman) rho.push_back(*r->heldout_spearman);
            top1 += r->cumulative_top1;
            uniq += double(r->unique_loci);
            fresh += double(r->new_loci);
        }
        const double n = double(members.size());
        s.mean_cumulative_hits = mean_of(hits);
        if (hits.size() > 1) {
            double ss = 0;
            for (double h : hits) ss += (h - s.mean_cumulative_hits) * (h - s.mean_cumulative_hits);
            s.sem_cumulative_hits = std::sqrt(ss / (n - 1) / n);
        }
        s.top1_probability = top1 / n;
        if (!rho.empty()) s.mean_heldout_spearman = mean_of(rho);
        s.mean_unique_loci = uniq / n;
        s.mean_new_loci = fresh / n;
        out.push_back(std::move(s));
    }
    return out;
}

// Policy vs baseline across targets, on final-round mean cumulative hits.
// Differences are log(mean_policy) - log(mean_baseline); a zero mean is
// replaced by half a hit per replicate so the log stays finite.
struct PolicyComparison {
    std::string policy;
    std::string baseline;
    std::size_t targets = 0;
    double mean_log_ratio = 0.0;
    std::optional<WilcoxonResult> test;
};

inline double log_mean_hits(double mean_hits, std::size_t replicates) {
    const double floor = 0.5 / double(std::max<std::size_t>(replicates, 1));
    return std::log(std::max(mean_hits, floor));
}

inline PolicyComparison compare_policies(std::span<const PolicyRoundSummary> summary, const std::string& policy,
                                         const std::string& baseline) {
    std::map<std::string, std::pair<const PolicyRoundSummary*, const PolicyRoundSummary*>> final_round;
    for (const auto& s : summary) {
        auto& slot = final_round[s.target];
        auto pick = [&](const PolicyRoundSummary*& p) {
            if (!p || s.round > p->round) p = &s;
        };
        if (s.policy == policy) pick(slot.first);
        if (s.policy == baseline) pick(slot.second);
    }
    PolicyComparison c{policy, baseline, 0, 0.0, std::nullopt};
    std::vector<double> diffs;
    for (const auto& [target, pair] : final_round) {
        if (!pair.first || !pair.second) continue;
        diffs.push_back(log_mean_hits(pair.first->mean_cumulative_hits, pair.first->replicates) -
                        log_mean_hits(pair.second->mean_cumulative_hits, pair.second->replicates));
    }
    c.targets = diffs.size();
    if (!diffs.empty()) c.mean_log_ratio = mean_of(diffs);
    if (std::any_of(diffs.begin(), diffs.end(), [](double d) { return d != 0.0; })) c.test = wilcoxon_one_sided(diffs);
    return c;
}

// Human-readable table plus plot-ready long-format series.
inline void write_summary_table(std::ostream& out, std::span<const PolicyRoundSummary> summary) {
    out << "target\tpolicy\tround\treplicates\tmean_cumulative_hits\tsem\ttop1_probability\tmean_heldout_spearman\t"
           "mean_unique_loci\tmean_new_loci\n";
    for (const auto& s : summary)
        out << s.target << '\t' << s.policy << '\t' << s.round << '\t' << s.replicates << '\t'
            << format_real(s.mean_cumulative_hits) << '\t' << format_real(s.sem_cumulative_hits) << '\t'
            << format_real(s.top1_probability) << '\t' << detail::format_optional(s.mean_heldout_spearman) << '\t'
            << format_real(s.mean_unique_loci) << '\t' << format_real(s.mean_new_loci) << '\n';
}

inline void write_series(std::ostream& out, std::span<const PolicyRoundSummary> summary) {
    out << "series\ttarget\tpolicy\tx\ty\n";
    auto emit = [&](std::string_view name, const PolicyRoundSummary& s, double y) {
        out << name << '\t' << s.target << '\t' << s.policy << '\t' << s.round << '\t' << format_real(y) << '\n';
    };
    for (const auto& s : summary) {
        emit("cumulative_hits", s, s.mean_cumulative_hits);
        emit("top1_probability", s, s.top1_probability);
        if (s.mean_heldout_spearman) emit("heldout_spearman", s, *s.mean_heldout_spearman);
        emit("unique_loci", s, s.mean_unique_loci);
        emit("new_loci", s, s.mean_new_loci);
    }
}

}  // namespace folde
