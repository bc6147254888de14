#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "folde/core/dataset.hpp"
#include "folde/core/variant.hpp"
#include "folde/error.hpp"

namespace folde {

inline constexpr double kLogProbRowTolerance = 1e-3;

inline double log_sum_exp(std::span<const double> xs) {
    const double m = *std::max_element(xs.begin(), xs.end());
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

// Per-position natural-log probabilities over kAlphabet; rows are normalized.
class LogProbMatrix {
public:
    LogProbMatrix(std::size_t length, std::vector<double> values)
        : length_(length), values_(std::move(values)) {
        if (length_ == 0) throw InvariantError("log-prob matrix has no positions");
        if (values_.size() != length_ * kAlphabetSize)
            throw InvariantError("log-prob matrix has wrong number of entries");
        for (std::size_t p = 0; p < length_; ++p) {
            const auto r = row(p + 1);
            for (double x : r) {
                if (!std::isfinite(x)) throw InvariantError("non-finite log-probability at row " + std::to_string(p + 1));
                if (x > 0.0) throw InvariantError("positive log-probability at row " + std::to_string(p + 1));
            }
            const double lse = log_sum_exp(r);
            if (std::abs(lse) > kLogProbRowTolerance)
                throw InvariantError("row " + std::to_string(p + 1) + " is not normalized (log-sum-exp " +
                                     detail::format_real(lse) + ")");
        }
    }

    // Normalizes each row of unnormalized logits with log-softmax.
    static LogProbMatrix from_logits(std::size_t length, std::vector<double> logits) {
        if (logits.size() != length * kAlphabetSize) throw InvariantError("logit table has wrong size");
        for (std::size_t p = 0; p < length; ++p) {
            std::span<double> r(logits.data() + p * kAlphabetSize, kAlphabetSize);
            const double lse = log_sum_exp(r);
            for (double& x : r) x = std::min(0.0, x - lse);
        }
        return LogProbMatrix(length, std::move(logits));
    }

    std::size_t length() const noexcept { return length_; }

    // position is 1-based
    std::span<const double> row(std::size_t position) const {
        if (position == 0 || position > length_) throw std::out_of_range("log-prob position");
        return {values_.data() + (position - 1) * kAlphabetSize, kAlphabetSize};
    }

    double at(std::size_t position, char aa) const {
        const int j = aa_index(aa);
        if (j < 0) throw InvariantError("not an amino acid: " + std::string(1, aa));
        return row(position)[static_cast<std::size_t>(j)];
    }

    const std::vector<double>& values() const noexcept { return values_; }

    void check_covers(std::string_view reference) const {
        if (reference.size() != length_)
            throw InvariantError("log-prob matrix has " + std::to_string(length_) +
                                 " rows but reference has length " + std::to_string(reference.size()));
    }

private:
    std::size_t length_;
    std::vector<double> values_;
};

// Tab-separated: header of the 20 letters (any order), then one row per position.
inline LogProbMatrix read_logprobs(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("log-prob file is empty");
    std::array<int, kAlphabetSize> column_to_canonical{};
    {
        std::vector<std::string_view> cols;
        std::string_view h = detail::strip_cr(line);
        std::size_t start = 0;
        while (true) {
            const auto tab = h.find('\t', start);
            cols.push_back(h.substr(start, tab == std::string_view::npos ? tab : tab - start));
            if (tab == std::string_view::npos) break;
            start = tab + 1;
        }
        if (cols.size() != kAlphabetSize) throw ParseError("log-prob header must list 20 amino acids");
        std::array<bool, kAlphabetSize> seen{};
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const int j = cols[c].size() == 1 ? aa_index(cols[c][0]) : -1;
            if (j < 0 || seen[static_cast<std::size_t>(j)])
                throw ParseError("bad log-prob header column '" + std::string(cols[c]) + "'");
            seen[static_cast<std::size_t>(j)] = true;
            column_to_canonical[c] = j;
        }
    }
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        std::string_view r = detail::strip_cr(line);
        if (r.empty()) continue;
        ++rows;
        std::array<double, kAlphabetSize> row{};
        std::size_t start = 0;
        for (std::size_t c = 0; c < kAlphabetSize; ++c) {
            const auto tab = r.find('\t', start);
            if ((tab == std::string_view::npos) != (c + 1 == kAlphabetSize))
                throw ParseError("log-prob row " + std::to_string(rows) + " must have 20 fields");
            const auto field = r.substr(start, tab == std::string_view::npos ? tab : tab - start);
            row[static_cast<std::size_t>(column_to_canonical[c])] = detail::parse_real(field, "log-probability");
            start = tab + 1;
        }
        values.insert(values.end(), row.begin(), row.end());
    }
    return LogProbMatrix(rows, std::move(values));
}

inline LogProbMatrix load_logprobs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open log-prob file " + path);
    return read_logprobs(in);
}

inline LogProbMatrix load_logprobs(const std::string& path, const Dataset& ds) {
    auto lp = load_logprobs(path);
    lp.check_covers(ds.reference());
    return lp;
}

inline void write_logprobs(std::ostream& out, const LogProbMatrix& lp) {
    for (std::size_t j = 0; j < kAlphabetSize; ++j) out << (j ? "\t" : "") << kAlphabet[j];
    out << '\n';
    for (std::size_t p = 1; p <= lp.length(); ++p) {
        const auto r = lp.row(p);
        for (std::size_t j = 0; j < kAlphabetSize; ++j) out << (j ? "\t" : "") << detail::format_real(r[j]);
        out << '\n';
    }
}

inline void save_logprobs(const std::string& path, const LogProbMatrix& lp) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    write_logprobs(out, lp);
}

}  // namespace folde
