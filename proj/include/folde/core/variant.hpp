#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "folde/error.hpp"

namespace folde {

// Canonical amino-acid column order used by every file format.
inline constexpr std::string_view kAlphabet = "ACDEFGHIKLMNPQRSTVWY";
inline constexpr std::size_t kAlphabetSize = 20;

// Index of an amino-acid letter in kAlphabet, or -1.
constexpr int aa_index(char aa) noexcept {
    for (std::size_t i = 0; i < kAlphabet.size(); ++i) {
        if (kAlphabet[i] == aa) return static_cast<int>(i);
    }
    return -1;
}

constexpr bool is_amino_acid(char aa) noexcept { return aa_index(aa) >= 0; }

inline void check_sequence(std::string_view seq) {
    if (seq.empty()) throw InvariantError("reference sequence is empty");
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (!is_amino_acid(seq[i])) {
            throw InvariantError("reference sequence has non-canonical residue '" +
                                 std::string(1, seq[i]) + "' at position " + std::to_string(i + 1));
        }
    }
}

// A point substitution; position is 1-based.
struct Mutation {
    std::uint32_t position = 0;
    char from_aa = 'A';
    char to_aa = 'A';

    friend auto operator<=>(const Mutation&, const Mutation&) = default;
    friend bool operator==(const Mutation&, const Mutation&) = default;
};

inline std::string render(const Mutation& m) {
    return std::string(1, m.from_aa) + std::to_string(m.position) + std::string(1, m.to_aa);
}

// A set of point mutations relative to the reference, sorted by position with
// at most one mutation per position. The empty set is the wild type.
class Variant {
public:
    Variant() = default;

    explicit Variant(std::vector<Mutation> mutations) : mutations_(std::move(mutations)) {
        std::sort(mutations_.begin(), mutations_.end());
        for (std::size_t i = 0; i < mutations_.size(); ++i) {
            const auto& m = mutations_[i];
            if (m.position == 0) throw InvariantError("mutation position must be >= 1");
            if (!is_amino_acid(m.from_aa) || !is_amino_acid(m.to_aa))
                throw InvariantError("mutation " + render(m) + " uses a non-canonical residue");
            if (m.from_aa == m.to_aa)
                throw InvariantError("mutation " + render(m) + " does not change the residue");
            if (i > 0 && mutations_[i - 1].position == m.position)
                throw InvariantError("duplicate position " + std::to_string(m.position));
        }
    }

    static Variant wild_type() { return Variant{}; }

    static Variant single(std::uint32_t position, char from_aa, char to_aa) {
        return Variant({Mutation{position, from_aa, to_aa}});
    }

    const std::vector<Mutation>& mutations() const noexcept { return mutations_; }
    std::size_t size() const noexcept { return mutations_.size(); }
    bool is_wild_type() const noexcept { return mutations_.empty(); }

    bool mutates(std::uint32_t position) const noexcept {
        return std::any_of(mutations_.begin(), mutations_.end(),
                           [&](const Mutation& m) { return m.position == position; });
    }

    friend auto operator<=>(const Variant&, const Variant&) = default;
    friend bool operator==(const Variant&, const Variant&) = default;

private:
    std::vector<Mutation> mutations_;
};

// "WT" or colon-joined tokens in position order.
inline std::string render(const Variant& v) {
    if (v.is_wild_type()) return "WT";
    std::string out;
    for (const auto& m : v.mutations()) {
        if (!out.empty()) out += ':';
        out += render(m);
    }
    return out;
}

namespace detail {

inline Mutation parse_token(std::string_view tok) {
    if (tok.size() < 3) throw ParseError("malformed mutation token '" + std::string(tok) + "'");
    const char from = tok.front();
    const char to = tok.back();
    const auto digits = tok.substr(1, tok.size() - 2);
    std::uint32_t pos = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), pos);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.front() == '+' ||
        !is_amino_acid(from) || !is_amino_acid(to) || pos == 0) {
        throw ParseError("malformed mutation token '" + std::string(tok) + "'");
    }
    if (from == to) throw ParseError("mutation token '" + std::string(tok) + "' is synonymous");
    return Mutation{pos, from, to};
}

}  // namespace detail

// Syntax-only parse: no reference consistency checks.
inline Variant parse_variant_text(std::string_view text) {
    if (text == "WT") return Variant::wild_type();
    if (text.empty()) throw ParseError("empty variant text");
    std::vector<Mutation> muts;
    std::size_t start = 0;
    while (true) {
        const auto colon = text.find(':', start);
        const auto tok = text.substr(start, colon == std::string_view::npos ? colon : colon - start);
        muts.push_back(detail::parse_token(tok));
        if (colon == std::string_view::npos) break;
        start = colon + 1;
    }
    std::sort(muts.begin(), muts.end());
    for (std::size_t i = 1; i < muts.size(); ++i) {
        if (muts[i].position == muts[i - 1].position)
            throw ParseError("duplicate position " + std::to_string(muts[i].position) + " in '" +
                             std::string(text) + "'");
    }
    return Variant(std::move(muts));
}

// Throws InvariantError if any mutation disagrees with the reference.
inline void check_against_reference(const Variant& v, std::string_view reference) {
    for (const auto& m : v.mutations()) {
        if (m.position > reference.size())
            throw InvariantError("position " + std::to_string(m.position) +
                                 " out of range for reference of length " +
                                 std::to_string(reference.size()));
        if (reference[m.position - 1] != m.from_aa)
            throw InvariantError("mutation " + render(m) + " disagrees with reference residue '" +
                                 std::string(1, reference[m.position - 1]) + "'");
    }
}

inline Variant parse_variant(std::string_view text, std::string_view reference) {
    Variant v = parse_variant_text(text);
    check_against_reference(v, reference);
    return v;
}

// Ordering used for deterministic tie-breaks: lower position first, then
// alphabetical replacement residue, then fewer mutations.
inline bool tie_break_less(const Variant& a, const Variant& b) {
    const auto& x = a.mutations();
    const auto& y = b.mutations();
    const std::size_t n = std::min(x.size(), y.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i].position != y[i].position) return x[i].position < y[i].position;
        if (x[i].to_aa != y[i].to_aa) return x[i].to_aa < y[i].to_aa;
    }
    return x.size() < y.size();
}

struct VariantHash {
    std::size_t operator()(const Variant& v) const noexcept {
        std::size_t h = 0xcbf29ce484222325ULL;
        for (const auto& m : v.mutations()) {
            const std::uint64_t key = (std::uint64_t{m.position} << 16) |
                                      (std::uint64_t(std::uint8_t(m.from_aa)) << 8) |
                                      std::uint8_t(m.to_aa);
            h ^= std::hash<std::uint64_t>{}(key) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return h;
    }
};

}  // namespace folde
