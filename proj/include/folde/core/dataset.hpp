#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "folde/core/variant.hpp"
#include "folde/error.hpp"

namespace folde {

struct Record {
    Variant variant;
    double activity = 0.0;
};

// Measured variants against one reference sequence. Immutable once built.
class Dataset {
public:
    Dataset(std::string reference, std::vector<Record> records)
        : reference_(std::move(reference)), records_(std::move(records)) {
        check_sequence(reference_);
        if (records_.size() < 2) throw InvariantError("dataset needs at least 2 records");
        index_.reserve(records_.size());
        for (std::size_t i = 0; i < records_.size(); ++i) {
            const auto& r = records_[i];
            check_against_reference(r.variant, reference_);
            if (!std::isfinite(r.activity))
                throw InvariantError("non-finite activity for " + render(r.variant));
            if (!index_.emplace(r.variant, i).second)
                throw InvariantError("duplicate variant " + render(r.variant));
        }
    }

    const std::string& reference() const noexcept { return reference_; }
    const std::vector<Record>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    const Record& operator[](std::size_t i) const { return records_.at(i); }

    std::optional<std::size_t> find(const Variant& v) const {
        const auto it = index_.find(v);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::vector<double> activities() const {
        std::vector<double> out;
        out.reserve(records_.size());
        for (const auto& r : records_) out.push_back(r.activity);
        return out;
    }

private:
    std::string reference_;
    std::vector<Record> records_;
    std::unordered_map<Variant, std::size_t, VariantHash> index_;
};

namespace detail {

inline std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
}

inline double parse_real(std::string_view text, std::string_view what) {
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    if (!text.empty() && text.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || text.empty())
        throw ParseError("cannot parse " + std::string(what) + " '" + std::string(text) + "'");
    return value;
}

// Shortest text that parses back to the same double.
inline std::string format_real(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

}  // namespace detail

// Format: "#ref=<sequence>", then "mutant\tactivity", then one row per variant.
inline Dataset read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("dataset is empty");
    auto first = detail::strip_cr(line);
    if (first.rfind("#ref=", 0) != 0) throw ParseError("dataset must start with '#ref=<sequence>'");
    std::string reference(first.substr(5));
    check_sequence(reference);

    if (!std::getline(in, line) || detail::strip_cr(line) != "mutant\tactivity")
        throw ParseError("missing header 'mutant\\tactivity'");

    std::vector<Record> records;
    std::size_t lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        auto row = detail::strip_cr(line);
        if (row.empty()) continue;
        const auto tab = row.find('\t');
        if (tab == std::string_view::npos || row.find('\t', tab + 1) != std::string_view::npos)
            throw ParseError("line " + std::to_string(lineno) + ": expected two tab-separated fields");
        Variant v = parse_variant(row.substr(0, tab), reference);
        const double a = detail::parse_real(row.substr(tab + 1), "activity");
        records.push_back({std::move(v), a});
    }
    return Dataset(std::move(reference), std::move(records));
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open dataset " + path);
    return read_dataset(in);
}

inline void write_dataset(std::ostream& out, const Dataset& ds) {
    out << "#ref=" << ds.reference() << '\n' << "mutant\tactivity\n";
    for (const auto& r : ds.records())
        out << render(r.variant) << '\t' << detail::format_real(r.activity) << '\n';
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write dataset " + path);
    write_dataset(out, ds);
}

}  // namespace folde
