#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "folde/core/logprobs.hpp"
#include "folde/core/variant.hpp"

namespace folde::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("folde-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string random_sequence(std::size_t n, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, int(kAlphabetSize) - 1);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += kAlphabet[std::size_t(pick(rng))];
    return s;
}

inline LogProbMatrix random_logprobs(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.5);
    std::vector<double> logits(n * kAlphabetSize);
    for (auto& x : logits) x = g(rng);
    return LogProbMatrix::from_logits(n, logits);
}

// A random variant with `k` distinct mutated positions.
inline Variant random_variant(const std::string& ref, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::uint32_t> pos(ref.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = std::uint32_t(i + 1);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::vector<Mutation> ms;
    std::uniform_int_distribution<int> pick(0, int(kAlphabetSize) - 1);
    for (std::size_t i = 0; i < k; ++i) {
        const char from = ref[pos[i] - 1];
        char to = from;
        while (to == from) to = kAlphabet[std::size_t(pick(rng))];
        ms.push_back({pos[i], from, to});
    }
    return Variant(ms);
}

}  // namespace folde::testing
