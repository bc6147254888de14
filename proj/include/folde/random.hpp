#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace folde {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Independent stream seed for a (base, tag...) tuple. Every random stream in
// the library is keyed this way so results do not depend on scheduling.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t s = splitmix64(base);
    for (std::uint64_t p : parts) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

using Rng = std::mt19937_64;

// Stream tags so that derived seeds for different purposes never collide.
enum class Stream : std::uint64_t {
    holdout = 1,
    random_batch = 2,
    member_init = 3,
    warm_start = 4,
    activity = 5,
    forest = 6,
    landscape = 7,
};

inline std::uint64_t tag(Stream s) noexcept { return static_cast<std::uint64_t>(s); }

}  // namespace folde
