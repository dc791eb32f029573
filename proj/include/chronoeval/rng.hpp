#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "chronoeval/hash.hpp"

namespace chronoeval::rng {

// Every random draw in the toolkit comes from a named substream of one run
// seed, so a single seed reproduces a whole run and independent pipelines
// cannot perturb each other's streams.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view name) {
    std::string key = std::to_string(seed);
    key += '/';
    key += name;
    return std::mt19937_64(hash::sha256_prefix64(key));
}

// Uniform in [0,1) with 53 random bits. Avoids std::uniform_real_distribution,
// whose output is implementation-defined and would break cross-platform
// replay.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Rejection-free modulo is fine here; streams are
// not used for anything where the tiny bias matters.
inline std::uint64_t below(std::mt19937_64& gen, std::uint64_t n) {
    return n == 0 ? 0 : gen() % n;
}

}  // namespace chronoeval::rng
