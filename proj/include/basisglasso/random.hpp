#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace bgl {

using Rng = std::mt19937_64;

/// Engine for an independent stream identified by (seed, keys...). Distinct
/// key tuples give non-overlapping-in-practice streams through seed_seq mixing.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {})
{
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * keys.size());
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto k : keys)
        push(k);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

} // namespace bgl
