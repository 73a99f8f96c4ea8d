#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace diffdac {

using Rng = std::mt19937_64;

/// Builds an independent generator for the stream identified by `ids`
/// (e.g. {seed, agent, purpose}). Same ids always give the same stream.
inline Rng make_rng(std::initializer_list<std::uint64_t> ids) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * ids.size());
    for (auto id : ids) {
        words.push_back(static_cast<std::uint32_t>(id & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(id >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

} // namespace diffdac
