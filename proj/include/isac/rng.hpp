#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace isac {

using Rng = std::mt19937_64;

/// Purpose tags that separate random substreams.
enum class Stream : std::uint64_t {
    reflectors = 1,
    tx_symbols = 2,
    noise = 3,
    training = 4,
    classifier_init = 5,
    scenario_gen = 6,
    calibration = 7,
};

/// Hashes (seed, tags...) into an independent 64-bit seed. Streams derived
/// from distinct tag tuples do not depend on evaluation order.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

Rng make_rng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> tags = {});

}  // namespace isac
