#pragma once

#include <cstdint>
#include <string_view>

namespace swarmnet {

// Stable per-stage seed derivation from one global seed.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage, std::uint64_t index = 0);

} // namespace swarmnet
