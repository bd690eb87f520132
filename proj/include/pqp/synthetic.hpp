#pragma once

#include <cstddef>
#include <cstdint>

#include "pqp/image.hpp"

namespace pqp {

/// Seeded stand-in for a natural photo: a smooth color gradient with a few
/// soft-edged blobs and one rectangle of fine texture. Same seed, same image.
Image synthetic_scene(std::uint64_t seed, std::size_t height, std::size_t width);

/// Left half one constant color, right half i.i.d. uniform noise.
Image half_flat_half_noise(std::uint64_t seed, std::size_t height, std::size_t width);

/// i.i.d. uniform levels on every component.
Image uniform_noise(std::uint64_t seed, std::size_t height, std::size_t width);

}  // namespace pqp
