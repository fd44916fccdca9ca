#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oamtopo/homology.hpp"

namespace oamtopo {

inline constexpr std::uint32_t kDiagramCacheVersion = 1;

/// "OAMP", u32 version, u32 sample_count; per sample u32 point_count then
/// (u8 dim, f32 birth, f32 death) triples, +inf deaths as f32 infinity. Little-endian.
std::vector<std::uint8_t> encode_diagrams(std::span<const PersistenceDiagram> diagrams);

/// Decoded diagrams get the given mode and max_filtration (the cache does not carry them).
std::vector<PersistenceDiagram> decode_diagrams(std::span<const std::uint8_t> bytes, FiltrationMode mode,
                                                double max_filtration);

}  // namespace oamtopo
