#include "oamtopo/diagram_io.hpp"

#include <stdexcept>

#include "oamtopo/binio.hpp"

namespace oamtopo {

std::vector<std::uint8_t> encode_diagrams(std::span<const PersistenceDiagram> diagrams) {
  ByteWriter w;
  w.bytes("OAMP");
  w.u32(kDiagramCacheVersion);
  w.u32(static_cast<std::uint32_t>(diagrams.size()));
  for (const auto& d : diagrams) {
    w.u32(static_cast<std::uint32_t>(d.points.size()));
    for (const auto& p : d.points) {
      w.u8(static_cast<std::uint8_t>(p.dim));
      w.f32(static_cast<float>(p.birth));
      w.f32(static_cast<float>(p.death));
    }
  }
  return std::move(w.data());
}

std::vector<PersistenceDiagram> decode_diagrams(std::span<const std::uint8_t> bytes, FiltrationMode mode,
                                                double max_filtration) {
  ByteReader r(bytes);
  if (r.bytes(4) != "OAMP") throw std::runtime_error("not an OAMP diagram cache");
  if (r.u32() != kDiagramCacheVersion) throw std::runtime_error("unsupported OAMP version");
  const std::uint32_t count = r.u32();
  std::vector<PersistenceDiagram> out(count);
  for (auto& d : out) {
    d.source_mode = mode;
    d.max_filtration = max_filtration;
    const std::uint32_t n = r.u32();
    if (static_cast<std::uint64_t>(n) * 9 > r.remaining()) throw std::runtime_error("truncated OAMP diagram cache");
    d.points.resize(n);
    for (auto& p : d.points) {
      p.dim = r.u8();
      p.birth = r.f32();
      p.death = r.f32();
    }
  }
  if (!r.at_end()) throw std::runtime_error("trailing bytes in OAMP diagram cache");
  return out;
}

}  // namespace oamtopo
