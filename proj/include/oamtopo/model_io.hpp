#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "oamtopo/autonet.hpp"

namespace oamtopo {

inline constexpr std::uint32_t kModelVersion = 1;

struct SavedModel {
  NetworkSpec spec;
  ModelParams<double> params;
  std::vector<std::uint8_t> inputs;  // dataset channel tags a plain network reads, one per input channel
};

/// "OAMM", u32 version, input c/h/w, classes, u8 input tag count and tags, tagged layer list,
/// optional kernel bank, then every weight matrix (row-major) and bias vector as f64 in declaration order.
std::vector<std::uint8_t> encode_model(const SavedModel& model);
SavedModel decode_model(std::span<const std::uint8_t> bytes);

void save_model(const std::filesystem::path& path, const SavedModel& model);
SavedModel load_model(const std::filesystem::path& path);

}  // namespace oamtopo
