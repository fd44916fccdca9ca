#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "oamtopo/autonet.hpp"

namespace oamtopo {

namespace {

std::string window(int k, int stride) {
  std::string s = std::to_string(k) + "x" + std::to_string(k);
  if (stride != 1) s += "/" + std::to_string(stride);
  return s;
}

}  // namespace

CostTable count_params_flops(const NetworkSpec& spec, double batch, int ph_kernels, int ph_points) {
  const auto shapes = spec.shapes();
  CostTable table;
  if (ph_kernels > 0) {
    LayerCost row;
    row.name = "kernel";
    row.kernel = std::to_string(ph_kernels) + " gauss";
    row.params = 3ull * static_cast<std::uint64_t>(ph_kernels);
    row.forward_flops = 12.0 * ph_kernels * std::max(ph_points, 0) * batch;
    row.backward_flops = 2.0 * row.forward_flops;
    table.rows.push_back(row);
  }

  int weighted = 0;
  int last_conv = 0;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& L = spec.layers[l];
    const Shape3 in = l == 0 ? spec.input : shapes[l - 1];
    const Shape3 out = shapes[l];
    LayerCost row;
    if (L.kind == LayerKind::conv) {
      last_conv = ++weighted;
      row.name = "conv" + std::to_string(weighted);
      row.kernel = window(L.kernel, L.stride) + ", " + std::to_string(in.c) + "->" + std::to_string(L.out);
      const double k2c = double(L.kernel) * L.kernel * in.c;
      row.params = static_cast<std::uint64_t>((k2c + 1) * L.out);
      row.forward_flops = 2.0 * k2c * L.out * out.h * out.w * batch;
    } else if (L.kind == LayerKind::fc) {
      row.name = "fc" + std::to_string(++weighted);
      row.kernel = std::to_string(in.size()) + "->" + std::to_string(L.out);
      row.params = static_cast<std::uint64_t>((in.size() + 1) * L.out);
      row.forward_flops = 2.0 * double(in.size()) * L.out * batch;
    } else if (L.kind == LayerKind::maxpool) {
      row.name = "pool" + std::to_string(last_conv);
      row.kernel = window(L.kernel, L.stride);
      row.forward_flops = double(L.kernel) * L.kernel * out.size() * batch;
    } else {
      continue;
    }
    row.backward_flops = 2.0 * row.forward_flops;
    table.rows.push_back(row);
  }
  for (const auto& r : table.rows) {
    table.total_params += r.params;
    table.total_forward += r.forward_flops;
    table.total_backward += r.backward_flops;
  }
  return table;
}

std::string human_count(double value) {
  static constexpr const char* units[] = {"", " K", " M", " G", " T", " P"};
  int u = 0;
  double v = std::fabs(value);
  while (v >= 1000.0 && u < 5) {
    v /= 1000.0;
    ++u;
  }
  if (value < 0) v = -v;
  char buf[32];
  // four significant digits, trailing zeros dropped
  const int decimals = std::fabs(v) >= 100 ? 1 : std::fabs(v) >= 10 ? 2 : 3;
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  return s + units[u];
}

}  // namespace oamtopo
