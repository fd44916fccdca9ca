#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include <unistd.h>

#include <Eigen/Core>

#include "oamtopo/homology.hpp"
#include "oamtopo/rng.hpp"

namespace oamtopo::test {

inline PointCloud3 random_cloud(SplitMix64& rng, int n) {
  PointCloud3 c(n, 3);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) c(i, k) = rng.uniform();
  return c;
}

/// Integer levels produce plenty of ties, which is where filtration order bugs hide.
inline RealGrid random_image(SplitMix64& rng, int rows, int cols, int levels) {
  RealGrid img(rows, cols);
  for (Eigen::Index k = 0; k < img.size(); ++k)
    img.data()[k] = levels > 0 ? static_cast<double>(rng.below(static_cast<std::uint64_t>(levels))) : rng.uniform();
  return img;
}

inline double rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    SplitMix64 r(static_cast<std::uint64_t>(std::hash<std::string>{}(tag)) ^ static_cast<std::uint64_t>(::getpid()));
    path_ = std::filesystem::temp_directory_path() / ("oamtopo_" + tag + "_" + std::to_string(r.next() % 1000000007ULL));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace oamtopo::test
