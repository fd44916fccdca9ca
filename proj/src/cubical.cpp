#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "oamtopo/homology.hpp"

namespace oamtopo {

namespace {

struct Cube {
  double value;
  std::size_t index;
};

bool cube_less(const Cube& a, const Cube& b) noexcept {
  return a.value < b.value || (a.value == b.value && a.index < b.index);
}

}  // namespace

PersistenceDiagram cubical_persistence(const RealGrid& img, int max_dim) {
  if (max_dim < 0 || max_dim > 1) throw std::invalid_argument("cubical_persistence: max_dim must be 0 or 1");
  PersistenceDiagram diagram;
  diagram.source_mode = FiltrationMode::cubical;
  const auto rows = static_cast<std::size_t>(img.rows());
  const auto cols = static_cast<std::size_t>(img.cols());
  if (rows == 0 || cols == 0) return diagram;

  auto f = [&](std::size_t i, std::size_t j) { return -img(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); };
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) top = std::max(top, f(i, j));
  diagram.max_filtration = top;

  // edges: horizontal ones first (index i*(cols-1)+j), then vertical (offset + i*cols+j)
  const std::size_t n_h = rows * (cols - 1);
  const std::size_t n_v = (rows - 1) * cols;
  std::vector<Cube> edges;
  edges.reserve(n_h + n_v);
  std::vector<std::pair<std::size_t, std::size_t>> ends(n_h + n_v);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j + 1 < cols; ++j) {
      const std::size_t e = i * (cols - 1) + j;
      ends[e] = {i * cols + j, i * cols + j + 1};
      edges.push_back({std::max(f(i, j), f(i, j + 1)), e});
    }
  for (std::size_t i = 0; i + 1 < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t e = n_h + i * cols + j;
      ends[e] = {i * cols + j, (i + 1) * cols + j};
      edges.push_back({std::max(f(i, j), f(i + 1, j)), e});
    }
  std::sort(edges.begin(), edges.end(), cube_less);

  // H0: union-find with the elder rule
  std::vector<std::size_t> parent(rows * cols);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  std::vector<double> birth(rows * cols);
  for (std::size_t p = 0; p < rows * cols; ++p) birth[p] = f(p / cols, p % cols);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const Cube& e : edges) {
    std::size_t a = find(ends[e.index].first), b = find(ends[e.index].second);
    if (a == b) continue;
    if (birth[a] > birth[b] || (birth[a] == birth[b] && a > b)) std::swap(a, b);  // a is elder
    if (e.value > birth[b]) diagram.points.push_back({0, birth[b], e.value});
    parent[b] = a;
  }
  for (std::size_t p = 0; p < rows * cols; ++p)
    if (find(p) == p) diagram.points.push_back({0, birth[p], std::numeric_limits<double>::infinity()});

  if (max_dim < 1 || rows < 2 || cols < 2) return diagram;

  // H1 by duality: squares are nodes of the dual graph, plus one exterior node alive from the
  // start. Sweeping edges from the top down, an edge that joins two dual components creates a
  // loop in the primal filtration, and the younger component's top square is where it dies.
  const std::size_t sq_cols = cols - 1;
  const std::size_t n_sq = (rows - 1) * sq_cols;
  const std::size_t exterior = n_sq;
  std::vector<std::size_t> dual_parent(n_sq + 1);
  std::iota(dual_parent.begin(), dual_parent.end(), std::size_t{0});
  std::vector<double> dual_birth(n_sq + 1, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < rows; ++i)
    for (std::size_t j = 0; j < sq_cols; ++j)
      dual_birth[i * sq_cols + j] = std::max({f(i, j), f(i, j + 1), f(i + 1, j), f(i + 1, j + 1)});
  auto dual_find = [&](std::size_t x) {
    while (dual_parent[x] != x) x = dual_parent[x] = dual_parent[dual_parent[x]];
    return x;
  };
  auto square = [&](std::ptrdiff_t i, std::ptrdiff_t j) {
    if (i < 0 || j < 0 || i + 1 >= static_cast<std::ptrdiff_t>(rows) || j >= static_cast<std::ptrdiff_t>(sq_cols))
      return exterior;
    return static_cast<std::size_t>(i) * sq_cols + static_cast<std::size_t>(j);
  };
  for (std::size_t pos = edges.size(); pos-- > 0;) {
    const Cube& e = edges[pos];
    std::size_t s1, s2;
    if (e.index < n_h) {
      const auto i = static_cast<std::ptrdiff_t>(e.index / (cols - 1)), j = static_cast<std::ptrdiff_t>(e.index % (cols - 1));
      s1 = square(i - 1, j);
      s2 = square(i, j);
    } else {
      const auto i = static_cast<std::ptrdiff_t>((e.index - n_h) / cols), j = static_cast<std::ptrdiff_t>((e.index - n_h) % cols);
      s1 = square(i, j - 1);
      s2 = square(i, j);
    }
    std::size_t a = dual_find(s1), b = dual_find(s2);
    if (a == b) continue;
    if (dual_birth[a] < dual_birth[b] || (dual_birth[a] == dual_birth[b] && a < b)) std::swap(a, b);  // a is elder
    if (dual_birth[b] > e.value) diagram.points.push_back({1, e.value, dual_birth[b]});
    dual_parent[b] = a;
  }
  return diagram;
}

PersistenceDiagram cubical_persistence(const Image& img, int max_dim) { return cubical_persistence(img.values, max_dim); }

}  // namespace oamtopo
