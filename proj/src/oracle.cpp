#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

#include "oamtopo/homology.hpp"

namespace oamtopo {

namespace {

bool cell_before(const FiltrationCell& a, const FiltrationCell& b) {
  if (a.value != b.value) return a.value < b.value;
  if (a.dim != b.dim) return a.dim < b.dim;
  return a.vertices < b.vertices;
}

// Sorts cells and rewrites boundaries, given as vertex lists of faces, into indices.
std::vector<FiltrationCell> finalize(std::vector<FiltrationCell> cells,
                                     const std::vector<std::vector<std::vector<int>>>& face_vertices) {
  std::vector<std::size_t> order(cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cell_before(cells[a], cells[b]); });
  std::map<std::vector<int>, std::size_t> position;
  std::vector<FiltrationCell> out;
  out.reserve(cells.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    position[cells[order[k]].vertices] = k;
    out.push_back(std::move(cells[order[k]]));
    for (const auto& face : face_vertices[order[k]]) out.back().boundary.push_back(position.at(face));
  }
  return out;
}

}  // namespace

std::vector<FiltrationCell> rips_complex(const PointCloud3& cloud, int max_dim, double max_radius) {
  const int n = static_cast<int>(cloud.rows());
  const Eigen::MatrixXd dist = distance_matrix(cloud);
  std::vector<FiltrationCell> cells;
  std::vector<std::vector<std::vector<int>>> faces;
  std::vector<int> current;
  std::function<void(int, double)> grow = [&](int next, double diam) {
    if (!current.empty()) {
      FiltrationCell c;
      c.dim = static_cast<int>(current.size()) - 1;
      c.value = diam;
      c.vertices = current;
      std::vector<std::vector<int>> fv;
      if (c.dim > 0)
        for (std::size_t drop = 0; drop < current.size(); ++drop) {
          auto face = current;
          face.erase(face.begin() + static_cast<std::ptrdiff_t>(drop));
          fv.push_back(std::move(face));
        }
      cells.push_back(std::move(c));
      faces.push_back(std::move(fv));
    }
    if (static_cast<int>(current.size()) == max_dim + 2) return;
    for (int v = next; v < n; ++v) {
      double d = diam;
      for (int u : current) d = std::max(d, dist(u, v));
      if (d > max_radius) continue;
      current.push_back(v);
      grow(v + 1, d);
      current.pop_back();
    }
  };
  grow(0, 0.0);
  return finalize(std::move(cells), faces);
}

std::vector<FiltrationCell> cubical_complex(const RealGrid& img) {
  const int rows = static_cast<int>(img.rows()), cols = static_cast<int>(img.cols());
  auto f = [&](int p) { return -img(p / cols, p % cols); };
  std::vector<FiltrationCell> cells;
  std::vector<std::vector<std::vector<int>>> faces;
  auto add = [&](std::vector<int> verts, std::vector<std::vector<int>> fv) {
    FiltrationCell c;
    c.dim = verts.size() == 1 ? 0 : verts.size() == 2 ? 1 : 2;
    c.value = -std::numeric_limits<double>::infinity();
    for (int p : verts) c.value = std::max(c.value, f(p));
    std::sort(verts.begin(), verts.end());
    c.vertices = std::move(verts);
    for (auto& face : fv) std::sort(face.begin(), face.end());
    cells.push_back(std::move(c));
    faces.push_back(std::move(fv));
  };
  for (int p = 0; p < rows * cols; ++p) add({p}, {});
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const int p = i * cols + j;
      if (j + 1 < cols) add({p, p + 1}, {{p}, {p + 1}});
      if (i + 1 < rows) add({p, p + cols}, {{p}, {p + cols}});
      if (i + 1 < rows && j + 1 < cols)
        add({p, p + 1, p + cols, p + cols + 1}, {{p, p + 1}, {p + cols, p + cols + 1}, {p, p + cols}, {p + 1, p + cols + 1}});
    }
  return finalize(std::move(cells), faces);
}

PersistenceDiagram oracle_persistence(std::span<const FiltrationCell> cells, int max_dim, double max_filtration,
                                      FiltrationMode mode) {
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (k > 0 && cell_before(cells[k], cells[k - 1]))
      throw std::invalid_argument("oracle_persistence: cells not sorted at position " + std::to_string(k));
    for (std::size_t b : cells[k].boundary)
      if (b >= k || cells[b].dim != cells[k].dim - 1)
        throw std::invalid_argument("oracle_persistence: invalid boundary at position " + std::to_string(k));
  }

  PersistenceDiagram diagram;
  diagram.max_filtration = max_filtration;
  diagram.source_mode = mode;

  constexpr std::size_t none = static_cast<std::size_t>(-1);
  std::vector<std::vector<std::size_t>> columns(cells.size());
  std::vector<std::size_t> low_owner(cells.size(), none);
  std::vector<bool> paired(cells.size(), false);
  for (std::size_t j = 0; j < cells.size(); ++j) {
    auto& col = columns[j];
    col.assign(cells[j].boundary.begin(), cells[j].boundary.end());
    std::sort(col.begin(), col.end());
    while (!col.empty() && low_owner[col.back()] != none) {
      const auto& other = columns[low_owner[col.back()]];
      std::vector<std::size_t> sum;
      std::set_symmetric_difference(col.begin(), col.end(), other.begin(), other.end(), std::back_inserter(sum));
      col.swap(sum);
    }
    if (col.empty()) continue;
    const std::size_t low = col.back();
    low_owner[low] = j;
    paired[low] = paired[j] = true;
    const FiltrationCell& b = cells[low];
    if (b.dim <= max_dim && cells[j].value > b.value) diagram.points.push_back({b.dim, b.value, cells[j].value});
  }
  for (std::size_t k = 0; k < cells.size(); ++k) {
    if (paired[k] || !columns[k].empty() || cells[k].dim > max_dim) continue;
    if (cells[k].dim == 0)
      diagram.points.push_back({0, cells[k].value, std::numeric_limits<double>::infinity()});
    else if (max_filtration > cells[k].value)
      diagram.points.push_back({cells[k].dim, cells[k].value, max_filtration});
  }
  return diagram;
}

}  // namespace oamtopo
