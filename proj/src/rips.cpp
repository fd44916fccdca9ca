#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <queue>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "oamtopo/homology.hpp"

namespace oamtopo {

namespace {

using index_t = std::int64_t;

class BinomialTable {
 public:
  BinomialTable(index_t n, index_t k) : cols_(k + 1), table_(static_cast<std::size_t>((n + 1) * (k + 1)), 0) {
    for (index_t i = 0; i <= n; ++i)
      for (index_t j = 0; j <= std::min(i, k); ++j)
        at(i, j) = (j == 0 || j == i) ? 1 : at(i - 1, j - 1) + at(i - 1, j);
  }

  index_t operator()(index_t n, index_t k) const noexcept {
    if (n < 0 || k < 0 || k >= cols_ || k > n) return 0;
    return table_[static_cast<std::size_t>(n * cols_ + k)];
  }

 private:
  index_t& at(index_t n, index_t k) { return table_[static_cast<std::size_t>(n * cols_ + k)]; }
  index_t cols_;
  std::vector<index_t> table_;
};

struct Entry {
  double diam;
  index_t index;
};

// Filtration order within one dimension: diameter ascending, larger index first on ties.
bool filtration_less(const Entry& a, const Entry& b) noexcept {
  return a.diam < b.diam || (a.diam == b.diam && a.index > b.index);
}

// Heap comparator so that top() is the filtration-minimal entry.
struct HeapOrder {
  bool operator()(const Entry& a, const Entry& b) const noexcept { return filtration_less(b, a); }
};

using WorkingColumn = std::priority_queue<Entry, std::vector<Entry>, HeapOrder>;

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

 private:
  std::vector<std::size_t> parent_;
};

class RipsEngine {
 public:
  RipsEngine(const Eigen::MatrixXd& dist, double threshold, int max_dim)
      : dist_(dist), n_(dist.rows()), threshold_(threshold), binom_(dist.rows(), max_dim + 2) {}

  // Vertices in descending order.
  void vertices(index_t idx, int dim, std::vector<index_t>& out) const {
    out.clear();
    index_t top = n_ - 1;
    for (index_t k = dim + 1; k >= 1; --k) {
      index_t lo = k - 1, hi = top;
      while (lo < hi) {
        const index_t mid = lo + (hi - lo + 1) / 2;
        if (binom_(mid, k) <= idx)
          lo = mid;
        else
          hi = mid - 1;
      }
      out.push_back(lo);
      idx -= binom_(lo, k);
      top = lo - 1;
    }
  }

  template <class Fn>
  void for_each_cofacet(const Entry& simplex, int dim, Fn&& fn) {
    vertices(simplex.index, dim, scratch_);
    index_t idx_below = simplex.index;
    index_t idx_above = 0;
    index_t k = dim + 1;
    for (index_t v = n_ - 1; v >= 0; --v) {
      if (k > 0 && binom_(v, k) <= idx_below) {
        // v belongs to the simplex
        idx_below -= binom_(v, k);
        idx_above += binom_(v, k + 1);
        --k;
        continue;
      }
      double diam = simplex.diam;
      for (index_t u : scratch_) diam = std::max(diam, dist_(v, u));
      if (diam > threshold_) continue;
      if (!fn(Entry{diam, idx_above + binom_(v, k + 1) + idx_below})) return;
    }
  }

  index_t binom(index_t n, index_t k) const noexcept { return binom_(n, k); }
  index_t size() const noexcept { return n_; }

 private:
  const Eigen::MatrixXd& dist_;
  index_t n_;
  double threshold_;
  BinomialTable binom_;
  std::vector<index_t> scratch_;
};

std::optional<Entry> pop_pivot(WorkingColumn& column) {
  while (!column.empty()) {
    Entry pivot = column.top();
    column.pop();
    if (column.empty() || column.top().index != pivot.index) return pivot;
    column.pop();  // equal entries cancel over GF(2)
  }
  return std::nullopt;
}

std::optional<Entry> get_pivot(WorkingColumn& column) {
  auto p = pop_pivot(column);
  if (p) column.push(*p);
  return p;
}

// Reduces the coboundary columns of dimension `dim`; returns the set of pivot (dim+1)-simplices.
std::unordered_set<index_t> reduce_dimension(RipsEngine& engine, const std::vector<Entry>& columns, int dim,
                                             double max_radius, std::vector<PersistencePoint>& out) {
  std::unordered_map<index_t, std::size_t> pivot_column;
  pivot_column.reserve(columns.size());
  std::vector<std::vector<Entry>> reduction(columns.size());

  for (std::size_t j = 0; j < columns.size(); ++j) {
    const Entry& sigma = columns[j];
    WorkingColumn working;
    bool may_be_emergent = true;
    std::optional<Entry> emergent;
    engine.for_each_cofacet(sigma, dim, [&](const Entry& cofacet) {
      working.push(cofacet);
      if (may_be_emergent && cofacet.diam == sigma.diam) {
        if (!pivot_column.contains(cofacet.index)) {
          emergent = cofacet;
          return false;
        }
        may_be_emergent = false;
      }
      return true;
    });
    if (emergent) {
      // zero-persistence pair; the column needs no reduction
      pivot_column.emplace(emergent->index, j);
      reduction[j] = {sigma};
      continue;
    }

    std::vector<Entry> combination{sigma};
    std::optional<Entry> pivot = get_pivot(working);
    while (pivot) {
      auto it = pivot_column.find(pivot->index);
      if (it == pivot_column.end()) break;
      for (const Entry& s : reduction[it->second]) {
        combination.push_back(s);
        engine.for_each_cofacet(s, dim, [&](const Entry& cofacet) {
          working.push(cofacet);
          return true;
        });
      }
      pivot = get_pivot(working);
    }

    if (!pivot) {
      if (max_radius > sigma.diam) out.push_back({dim, sigma.diam, max_radius});
      continue;
    }
    if (pivot->diam > sigma.diam) out.push_back({dim, sigma.diam, pivot->diam});
    pivot_column.emplace(pivot->index, j);

    // keep the reduction column mod 2
    std::sort(combination.begin(), combination.end(), [](const Entry& a, const Entry& b) { return a.index < b.index; });
    std::vector<Entry> reduced;
    for (std::size_t i = 0; i < combination.size();) {
      std::size_t e = i;
      while (e < combination.size() && combination[e].index == combination[i].index) ++e;
      if ((e - i) % 2 == 1) reduced.push_back(combination[i]);
      i = e;
    }
    reduction[j] = std::move(reduced);
  }

  std::unordered_set<index_t> pivots;
  pivots.reserve(pivot_column.size());
  for (const auto& [idx, col] : pivot_column) pivots.insert(idx);
  return pivots;
}

}  // namespace

PersistenceDiagram rips_persistence(const PointCloud3& cloud, int max_dim, double max_radius) {
  if (max_dim < 0 || max_dim > 2) throw std::invalid_argument("rips_persistence: max_dim must be in 0..2");
  if (!(max_radius > 0.0)) throw std::invalid_argument("rips_persistence: max_radius must be > 0");

  PersistenceDiagram diagram;
  diagram.max_filtration = max_radius;
  diagram.source_mode = FiltrationMode::rips;
  const index_t n = cloud.rows();
  if (n == 0) return diagram;

  const Eigen::MatrixXd dist = distance_matrix(cloud);
  RipsEngine engine(dist, max_radius, max_dim);

  std::vector<Entry> edges;
  for (index_t j = 1; j < n; ++j)
    for (index_t i = 0; i < j; ++i)
      if (dist(i, j) <= max_radius) edges.push_back({dist(i, j), engine.binom(j, 2) + i});
  std::sort(edges.begin(), edges.end(), filtration_less);

  UnionFind components(static_cast<std::size_t>(n));
  std::vector<Entry> columns;
  std::vector<index_t> verts;
  for (const Entry& e : edges) {
    engine.vertices(e.index, 1, verts);
    if (components.unite(static_cast<std::size_t>(verts[0]), static_cast<std::size_t>(verts[1]))) {
      if (e.diam > 0.0) diagram.points.push_back({0, 0.0, e.diam});
    } else {
      columns.push_back(e);
    }
  }
  for (index_t v = 0; v < n; ++v)
    if (components.find(static_cast<std::size_t>(v)) == static_cast<std::size_t>(v))
      diagram.points.push_back({0, 0.0, std::numeric_limits<double>::infinity()});

  for (int dim = 1; dim <= max_dim; ++dim) {
    std::sort(columns.begin(), columns.end(), [](const Entry& a, const Entry& b) { return filtration_less(b, a); });
    const auto pivots = reduce_dimension(engine, columns, dim, max_radius, diagram.points);
    if (dim == max_dim) break;

    // next columns: (dim+1)-simplices not already paired as deaths (clearing)
    columns.clear();
    if (dim + 1 == 2) {
      for (index_t c = 2; c < n; ++c)
        for (index_t b = 1; b < c; ++b) {
          const double dbc = dist(b, c);
          if (dbc > max_radius) continue;
          for (index_t a = 0; a < b; ++a) {
            const double diam = std::max({dbc, dist(a, b), dist(a, c)});
            if (diam > max_radius) continue;
            const index_t idx = engine.binom(c, 3) + engine.binom(b, 2) + a;
            if (!pivots.contains(idx)) columns.push_back({diam, idx});
          }
        }
    }
  }
  return diagram;
}

}  // namespace oamtopo
