#include "softdsl/geom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "softdsl/error.hpp"

namespace sdsl {

Vec3 cloud_com(std::span<const Vec3> pts) {
  if (pts.empty()) fail(ErrorCode::InvalidArgument, "com of an empty point cloud");
  Vec3 s{};
  for (const Vec3& p : pts) s += p;
  return s / static_cast<double>(pts.size());
}

Vec3 cloud_min(std::span<const Vec3> pts, size_t* arg) {
  if (pts.empty()) fail(ErrorCode::InvalidArgument, "min of an empty point cloud");
  Vec3 m = pts[0];
  size_t idx[3] = {0, 0, 0};
  for (size_t i = 1; i < pts.size(); i++)
    for (int a = 0; a < 3; a++)
      if (pts[i][a] < m[a]) {
        m[a] = pts[i][a];
        idx[a] = i;
      }
  if (arg)
    for (int a = 0; a < 3; a++) arg[a] = idx[a];
  return m;
}

Vec3 cloud_max(std::span<const Vec3> pts, size_t* arg) {
  if (pts.empty()) fail(ErrorCode::InvalidArgument, "max of an empty point cloud");
  Vec3 m = pts[0];
  size_t idx[3] = {0, 0, 0};
  for (size_t i = 1; i < pts.size(); i++)
    for (int a = 0; a < 3; a++)
      if (pts[i][a] > m[a]) {
        m[a] = pts[i][a];
        idx[a] = i;
      }
  if (arg)
    for (int a = 0; a < 3; a++) arg[a] = idx[a];
  return m;
}

std::vector<size_t> select_part_indices(std::span<const Vec3> pts, PartSel part) {
  if (pts.size() < 2) fail(ErrorCode::InvalidArgument, "part selectors need at least 2 points");
  int axis;
  switch (part) {
    case PartSel::LeftPart: case PartSel::RightPart:
    case PartSel::LeftEnd: case PartSel::RightEnd: axis = 0; break;
    case PartSel::TopPart: case PartSel::BottomPart: axis = 1; break;
    default: axis = 2; break;
  }
  std::vector<size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t i, size_t j) { return pts[i][axis] < pts[j][axis]; });

  size_t n = pts.size();
  size_t begin = 0, count = 0;
  size_t end_count = std::max<size_t>(1, static_cast<size_t>(std::llround(0.2 * static_cast<double>(n))));
  switch (part) {
    case PartSel::LeftPart: case PartSel::FrontPart: case PartSel::BottomPart:
      count = (n + 1) / 2;
      break;
    case PartSel::RightPart: case PartSel::BackPart: case PartSel::TopPart:
      begin = (n + 1) / 2;
      count = n - begin;
      break;
    case PartSel::LeftEnd: case PartSel::FrontEnd:
      count = end_count;
      break;
    case PartSel::RightEnd: case PartSel::BackEnd:
      begin = n - end_count;
      count = end_count;
      break;
  }
  std::vector<size_t> out(order.begin() + static_cast<long>(begin),
                          order.begin() + static_cast<long>(begin + count));
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

// Deterministic subsample of k indices (seeded partial Fisher-Yates). The
// same seed is used for both clouds so identical inputs pick identical
// subsets.
std::vector<size_t> subsample_indices(size_t n, size_t k, uint64_t seed) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (k >= n) return idx;
  std::mt19937_64 gen(seed);
  for (size_t i = 0; i < k; i++) {
    size_t j = i + static_cast<size_t>(gen() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct SinkhornPlan {
  std::vector<double> p;  // n*m transport plan, exactly feasible after rounding
  double cost = 0;        // entropic OT cost <P,C> + eps * KL(P | a x b)
};

// Log-domain Sinkhorn with epsilon scaling and overrelaxation, followed by
// the standard rounding step that projects the plan onto exact marginal
// feasibility. The rounding perturbs the cost by at most diam * residual, so
// the pre-rounding residual is guarded.
SinkhornPlan sinkhorn_solve(const std::vector<Vec3>& a, const std::vector<Vec3>& b,
                            const EmdConfig& cfg) {
  size_t n = a.size(), m = b.size();
  std::vector<double> c(n * m);
  double cmax = 0;
  for (size_t i = 0; i < n; i++)
    for (size_t j = 0; j < m; j++) {
      double d = norm(a[i] - b[j]);
      c[i * m + j] = d;
      cmax = std::max(cmax, d);
    }
  std::vector<double> f(n, 0.0), g(m, 0.0), f_new(n), g_new(m);
  double log_n = std::log(static_cast<double>(n));
  double log_m = std::log(static_cast<double>(m));
  double inv_n = 1.0 / static_cast<double>(n);
  double inv_m = 1.0 / static_cast<double>(m);
  double inv_nm = inv_n * inv_m;

  auto row_error = [&](double eps) {
    double err = 0;
    for (size_t i = 0; i < n; i++) {
      double s = 0;
      for (size_t j = 0; j < m; j++) s += std::exp((f[i] + g[j] - c[i * m + j]) / eps) * inv_nm;
      err += std::fabs(s - inv_n);
    }
    return err;
  };

  std::vector<double> ladder;
  double eps0 = std::max(cfg.epsilon, cmax * 0.25);
  for (double e = eps0; e > cfg.epsilon * 1.5; e *= 0.5) ladder.push_back(e);
  ladder.push_back(cfg.epsilon);

  int iters_left = std::max(1, cfg.max_iters);
  double residual = 1.0;
  for (size_t li = 0; li < ladder.size(); li++) {
    double eps = ladder[li];
    bool last = li + 1 == ladder.size();
    double tol = last ? 1e-6 : 1e-3;
    double theta = last ? 1.8 : 1.0;  // overrelaxation once warm-started
    int level_cap = last ? iters_left : std::min(iters_left, 10);
    int it = 0;
    bool converged = false;
    while (it < level_cap && !converged) {
      for (size_t i = 0; i < n; i++) {
        const double* ci = &c[i * m];
        double best = -1e300;
        for (size_t j = 0; j < m; j++) best = std::max(best, (g[j] - ci[j]) / eps);
        double s = 0;
        for (size_t j = 0; j < m; j++) s += std::exp((g[j] - ci[j]) / eps - best);
        f_new[i] = -eps * (best + std::log(s) - log_m);
      }
      for (size_t i = 0; i < n; i++) f[i] += theta * (f_new[i] - f[i]);
      for (size_t j = 0; j < m; j++) {
        double best = -1e300;
        for (size_t i = 0; i < n; i++) best = std::max(best, (f[i] - c[i * m + j]) / eps);
        double s = 0;
        for (size_t i = 0; i < n; i++) s += std::exp((f[i] - c[i * m + j]) / eps - best);
        g_new[j] = -eps * (best + std::log(s) - log_n);
      }
      for (size_t j = 0; j < m; j++) g[j] += theta * (g_new[j] - g[j]);
      it++;
      if (it % 4 == 0 || it == level_cap) {
        residual = row_error(eps);
        converged = residual < tol;
      }
    }
    iters_left -= it;
    if (iters_left <= 0 && !last) break;  // budget exhausted before target scale
  }
  if (!std::isfinite(residual) || residual > 2e-2)
    fail(ErrorCode::NonConvergence,
         "sinkhorn: marginal residual " + std::to_string(residual) + " after iteration cap");

  SinkhornPlan plan;
  plan.p.resize(n * m);
  for (size_t i = 0; i < n; i++)
    for (size_t j = 0; j < m; j++)
      plan.p[i * m + j] = std::exp((f[i] + g[j] - c[i * m + j]) / cfg.epsilon) * inv_nm;

  // Rounding (Altschuler et al.): scale rows/columns down to their targets,
  // then patch the leftover mass with a rank-one correction.
  std::vector<double> row(n, 0.0), col(m, 0.0);
  for (size_t i = 0; i < n; i++)
    for (size_t j = 0; j < m; j++) row[i] += plan.p[i * m + j];
  for (size_t i = 0; i < n; i++) {
    double s = row[i] > inv_n ? inv_n / row[i] : 1.0;
    if (s != 1.0)
      for (size_t j = 0; j < m; j++) plan.p[i * m + j] *= s;
  }
  for (size_t i = 0; i < n; i++)
    for (size_t j = 0; j < m; j++) col[j] += plan.p[i * m + j];
  for (size_t j = 0; j < m; j++) {
    double s = col[j] > inv_m ? inv_m / col[j] : 1.0;
    if (s != 1.0)
      for (size_t i = 0; i < n; i++) plan.p[i * m + j] *= s;
  }
  std::fill(row.begin(), row.end(), 0.0);
  std::fill(col.begin(), col.end(), 0.0);
  for (size_t i = 0; i < n; i++)
    for (size_t j = 0; j < m; j++) {
      row[i] += plan.p[i * m + j];
      col[j] += plan.p[i * m + j];
    }
  double deficit = 0;
  for (size_t i = 0; i < n; i++) {
    row[i] = inv_n - row[i];
    deficit += row[i];
  }
  for (size_t j = 0; j < m; j++) col[j] = inv_m - col[j];
  if (deficit > 1e-300) {
    double inv_def = 1.0 / deficit;
    for (size_t i = 0; i < n; i++) {
      if (row[i] <= 0) continue;
      for (size_t j = 0; j < m; j++)
        if (col[j] > 0) plan.p[i * m + j] += row[i] * col[j] * inv_def;
    }
  }

  // Final marginal check on the returned plan.
  double err = 0;
  for (size_t i = 0; i < n; i++) {
    double s = 0;
    for (size_t j = 0; j < m; j++) s += plan.p[i * m + j];
    err += std::fabs(s - inv_n);
  }
  if (!(err < 1e-4))
    fail(ErrorCode::NonConvergence,
         "sinkhorn: marginal error " + std::to_string(err) + " after iteration cap");

  for (size_t i = 0; i < n; i++)
    for (size_t j = 0; j < m; j++) {
      double pij = plan.p[i * m + j];
      if (pij <= 0) continue;
      plan.cost += pij * c[i * m + j] + cfg.epsilon * pij * std::log(pij * n * m);
    }
  return plan;
}

// d<P,C>/d(a points), mapped back through the subsample; plan held fixed.
void plan_grad_rows(const SinkhornPlan& plan, const std::vector<Vec3>& a,
                    const std::vector<Vec3>& b, const std::vector<size_t>& map_a, double weight,
                    std::vector<Vec3>& grad_a) {
  size_t n = a.size(), m = b.size();
  for (size_t i = 0; i < n; i++)
    for (size_t j = 0; j < m; j++) {
      double pij = plan.p[i * m + j];
      if (pij == 0) continue;
      Vec3 diff = a[i] - b[j];
      double d = norm(diff);
      if (d < 1e-12) continue;
      grad_a[map_a[i]] += diff * (weight * pij / d);
    }
}

void plan_grad_cols(const SinkhornPlan& plan, const std::vector<Vec3>& a,
                    const std::vector<Vec3>& b, const std::vector<size_t>& map_b, double weight,
                    std::vector<Vec3>& grad_b) {
  size_t n = a.size(), m = b.size();
  for (size_t i = 0; i < n; i++)
    for (size_t j = 0; j < m; j++) {
      double pij = plan.p[i * m + j];
      if (pij == 0) continue;
      Vec3 diff = a[i] - b[j];
      double d = norm(diff);
      if (d < 1e-12) continue;
      grad_b[map_b[j]] -= diff * (weight * pij / d);
    }
}

double hungarian_total(const std::vector<double>& cost, size_t n) {
  // Shortest augmenting path assignment with potentials, O(n^3).
  const double inf = 1e30;
  std::vector<double> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<size_t> p(n + 1, 0), way(n + 1, 0);
  for (size_t i = 1; i <= n; i++) {
    p[0] = i;
    size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      size_t i0 = p[j0], j1 = 0;
      double delta = inf;
      for (size_t j = 1; j <= n; j++) {
        if (used[j]) continue;
        double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (size_t j = 0; j <= n; j++) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0;
  for (size_t j = 1; j <= n; j++)
    if (p[j] != 0) total += cost[(p[j] - 1) * n + (j - 1)];
  return total;
}

}  // namespace

namespace {

// Deterministic cloud ordering so emd(a, b) and emd(b, a) run the identical
// computation (symmetry holds bitwise).
bool cloud_precedes(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (size_t i = 0; i < a.size(); i++)
    for (int k = 0; k < 3; k++) {
      if (a[i][k] < b[i][k]) return true;
      if (a[i][k] > b[i][k]) return false;
    }
  return true;  // equal clouds
}

}  // namespace

EmdResult emd(std::span<const Vec3> a, std::span<const Vec3> b, EmdMode mode,
              const EmdConfig& cfg, bool want_grad) {
  if (a.empty() || b.empty()) fail(ErrorCode::InvalidArgument, "emd of an empty point cloud");
  if (!cloud_precedes(a, b)) {
    EmdResult swapped = emd(b, a, mode, cfg, want_grad);
    std::swap(swapped.grad_a, swapped.grad_b);
    return swapped;
  }
  EmdResult out;

  if (mode == EmdMode::Exact) {
    if (a.size() != b.size() || a.size() > 512)
      fail(ErrorCode::InvalidArgument, "exact emd requires |a| == |b| <= 512");
    size_t n = a.size();
    std::vector<double> cost(n * n);
    for (size_t i = 0; i < n; i++)
      for (size_t j = 0; j < n; j++) cost[i * n + j] = norm(a[i] - b[j]);
    out.value = hungarian_total(cost, n) / static_cast<double>(n);
    return out;
  }

  size_t k = static_cast<size_t>(std::max(1, cfg.target_points));
  std::vector<size_t> map_a = subsample_indices(a.size(), k, cfg.seed);
  std::vector<size_t> map_b = subsample_indices(b.size(), k, cfg.seed);
  std::vector<Vec3> sa(map_a.size()), sb(map_b.size());
  for (size_t i = 0; i < map_a.size(); i++) sa[i] = a[map_a[i]];
  for (size_t j = 0; j < map_b.size(); j++) sb[j] = b[map_b[j]];

  // Debiased divergence: OT(a,b) - (OT(a,a) + OT(b,b)) / 2. The entropic
  // biases of the three terms cancel, the value is exactly zero when the
  // downsampled clouds coincide, and the plan-based gradient is exact at
  // convergence.
  SinkhornPlan ab = sinkhorn_solve(sa, sb, cfg);
  SinkhornPlan aa = sinkhorn_solve(sa, sa, cfg);
  SinkhornPlan bb = sinkhorn_solve(sb, sb, cfg);
  out.value = ab.cost - 0.5 * (aa.cost + bb.cost);

  if (want_grad) {
    out.grad_a.assign(a.size(), Vec3{});
    out.grad_b.assign(b.size(), Vec3{});
    plan_grad_rows(ab, sa, sb, map_a, 1.0, out.grad_a);
    plan_grad_cols(ab, sa, sb, map_b, 1.0, out.grad_b);
    // For a symmetric self plan the row and column derivative contributions
    // coincide, so d/da of -OT(a,a)/2 is minus one row-side accumulation.
    plan_grad_rows(aa, sa, sa, map_a, -1.0, out.grad_a);
    plan_grad_rows(bb, sb, sb, map_b, -1.0, out.grad_b);
  }
  return out;
}

double voxel_iou(std::span<const Vec3> a, std::span<const Vec3> b, double h) {
  if (h <= 0) fail(ErrorCode::InvalidArgument, "voxel edge must be positive");
  long g = static_cast<long>(std::ceil(1.0 / h));
  auto key = [&](const Vec3& p) {
    auto cell = [&](double x) {
      return std::clamp(static_cast<long>(std::floor(x / h)), 0l, g - 1);
    };
    return (cell(p.x) * g + cell(p.y)) * g + cell(p.z);
  };
  std::unordered_set<long> va, vb;
  for (const Vec3& p : a) va.insert(key(p));
  for (const Vec3& p : b) vb.insert(key(p));
  size_t inter = 0;
  for (long v : va) inter += vb.count(v);
  size_t uni = va.size() + vb.size() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

struct UnionFind {
  std::vector<size_t> parent;
  explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  size_t find(size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(size_t a, size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

ParticleGraph particle_graph(std::span<const Vec3> pts, double r) {
  if (r <= 0) fail(ErrorCode::InvalidArgument, "particle graph radius must be positive");
  size_t n = pts.size();
  ParticleGraph out;
  out.component.assign(n, 0);
  out.nn_index.assign(n, 0);
  out.nn_dist.assign(n, 0.0);
  if (n == 0) return out;

  auto cell_of = [&](const Vec3& p) {
    return std::array<long, 3>{static_cast<long>(std::floor(p.x / r)),
                               static_cast<long>(std::floor(p.y / r)),
                               static_cast<long>(std::floor(p.z / r))};
  };
  auto hash_cell = [](const std::array<long, 3>& c) {
    return static_cast<uint64_t>(c[0]) * 73856093ull ^ static_cast<uint64_t>(c[1]) * 19349663ull ^
           static_cast<uint64_t>(c[2]) * 83492791ull;
  };
  std::unordered_map<uint64_t, std::vector<size_t>> cells;
  for (size_t i = 0; i < n; i++) cells[hash_cell(cell_of(pts[i]))].push_back(i);

  UnionFind uf(n);
  double r2 = r * r;
  for (size_t i = 0; i < n; i++) {
    auto c = cell_of(pts[i]);
    for (long dx = -1; dx <= 1; dx++)
      for (long dy = -1; dy <= 1; dy++)
        for (long dz = -1; dz <= 1; dz++) {
          auto it = cells.find(hash_cell({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells.end()) continue;
          for (size_t j : it->second)
            if (j > i && norm2(pts[i] - pts[j]) <= r2) uf.unite(i, j);
        }
  }

  // Nearest neighbor by expanding cell shells. Cells at Chebyshev distance k
  // only contain points at least (k-1)*r away, so the scan can stop once the
  // best distance is within (ring)*r after finishing that ring.
  long max_ring = static_cast<long>(std::ceil(1.8 / r)) + 2;
  for (size_t i = 0; i < n && n > 1; i++) {
    auto c = cell_of(pts[i]);
    double best = 1e300;
    size_t best_j = i;
    auto scan_cell = [&](long cx, long cy, long cz) {
      auto it = cells.find(hash_cell({cx, cy, cz}));
      if (it == cells.end()) return;
      for (size_t j : it->second) {
        if (j == i) continue;
        double d2 = norm2(pts[i] - pts[j]);
        if (d2 < best || (d2 == best && j < best_j)) {
          best = d2;
          best_j = j;
        }
      }
    };
    for (long ring = 1; ring <= max_ring; ring++) {
      if (ring == 1) {
        for (long dx = -1; dx <= 1; dx++)
          for (long dy = -1; dy <= 1; dy++)
            for (long dz = -1; dz <= 1; dz++) scan_cell(c[0] + dx, c[1] + dy, c[2] + dz);
      } else {
        for (long dx = -ring; dx <= ring; dx++)
          for (long dy = -ring; dy <= ring; dy++)
            for (long dz = -ring; dz <= ring; dz++) {
              if (std::max({std::labs(dx), std::labs(dy), std::labs(dz)}) != ring) continue;
              scan_cell(c[0] + dx, c[1] + dy, c[2] + dz);
            }
      }
      if (best_j != i && std::sqrt(best) <= static_cast<double>(ring) * r) break;
    }
    out.nn_index[i] = best_j;
    out.nn_dist[i] = best_j == i ? 0.0 : std::sqrt(best);
  }

  std::unordered_map<size_t, int> label;
  for (size_t i = 0; i < n; i++) {
    size_t root = uf.find(i);
    auto it = label.find(root);
    if (it == label.end()) {
      int id = static_cast<int>(label.size());
      label[root] = id;
      out.component[i] = id;
    } else {
      out.component[i] = it->second;
    }
  }
  out.num_components = static_cast<int>(label.size());
  return out;
}

double mean_nn_spacing(std::span<const Vec3> pts) {
  if (pts.size() < 2) return 0;
  ParticleGraph g = particle_graph(pts, 0.05);
  double s = 0;
  for (double d : g.nn_dist) s += d;
  return s / static_cast<double>(pts.size());
}

}  // namespace sdsl
