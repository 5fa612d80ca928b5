#pragma once

#include <span>
#include <string>
#include <vector>

#include "softdsl/config.hpp"
#include "softdsl/la.hpp"

namespace sdsl {

struct PointCloud {
  std::vector<Vec3> points;
  std::string provenance;  // object name + frame, for diagnostics

  size_t size() const { return points.size(); }
  std::span<const Vec3> view() const { return points; }
};

Vec3 cloud_com(std::span<const Vec3> pts);
// Componentwise extrema; arg[axis] receives the attaining index (first wins).
Vec3 cloud_min(std::span<const Vec3> pts, size_t* arg = nullptr);
Vec3 cloud_max(std::span<const Vec3> pts, size_t* arg = nullptr);

enum class PartSel {
  LeftPart, RightPart, FrontPart, BackPart, TopPart, BottomPart,
  FrontEnd, BackEnd, LeftEnd, RightEnd,
};

// Part selectors: *part keeps the half below/above the median along the mapped
// axis (left/right: x, top/bottom: y, front/back: z; front = smaller z); *end
// keeps the 20% quantile slab at the matching extreme. Ties break by index,
// so the two halves always partition the cloud.
std::vector<size_t> select_part_indices(std::span<const Vec3> pts, PartSel part);

enum class EmdMode { Sinkhorn, Exact };

struct EmdResult {
  double value = 0;
  // Gradients w.r.t. the ORIGINAL clouds (zero for points dropped by
  // downsampling); populated only in sinkhorn mode with want_grad.
  std::vector<Vec3> grad_a, grad_b;
};

// Earth mover's distance between clouds. Sinkhorn mode runs a debiased,
// entropy-regularized solve on clouds downsampled to cfg.target_points with a
// fixed seed; exact mode solves the assignment problem and requires
// |a| == |b| <= 512. Values are mean transport distances, so the two modes
// are directly comparable.
EmdResult emd(std::span<const Vec3> a, std::span<const Vec3> b, EmdMode mode,
              const EmdConfig& cfg, bool want_grad = false);

// Occupancy IoU on the shared workspace grid with voxel edge h.
double voxel_iou(std::span<const Vec3> a, std::span<const Vec3> b, double h);

struct ParticleGraph {
  std::vector<int> component;  // label per point, dense from 0
  int num_components = 0;
  std::vector<size_t> nn_index;
  std::vector<double> nn_dist;
};

// Radius-r adjacency: connected components plus each point's nearest
// neighbor. Deterministic; r must be positive.
ParticleGraph particle_graph(std::span<const Vec3> pts, double r);

double mean_nn_spacing(std::span<const Vec3> pts);

}  // namespace sdsl
