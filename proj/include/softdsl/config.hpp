#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "softdsl/la.hpp"

namespace sdsl {

struct MaterialParams {
  double density = 1;
  double youngs = 5e3;
  double poisson = 0.2;
  double yield_stress = 50;       // 1e30 means purely elastic
  double friction = 0.9;

  double mu() const { return youngs / (2.0 * (1.0 + poisson)); }
  double lambda() const {
    return youngs * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
  }
};

struct SimConfig {
  int grid = 64;
  double dt = 1e-4;
  int substeps_per_frame = 20;
  Vec3 gravity = {0, -9.8, 0};
  int particles_per_cell = 8;
  int boundary_cells = 3;
  double contact_inflate_cells = 0.5;  // tool influence band, in grid cells
  double tool_friction = 0.9;

  double dx() const { return 1.0 / grid; }
  double frame_dt() const { return dt * substeps_per_frame; }
};

struct ActionConfig {
  double lin_bound = 2.0;   // |v| per component, workspace units / s
  double ang_bound = 6.28;  // rad / s
  double gap_bound = 0.5;   // gripper gap velocity, units / s
};

struct ObjectiveConfig {
  double m_rel = 0.01;        // relation margin
  double tau_contact = 0.005; // touch threshold
  double margin_away = 0.05;
  double c_break = 1.5;       // allowed nearest-neighbor stretch ratio
  double softmin_tau = 0.01;  // softmin temperature for touch
  double delta_grasp = 0.03;  // gripper midpoint-to-com tolerance
  double m_align = 0.02;      // vertical/horizontal tolerance
};

struct EmdConfig {
  double epsilon = 0.002;
  int max_iters = 500;
  int target_points = 512;
  uint64_t seed = 12345;
};

struct PlannerConfig {
  int max_pose_samples = 10000;
  double rrt_step = 0.02;
  double goal_bias = 0.1;
  int rrt_max_nodes = 20000;
  double clearance = 0.01;
  double kp = 200;
  double kd = 20;
  double transit_speed = 0.5;
  double approach_len = 0.05;
  Vec3 home = {0.12, 0.82, 0.12};
};

struct SolverConfig {
  double lr = 0.02;
  int steps = 500;
  int frames = 80;
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct MetricsConfig {
  double voxel_edge = 1.0 / 64.0;
  double split_radius_factor = 2.0;  // times mean initial particle spacing
};

struct GripperGeom {
  Vec3 finger_half = {0.008, 0.05, 0.016};
  double gap_max = 0.22;
  double gap_min = 0.004;
};
struct KnifeGeom {
  Vec3 half = {0.004, 0.06, 0.05};
};
struct BoardGeom {
  Vec3 half = {0.12, 0.01, 0.12};
};
struct RollingPinGeom {
  double radius = 0.025;
  double half_length = 0.12;
};

struct EngineConfig {
  uint64_t seed = 0;
  int threads = 0;  // 0 = auto (SOFTDSL_THREADS or hardware)

  SimConfig sim;
  ActionConfig actions;
  ObjectiveConfig objective;
  EmdConfig emd;
  PlannerConfig planner;
  SolverConfig solver;
  MetricsConfig metrics;

  GripperGeom gripper;
  KnifeGeom knife;
  BoardGeom board;
  RollingPinGeom rolling_pin;

  std::map<std::string, MaterialParams> materials;

  bool debug_corrupt_adjoint = false;  // test hook: breaks one adjoint term

  EngineConfig();

  const MaterialParams& material(const std::string& name) const;

  // Assign one value by dotted key, e.g. "solver.lr" = "0.02",
  // "sim.gravity" = "[0,-9.8,0]". Throws on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  // Apply every key of a config file (TOML syntax; see config.cpp for the
  // supported subset) on top of the current values.
  void load_file(const std::string& path);

  std::string to_json() const;  // config echo for manifests
};

}  // namespace sdsl
