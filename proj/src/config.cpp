#include "softdsl/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "softdsl/error.hpp"

namespace sdsl {

namespace {

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    while (pos < v.size() && std::isspace(static_cast<unsigned char>(v[pos]))) pos++;
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail(ErrorCode::Parse, "config: bad number for '" + key + "': " + v);
  }
}

int64_t parse_int(const std::string& key, const std::string& v) {
  double d = parse_double(key, v);
  auto i = static_cast<int64_t>(d);
  if (static_cast<double>(i) != d)
    fail(ErrorCode::Parse, "config: expected integer for '" + key + "': " + v);
  return i;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(ErrorCode::Parse, "config: expected true/false for '" + key + "': " + v);
}

Vec3 parse_vec3(const std::string& key, const std::string& v) {
  std::string s = v;
  if (s.size() < 2 || s.front() != '[' || s.back() != ']')
    fail(ErrorCode::Parse, "config: expected [x,y,z] for '" + key + "': " + v);
  s = s.substr(1, s.size() - 2);
  std::array<double, 3> vals{};
  size_t start = 0;
  for (int i = 0; i < 3; i++) {
    size_t comma = i < 2 ? s.find(',', start) : s.size();
    if (comma == std::string::npos)
      fail(ErrorCode::Parse, "config: expected 3 components for '" + key + "'");
    vals[static_cast<size_t>(i)] = parse_double(key, s.substr(start, comma - start));
    start = comma + 1;
  }
  return {vals[0], vals[1], vals[2]};
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

EngineConfig::EngineConfig() {
  // Invented presets; densities keep elastic wave speeds inside the explicit
  // integration limit at the default grid, with g = 9.8 in the unit cube.
  materials["dough"] = {4, 5e3, 0.2, 50, 0.9};
  materials["rubber"] = {6, 1e4, 0.3, 1e30, 0.9};
  materials["fiber"] = {2, 2e3, 0.3, 300, 0.9};
  materials["iron"] = {25, 5e4, 0.3, 1e30, 0.9};
}

const MaterialParams& EngineConfig::material(const std::string& name) const {
  auto it = materials.find(name);
  if (it == materials.end()) fail(ErrorCode::Validation, "unknown material: " + name);
  return it->second;
}

void EngineConfig::set(const std::string& key, const std::string& value) {
  if (key == "seed") { seed = static_cast<uint64_t>(parse_int(key, value)); return; }
  if (key == "threads") { threads = static_cast<int>(parse_int(key, value)); return; }
  if (key == "sim.grid") { sim.grid = static_cast<int>(parse_int(key, value)); return; }
  if (key == "sim.dt") { sim.dt = parse_double(key, value); return; }
  if (key == "sim.substeps_per_frame") { sim.substeps_per_frame = static_cast<int>(parse_int(key, value)); return; }
  if (key == "sim.gravity") { sim.gravity = parse_vec3(key, value); return; }
  if (key == "sim.particles_per_cell") { sim.particles_per_cell = static_cast<int>(parse_int(key, value)); return; }
  if (key == "sim.boundary_cells") { sim.boundary_cells = static_cast<int>(parse_int(key, value)); return; }
  if (key == "sim.contact_inflate_cells") { sim.contact_inflate_cells = parse_double(key, value); return; }
  if (key == "sim.tool_friction") { sim.tool_friction = parse_double(key, value); return; }
  if (key == "actions.lin_bound") { actions.lin_bound = parse_double(key, value); return; }
  if (key == "actions.ang_bound") { actions.ang_bound = parse_double(key, value); return; }
  if (key == "actions.gap_bound") { actions.gap_bound = parse_double(key, value); return; }
  if (key == "objective.m_rel") { objective.m_rel = parse_double(key, value); return; }
  if (key == "objective.tau_contact") { objective.tau_contact = parse_double(key, value); return; }
  if (key == "objective.margin_away") { objective.margin_away = parse_double(key, value); return; }
  if (key == "objective.c_break") { objective.c_break = parse_double(key, value); return; }
  if (key == "objective.softmin_tau") { objective.softmin_tau = parse_double(key, value); return; }
  if (key == "objective.delta_grasp") { objective.delta_grasp = parse_double(key, value); return; }
  if (key == "objective.m_align") { objective.m_align = parse_double(key, value); return; }
  if (key == "emd.epsilon") { emd.epsilon = parse_double(key, value); return; }
  if (key == "emd.max_iters") { emd.max_iters = static_cast<int>(parse_int(key, value)); return; }
  if (key == "emd.target_points") { emd.target_points = static_cast<int>(parse_int(key, value)); return; }
  if (key == "emd.seed") { emd.seed = static_cast<uint64_t>(parse_int(key, value)); return; }
  if (key == "planner.max_pose_samples") { planner.max_pose_samples = static_cast<int>(parse_int(key, value)); return; }
  if (key == "planner.rrt_step") { planner.rrt_step = parse_double(key, value); return; }
  if (key == "planner.goal_bias") { planner.goal_bias = parse_double(key, value); return; }
  if (key == "planner.rrt_max_nodes") { planner.rrt_max_nodes = static_cast<int>(parse_int(key, value)); return; }
  if (key == "planner.clearance") { planner.clearance = parse_double(key, value); return; }
  if (key == "planner.kp") { planner.kp = parse_double(key, value); return; }
  if (key == "planner.kd") { planner.kd = parse_double(key, value); return; }
  if (key == "planner.transit_speed") { planner.transit_speed = parse_double(key, value); return; }
  if (key == "planner.approach_len") { planner.approach_len = parse_double(key, value); return; }
  if (key == "planner.home") { planner.home = parse_vec3(key, value); return; }
  if (key == "solver.lr") { solver.lr = parse_double(key, value); return; }
  if (key == "solver.steps") { solver.steps = static_cast<int>(parse_int(key, value)); return; }
  if (key == "solver.frames") { solver.frames = static_cast<int>(parse_int(key, value)); return; }
  if (key == "solver.clip_norm") { solver.clip_norm = parse_double(key, value); return; }
  if (key == "solver.beta1") { solver.beta1 = parse_double(key, value); return; }
  if (key == "solver.beta2") { solver.beta2 = parse_double(key, value); return; }
  if (key == "solver.adam_eps") { solver.adam_eps = parse_double(key, value); return; }
  if (key == "metrics.voxel_edge") { metrics.voxel_edge = parse_double(key, value); return; }
  if (key == "metrics.split_radius_factor") { metrics.split_radius_factor = parse_double(key, value); return; }
  if (key == "actuators.gripper.finger_half") { gripper.finger_half = parse_vec3(key, value); return; }
  if (key == "actuators.gripper.gap_max") { gripper.gap_max = parse_double(key, value); return; }
  if (key == "actuators.gripper.gap_min") { gripper.gap_min = parse_double(key, value); return; }
  if (key == "actuators.knife.half") { knife.half = parse_vec3(key, value); return; }
  if (key == "actuators.board.half") { board.half = parse_vec3(key, value); return; }
  if (key == "actuators.rolling_pin.radius") { rolling_pin.radius = parse_double(key, value); return; }
  if (key == "actuators.rolling_pin.half_length") { rolling_pin.half_length = parse_double(key, value); return; }
  if (key == "debug.corrupt_adjoint") { debug_corrupt_adjoint = parse_bool(key, value); return; }

  if (key.rfind("materials.", 0) == 0) {
    std::string rest = key.substr(10);
    size_t dot = rest.find('.');
    if (dot != std::string::npos) {
      std::string name = rest.substr(0, dot);
      std::string field = rest.substr(dot + 1);
      MaterialParams& m = materials[name];
      if (field == "density") { m.density = parse_double(key, value); return; }
      if (field == "youngs") { m.youngs = parse_double(key, value); return; }
      if (field == "poisson") { m.poisson = parse_double(key, value); return; }
      if (field == "yield_stress") { m.yield_stress = parse_double(key, value); return; }
      if (field == "friction") { m.friction = parse_double(key, value); return; }
    }
  }
  fail(ErrorCode::Parse, "config: unknown key '" + key + "'");
}

// Supported TOML subset: [section] / [section.sub] headers, key = value with
// numbers, booleans, "strings", and [a, b, c] arrays, and # comments.
void EngineConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "config: cannot open " + path);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    // strip comments outside strings/arrays
    bool in_str = false;
    for (size_t i = 0; i < line.size(); i++) {
      if (line[i] == '"') in_str = !in_str;
      if (line[i] == '#' && !in_str) {
        line = line.substr(0, i);
        break;
      }
    }
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        fail(ErrorCode::Parse, path + ":" + std::to_string(lineno) + ": bad section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::Parse, path + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    std::string full = section.empty() ? key : section + "." + key;
    try {
      set(full, value);
    } catch (const Error& e) {
      fail(ErrorCode::Parse, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::string EngineConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["threads"] = threads;
  j["sim"] = {{"grid", sim.grid},
              {"dt", sim.dt},
              {"substeps_per_frame", sim.substeps_per_frame},
              {"gravity", {sim.gravity.x, sim.gravity.y, sim.gravity.z}},
              {"particles_per_cell", sim.particles_per_cell},
              {"boundary_cells", sim.boundary_cells},
              {"contact_inflate_cells", sim.contact_inflate_cells},
              {"tool_friction", sim.tool_friction}};
  j["actions"] = {{"lin_bound", actions.lin_bound},
                  {"ang_bound", actions.ang_bound},
                  {"gap_bound", actions.gap_bound}};
  j["objective"] = {{"m_rel", objective.m_rel},       {"tau_contact", objective.tau_contact},
                    {"margin_away", objective.margin_away}, {"c_break", objective.c_break},
                    {"softmin_tau", objective.softmin_tau}, {"delta_grasp", objective.delta_grasp},
                    {"m_align", objective.m_align}};
  j["emd"] = {{"epsilon", emd.epsilon},
              {"max_iters", emd.max_iters},
              {"target_points", emd.target_points},
              {"seed", emd.seed}};
  j["planner"] = {{"max_pose_samples", planner.max_pose_samples},
                  {"rrt_step", planner.rrt_step},
                  {"goal_bias", planner.goal_bias},
                  {"rrt_max_nodes", planner.rrt_max_nodes},
                  {"clearance", planner.clearance},
                  {"kp", planner.kp},
                  {"kd", planner.kd},
                  {"transit_speed", planner.transit_speed},
                  {"approach_len", planner.approach_len},
                  {"home", {planner.home.x, planner.home.y, planner.home.z}}};
  j["solver"] = {{"lr", solver.lr},
                 {"steps", solver.steps},
                 {"frames", solver.frames},
                 {"clip_norm", solver.clip_norm}};
  j["metrics"] = {{"voxel_edge", metrics.voxel_edge},
                  {"split_radius_factor", metrics.split_radius_factor}};
  for (const auto& [name, m] : materials) {
    j["materials"][name] = {{"density", m.density},
                            {"youngs", m.youngs},
                            {"poisson", m.poisson},
                            {"yield_stress", m.yield_stress},
                            {"friction", m.friction}};
  }
  j["actuators"] = {
      {"gripper",
       {{"finger_half", {gripper.finger_half.x, gripper.finger_half.y, gripper.finger_half.z}},
        {"gap_max", gripper.gap_max},
        {"gap_min", gripper.gap_min}}},
      {"knife", {{"half", {knife.half.x, knife.half.y, knife.half.z}}}},
      {"board", {{"half", {board.half.x, board.half.y, board.half.z}}}},
      {"rolling_pin", {{"radius", rolling_pin.radius}, {"half_length", rolling_pin.half_length}}}};
  return j.dump(2);
}

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::Parse: return "ParseError";
    case ErrorCode::Type: return "TypeError";
    case ErrorCode::Validation: return "ValidationError";
    case ErrorCode::UnknownFunction: return "UnknownFunction";
    case ErrorCode::UnknownObject: return "UnknownObject";
    case ErrorCode::AmbiguousQuery: return "AmbiguousQuery";
    case ErrorCode::NoMatch: return "NoMatch";
    case ErrorCode::Desugar: return "DesugarError";
    case ErrorCode::Unmatched: return "UnmatchedInstruction";
    case ErrorCode::BadTimeWindow: return "BadTimeWindow";
    case ErrorCode::Unresolvable: return "UnresolvableObject";
    case ErrorCode::IllegalSamplerCond: return "IllegalSamplerCond";
    case ErrorCode::Infeasible: return "InfeasibleSample";
    case ErrorCode::PlanFailure: return "PlanFailure";
    case ErrorCode::TrackingFailure: return "TrackingFailure";
    case ErrorCode::NumericalBlowup: return "NumericalBlowup";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::TapeMismatch: return "TapeMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace sdsl
