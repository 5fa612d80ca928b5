#include "softdsl/scene.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "softdsl/error.hpp"
#include "softdsl/runio.hpp"

namespace sdsl {

namespace {

using nlohmann::json;

struct NameTable {
  const char* name;
  int value;
};

constexpr NameTable kColors[] = {{"white", 0}, {"gray", 1},  {"green", 2},  {"red", 3},
                                 {"blue", 4},  {"black", 5}, {"purple", 6}, {"yellow", 7}};
constexpr NameTable kShapes[] = {{"rope", 0}, {"sphere", 1}, {"box", 2},
                                 {"mat", 3},  {"dough", 4},  {"custom", 5}};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

const char* to_string(Color c) { return kColors[static_cast<int>(c)].name; }
const char* to_string(ShapeClass s) { return kShapes[static_cast<int>(s)].name; }
const char* to_string(ActuatorKind k) {
  switch (k) {
    case ActuatorKind::Gripper: return "gripper";
    case ActuatorKind::Knife: return "knife";
    case ActuatorKind::Board: return "board";
    case ActuatorKind::RollingPin: return "rolling_pin";
  }
  return "?";
}

std::optional<Color> color_from_string(const std::string& s) {
  std::string l = lower(s);
  if (l == "grey") return Color::Gray;
  for (const auto& e : kColors)
    if (l == e.name) return static_cast<Color>(e.value);
  return std::nullopt;
}

std::optional<ShapeClass> shape_from_string(const std::string& s) {
  std::string l = lower(s);
  if (l == "cube") return ShapeClass::Box;
  if (l == "ball") return ShapeClass::Sphere;
  for (const auto& e : kShapes)
    if (l == e.name) return static_cast<ShapeClass>(e.value);
  return std::nullopt;
}

std::optional<ActuatorKind> actuator_from_string(const std::string& s) {
  std::string l = lower(s);
  if (l == "gripper") return ActuatorKind::Gripper;
  if (l == "knife") return ActuatorKind::Knife;
  if (l == "board") return ActuatorKind::Board;
  if (l == "rolling_pin" || l == "rolling pin" || l == "rollingpin" || l == "pin")
    return ActuatorKind::RollingPin;
  return std::nullopt;
}

void ActuatorSpec::validate() const {
  if (std::fabs(norm(rot) - 1.0) > 1e-9)
    fail(ErrorCode::Validation, "actuator quaternion is not unit norm");
  auto positive = [](const Vec3& v) { return v.x > 0 && v.y > 0 && v.z > 0; };
  switch (kind) {
    case ActuatorKind::Knife:
    case ActuatorKind::Board:
      if (!positive(box_half)) fail(ErrorCode::Validation, "actuator box extents must be positive");
      break;
    case ActuatorKind::RollingPin:
      if (radius <= 0 || half_length <= 0)
        fail(ErrorCode::Validation, "rolling pin extents must be positive");
      break;
    case ActuatorKind::Gripper:
      if (!positive(finger_half) || gap <= 0)
        fail(ErrorCode::Validation, "gripper extents must be positive");
      break;
  }
}

ActuatorSpec ActuatorSpec::from_config(ActuatorKind kind, const EngineConfig& cfg) {
  ActuatorSpec a;
  a.kind = kind;
  a.kp = cfg.planner.kp;
  a.kd = cfg.planner.kd;
  switch (kind) {
    case ActuatorKind::Gripper:
      a.finger_half = cfg.gripper.finger_half;
      a.gap = cfg.gripper.gap_max;
      break;
    case ActuatorKind::Knife: a.box_half = cfg.knife.half; break;
    case ActuatorKind::Board: a.box_half = cfg.board.half; break;
    case ActuatorKind::RollingPin:
      a.radius = cfg.rolling_pin.radius;
      a.half_length = cfg.rolling_pin.half_length;
      break;
  }
  return a;
}

void Task::validate() const {
  if (keyframes.empty()) fail(ErrorCode::Validation, "task has no keyframes");
  if (stages.size() + 1 != keyframes.size())
    fail(ErrorCode::Validation, "expected len(stages) == len(keyframes) - 1, got " +
                                    std::to_string(stages.size()) + " stages and " +
                                    std::to_string(keyframes.size()) + " keyframes");
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
    fail(ErrorCode::Validation, "iou_threshold must lie in (0,1)");

  size_t n = keyframes.front().particle_count();
  for (size_t k = 0; k < keyframes.size(); k++) {
    const Keyframe& kf = keyframes[k];
    std::string where = "keyframe " + std::to_string(k);
    if (kf.particle_count() != n)
      fail(ErrorCode::Validation, where + " has " + std::to_string(kf.particle_count()) +
                                      " particles, expected " + std::to_string(n));
    for (const Vec3& p : kf.positions)
      if (!(p.x >= 0 && p.x <= 1 && p.y >= 0 && p.y <= 1 && p.z >= 0 && p.z <= 1))
        fail(ErrorCode::Validation, where + " has positions outside the unit cube");

    std::vector<char> covered(n, 0);
    for (const SceneObject& o : kf.objects) {
      std::string who = where + " object '" + o.name + "'";
      if (o.span.count == 0) fail(ErrorCode::Validation, who + " has an empty particle span");
      if (o.span.end() > n) fail(ErrorCode::Validation, who + " span exceeds particle count");
      for (size_t i = o.span.begin; i < o.span.end(); i++) {
        if (covered[i]) fail(ErrorCode::Validation, who + " overlaps another object's span");
        covered[i] = 1;
      }
      size_t same = 0;
      for (const SceneObject& other : kf.objects)
        if (other.name == o.name) same++;
      if (same != 1) fail(ErrorCode::Validation, who + " name is not unique");
      if (materials.find(o.name) == materials.end())
        fail(ErrorCode::Validation, who + " has no material assigned");
    }
    if (std::find(covered.begin(), covered.end(), 0) != covered.end())
      fail(ErrorCode::Validation, where + " objects do not cover all particles");

    // identity across keyframes: same names over the same spans
    if (k > 0) {
      const Keyframe& first = keyframes.front();
      if (kf.objects.size() != first.objects.size())
        fail(ErrorCode::Validation, where + " object registry differs from keyframe 0");
      for (size_t i = 0; i < kf.objects.size(); i++) {
        if (kf.objects[i].name != first.objects[i].name ||
            !(kf.objects[i].span == first.objects[i].span))
          fail(ErrorCode::Validation, where + " object '" + kf.objects[i].name +
                                          "' breaks identity with keyframe 0");
      }
    }
  }
}

namespace {

json object_to_json(const SceneObject& o) {
  return json{{"name", o.name},
              {"color", to_string(o.color)},
              {"shape", to_string(o.shape)},
              {"span", {o.span.begin, o.span.count}}};
}

SceneObject object_from_json(const json& j, const std::string& where) {
  SceneObject o;
  try {
    o.name = j.at("name").get<std::string>();
    auto color = color_from_string(j.at("color").get<std::string>());
    auto shape = shape_from_string(j.at("shape").get<std::string>());
    if (!color) fail(ErrorCode::Parse, where + ": unknown color");
    if (!shape) fail(ErrorCode::Parse, where + ": unknown shape");
    o.color = *color;
    o.shape = *shape;
    const json* span = nullptr;
    if (j.contains("span")) {
      span = &j.at("span");
    } else if (j.contains("spans")) {
      const json& spans = j.at("spans");
      if (!spans.is_array() || spans.empty())
        fail(ErrorCode::Parse, where + ": bad spans array");
      for (const auto& s : spans)
        if (s != spans.front())
          fail(ErrorCode::Parse, where + ": per-keyframe spans must agree");
      span = &spans.front();
    } else {
      fail(ErrorCode::Parse, where + ": missing span");
    }
    o.span.begin = span->at(0).get<size_t>();
    o.span.count = span->at(1).get<size_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, where + ": " + e.what());
  }
  return o;
}

}  // namespace

Task load_task(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, path + ": " + e.what());
  }

  Task task;
  try {
    if (!j.contains("version")) fail(ErrorCode::Parse, path + ": missing version");
    int version = j.at("version").get<int>();
    if (version != 1) fail(ErrorCode::Parse, path + ": unsupported version");

    std::vector<std::vector<Vec3>> frames;
    if (j.contains("particles_sidecar")) {
      std::filesystem::path side =
          std::filesystem::path(path).parent_path() / j.at("particles_sidecar").get<std::string>();
      auto arrays = read_bin_arrays(side.string());
      for (const auto& a : arrays) {
        if (a.cols != 3) fail(ErrorCode::Parse, side.string() + ": expected Nx3 arrays");
        std::vector<Vec3> pts(a.rows);
        for (size_t i = 0; i < a.rows; i++)
          pts[i] = {a.data[i * 3], a.data[i * 3 + 1], a.data[i * 3 + 2]};
        frames.push_back(std::move(pts));
      }
    } else {
      for (const auto& arr : j.at("particles")) {
        if (!arr.is_array() || arr.size() % 3 != 0)
          fail(ErrorCode::Parse, path + ": particles arrays must be flat row-major Nx3");
        std::vector<Vec3> pts(arr.size() / 3);
        for (size_t i = 0; i < pts.size(); i++)
          pts[i] = {arr[i * 3].get<double>(), arr[i * 3 + 1].get<double>(),
                    arr[i * 3 + 2].get<double>()};
        frames.push_back(std::move(pts));
      }
    }

    std::vector<SceneObject> objects;
    size_t oi = 0;
    for (const auto& jo : j.at("objects"))
      objects.push_back(object_from_json(jo, path + ": objects[" + std::to_string(oi++) + "]"));

    for (size_t k = 0; k < frames.size(); k++) {
      Keyframe kf;
      kf.frame_index = static_cast<int>(k);
      kf.positions = std::move(frames[k]);
      kf.objects = objects;
      task.keyframes.push_back(std::move(kf));
    }

    for (const auto& js : j.at("stages")) {
      Stage s;
      s.instruction = js.at("instruction").get<std::string>();
      if (js.contains("program_text")) s.program_text = js.at("program_text").get<std::string>();
      task.stages.push_back(std::move(s));
    }

    for (const auto& [name, mat] : j.at("materials").items())
      task.materials[name] = mat.get<std::string>();

    task.iou_threshold = j.at("iou_threshold").get<double>();
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, path + ": " + e.what());
  }

  task.validate();
  return task;
}

void save_task(const Task& task, const std::string& path, bool use_sidecar) {
  task.validate();
  json j;
  j["version"] = 1;
  if (use_sidecar) {
    std::filesystem::path p(path);
    std::string side = p.stem().string() + ".particles.bin";
    std::vector<BinArray> arrays;
    for (const auto& kf : task.keyframes) {
      BinArray a;
      a.rows = kf.positions.size();
      a.cols = 3;
      a.data.reserve(a.rows * 3);
      for (const Vec3& v : kf.positions) {
        a.data.push_back(v.x);
        a.data.push_back(v.y);
        a.data.push_back(v.z);
      }
      arrays.push_back(std::move(a));
    }
    write_bin_arrays((p.parent_path() / side).string(), arrays);
    j["particles_sidecar"] = side;
  } else {
    json frames = json::array();
    for (const auto& kf : task.keyframes) {
      json arr = json::array();
      for (const Vec3& v : kf.positions) {
        arr.push_back(v.x);
        arr.push_back(v.y);
        arr.push_back(v.z);
      }
      frames.push_back(std::move(arr));
    }
    j["particles"] = std::move(frames);
  }
  json objs = json::array();
  for (const auto& o : task.keyframes.front().objects) objs.push_back(object_to_json(o));
  j["objects"] = std::move(objs);
  json stages = json::array();
  for (const auto& s : task.stages) {
    json js{{"instruction", s.instruction}};
    if (!s.program_text.empty()) js["program_text"] = s.program_text;
    stages.push_back(std::move(js));
  }
  j["stages"] = std::move(stages);
  j["materials"] = task.materials;
  j["iou_threshold"] = task.iou_threshold;
  write_text_file(path, j.dump(2) + "\n");
}

namespace {

Vec3 center_of_mass(const Keyframe& kf, const SceneObject& o) {
  Vec3 c{};
  for (size_t i = o.span.begin; i < o.span.end(); i++) c += kf.positions[i];
  return c / static_cast<double>(o.span.count);
}

}  // namespace

SceneObject resolve_query(const Keyframe& kf, const std::string& desc) {
  std::string d = lower(desc);
  // collapse whitespace
  std::istringstream ss(d);
  std::vector<std::string> words;
  for (std::string w; ss >> w;) words.push_back(w);

  if (words.size() == 1 && words[0] == "all") {
    SceneObject all;
    all.name = "all";
    all.span = {0, kf.particle_count()};
    return all;
  }

  // exact object name match wins
  for (const SceneObject& o : kf.objects)
    if (lower(o.name) == d) return o;

  std::optional<Color> color;
  std::optional<ShapeClass> shape;
  std::string location;
  for (const std::string& w : words) {
    if (auto c = color_from_string(w)) {
      if (color) fail(ErrorCode::NoMatch, "query '" + desc + "' names two colors");
      color = c;
    } else if (auto s = shape_from_string(w)) {
      if (shape) fail(ErrorCode::NoMatch, "query '" + desc + "' names two shapes");
      shape = s;
    } else if (w == "left" || w == "right" || w == "top" || w == "bottom" || w == "front" ||
               w == "back") {
      if (!location.empty()) fail(ErrorCode::NoMatch, "query '" + desc + "' names two locations");
      location = w;
    } else {
      fail(ErrorCode::NoMatch, "query '" + desc + "': unknown word '" + w + "'");
    }
  }

  std::vector<const SceneObject*> candidates;
  for (const SceneObject& o : kf.objects) {
    if (color && o.color != *color) continue;
    if (shape && o.shape != *shape) continue;
    candidates.push_back(&o);
  }
  if (candidates.empty())
    fail(ErrorCode::NoMatch, "no object matches query '" + desc + "'");

  if (!location.empty() && candidates.size() > 1) {
    int axis = (location == "left" || location == "right") ? 0
               : (location == "top" || location == "bottom") ? 1
                                                             : 2;
    bool want_max = location == "right" || location == "top" || location == "back";
    const SceneObject* best = nullptr;
    double best_v = 0;
    for (const SceneObject* o : candidates) {
      double v = center_of_mass(kf, *o)[axis];
      bool better = best == nullptr;
      if (!better) {
        if (v != best_v)
          better = want_max ? v > best_v : v < best_v;
        else
          better = o->name < best->name;  // deterministic tie break
      }
      if (better) {
        best = o;
        best_v = v;
      }
    }
    return *best;
  }

  if (candidates.size() > 1)
    fail(ErrorCode::AmbiguousQuery,
         "query '" + desc + "' matches " + std::to_string(candidates.size()) + " objects");
  return *candidates.front();
}

std::vector<Vec3> object_points(const Keyframe& kf, const SceneObject& obj) {
  std::vector<Vec3> pts(obj.span.count);
  for (size_t i = 0; i < obj.span.count; i++) pts[i] = kf.positions[obj.span.begin + i];
  return pts;
}

std::vector<Vec3> extract_goal(const Task& task, size_t stage, const std::string& desc) {
  if (stage >= task.stages.size())
    fail(ErrorCode::InvalidArgument,
         "stage " + std::to_string(stage) + " out of range for a task with " +
             std::to_string(task.stages.size()) + " stages");
  const Keyframe& goal = task.keyframes[stage + 1];
  SceneObject obj = resolve_query(goal, desc);
  return object_points(goal, obj);
}

}  // namespace sdsl
