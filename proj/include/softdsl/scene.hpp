#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "softdsl/config.hpp"
#include "softdsl/la.hpp"

namespace sdsl {

enum class Color { White, Gray, Green, Red, Blue, Black, Purple, Yellow };
enum class ShapeClass { Rope, Sphere, Box, Mat, Dough, Custom };
enum class ActuatorKind { Gripper, Knife, Board, RollingPin };

const char* to_string(Color c);
const char* to_string(ShapeClass s);
const char* to_string(ActuatorKind k);
std::optional<Color> color_from_string(const std::string& s);
std::optional<ShapeClass> shape_from_string(const std::string& s);  // accepts synonyms (cube, ball)
std::optional<ActuatorKind> actuator_from_string(const std::string& s);

// Contiguous particle index range.
struct Span {
  size_t begin = 0;
  size_t count = 0;
  size_t end() const { return begin + count; }
  bool operator==(const Span&) const = default;
};

struct SceneObject {
  std::string name;
  Color color = Color::White;
  ShapeClass shape = ShapeClass::Custom;
  Span span;
  bool operator==(const SceneObject&) const = default;
};

struct Keyframe {
  std::vector<Vec3> positions;  // workspace units, inside the unit cube
  std::vector<SceneObject> objects;
  int frame_index = 0;

  size_t particle_count() const { return positions.size(); }
  bool operator==(const Keyframe&) const = default;
};

// Rigid tool description. Geometry fields are used according to `kind`:
// knife/board use box_half, rolling pin uses radius/half_length (axis = local
// x), gripper uses finger_half boxes offset +-(gap/2 + finger_half.x) along
// local x.
struct ActuatorSpec {
  ActuatorKind kind = ActuatorKind::Board;
  Vec3 box_half = {0.1, 0.01, 0.1};
  Vec3 finger_half = {0.008, 0.05, 0.016};
  double radius = 0.025;
  double half_length = 0.12;
  double gap = 0.1;
  Vec3 pos = {0.5, 0.8, 0.5};
  Quat rot;
  double kp = 200, kd = 20;

  void validate() const;  // unit quaternion, positive extents
  static ActuatorSpec from_config(ActuatorKind kind, const EngineConfig& cfg);
};

struct Stage {
  std::string instruction;
  std::string program_text;  // empty when the instruction is to be compiled
  bool operator==(const Stage&) const = default;
};

struct Task {
  std::vector<Keyframe> keyframes;
  std::vector<Stage> stages;
  std::map<std::string, std::string> materials;  // object name -> material name
  double iou_threshold = 0.6;

  void validate() const;  // throws ValidationError naming the offender
  bool operator==(const Task&) const = default;
};

Task load_task(const std::string& path);
// use_sidecar routes particle arrays to a binary file next to the JSON.
void save_task(const Task& task, const std::string& path, bool use_sidecar = false);

// Resolve "left white mat" style descriptions. "all" yields a synthetic
// object covering every particle. Location words pick the extreme center of
// mass along the mapped axis (left/right: x, top/bottom: y, front/back: z;
// front is the smaller z).
SceneObject resolve_query(const Keyframe& kf, const std::string& desc);

std::vector<Vec3> object_points(const Keyframe& kf, const SceneObject& obj);

// Positions of the described object in keyframe stage+1.
std::vector<Vec3> extract_goal(const Task& task, size_t stage, const std::string& desc);

}  // namespace sdsl
