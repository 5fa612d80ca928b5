#pragma once

// Shared scene builders for simulator tests.

#include <map>
#include <string>

#include "softdsl/scene.hpp"

namespace sdsl::test {

// Regular particle lattice filling an axis-aligned box.
inline void add_box_particles(Keyframe& kf, const std::string& name, Color color,
                              ShapeClass shape, Vec3 lo, Vec3 hi, double spacing) {
  size_t begin = kf.positions.size();
  int nx = std::max(1, static_cast<int>(std::floor((hi.x - lo.x) / spacing)) + 1);
  int ny = std::max(1, static_cast<int>(std::floor((hi.y - lo.y) / spacing)) + 1);
  int nz = std::max(1, static_cast<int>(std::floor((hi.z - lo.z) / spacing)) + 1);
  for (int i = 0; i < nx; i++)
    for (int j = 0; j < ny; j++)
      for (int k = 0; k < nz; k++)
        kf.positions.push_back({lo.x + i * spacing, lo.y + j * spacing, lo.z + k * spacing});
  kf.objects.push_back({name, color, shape, {begin, kf.positions.size() - begin}});
}

struct Scene {
  Keyframe kf;
  std::map<std::string, std::string> materials;
};

inline Scene blob_scene(Vec3 center, double half, double spacing, const std::string& mat = "dough") {
  Scene s;
  add_box_particles(s.kf, "blob", Color::White, ShapeClass::Dough, center - Vec3::all(half),
                    center + Vec3::all(half), spacing);
  s.materials["blob"] = mat;
  return s;
}

}  // namespace sdsl::test
