#pragma once

// Shared scene and snapshot fixtures for the test suites.

#include <cstdint>
#include <string>
#include <vector>

#include "mmtwin/calibration.hpp"
#include "mmtwin/channel.hpp"
#include "mmtwin/geometry.hpp"
#include "mmtwin/materials.hpp"
#include "mmtwin/snapshots.hpp"
#include "mmtwin/tracer.hpp"

namespace fixtures {

using namespace mmtwin;

inline void push_quad(std::vector<Vec3>& v, std::vector<geom::Triangle>& t, const Vec3& a,
                      const Vec3& b, const Vec3& c, const Vec3& d, int region) {
  auto base = static_cast<std::uint32_t>(v.size());
  v.push_back(a);
  v.push_back(b);
  v.push_back(c);
  v.push_back(d);
  t.push_back({base, base + 1, base + 2, region});
  t.push_back({base, base + 2, base + 3, region});
}

/// Large horizontal plane z = 0, one region.
inline geom::Scene make_plane_scene(double half = 50.0) {
  std::vector<Vec3> v;
  std::vector<geom::Triangle> t;
  push_quad(v, t, {-half, -half, 0}, {half, -half, 0}, {half, half, 0}, {-half, half, 0}, 0);
  return geom::Scene::build(std::move(v), std::move(t), {"plane"});
}

/// Axis-aligned unit cube centered at origin, 12 triangles, one region.
inline geom::Scene make_cube_scene() {
  std::vector<Vec3> v;
  std::vector<geom::Triangle> t;
  double h = 0.5;
  push_quad(v, t, {-h, -h, -h}, {h, -h, -h}, {h, h, -h}, {-h, h, -h}, 0);  // bottom
  push_quad(v, t, {-h, -h, h}, {h, -h, h}, {h, h, h}, {-h, h, h}, 0);      // top
  push_quad(v, t, {-h, -h, -h}, {h, -h, -h}, {h, -h, h}, {-h, -h, h}, 0);  // -y
  push_quad(v, t, {-h, h, -h}, {h, h, -h}, {h, h, h}, {-h, h, h}, 0);      // +y
  push_quad(v, t, {-h, -h, -h}, {-h, h, -h}, {-h, h, h}, {-h, -h, h}, 0);  // -x
  push_quad(v, t, {h, -h, -h}, {h, h, -h}, {h, h, h}, {h, -h, h}, 0);      // +x
  return geom::Scene::build(std::move(v), std::move(t), {"cube"});
}

/// Closed room lx x ly x lz with origin at a floor corner.
/// Region 0: the four walls, region 1: floor, region 2: ceiling.
inline geom::Scene make_shoebox(double lx = 6.0, double ly = 4.0, double lz = 3.0) {
  std::vector<Vec3> v;
  std::vector<geom::Triangle> t;
  push_quad(v, t, {0, 0, 0}, {lx, 0, 0}, {lx, 0, lz}, {0, 0, lz}, 0);          // y = 0 wall
  push_quad(v, t, {0, ly, 0}, {lx, ly, 0}, {lx, ly, lz}, {0, ly, lz}, 0);      // y = ly wall
  push_quad(v, t, {0, 0, 0}, {0, ly, 0}, {0, ly, lz}, {0, 0, lz}, 0);          // x = 0 wall
  push_quad(v, t, {lx, 0, 0}, {lx, ly, 0}, {lx, ly, lz}, {lx, 0, lz}, 0);      // x = lx wall
  push_quad(v, t, {0, 0, 0}, {lx, 0, 0}, {lx, ly, 0}, {0, ly, 0}, 1);          // floor
  push_quad(v, t, {0, 0, lz}, {lx, 0, lz}, {lx, ly, lz}, {0, ly, lz}, 2);      // ceiling
  return geom::Scene::build(std::move(v), std::move(t), {"walls", "floor", "ceiling"});
}

/// Deterministic TX/RX pose grid inside the shoebox.
inline void shoebox_poses(std::size_t count, std::vector<Vec3>& tx, std::vector<Vec3>& rx,
                          double lx = 6.0, double ly = 4.0, double lz = 3.0) {
  tx.clear();
  rx.clear();
  std::uint64_t state = 0x9e3779b97f4a7c15ULL;
  auto next = [&state]() {
    state ^= state >> 12;
    state ^= state << 25;
    state ^= state >> 27;
    return static_cast<double>((state * 0x2545f4914f6cdd1dULL) >> 11) / 9007199254740992.0;
  };
  for (std::size_t i = 0; i < count; ++i) {
    Vec3 a{0.5 + next() * (lx - 1.0), 0.5 + next() * (ly - 1.0), 0.8 + next() * (lz - 1.6)};
    Vec3 b{0.5 + next() * (lx - 1.0), 0.5 + next() * (ly - 1.0), 0.8 + next() * (lz - 1.6)};
    if (length(a - b) < 0.5) b.x = b.x < lx / 2 ? b.x + 1.0 : b.x - 1.0;
    tx.push_back(a);
    rx.push_back(b);
  }
}

/// Synthesizes "measured" snapshots with the given ground-truth parameters.
inline std::vector<snap::Snapshot> synth_snapshots(const geom::Scene& scene,
                                                   const std::vector<mat::MaterialParams>& params,
                                                   const std::vector<Vec3>& tx,
                                                   const std::vector<Vec3>& rx, double f_hz,
                                                   const trace::TraceConfig& tcfg) {
  std::vector<snap::Snapshot> out;
  for (std::size_t i = 0; i < tx.size(); ++i) {
    std::vector<trace::PropagationPath> paths = trace::trace_paths(scene, tx[i], rx[i], tcfg);
    auto syn = channel::synthesize<double>(paths, tx[i], rx[i], params, f_hz, 1.0);
    snap::Snapshot s;
    s.tx = tx[i];
    s.rx = rx[i];
    s.f_hz = f_hz;
    s.mpcs = syn.mpcs;
    for (std::size_t k = 0; k < s.mpcs.size(); ++k)
      if (s.mpcs[k].kind == trace::PathKind::LoS) s.los_index = k;
    out.push_back(std::move(s));
  }
  return out;
}

/// Ground-truth shoebox materials for the calibration fixtures: walls
/// concrete, floor floorboard, ceiling plasterboard; S at the database
/// midpoints.
inline std::vector<mat::MaterialParams> shoebox_truth() {
  return {{1.1437, 5.24, 0.30},    // walls: concrete
          {1.1259, 3.66, 0.15},    // floor: floorboard
          {0.4012, 2.73, 0.085}};  // ceiling: plasterboard
}

}  // namespace fixtures
