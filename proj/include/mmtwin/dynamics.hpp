#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmtwin/geometry.hpp"
#include "mmtwin/materials.hpp"
#include "mmtwin/tracer.hpp"
#include "mmtwin/vec3.hpp"

namespace mmtwin::dyn {

/// Capped-cylinder stand-in for a moving body.
struct ProxyObject {
  double radius = 0.25;  // m
  double height = 1.7;   // m
  Vec3 base_center;      // bottom cap center, world frame
  double yaw = 0.0;      // rad about +z
  std::string label = "human body";
  int radial_segments = 16;

  void validate() const;
  void tessellate(std::vector<Vec3>& vertices, std::vector<geom::Triangle>& triangles) const;
  Aabb bounding_box() const;
};

/// Axis-aligned box covering the proxy's old and new poses plus margin.
struct DirtyRegion {
  Aabb box;
};

struct ProxyInsertion {
  geom::Scene scene;  // next epoch, proxy under a fresh region id
  DirtyRegion dirty;
};

ProxyInsertion insert_proxy(const geom::Scene& scene, const ProxyObject& proxy,
                            const std::optional<Aabb>& previous_box = std::nullopt,
                            double margin = 0.1);

struct LinkCache {
  Vec3 tx, rx;
  std::uint64_t epoch = 0;  // scene epoch the paths were traced on
  std::vector<trace::PropagationPath> paths;
};

/// True if any segment of the path (TX -> interactions -> RX) crosses the box.
bool path_intersects(const trace::PropagationPath& path, const Vec3& tx, const Vec3& rx,
                     const Aabb& box);

/// Incremental update: cached paths crossing the dirty region are discarded;
/// if the link is affected (a path was discarded, or the dirty region is
/// visible from TX or RX) the link is re-traced in full, otherwise the cache
/// is returned verbatim. Re-tracing uses the same deterministic tracer as a
/// full trace, so affected links match a full retrace bit-exactly.
/// Throws when the cache epoch is not older than the scene epoch.
std::vector<trace::PropagationPath> invalidate_and_retrace(const geom::Scene& scene,
                                                           const LinkCache& cache,
                                                           const DirtyRegion& dirty,
                                                           const trace::TraceConfig& config);

struct TrajectoryStep {
  double t = 0.0;  // s
  Vec3 p;          // proxy base-center position
  double yaw = 0.0;  // rad (degrees in the file)
};

/// Rows "t x y z yaw_deg", whitespace or comma separated; '#' comments.
std::vector<TrajectoryStep> load_trajectory(const std::string& path);

struct SweepStep {
  double t = 0.0;
  double shadow_loss_db = 0.0;
  bool retraced = false;
  std::size_t path_count = 0;
};

/// Walks the proxy along a trajectory, maintaining the link cache
/// incrementally, and reports shadow loss against the proxy-free baseline
/// field at every step.
std::vector<SweepStep> shadow_loss_sweep(const geom::Scene& base, const Vec3& tx, const Vec3& rx,
                                         const std::vector<TrajectoryStep>& trajectory,
                                         const std::vector<mat::MaterialParams>& static_params,
                                         const mat::MaterialParams& proxy_params, double f_hz,
                                         const ProxyObject& shape,
                                         const trace::TraceConfig& trace_config,
                                         double margin = 0.1);

}  // namespace mmtwin::dyn
