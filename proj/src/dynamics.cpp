#include "mmtwin/dynamics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mmtwin/channel.hpp"

namespace mmtwin::dyn {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void ProxyObject::validate() const {
  if (radius <= 0.0 || height <= 0.0)
    throw std::runtime_error("proxy: radius and height must be positive");
  if (radial_segments < 3) throw std::runtime_error("proxy: needs >= 3 radial segments");
}

void ProxyObject::tessellate(std::vector<Vec3>& vertices,
                             std::vector<geom::Triangle>& triangles) const {
  validate();
  vertices.clear();
  triangles.clear();
  const int n = radial_segments;
  const Vec3 top = base_center + Vec3{0, 0, height};
  vertices.push_back(base_center);  // 0: bottom cap center
  vertices.push_back(top);          // 1: top cap center
  for (int k = 0; k < n; ++k) {
    double ang = yaw + 2.0 * kPi * k / n;
    Vec3 rim{radius * std::cos(ang), radius * std::sin(ang), 0.0};
    vertices.push_back(base_center + rim);
  }
  for (int k = 0; k < n; ++k) {
    vertices.push_back(vertices[static_cast<std::size_t>(2 + k)] + Vec3{0, 0, height});
  }
  auto bot = [&](int k) { return static_cast<std::uint32_t>(2 + (k % n)); };
  auto topv = [&](int k) { return static_cast<std::uint32_t>(2 + n + (k % n)); };
  for (int k = 0; k < n; ++k) {
    triangles.push_back({bot(k), bot(k + 1), topv(k), 0});
    triangles.push_back({topv(k), bot(k + 1), topv(k + 1), 0});
    triangles.push_back({0, bot(k + 1), bot(k), 0});
    triangles.push_back({1, topv(k), topv(k + 1), 0});
  }
}

Aabb ProxyObject::bounding_box() const {
  Aabb box;
  box.expand(base_center + Vec3{-radius, -radius, 0.0});
  box.expand(base_center + Vec3{radius, radius, height});
  return box;
}

ProxyInsertion insert_proxy(const geom::Scene& scene, const ProxyObject& proxy,
                            const std::optional<Aabb>& previous_box, double margin) {
  proxy.validate();
  std::vector<Vec3> verts;
  std::vector<geom::Triangle> tris;
  proxy.tessellate(verts, tris);

  ProxyInsertion out;
  out.scene = scene.with_proxy(verts, tris, proxy.label);
  Aabb box = proxy.bounding_box();
  if (previous_box) {
    box.expand(previous_box->lo);
    box.expand(previous_box->hi);
  }
  out.dirty.box = box.inflated(margin);
  return out;
}

bool path_intersects(const trace::PropagationPath& path, const Vec3& tx, const Vec3& rx,
                     const Aabb& box) {
  Vec3 prev = tx;
  for (const trace::Interaction& it : path.interactions) {
    if (segment_intersects_aabb(box, prev, it.point)) return true;
    prev = it.point;
  }
  return segment_intersects_aabb(box, prev, rx);
}

namespace {

/// Conservative reachability probe: the dirty box is considered reachable if
/// any of its corners, face centers, or center has an unobstructed segment to
/// the eye point (or the eye lies inside the box). Exact for direct TX/RX
/// interactions with the proxy; paths reaching a fully hidden proxy only via
/// intermediate bounces are not detected.
bool box_visible_from(const geom::Scene& scene, const Aabb& box, const Vec3& eye) {
  if (box.contains(eye)) return true;
  Vec3 c = box.center();
  std::vector<Vec3> samples{c};
  for (int i = 0; i < 8; ++i) {
    samples.push_back({i & 1 ? box.hi.x : box.lo.x, i & 2 ? box.hi.y : box.lo.y,
                       i & 4 ? box.hi.z : box.lo.z});
  }
  samples.push_back({box.lo.x, c.y, c.z});
  samples.push_back({box.hi.x, c.y, c.z});
  samples.push_back({c.x, box.lo.y, c.z});
  samples.push_back({c.x, box.hi.y, c.z});
  samples.push_back({c.x, c.y, box.lo.z});
  samples.push_back({c.x, c.y, box.hi.z});
  for (const Vec3& s : samples) {
    if (!scene.occluded(eye, s)) return true;
  }
  return false;
}

}  // namespace

std::vector<trace::PropagationPath> invalidate_and_retrace(const geom::Scene& scene,
                                                           const LinkCache& cache,
                                                           const DirtyRegion& dirty,
                                                           const trace::TraceConfig& config) {
  if (cache.epoch >= scene.epoch())
    throw std::runtime_error("invalidate_and_retrace: stale epoch id (cache " +
                             std::to_string(cache.epoch) + " vs scene " +
                             std::to_string(scene.epoch()) + ")");
  bool affected = false;
  for (const trace::PropagationPath& p : cache.paths) {
    if (path_intersects(p, cache.tx, cache.rx, dirty.box)) {
      affected = true;
      break;
    }
  }
  if (!affected)
    affected = box_visible_from(scene, dirty.box, cache.tx) ||
               box_visible_from(scene, dirty.box, cache.rx);
  if (!affected) return cache.paths;
  return trace::trace_paths(scene, cache.tx, cache.rx, config);
}

std::vector<TrajectoryStep> load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  std::vector<TrajectoryStep> out;
  std::string line;
  while (std::getline(in, line)) {
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ss(line);
    TrajectoryStep step;
    if (!(ss >> step.t)) continue;  // blank or comment-only line
    double yaw_deg = 0.0;
    if (!(ss >> step.p.x >> step.p.y >> step.p.z >> yaw_deg))
      throw std::runtime_error("trajectory parse failure: " + line);
    step.yaw = yaw_deg * kPi / 180.0;
    out.push_back(step);
  }
  if (out.empty()) throw std::runtime_error("empty trajectory file: " + path);
  return out;
}

std::vector<SweepStep> shadow_loss_sweep(const geom::Scene& base, const Vec3& tx, const Vec3& rx,
                                         const std::vector<TrajectoryStep>& trajectory,
                                         const std::vector<mat::MaterialParams>& static_params,
                                         const mat::MaterialParams& proxy_params, double f_hz,
                                         const ProxyObject& shape,
                                         const trace::TraceConfig& trace_config, double margin) {
  if (trajectory.empty()) throw std::runtime_error("shadow_loss_sweep: empty trajectory");
  if (static_params.size() != static_cast<std::size_t>(base.region_count()))
    throw std::runtime_error("shadow_loss_sweep: one material per base region required");

  channel::SynthesisConfig scfg;
  scfg.build_cir = false;
  auto field = [&](const std::vector<trace::PropagationPath>& paths, const Vec3& a, const Vec3& b,
                   const std::vector<mat::MaterialParams>& params) {
    auto syn = channel::synthesize<double>(paths, a, b, params, f_hz, 1.0, scfg);
    Cpx<double> e{0.0, 0.0};
    for (const auto& m : syn.mpcs) e += m.amplitude;
    return e;
  };

  LinkCache cache;
  cache.tx = tx;
  cache.rx = rx;
  cache.epoch = base.epoch();
  cache.paths = trace::trace_paths(base, tx, rx, trace_config);
  Cpx<double> e_ref = field(cache.paths, tx, rx, static_params);
  double a_ref = abs(e_ref);
  if (a_ref <= 0.0) throw std::runtime_error("shadow_loss_sweep: zero baseline field");

  std::vector<mat::MaterialParams> params = static_params;
  params.push_back(proxy_params);

  std::vector<SweepStep> out;
  geom::Scene current = base;
  std::optional<Aabb> prev_box;
  for (const TrajectoryStep& ts : trajectory) {
    ProxyObject proxy = shape;
    proxy.base_center = ts.p;
    proxy.yaw = ts.yaw;
    ProxyInsertion ins = insert_proxy(current.base_scene(), proxy, prev_box, margin);

    std::vector<trace::PropagationPath> paths =
        invalidate_and_retrace(ins.scene, cache, ins.dirty, trace_config);

    SweepStep step;
    step.t = ts.t;
    step.retraced = paths.size() != cache.paths.size() ||
                    trace::serialize_paths(paths) != trace::serialize_paths(cache.paths);
    step.path_count = paths.size();
    Cpx<double> e = field(paths, tx, rx, params);
    double a = abs(e);
    step.shadow_loss_db =
        a > 0.0 ? 20.0 * std::log10(a_ref / a) : std::numeric_limits<double>::infinity();
    out.push_back(step);

    cache.epoch = ins.scene.epoch();
    cache.paths = std::move(paths);
    current = std::move(ins.scene);
    prev_box = proxy.bounding_box();
  }
  return out;
}

}  // namespace mmtwin::dyn
