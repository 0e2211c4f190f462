#include "mmtwin/tracer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <thread>

namespace mmtwin::trace {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kSegmentEps = 1e-5;  // endpoint slack for occlusion tests

double halton(std::size_t index, unsigned base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double uniform01_from_hash(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

Vec3 mirror_point(const Vec3& p, const Vec3& plane_point, const Vec3& plane_normal) {
  return p - plane_normal * (2.0 * dot(p - plane_point, plane_normal));
}

struct Candidate {
  bool scatter = false;
  std::vector<std::uint32_t> tri_seq;  // for scatter: the single hit triangle
  Vec3 scatter_point;
  Vec3 scatter_normal;
  int scatter_region = 0;
};

/// Traces one launch direction, appending specular chain proposals and kept
/// scatter connections.
void shoot(const geom::Scene& scene, const Vec3& tx, const Vec3& rx, const TraceConfig& cfg,
           std::size_t dir_index, std::vector<Candidate>& out) {
  Vec3 o = tx;
  Vec3 d = launch_direction(dir_index);
  std::vector<std::uint32_t> chain;
  for (int seg = 0; seg <= cfg.max_depth; ++seg) {
    geom::Ray ray{o, d, 1e-6, geom::kInfinity};
    auto hit = scene.intersect(ray);
    double t_limit = hit ? hit->t : geom::kInfinity;

    // RX capture test along this segment.
    double t_star = dot(rx - o, d);
    if (t_star > 1e-6 && t_star < t_limit && !chain.empty()) {
      double miss = length(rx - (o + d * t_star));
      if (miss <= std::fmax(cfg.rx_capture_radius, 0.005 * t_star)) {
        Candidate c;
        c.tri_seq = chain;
        out.push_back(std::move(c));
      }
    }

    if (!hit || seg == cfg.max_depth) break;

    if (seg == 0) {
      // Single-scatter connection, pruned by keep probability.
      std::uint64_t h = splitmix64(cfg.rng_seed ^ splitmix64(dir_index + 1));
      if (uniform01_from_hash(h) < cfg.scatter_keep_prob &&
          !scene.occluded(hit->point, rx, kSegmentEps)) {
        Candidate c;
        c.scatter = true;
        c.tri_seq = {hit->triangle};
        c.scatter_point = hit->point;
        c.scatter_normal = hit->normal;
        c.scatter_region = hit->region;
        out.push_back(std::move(c));
      }
    }

    double dn = dot(d, hit->normal);
    if (std::fabs(dn) < 1e-12) break;  // grazing; reflection ill-defined
    d = d - hit->normal * (2.0 * dn);
    o = hit->point;
    chain.push_back(hit->triangle);
  }
}

}  // namespace

Vec3 launch_direction(std::size_t index) {
  double u1 = halton(index + 1, 2);
  double u2 = halton(index + 1, 3);
  double z = 1.0 - 2.0 * u1;
  double r = std::sqrt(std::fmax(0.0, 1.0 - z * z));
  double phi = 2.0 * kPi * u2;
  return {r * std::cos(phi), r * std::sin(phi), z};
}

Vec3 sample_scatter_direction(const Vec3& normal, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double u1 = uni(rng), u2 = uni(rng);
  double r = std::sqrt(u1);
  double phi = 2.0 * kPi * u2;
  // Orthonormal frame around the normal.
  Vec3 a = std::fabs(normal.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  Vec3 t1 = normalize(cross(normal, a));
  Vec3 t2 = cross(normal, t1);
  Vec3 dir = t1 * (r * std::cos(phi)) + t2 * (r * std::sin(phi)) +
             normal * std::sqrt(std::fmax(0.0, 1.0 - u1));
  return normalize(dir);
}

std::optional<PropagationPath> refine_specular(const geom::Scene& scene, const Vec3& tx,
                                               const Vec3& rx,
                                               const std::vector<std::uint32_t>& tri_seq) {
  const auto& verts = scene.vertices();
  const auto& tris = scene.triangles();
  const auto& normals = scene.face_normals();
  const std::size_t n = tri_seq.size();
  if (n == 0) return std::nullopt;

  // Mirror TX successively across each triangle plane.
  std::vector<Vec3> images(n + 1);
  images[0] = tx;
  for (std::size_t k = 0; k < n; ++k) {
    const geom::Triangle& t = tris[tri_seq[k]];
    images[k + 1] = mirror_point(images[k], verts[t.v0], normals[tri_seq[k]]);
  }

  // Backtrack from RX through the planes in reverse order.
  std::vector<Vec3> points(n);
  Vec3 cur = rx;
  for (std::size_t k = n; k-- > 0;) {
    const geom::Triangle& t = tris[tri_seq[k]];
    const Vec3& a = verts[t.v0];
    const Vec3& pn = normals[tri_seq[k]];
    Vec3 seg = images[k + 1] - cur;  // toward the TX image behind this plane
    double denom = dot(seg, pn);
    if (std::fabs(denom) < 1e-14) return std::nullopt;
    double s = dot(a - cur, pn) / denom;
    if (s <= 1e-9 || s >= 1.0 - 1e-9) return std::nullopt;
    Vec3 p = cur + seg * s;

    // Reflection point must lie inside its triangle.
    Vec3 e1 = verts[t.v1] - a, e2 = verts[t.v2] - a, ap = p - a;
    double d11 = dot(e1, e1), d12 = dot(e1, e2), d22 = dot(e2, e2);
    double dp1 = dot(ap, e1), dp2 = dot(ap, e2);
    double det = d11 * d22 - d12 * d12;
    if (std::fabs(det) < 1e-20) return std::nullopt;
    double u = (d22 * dp1 - d12 * dp2) / det;
    double v = (d11 * dp2 - d12 * dp1) / det;
    if (u < -1e-9 || v < -1e-9 || u + v > 1.0 + 1e-9) return std::nullopt;
    points[k] = p;
    cur = p;
  }

  // Occlusion over every segment, and mirror-law sanity per bounce.
  PropagationPath path;
  path.kind = PathKind::Specular;
  Vec3 prev = tx;
  for (std::size_t k = 0; k < n; ++k) {
    if (scene.occluded(prev, points[k], kSegmentEps)) return std::nullopt;
    Vec3 din = normalize(points[k] - prev);
    Vec3 next_target = (k + 1 < n) ? points[k + 1] : rx;
    Vec3 dout = normalize(next_target - points[k]);
    Vec3 pn = normals[tri_seq[k]];
    Vec3 oriented = dot(pn, din) > 0.0 ? -pn : pn;
    if (dot(din, oriented) > -1e-12) return std::nullopt;
    Vec3 mirrored = din - oriented * (2.0 * dot(din, oriented));
    if (length(mirrored - dout) > 1e-6) return std::nullopt;
    Interaction it;
    it.point = points[k];
    it.normal = oriented;
    it.region = tris[tri_seq[k]].region;
    it.triangle = tri_seq[k];
    it.kind = InteractionKind::Reflect;
    path.interactions.push_back(it);
    path.length += length(points[k] - prev);
    prev = points[k];
  }
  if (scene.occluded(prev, rx, kSegmentEps)) return std::nullopt;
  path.length += length(rx - prev);
  return path;
}

std::string PropagationPath::dedup_key() const {
  std::string key = kind == PathKind::LoS ? "L" : (kind == PathKind::Specular ? "P" : "S");
  for (const Interaction& it : interactions) {
    key += ':';
    key += std::to_string(it.region);
    key += it.kind == InteractionKind::Reflect ? 'r' : 's';
  }
  return key;
}

const char* to_string(PathKind k) {
  switch (k) {
    case PathKind::LoS: return "los";
    case PathKind::Specular: return "specular";
    case PathKind::Scattered: return "scattered";
  }
  return "?";
}

std::vector<PropagationPath> trace_paths(const geom::Scene& scene, const Vec3& tx, const Vec3& rx,
                                         const TraceConfig& config) {
  if (tx == rx) throw std::runtime_error("trace_paths: tx and rx coincide");

  std::vector<PropagationPath> result;
  if (!scene.empty() && scene.occluded(tx, rx, kSegmentEps)) {
    // LoS blocked.
  } else {
    PropagationPath los;
    los.kind = PathKind::LoS;
    los.length = length(rx - tx);
    result.push_back(std::move(los));
  }
  if (scene.empty()) return result;

  // Candidates are gathered per fixed-size block and merged in block order, so
  // the outcome does not depend on the thread count.
  constexpr std::size_t kBlock = 4096;
  const std::size_t n_blocks = (config.n_rays + kBlock - 1) / kBlock;
  std::vector<std::vector<Candidate>> block_results(n_blocks);

  auto run_block = [&](std::size_t b) {
    std::size_t begin = b * kBlock;
    std::size_t end = std::min(config.n_rays, begin + kBlock);
    for (std::size_t i = begin; i < end; ++i)
      shoot(scene, tx, rx, config, i, block_results[b]);
  };

  int threads = std::max(1, config.threads);
  if (threads == 1 || n_blocks <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) run_block(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t b = next.fetch_add(1); b < n_blocks; b = next.fetch_add(1)) run_block(b);
      });
    for (auto& th : pool) th.join();
  }

  // Refine specular proposals and deduplicate by (region, kind) sequence.
  std::map<std::string, std::size_t> seen;
  std::map<std::vector<std::uint32_t>, bool> tried_seqs;
  for (auto& block : block_results) {
    for (Candidate& c : block) {
      if (c.scatter) {
        PropagationPath p;
        p.kind = PathKind::Scattered;
        Interaction it;
        it.point = c.scatter_point;
        it.normal = c.scatter_normal;
        it.region = c.scatter_region;
        it.triangle = c.tri_seq[0];
        it.kind = InteractionKind::Scatter;
        p.interactions.push_back(it);
        p.length = length(c.scatter_point - tx) + length(rx - c.scatter_point);
        p.scatter_patch_area = scene.triangle_area(c.tri_seq[0]);
        std::string key = p.dedup_key();
        if (seen.emplace(key, result.size()).second) result.push_back(std::move(p));
      } else {
        auto [it, fresh] = tried_seqs.emplace(c.tri_seq, true);
        if (!fresh) continue;
        auto refined = refine_specular(scene, tx, rx, c.tri_seq);
        if (!refined) continue;
        std::string key = refined->dedup_key();
        if (seen.emplace(key, result.size()).second) result.push_back(std::move(*refined));
      }
    }
  }

  // Canonical ordering for bit-exact reproducibility.
  std::stable_sort(result.begin(), result.end(),
                   [](const PropagationPath& a, const PropagationPath& b) {
                     if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
                     if (a.interactions.size() != b.interactions.size())
                       return a.interactions.size() < b.interactions.size();
                     std::string ka = a.dedup_key(), kb = b.dedup_key();
                     if (ka != kb) return ka < kb;
                     return a.length < b.length;
                   });
  return result;
}

std::string serialize_paths(const std::vector<PropagationPath>& paths) {
  std::ostringstream out;
  char buf[64];
  for (const PropagationPath& p : paths) {
    out << to_string(p.kind) << ' ' << p.interactions.size();
    for (const Interaction& it : p.interactions) {
      std::snprintf(buf, sizeof(buf), " %d%c:%.9g,%.9g,%.9g", it.region,
                    it.kind == InteractionKind::Reflect ? 'r' : 's', it.point.x, it.point.y,
                    it.point.z);
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), " len=%.9g", p.length);
    out << buf << '\n';
  }
  return out.str();
}

}  // namespace mmtwin::trace
