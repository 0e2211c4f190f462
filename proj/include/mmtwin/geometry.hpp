#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mmtwin/vec3.hpp"

namespace mmtwin::geom {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit length
  double t_min = 1e-6;
  double t_max = kInfinity;
};

struct Hit {
  double t = 0.0;
  Vec3 point;
  Vec3 normal;  // unit, oriented toward the incoming ray (normal . dir <= 0)
  std::uint32_t triangle = 0;
  int region = 0;
};

struct Triangle {
  std::uint32_t v0 = 0, v1 = 0, v2 = 0;
  int region = 0;
};

/// Binary BVH over a triangle range. Stores indices into the owning scene's
/// triangle array; traversal is delegated back through a primitive callback.
class Bvh {
 public:
  struct Node {
    Aabb box;
    std::uint32_t left = 0;    // child index, or first primitive if leaf
    std::uint32_t count = 0;   // primitive count (leaf) or 0 (inner)
    std::uint32_t right = 0;
  };

  void build(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles,
             std::uint32_t first, std::uint32_t count);
  bool empty() const { return nodes_.empty(); }
  const Aabb& root_box() const { return nodes_.front().box; }

  /// Visits leaves whose boxes overlap the ray interval; `visit(tri_index)` may
  /// shrink `t_max` via its return value.
  template <class Visit>
  void traverse(const Vec3& origin, const Vec3& dir, double t_min, double& t_max,
                Visit&& visit) const {
    if (nodes_.empty()) return;
    Vec3 inv{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
    std::uint32_t stack[64];
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
      const Node& node = nodes_[stack[--sp]];
      if (!intersect_aabb(node.box, origin, inv, t_min, t_max)) continue;
      if (node.count > 0) {
        for (std::uint32_t i = 0; i < node.count; ++i) visit(prims_[node.left + i]);
      } else {
        stack[sp++] = node.right;
        stack[sp++] = node.left;
      }
    }
  }

 private:
  std::vector<Node> nodes_;
  std::vector<std::uint32_t> prims_;
};

struct MeshLoadReport {
  std::size_t dropped_degenerate = 0;
  std::vector<std::string> warnings;
};

/// Indexed triangle soup with per-triangle surface regions and a BVH.
/// Immutable after construction; proxy insertion copies into a new epoch.
class Scene {
 public:
  Scene() = default;

  static Scene build(std::vector<Vec3> vertices, std::vector<Triangle> triangles,
                     std::vector<std::string> region_labels = {},
                     MeshLoadReport* report = nullptr);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Vec3>& face_normals() const { return face_normals_; }
  int region_count() const { return region_count_; }
  const std::vector<std::string>& region_labels() const { return region_labels_; }
  std::uint64_t epoch() const { return epoch_; }
  bool empty() const { return triangles_.empty(); }
  std::size_t static_triangle_count() const { return static_count_; }

  std::optional<Hit> intersect(const Ray& ray) const;
  std::optional<Hit> intersect_brute(const Ray& ray) const;

  /// True if any triangle blocks the open segment (a, b). Endpoint slack keeps
  /// reflection points from occluding their own segments.
  bool occluded(const Vec3& a, const Vec3& b, double endpoint_eps = 1e-6) const;

  double triangle_area(std::uint32_t tri) const;

  /// Appends a proxy mesh under a fresh region id; returns the new scene.
  /// Only the proxy gets a freshly built local BVH.
  Scene with_proxy(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles,
                   const std::string& label) const;

  /// Drops all proxies, returning the static base geometry.
  Scene base_scene() const;
  std::size_t proxy_count() const { return proxies_.size(); }
  Aabb proxy_box(std::size_t i) const { return proxies_[i].box; }

 private:
  struct Proxy {
    std::uint32_t first_tri = 0;
    std::uint32_t count = 0;
    Bvh bvh;
    Aabb box;
  };

  bool intersect_triangle(std::uint32_t tri, const Ray& ray, Hit& best, bool& found) const;

  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Vec3> face_normals_;
  std::vector<std::string> region_labels_;
  int region_count_ = 0;
  std::size_t static_count_ = 0;
  std::size_t static_vertex_count_ = 0;
  Bvh bvh_;
  std::vector<Proxy> proxies_;
  std::uint64_t epoch_ = 0;
};

/// Loads a PLY (ascii or binary little-endian) or OBJ mesh. Region ids come
/// from a per-face integer property named "region"/"region_id" when present,
/// else from a companion "<path>.regions" file with lines
/// "start_face end_face region_id label" (inclusive ranges), else everything
/// lands in a single region.
Scene load_mesh(const std::string& path, MeshLoadReport* report = nullptr);

/// d' = d - 2 (d.n) n. Both inputs unit, d.n < 0; grazing input rejected.
Vec3 mirror_reflect(const Vec3& dir, const Vec3& normal);

struct DistanceSummary {
  std::vector<double> distances;  // one per sample
  std::vector<double> thresholds;
  std::vector<double> fraction_within;  // parallel to thresholds
  std::vector<std::size_t> histogram;
  double bin_width = 0.0;
  double max_distance = 0.0;
};

/// Samples n points uniformly by area on scene_a and reports the Euclidean
/// distance of each to the nearest point on scene_b's surface.
DistanceSummary mesh_distance(const Scene& scene_a, const Scene& scene_b,
                              std::size_t n_samples, const std::vector<double>& thresholds,
                              std::uint64_t seed = 0);

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace mmtwin::geom
