#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mmtwin/geometry.hpp"
#include "mmtwin/materials.hpp"
#include "mmtwin/vec3.hpp"

namespace mmtwin::sem {

/// Pinhole camera; extrinsics map world coordinates into the camera frame
/// (x right, y down, z forward).
struct Camera {
  double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
  int width = 0, height = 0;
  Vec3 r0{1, 0, 0}, r1{0, 1, 0}, r2{0, 0, 1};  // rotation rows, world -> camera
  Vec3 t;                                       // translation, world -> camera

  void validate() const;  // fx,fy > 0 and rotation orthonormal within 1e-9
  Vec3 to_camera(const Vec3& p_world) const {
    return {dot(r0, p_world) + t.x, dot(r1, p_world) + t.y, dot(r2, p_world) + t.z};
  }
};

enum class ProjectionStatus { InFrame, OutOfFrame, Behind };

struct Projection {
  ProjectionStatus status = ProjectionStatus::Behind;
  double u = 0.0, v = 0.0;
};

/// Pinhole projection. Behind-camera and out-of-frame are values, not errors;
/// a point on the camera plane (|depth| <= 1e-9 m) throws.
Projection project_point(const Camera& camera, const Vec3& p);

using Feature = std::vector<float>;

struct SemanticPoint {
  Vec3 p;
  bool has_fused = false;
  Feature fused;
  std::vector<Feature> per_view;
  std::vector<std::uint32_t> view_ids;
};

/// Arithmetic mean across views; throws on an empty list.
Feature fuse_views(const std::vector<Feature>& per_view_features);

struct TextEmbeddingSet {
  struct Entry {
    std::string label;
    std::vector<std::string> texts;   // label + synonyms, parallel to vectors
    std::vector<Feature> vectors;     // unit-normalized
  };
  std::size_t dim = 0;
  std::vector<Entry> entries;

  static TextEmbeddingSet load(const std::string& path);
  void validate() const;
};

struct MaterialMatch {
  std::string label;
  double score = 0.0;  // cosine in [-1, 1]
  std::size_t entry_index = 0;
};

/// Per label the score is the max over its synonym vectors of
/// cos(feature, t); returns the argmax label, ties broken by entry order.
MaterialMatch match_material(const Feature& fused_feature, const TextEmbeddingSet& text);

/// Scattering-coefficient interval for a roughness/material level label.
std::pair<double, double> roughness_to_scattering(const std::string& level_label);

struct RegionAssignment {
  std::string label;
  mat::MaterialParams params;
  mat::MaterialEmbedding embedding;
  std::size_t point_count = 0;
  bool fallback = false;
};

struct AssignConfig {
  double max_point_distance = 0.05;  // m; farther points are discarded
  std::string default_material = "concrete";
};

/// Majority-vote material assignment per surface region plus inverse-
/// parameterization embedding initialization. Regions with no associated
/// points fall back to the default material with a warning.
std::vector<RegionAssignment> assign_regions(const geom::Scene& scene,
                                             const std::vector<SemanticPoint>& points,
                                             const TextEmbeddingSet& text,
                                             const mat::MaterialDb& db,
                                             const mat::ReadoutWeights& weights,
                                             const AssignConfig& config = {},
                                             std::vector<std::string>* warnings = nullptr);

/// Reads the semantic export format: binary (magic "MMSX") or whitespace text
/// ("x y z f1 .. fC" per line).
std::vector<SemanticPoint> load_semantic_points(const std::string& path);
void save_semantic_points_binary(const std::string& path,
                                 const std::vector<SemanticPoint>& points, std::size_t dim);

}  // namespace mmtwin::sem
