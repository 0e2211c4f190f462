#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mmtwin/geometry.hpp"

namespace mmtwin::trace {

struct TraceConfig {
  std::size_t n_rays = 100000;
  int max_depth = 5;
  double scatter_keep_prob = 1e-3;
  double rx_capture_radius = 0.1;  // m; effective radius is max(this, 0.005 * segment length)
  std::uint64_t rng_seed = 0;
  int threads = 1;
};

enum class PathKind { LoS, Specular, Scattered };
enum class InteractionKind { Reflect, Scatter };

struct Interaction {
  Vec3 point;
  Vec3 normal;  // unit, oriented toward the incoming segment
  int region = 0;
  std::uint32_t triangle = 0;
  InteractionKind kind = InteractionKind::Reflect;
};

struct PropagationPath {
  PathKind kind = PathKind::LoS;
  std::vector<Interaction> interactions;
  double length = 0.0;              // total geometric length, m
  double scatter_patch_area = 0.0;  // scattering triangle area, m^2 (scatter paths only)

  /// Deduplication key: surface-region sequence + interaction-kind sequence.
  std::string dedup_key() const;
};

const char* to_string(PathKind k);

/// Shoot-and-bounce discovery with image-method refinement of specular
/// chains and keep-probability-pruned single-scatter connections.
/// Deterministic given (scene, poses, config), independent of thread count.
std::vector<PropagationPath> trace_paths(const geom::Scene& scene, const Vec3& tx,
                                         const Vec3& rx, const TraceConfig& config);

/// Cosine-weighted hemisphere direction around the normal
/// (density cos(theta)/pi per solid angle).
Vec3 sample_scatter_direction(const Vec3& normal, std::mt19937_64& rng);

/// Exact reflection points for a proposed triangle sequence via mirrored TX
/// images. Returns nullopt when a reflection point leaves its triangle, the
/// mirror geometry degenerates, or a segment is occluded.
std::optional<PropagationPath> refine_specular(const geom::Scene& scene, const Vec3& tx,
                                               const Vec3& rx,
                                               const std::vector<std::uint32_t>& tri_seq);

/// Launch direction i of the deterministic low-discrepancy sphere sequence.
/// Direction i does not depend on the total ray budget, so growing the budget
/// only extends the sequence.
Vec3 launch_direction(std::size_t index);

std::string serialize_paths(const std::vector<PropagationPath>& paths);

}  // namespace mmtwin::trace
