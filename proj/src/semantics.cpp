#include "mmtwin/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mmtwin::sem {

void Camera::validate() const {
  if (fx <= 0.0 || fy <= 0.0) throw std::runtime_error("camera focal lengths must be positive");
  const Vec3 rows[3] = {r0, r1, r2};
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) {
      double expect = i == k ? 1.0 : 0.0;
      if (std::fabs(dot(rows[i], rows[k]) - expect) > 1e-9)
        throw std::runtime_error("camera rotation is not orthonormal");
    }
}

Projection project_point(const Camera& camera, const Vec3& p) {
  Vec3 pc = camera.to_camera(p);
  if (std::fabs(pc.z) <= 1e-9) throw std::runtime_error("point on camera plane");
  if (pc.z < 0.0) return {ProjectionStatus::Behind, 0.0, 0.0};
  double u = camera.fx * pc.x / pc.z + camera.cx;
  double v = camera.fy * pc.y / pc.z + camera.cy;
  bool in_frame = u >= 0.0 && u < camera.width && v >= 0.0 && v < camera.height;
  return {in_frame ? ProjectionStatus::InFrame : ProjectionStatus::OutOfFrame, u, v};
}

Feature fuse_views(const std::vector<Feature>& per_view_features) {
  if (per_view_features.empty()) throw std::runtime_error("fuse_views: no visible views");
  const std::size_t dim = per_view_features.front().size();
  Feature out(dim, 0.0f);
  for (const Feature& f : per_view_features) {
    if (f.size() != dim) throw std::runtime_error("fuse_views: inconsistent feature lengths");
    for (std::size_t i = 0; i < dim; ++i) out[i] += f[i];
  }
  const float inv = 1.0f / static_cast<float>(per_view_features.size());
  for (float& x : out) x *= inv;
  return out;
}

void TextEmbeddingSet::validate() const {
  for (const Entry& e : entries) {
    if (e.vectors.empty()) throw std::runtime_error("text entry without vectors: " + e.label);
    for (const Feature& v : e.vectors) {
      if (v.size() != dim) throw std::runtime_error("text embedding dimension mismatch");
      double norm = 0.0;
      for (float x : v) norm += static_cast<double>(x) * x;
      if (std::fabs(std::sqrt(norm) - 1.0) > 1e-6)
        throw std::runtime_error("text embedding not unit-norm: " + e.label);
    }
  }
}

TextEmbeddingSet TextEmbeddingSet::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open text embedding file: " + path);
  nlohmann::json j;
  in >> j;
  TextEmbeddingSet set;
  set.dim = j.at("dim").get<std::size_t>();
  for (const auto& e : j.at("labels")) {
    Entry entry;
    entry.label = e.at("label").get<std::string>();
    for (const auto& s : e.at("entries")) {
      entry.texts.push_back(s.at("text").get<std::string>());
      entry.vectors.push_back(s.at("vec").get<Feature>());
    }
    set.entries.push_back(std::move(entry));
  }
  set.validate();
  return set;
}

namespace {

double cosine(const Feature& a, const Feature& b) {
  double num = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  double denom = std::sqrt(na) * std::sqrt(nb);
  if (denom <= 0.0) throw std::runtime_error("cosine similarity of zero vector");
  return num / denom;
}

}  // namespace

MaterialMatch match_material(const Feature& fused_feature, const TextEmbeddingSet& text) {
  if (text.entries.empty()) throw std::runtime_error("match_material: empty embedding set");
  double feat_norm = 0.0;
  for (float x : fused_feature) feat_norm += static_cast<double>(x) * x;
  if (feat_norm <= 0.0) throw std::runtime_error("match_material: zero query feature");
  if (fused_feature.size() != text.dim)
    throw std::runtime_error("match_material: feature dimension mismatch");

  MaterialMatch best{text.entries.front().label, -2.0, 0};
  for (std::size_t i = 0; i < text.entries.size(); ++i) {
    double score = -2.0;
    for (const Feature& v : text.entries[i].vectors) score = std::max(score, cosine(fused_feature, v));
    if (score > best.score) best = {text.entries[i].label, score, i};
  }
  return best;
}

std::pair<double, double> roughness_to_scattering(const std::string& level_label) {
  static const std::map<std::string, std::pair<double, double>> kTable = {
      {"wall plasterboard", {0.07, 0.1}}, {"chipboard", {0.1, 0.2}},
      {"cardboard", {0.1, 0.2}},          {"ceiling plasterboard", {0.2, 0.4}},
      {"brick", {0.3, 0.5}},
  };
  std::string key = level_label;
  std::transform(key.begin(), key.end(), key.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  auto it = kTable.find(key);
  if (it == kTable.end())
    throw std::runtime_error("unknown roughness level: " + level_label);
  return it->second;
}

std::vector<RegionAssignment> assign_regions(const geom::Scene& scene,
                                             const std::vector<SemanticPoint>& points,
                                             const TextEmbeddingSet& text,
                                             const mat::MaterialDb& db,
                                             const mat::ReadoutWeights& weights,
                                             const AssignConfig& config,
                                             std::vector<std::string>* warnings) {
  if (points.empty()) throw std::runtime_error("assign_regions: empty semantic export");

  const auto& verts = scene.vertices();
  const auto& tris = scene.triangles();
  // votes[region][entry_index] -> count
  std::vector<std::map<std::size_t, std::size_t>> votes(scene.region_count());

  for (const SemanticPoint& sp : points) {
    Feature fused = sp.has_fused ? sp.fused : fuse_views(sp.per_view);

    double best_d = geom::kInfinity;
    int best_region = -1;
    for (const geom::Triangle& t : tris) {
      Vec3 q = geom::closest_point_on_triangle(sp.p, verts[t.v0], verts[t.v1], verts[t.v2]);
      double d = length(sp.p - q);
      if (d < best_d) {
        best_d = d;
        best_region = t.region;
      }
    }
    if (best_region < 0 || best_d > config.max_point_distance) continue;

    MaterialMatch m = match_material(fused, text);
    ++votes[best_region][m.entry_index];
  }

  std::vector<RegionAssignment> out(scene.region_count());
  for (int r = 0; r < scene.region_count(); ++r) {
    RegionAssignment& a = out[r];
    std::size_t best_entry = 0, best_count = 0, total = 0;
    // Ties break toward the earlier text-embedding entry (map iterates ascending).
    for (const auto& [entry, count] : votes[r]) {
      total += count;
      if (count > best_count) {
        best_count = count;
        best_entry = entry;
      }
    }
    a.point_count = total;
    if (total == 0) {
      a.fallback = true;
      a.label = config.default_material;
      if (warnings)
        warnings->push_back("region " + std::to_string(r) + " (" + scene.region_labels()[r] +
                            ") has no semantic points; using default material '" +
                            config.default_material + "'");
    } else {
      a.label = text.entries[best_entry].label;
    }
    const mat::RadioMaterial& m = db.lookup(a.label);
    a.params = {m.sigma, m.eps_r, m.s_mid()};
    a.embedding = mat::embedding_from_params(a.params.sigma, a.params.eps_r,
                                             a.params.scattering, weights, warnings);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Semantic export file I/O
// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'M', 'M', 'S', 'X'};

template <class T>
void write_le(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class T>
T read_le(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw std::runtime_error("truncated semantic export file");
  return v;
}
}  // namespace

void save_semantic_points_binary(const std::string& path,
                                 const std::vector<SemanticPoint>& points, std::size_t dim) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write semantic export: " + path);
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, 1);  // version
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(points.size()));
  for (const SemanticPoint& sp : points) {
    write_le<std::uint8_t>(out, sp.has_fused ? 0 : 1);
    write_le<double>(out, sp.p.x);
    write_le<double>(out, sp.p.y);
    write_le<double>(out, sp.p.z);
    if (sp.has_fused) {
      out.write(reinterpret_cast<const char*>(sp.fused.data()),
                static_cast<std::streamsize>(dim * sizeof(float)));
    } else {
      write_le<std::uint32_t>(out, static_cast<std::uint32_t>(sp.per_view.size()));
      for (std::size_t v = 0; v < sp.per_view.size(); ++v) {
        write_le<std::uint32_t>(out, v < sp.view_ids.size() ? sp.view_ids[v] : 0);
        out.write(reinterpret_cast<const char*>(sp.per_view[v].data()),
                  static_cast<std::streamsize>(dim * sizeof(float)));
      }
    }
  }
}

std::vector<SemanticPoint> load_semantic_points(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open semantic export: " + path);
  char magic[4];
  in.read(magic, 4);
  std::vector<SemanticPoint> out;

  if (in && std::memcmp(magic, kMagic, 4) == 0) {
    std::uint32_t version = read_le<std::uint32_t>(in);
    if (version != 1) throw std::runtime_error("unsupported semantic export version");
    std::uint32_t dim = read_le<std::uint32_t>(in);
    std::uint32_t count = read_le<std::uint32_t>(in);
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      SemanticPoint sp;
      std::uint8_t kind = read_le<std::uint8_t>(in);
      sp.p.x = read_le<double>(in);
      sp.p.y = read_le<double>(in);
      sp.p.z = read_le<double>(in);
      if (kind == 0) {
        sp.has_fused = true;
        sp.fused.resize(dim);
        in.read(reinterpret_cast<char*>(sp.fused.data()),
                static_cast<std::streamsize>(dim * sizeof(float)));
      } else {
        std::uint32_t n_views = read_le<std::uint32_t>(in);
        for (std::uint32_t v = 0; v < n_views; ++v) {
          sp.view_ids.push_back(read_le<std::uint32_t>(in));
          Feature f(dim);
          in.read(reinterpret_cast<char*>(f.data()),
                  static_cast<std::streamsize>(dim * sizeof(float)));
          sp.per_view.push_back(std::move(f));
        }
      }
      if (!in) throw std::runtime_error("truncated semantic export file");
      out.push_back(std::move(sp));
    }
    return out;
  }

  // Text variant: one fused record per line.
  in.clear();
  in.seekg(0);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    SemanticPoint sp;
    if (!(ss >> sp.p.x >> sp.p.y >> sp.p.z))
      throw std::runtime_error("semantic export text parse failure: " + line);
    double x;
    while (ss >> x) sp.fused.push_back(static_cast<float>(x));
    if (sp.fused.empty()) throw std::runtime_error("semantic point without feature: " + line);
    sp.has_fused = true;
    out.push_back(std::move(sp));
  }
  if (out.empty()) throw std::runtime_error("empty semantic export: " + path);
  return out;
}

}  // namespace mmtwin::sem
