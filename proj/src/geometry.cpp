#include "mmtwin/geometry.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mmtwin::geom {

namespace {

Aabb triangle_box(const std::vector<Vec3>& verts, const Triangle& t) {
  Aabb b;
  b.expand(verts[t.v0]);
  b.expand(verts[t.v1]);
  b.expand(verts[t.v2]);
  return b;
}

}  // namespace

void Bvh::build(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles,
                std::uint32_t first, std::uint32_t count) {
  nodes_.clear();
  prims_.resize(count);
  std::iota(prims_.begin(), prims_.end(), first);
  if (count == 0) return;

  std::vector<Aabb> boxes(count);
  std::vector<Vec3> centroids(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    boxes[i] = triangle_box(vertices, triangles[first + i]);
    centroids[i] = boxes[i].center();
  }

  struct Range {
    std::uint32_t node, begin, end;
  };
  nodes_.reserve(2 * count);
  nodes_.push_back({});
  std::vector<Range> stack{{0, 0, count}};
  constexpr std::uint32_t kLeafSize = 4;

  while (!stack.empty()) {
    Range r = stack.back();
    stack.pop_back();
    Aabb box;
    Aabb cbox;
    for (std::uint32_t i = r.begin; i < r.end; ++i) {
      box.expand(boxes[prims_[i] - first]);
      cbox.expand(centroids[prims_[i] - first]);
    }
    Node& node = nodes_[r.node];
    node.box = box;
    std::uint32_t n = r.end - r.begin;
    Vec3 ext = cbox.extent();
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    if (n <= kLeafSize || ext[axis] < 1e-12) {
      node.left = r.begin;
      node.count = n;
      continue;
    }
    std::uint32_t mid = r.begin + n / 2;
    std::nth_element(prims_.begin() + r.begin, prims_.begin() + mid, prims_.begin() + r.end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       double ca = centroids[a - first][axis];
                       double cb = centroids[b - first][axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    std::uint32_t left = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({});
    nodes_.push_back({});
    nodes_[r.node].left = left;
    nodes_[r.node].right = left + 1;
    nodes_[r.node].count = 0;
    stack.push_back({left, r.begin, mid});
    stack.push_back({left + 1, mid, r.end});
  }
}

Scene Scene::build(std::vector<Vec3> vertices, std::vector<Triangle> triangles,
                   std::vector<std::string> region_labels, MeshLoadReport* report) {
  // Drop degenerate (zero-area) triangles.
  std::size_t dropped = 0;
  std::vector<Triangle> kept;
  kept.reserve(triangles.size());
  std::vector<Vec3> normals;
  normals.reserve(triangles.size());
  for (const Triangle& t : triangles) {
    if (t.v0 >= vertices.size() || t.v1 >= vertices.size() || t.v2 >= vertices.size())
      throw std::runtime_error("triangle vertex index out of range");
    Vec3 n = cross(vertices[t.v1] - vertices[t.v0], vertices[t.v2] - vertices[t.v0]);
    double len = length(n);
    if (len < 1e-14) {
      ++dropped;
      continue;
    }
    kept.push_back(t);
    normals.push_back(n / len);
  }
  if (report) report->dropped_degenerate = dropped;
  if (kept.empty()) throw std::runtime_error("mesh has no non-degenerate triangles");

  // Remap region ids to a contiguous 0..K-1 set, ascending by original id.
  std::map<int, int> remap;
  for (const Triangle& t : kept) remap.emplace(t.region, 0);
  int next = 0;
  for (auto& [orig, id] : remap) id = next++;
  std::vector<std::string> labels(remap.size());
  for (auto& [orig, id] : remap) {
    if (orig >= 0 && static_cast<std::size_t>(orig) < region_labels.size() &&
        !region_labels[orig].empty())
      labels[id] = region_labels[orig];
    else
      labels[id] = "region_" + std::to_string(orig);
  }
  for (Triangle& t : kept) t.region = remap.at(t.region);

  Scene s;
  s.vertices_ = std::move(vertices);
  s.triangles_ = std::move(kept);
  s.face_normals_ = std::move(normals);
  s.region_labels_ = std::move(labels);
  s.region_count_ = next;
  s.static_count_ = s.triangles_.size();
  s.static_vertex_count_ = s.vertices_.size();
  s.bvh_.build(s.vertices_, s.triangles_, 0, static_cast<std::uint32_t>(s.triangles_.size()));
  return s;
}

bool Scene::intersect_triangle(std::uint32_t tri, const Ray& ray, Hit& best, bool& found) const {
  const Triangle& t = triangles_[tri];
  const Vec3& a = vertices_[t.v0];
  Vec3 e1 = vertices_[t.v1] - a;
  Vec3 e2 = vertices_[t.v2] - a;
  Vec3 pvec = cross(ray.dir, e2);
  double det = dot(e1, pvec);
  if (std::fabs(det) < 1e-14) return false;
  double inv_det = 1.0 / det;
  Vec3 tvec = ray.origin - a;
  double u = dot(tvec, pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return false;
  Vec3 qvec = cross(tvec, e1);
  double v = dot(ray.dir, qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return false;
  double tt = dot(e2, qvec) * inv_det;
  if (tt <= ray.t_min || tt >= ray.t_max) return false;
  if (found && (tt > best.t || (tt == best.t && tri >= best.triangle))) return false;
  best.t = tt;
  best.point = ray.origin + ray.dir * tt;
  Vec3 n = face_normals_[tri];
  best.normal = dot(n, ray.dir) > 0.0 ? -n : n;
  best.triangle = tri;
  best.region = t.region;
  found = true;
  return true;
}

std::optional<Hit> Scene::intersect(const Ray& ray) const {
  Hit best;
  bool found = false;
  double t_max = ray.t_max;
  // t_max only shrinks; the nextafter slack keeps exact ties visitable so the
  // (t, triangle-id) tie-break matches the exhaustive scan.
  Ray r = ray;
  bvh_.traverse(ray.origin, ray.dir, ray.t_min, t_max, [&](std::uint32_t tri) {
    r.t_max = std::nextafter(t_max, kInfinity);
    if (intersect_triangle(tri, r, best, found)) t_max = best.t;
  });
  for (const Proxy& p : proxies_) {
    p.bvh.traverse(ray.origin, ray.dir, ray.t_min, t_max, [&](std::uint32_t tri) {
      r.t_max = std::nextafter(t_max, kInfinity);
      if (intersect_triangle(tri, r, best, found)) t_max = best.t;
    });
  }
  if (!found) return std::nullopt;
  return best;
}

std::optional<Hit> Scene::intersect_brute(const Ray& ray) const {
  Hit best;
  bool found = false;
  for (std::uint32_t i = 0; i < triangles_.size(); ++i) intersect_triangle(i, ray, best, found);
  if (!found) return std::nullopt;
  return best;
}

bool Scene::occluded(const Vec3& a, const Vec3& b, double endpoint_eps) const {
  Vec3 d = b - a;
  double len = length(d);
  if (len < 2.0 * endpoint_eps) return false;
  Ray ray;
  ray.origin = a;
  ray.dir = d / len;
  ray.t_min = endpoint_eps;
  ray.t_max = len - endpoint_eps;
  return intersect(ray).has_value();
}

double Scene::triangle_area(std::uint32_t tri) const {
  const Triangle& t = triangles_[tri];
  return 0.5 * length(cross(vertices_[t.v1] - vertices_[t.v0], vertices_[t.v2] - vertices_[t.v0]));
}

Scene Scene::with_proxy(const std::vector<Vec3>& vertices, const std::vector<Triangle>& triangles,
                        const std::string& label) const {
  Scene s = *this;
  std::uint32_t base_vertex = static_cast<std::uint32_t>(s.vertices_.size());
  std::uint32_t first_tri = static_cast<std::uint32_t>(s.triangles_.size());
  int region = s.region_count_++;
  s.region_labels_.push_back(label);
  s.vertices_.insert(s.vertices_.end(), vertices.begin(), vertices.end());
  Proxy proxy;
  proxy.first_tri = first_tri;
  for (const Triangle& t : triangles) {
    Triangle nt{t.v0 + base_vertex, t.v1 + base_vertex, t.v2 + base_vertex, region};
    Vec3 n = cross(s.vertices_[nt.v1] - s.vertices_[nt.v0], s.vertices_[nt.v2] - s.vertices_[nt.v0]);
    double len = length(n);
    if (len < 1e-14) continue;
    s.triangles_.push_back(nt);
    s.face_normals_.push_back(n / len);
    proxy.box.expand(s.vertices_[nt.v0]);
    proxy.box.expand(s.vertices_[nt.v1]);
    proxy.box.expand(s.vertices_[nt.v2]);
  }
  proxy.count = static_cast<std::uint32_t>(s.triangles_.size()) - first_tri;
  proxy.bvh.build(s.vertices_, s.triangles_, first_tri, proxy.count);
  s.proxies_.push_back(std::move(proxy));
  s.epoch_ = epoch_ + 1;
  return s;
}

Scene Scene::base_scene() const {
  Scene s = *this;
  if (!s.proxies_.empty()) {
    s.triangles_.resize(s.static_count_);
    s.face_normals_.resize(s.static_count_);
    s.vertices_.resize(s.static_vertex_count_);
    s.region_count_ -= static_cast<int>(s.proxies_.size());
    s.region_labels_.resize(static_cast<std::size_t>(s.region_count_));
    s.proxies_.clear();
    s.epoch_ = epoch_ + 1;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Mesh loading
// ---------------------------------------------------------------------------

namespace {

struct RegionRange {
  std::size_t start, end;  // inclusive face range
  int region;
  std::string label;
};

std::vector<RegionRange> load_region_file(const std::string& path) {
  std::ifstream in(path);
  std::vector<RegionRange> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    RegionRange r;
    if (!(ss >> r.start >> r.end >> r.region)) throw std::runtime_error("bad region mapping line: " + line);
    ss >> std::ws;
    std::getline(ss, r.label);
    out.push_back(r);
  }
  return out;
}

void apply_region_ranges(std::vector<Triangle>& tris, std::vector<std::string>& labels,
                         const std::vector<RegionRange>& ranges) {
  int max_region = 0;
  for (const RegionRange& r : ranges) max_region = std::max(max_region, r.region);
  labels.assign(static_cast<std::size_t>(max_region) + 1, "");
  for (const RegionRange& r : ranges) {
    if (r.end >= tris.size())
      throw std::runtime_error("region mapping face range exceeds face count");
    for (std::size_t f = r.start; f <= r.end; ++f) tris[f].region = r.region;
    if (!r.label.empty()) labels[r.region] = r.label;
  }
}

struct PlyProperty {
  std::string name;
  std::string type;
  bool is_list = false;
  std::string count_type;
};

double read_scalar_binary(std::ifstream& in, const std::string& type) {
  auto read = [&](auto v) -> double {
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return static_cast<double>(v);
  };
  if (type == "float" || type == "float32") return read(float{});
  if (type == "double" || type == "float64") return read(double{});
  if (type == "char" || type == "int8") return read(std::int8_t{});
  if (type == "uchar" || type == "uint8") return read(std::uint8_t{});
  if (type == "short" || type == "int16") return read(std::int16_t{});
  if (type == "ushort" || type == "uint16") return read(std::uint16_t{});
  if (type == "int" || type == "int32") return read(std::int32_t{});
  if (type == "uint" || type == "uint32") return read(std::uint32_t{});
  throw std::runtime_error("unsupported ply scalar type: " + type);
}

void load_ply(const std::string& path, std::vector<Vec3>& vertices, std::vector<Triangle>& tris,
              bool& has_region) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open mesh file: " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw std::runtime_error("not a ply file: " + path);

  bool binary = false;
  std::size_t n_vertex = 0, n_face = 0;
  std::vector<PlyProperty> vertex_props, face_props;
  std::vector<PlyProperty>* cur = nullptr;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "comment" || tok == "obj_info") continue;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "binary_little_endian")
        binary = true;
      else if (fmt != "ascii")
        throw std::runtime_error("unsupported ply format: " + fmt);
    } else if (tok == "element") {
      std::string name;
      std::size_t n;
      ss >> name >> n;
      if (name == "vertex") {
        n_vertex = n;
        cur = &vertex_props;
      } else if (name == "face") {
        n_face = n;
        cur = &face_props;
      } else {
        cur = nullptr;
        if (n > 0) throw std::runtime_error("unsupported ply element: " + name);
      }
    } else if (tok == "property") {
      PlyProperty p;
      ss >> p.type;
      if (p.type == "list") {
        p.is_list = true;
        ss >> p.count_type >> p.type >> p.name;
      } else {
        ss >> p.name;
      }
      if (cur) cur->push_back(p);
    } else if (tok == "end_header") {
      break;
    }
  }

  int ix = -1, iy = -1, iz = -1;
  for (std::size_t i = 0; i < vertex_props.size(); ++i) {
    if (vertex_props[i].name == "x") ix = static_cast<int>(i);
    if (vertex_props[i].name == "y") iy = static_cast<int>(i);
    if (vertex_props[i].name == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw std::runtime_error("ply vertex element lacks x/y/z");

  vertices.resize(n_vertex);
  std::vector<double> vals(vertex_props.size());
  for (std::size_t v = 0; v < n_vertex; ++v) {
    if (binary) {
      for (std::size_t i = 0; i < vertex_props.size(); ++i)
        vals[i] = read_scalar_binary(in, vertex_props[i].type);
    } else {
      for (std::size_t i = 0; i < vertex_props.size(); ++i)
        if (!(in >> vals[i])) throw std::runtime_error("ply vertex parse failure");
    }
    vertices[v] = {vals[ix], vals[iy], vals[iz]};
  }

  has_region = false;
  int region_prop = -1;
  for (std::size_t i = 0; i < face_props.size(); ++i)
    if (face_props[i].name == "region" || face_props[i].name == "region_id") {
      has_region = true;
      region_prop = static_cast<int>(i);
    }

  tris.clear();
  for (std::size_t f = 0; f < n_face; ++f) {
    std::vector<std::uint32_t> idx;
    int region = 0;
    for (std::size_t i = 0; i < face_props.size(); ++i) {
      const PlyProperty& p = face_props[i];
      if (p.is_list) {
        std::size_t count;
        if (binary)
          count = static_cast<std::size_t>(read_scalar_binary(in, p.count_type));
        else {
          if (!(in >> count)) throw std::runtime_error("ply face parse failure");
        }
        idx.resize(count);
        for (std::size_t k = 0; k < count; ++k) {
          double v;
          if (binary)
            v = read_scalar_binary(in, p.type);
          else if (!(in >> v))
            throw std::runtime_error("ply face parse failure");
          idx[k] = static_cast<std::uint32_t>(v);
        }
      } else {
        double v;
        if (binary)
          v = read_scalar_binary(in, p.type);
        else if (!(in >> v))
          throw std::runtime_error("ply face parse failure");
        if (static_cast<int>(i) == region_prop) region = static_cast<int>(v);
      }
    }
    if (idx.size() < 3) throw std::runtime_error("ply face with fewer than 3 vertices");
    for (std::size_t k = 2; k < idx.size(); ++k)
      tris.push_back({idx[0], idx[k - 1], idx[k], region});
  }
}

void load_obj(const std::string& path, std::vector<Vec3>& vertices, std::vector<Triangle>& tris) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file: " + path);
  std::string line;
  auto parse_index = [](const std::string& tok, std::size_t n_verts) -> std::uint32_t {
    long v = std::stol(tok.substr(0, tok.find('/')));
    if (v < 0) v = static_cast<long>(n_verts) + v + 1;
    if (v < 1 || static_cast<std::size_t>(v) > n_verts)
      throw std::runtime_error("obj face index out of range");
    return static_cast<std::uint32_t>(v - 1);
  };
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "v") {
      Vec3 p;
      if (!(ss >> p.x >> p.y >> p.z)) throw std::runtime_error("obj vertex parse failure");
      vertices.push_back(p);
    } else if (tok == "f") {
      std::vector<std::uint32_t> idx;
      while (ss >> tok) idx.push_back(parse_index(tok, vertices.size()));
      if (idx.size() < 3) throw std::runtime_error("obj face with fewer than 3 vertices");
      for (std::size_t k = 2; k < idx.size(); ++k)
        tris.push_back({idx[0], idx[k - 1], idx[k], 0});
    }
  }
}

}  // namespace

Scene load_mesh(const std::string& path, MeshLoadReport* report) {
  std::vector<Vec3> vertices;
  std::vector<Triangle> tris;
  bool has_region = false;

  auto dot_pos = path.rfind('.');
  std::string ext = dot_pos == std::string::npos ? "" : path.substr(dot_pos + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == "ply")
    load_ply(path, vertices, tris, has_region);
  else if (ext == "obj")
    load_obj(path, vertices, tris);
  else
    throw std::runtime_error("unsupported mesh format: " + path);

  if (vertices.empty() || tris.empty()) throw std::runtime_error("empty mesh: " + path);

  std::vector<std::string> labels;
  std::string region_path = path + ".regions";
  if (!has_region && std::ifstream(region_path).good()) {
    apply_region_ranges(tris, labels, load_region_file(region_path));
  }

  MeshLoadReport local;
  Scene s = Scene::build(std::move(vertices), std::move(tris), std::move(labels),
                         report ? report : &local);
  if (report && report->dropped_degenerate > 0)
    report->warnings.push_back("dropped " + std::to_string(report->dropped_degenerate) +
                               " zero-area triangle(s)");
  return s;
}

Vec3 mirror_reflect(const Vec3& dir, const Vec3& normal) {
  double dn = dot(dir, normal);
  if (std::fabs(dn) < 1e-12) throw std::invalid_argument("mirror_reflect: grazing direction");
  if (dn > 0.0) throw std::invalid_argument("mirror_reflect: direction must oppose the normal");
  return dir - normal * (2.0 * dn);
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Ericson, Real-Time Collision Detection, 5.1.5.
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  Vec3 bp = p - b;
  double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + ab * (d1 / (d1 - d3));
  Vec3 cp = p - c;
  double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + ac * (d2 / (d2 - d6));
  double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return b + (c - b) * w;
  }
  double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

DistanceSummary mesh_distance(const Scene& scene_a, const Scene& scene_b, std::size_t n_samples,
                              const std::vector<double>& thresholds, std::uint64_t seed) {
  if (scene_a.empty() || scene_b.empty()) throw std::runtime_error("mesh_distance: empty mesh");
  if (n_samples < 1) throw std::runtime_error("mesh_distance: n_samples must be >= 1");

  const auto& tris_a = scene_a.triangles();
  std::vector<double> cum(tris_a.size());
  double total = 0.0;
  for (std::size_t i = 0; i < tris_a.size(); ++i) {
    total += scene_a.triangle_area(static_cast<std::uint32_t>(i));
    cum[i] = total;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  DistanceSummary out;
  out.distances.reserve(n_samples);
  const auto& va = scene_a.vertices();
  const auto& vb = scene_b.vertices();
  const auto& tris_b = scene_b.triangles();
  for (std::size_t s = 0; s < n_samples; ++s) {
    double pick = uni(rng) * total;
    std::size_t ti = std::lower_bound(cum.begin(), cum.end(), pick) - cum.begin();
    if (ti >= tris_a.size()) ti = tris_a.size() - 1;
    double u = uni(rng), v = uni(rng);
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    const Triangle& t = tris_a[ti];
    Vec3 p = va[t.v0] + (va[t.v1] - va[t.v0]) * u + (va[t.v2] - va[t.v0]) * v;

    double best = kInfinity;
    for (const Triangle& tb : tris_b) {
      Vec3 q = closest_point_on_triangle(p, vb[tb.v0], vb[tb.v1], vb[tb.v2]);
      best = std::min(best, length(p - q));
    }
    out.distances.push_back(best);
  }

  out.thresholds = thresholds;
  for (double th : thresholds) {
    std::size_t within = 0;
    for (double d : out.distances)
      if (d <= th) ++within;
    out.fraction_within.push_back(static_cast<double>(within) / static_cast<double>(n_samples));
  }

  out.max_distance = *std::max_element(out.distances.begin(), out.distances.end());
  constexpr std::size_t kBins = 20;
  out.histogram.assign(kBins, 0);
  out.bin_width = out.max_distance > 0.0 ? out.max_distance / kBins : 1.0;
  for (double d : out.distances) {
    std::size_t bin = std::min(kBins - 1, static_cast<std::size_t>(d / out.bin_width));
    ++out.histogram[bin];
  }
  return out;
}

}  // namespace mmtwin::geom
