#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>

namespace mmtwin {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double length_sq(const Vec3& v) { return dot(v, v); }
inline double length(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalize(const Vec3& v) {
  double len = length(v);
  return v / len;
}

inline Vec3 min(const Vec3& a, const Vec3& b) {
  return {std::fmin(a.x, b.x), std::fmin(a.y, b.y), std::fmin(a.z, b.z)};
}

inline Vec3 max(const Vec3& a, const Vec3& b) {
  return {std::fmax(a.x, b.x), std::fmax(a.y, b.y), std::fmax(a.z, b.z)};
}

/// Axis-aligned bounding box.
struct Aabb {
  Vec3 lo{1e300, 1e300, 1e300};
  Vec3 hi{-1e300, -1e300, -1e300};

  void expand(const Vec3& p) { lo = min(lo, p); hi = max(hi, p); }
  void expand(const Aabb& b) { lo = min(lo, b.lo); hi = max(hi, b.hi); }
  bool valid() const { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }
  Vec3 center() const { return (lo + hi) * 0.5; }
  Vec3 extent() const { return hi - lo; }

  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
           p.z >= lo.z && p.z <= hi.z;
  }

  Aabb inflated(double margin) const {
    Aabb b = *this;
    Vec3 m{margin, margin, margin};
    b.lo -= m;
    b.hi += m;
    return b;
  }
};

/// Slab test; returns true if [t0, t1] along the ray overlaps the box.
inline bool intersect_aabb(const Aabb& box, const Vec3& origin, const Vec3& inv_dir,
                           double t0, double t1) {
  for (int i = 0; i < 3; ++i) {
    double ta = (box.lo[i] - origin[i]) * inv_dir[i];
    double tb = (box.hi[i] - origin[i]) * inv_dir[i];
    if (ta > tb) std::swap(ta, tb);
    t0 = ta > t0 ? ta : t0;
    t1 = tb < t1 ? tb : t1;
    if (t0 > t1) return false;
  }
  return true;
}

/// True if the segment a-b overlaps the box.
inline bool segment_intersects_aabb(const Aabb& box, const Vec3& a, const Vec3& b) {
  Vec3 d = b - a;
  double len = length(d);
  if (len < 1e-30) return box.contains(a);
  Vec3 dir = d / len;
  Vec3 inv{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
  return intersect_aabb(box, a, inv, 0.0, len);
}

}  // namespace mmtwin
