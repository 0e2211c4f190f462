#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace mmtwin {

/// Forward-mode scalar carrying a dense gradient with respect to a set of
/// seed variables. The gradient dimension is fixed when a seed is created;
/// scalars with an empty gradient act as constants.
class Dual {
 public:
  Dual() = default;
  Dual(double v) : val_(v) {}  // NOLINT: implicit by design
  Dual(double v, std::vector<double> g) : val_(v), grad_(std::move(g)) {}

  static Dual seed(double v, std::size_t dim, std::size_t index) {
    std::vector<double> g(dim, 0.0);
    g[index] = 1.0;
    return Dual(v, std::move(g));
  }

  double value() const { return val_; }
  const std::vector<double>& grad() const { return grad_; }
  double grad(std::size_t i) const { return i < grad_.size() ? grad_[i] : 0.0; }

  Dual operator-() const {
    Dual r(-val_, grad_);
    for (double& g : r.grad_) g = -g;
    return r;
  }

  Dual& operator+=(const Dual& o) {
    val_ += o.val_;
    accumulate(o.grad_, 1.0);
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    val_ -= o.val_;
    accumulate(o.grad_, -1.0);
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    if (&o == this) { Dual copy = o; return *this *= copy; }
    // d(ab) = b da + a db; scale own grad first, then add a*db.
    for (double& g : grad_) g *= o.val_;
    accumulate(o.grad_, val_);
    val_ *= o.val_;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    if (&o == this) { Dual copy = o; return *this /= copy; }
    double inv = 1.0 / o.val_;
    for (double& g : grad_) g *= inv;
    accumulate(o.grad_, -val_ * inv * inv);
    val_ *= inv;
    return *this;
  }

  friend Dual operator+(Dual a, const Dual& b) { a += b; return a; }
  friend Dual operator-(Dual a, const Dual& b) { a -= b; return a; }
  friend Dual operator*(Dual a, const Dual& b) { a *= b; return a; }
  friend Dual operator/(Dual a, const Dual& b) { a /= b; return a; }

  friend bool operator<(const Dual& a, const Dual& b) { return a.val_ < b.val_; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.val_ > b.val_; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.val_ <= b.val_; }
  friend bool operator>=(const Dual& a, const Dual& b) { return a.val_ >= b.val_; }
  friend bool operator==(const Dual& a, const Dual& b) { return a.val_ == b.val_; }

  friend Dual chain(const Dual& x, double fx, double dfx) {
    Dual r(fx, x.grad_);
    for (double& g : r.grad_) g *= dfx;
    return r;
  }

 private:
  void accumulate(const std::vector<double>& g, double scale) {
    if (g.empty()) return;
    if (grad_.size() < g.size()) grad_.resize(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) grad_[i] += scale * g[i];
  }

  double val_ = 0.0;
  std::vector<double> grad_;
};

inline Dual sqrt(const Dual& x) {
  double s = std::sqrt(x.value());
  return chain(x, s, 0.5 / s);
}
inline Dual exp(const Dual& x) {
  double e = std::exp(x.value());
  return chain(x, e, e);
}
inline Dual log(const Dual& x) { return chain(x, std::log(x.value()), 1.0 / x.value()); }
inline Dual sin(const Dual& x) { return chain(x, std::sin(x.value()), std::cos(x.value())); }
inline Dual cos(const Dual& x) { return chain(x, std::cos(x.value()), -std::sin(x.value())); }
inline Dual abs(const Dual& x) {
  // Subgradient 0 at the kink.
  double s = x.value() > 0.0 ? 1.0 : (x.value() < 0.0 ? -1.0 : 0.0);
  return chain(x, std::fabs(x.value()), s);
}
inline Dual atan2(const Dual& y, const Dual& x) {
  double denom = x.value() * x.value() + y.value() * y.value();
  Dual r = std::atan2(y.value(), x.value());
  r += chain(y, 0.0, x.value() / denom);
  r += chain(x, 0.0, -y.value() / denom);
  return r;
}

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.value(); }

// Generic-scalar helpers so templated numeric code resolves for plain double.
using std::abs;
using std::atan2;
using std::cos;
using std::exp;
using std::log;
using std::sin;
using std::sqrt;

/// Minimal complex number over a generic real scalar (double or Dual).
template <class T>
struct Cpx {
  T re{}, im{};

  Cpx() = default;
  Cpx(T r) : re(std::move(r)) {}  // NOLINT
  Cpx(T r, T i) : re(std::move(r)), im(std::move(i)) {}

  Cpx operator+(const Cpx& o) const { return {re + o.re, im + o.im}; }
  Cpx operator-(const Cpx& o) const { return {re - o.re, im - o.im}; }
  Cpx operator-() const { return {-re, -im}; }
  Cpx operator*(const Cpx& o) const {
    return {re * o.re - im * o.im, re * o.im + im * o.re};
  }
  Cpx operator/(const Cpx& o) const {
    T denom = o.re * o.re + o.im * o.im;
    return {(re * o.re + im * o.im) / denom, (im * o.re - re * o.im) / denom};
  }
  Cpx& operator+=(const Cpx& o) { re += o.re; im += o.im; return *this; }
  Cpx& operator*=(const Cpx& o) { *this = *this * o; return *this; }

  Cpx operator*(const T& s) const { return {re * s, im * s}; }
  Cpx operator/(const T& s) const { return {re / s, im / s}; }
};

template <class T>
Cpx<T> operator*(const T& s, const Cpx<T>& c) {
  return c * s;
}

template <class T>
T abs_sq(const Cpx<T>& c) {
  return c.re * c.re + c.im * c.im;
}

template <class T>
T abs(const Cpx<T>& c) {
  return sqrt(abs_sq(c));
}

/// Principal square root (branch cut on the negative real axis); the result
/// has non-negative real part.
template <class T>
Cpx<T> sqrt(const Cpx<T>& c) {
  T r = abs(c);
  if (value_of(r) == 0.0) return c;
  T half = T(0.5);
  // Evaluate the well-conditioned component directly and derive the other
  // from im = 2 * re * im_mag; avoids cancellation near the real axis.
  T re, im_mag;
  if (value_of(c.re) >= 0.0) {
    re = sqrt((r + c.re) * half);
    im_mag = abs(c.im) / (re + re);
  } else {
    im_mag = sqrt((r - c.re) * half);
    re = abs(c.im) / (im_mag + im_mag);
  }
  if (value_of(c.im) < 0.0) return {re, -im_mag};
  return {re, im_mag};
}

/// e^{j phase}
template <class T>
Cpx<T> expj(const T& phase) {
  return {cos(phase), sin(phase)};
}

}  // namespace mmtwin
