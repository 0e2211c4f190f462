#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmtwin/dual.hpp"
#include "mmtwin/materials.hpp"
#include "mmtwin/tracer.hpp"
#include "mmtwin/vec3.hpp"

namespace mmtwin::channel {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s, exact
inline constexpr double kPi = 3.14159265358979323846;

template <class T>
struct MpcT {
  double delay = 0.0;                  // s
  double aod_az = 0.0, aod_el = 0.0;   // rad
  double aoa_az = 0.0, aoa_el = 0.0;   // rad
  Cpx<T> amplitude;                    // linear field units
  trace::PathKind kind = trace::PathKind::LoS;

  T power() const { return abs_sq(amplitude); }
};
using MultipathComponent = MpcT<double>;

template <class T>
struct CirT {
  std::vector<Cpx<T>> taps;
  double sample_rate = 0.0;  // Hz
  double t0 = 0.0;           // s
};
using ChannelImpulseResponse = CirT<double>;

/// Global amplitude scale compensating the sounder's unknown power reference.
struct ScaleState {
  double s = 1.0;     // amplitude scale, > 0
  double beta = 0.9;  // EMA decay in [0, 1)
};

template <class T>
struct FresnelCoeffs {
  Cpx<T> te, tm;
};

/// Reflection coefficients for a plane interface with relative complex
/// permittivity eta, from the incidence-angle cosine. Principal square root
/// (non-negative real part).
template <class T>
FresnelCoeffs<T> fresnel_from_cos(double cos_theta, const Cpx<T>& eta) {
  double sin2 = 1.0 - cos_theta * cos_theta;
  Cpx<T> root = sqrt(Cpx<T>{eta.re - sin2, eta.im});
  Cpx<T> ct{T(cos_theta), T(0.0)};
  FresnelCoeffs<T> out;
  out.te = (ct - root) / (ct + root);
  out.tm = (eta * ct - root) / (eta * ct + root);
  return out;
}

/// fresnel(theta, eta); theta in [0, pi/2). theta == pi/2 returns the grazing
/// limit Gamma = -1 for both polarizations by convention.
FresnelCoeffs<double> fresnel(double theta_i, const Cpx<double>& eta);

/// Lambertian BSDF cos(theta_s)/pi; zero below the surface.
double lambertian_bsdf(const Vec3& incident, const Vec3& scattered, const Vec3& normal);

namespace detail {

/// Unit vector transverse to d, closest to global +z ("vertical" pol).
inline Vec3 vertical_pol(const Vec3& d) {
  Vec3 v = Vec3{0, 0, 1} - d * d.z;
  if (length_sq(v) < 1e-18) {
    v = Vec3{1, 0, 0} - d * d.x;
  }
  return normalize(v);
}

inline void direction_angles(const Vec3& d, double& az, double& el) {
  az = std::atan2(d.y, d.x);
  el = std::asin(std::fmax(-1.0, std::fmin(1.0, d.z)));
}

}  // namespace detail

/// Per-path electromagnetic evaluation: free-space spreading, TE/TM Fresnel
/// reflection with the (1 - S^2)^{1/2} specular reduction, and the Lambertian
/// single-scatter lobe. TX and RX are ideal vertical-polarized isotropic
/// probes; the returned amplitude is the co-polarized component.
template <class T>
MpcT<T> path_gain(const trace::PropagationPath& path, const Vec3& tx, const Vec3& rx,
                  const std::vector<mat::MaterialParamsT<T>>& region_params, double f_hz) {
  if (f_hz <= 0.0) throw std::runtime_error("path_gain: carrier frequency must be > 0");
  const double lambda = kSpeedOfLight / f_hz;

  MpcT<T> mpc;
  mpc.kind = path.kind;
  mpc.delay = path.length / kSpeedOfLight;

  const Vec3 first_target = path.interactions.empty() ? rx : path.interactions.front().point;
  const Vec3 last_point = path.interactions.empty() ? tx : path.interactions.back().point;
  detail::direction_angles(normalize(first_target - tx), mpc.aod_az, mpc.aod_el);
  detail::direction_angles(normalize(last_point - rx), mpc.aoa_az, mpc.aoa_el);

  const T phase = T(-2.0 * kPi * f_hz * path.length / kSpeedOfLight);

  if (path.kind == trace::PathKind::LoS) {
    double mag = lambda / (4.0 * kPi * path.length);
    mpc.amplitude = expj(phase) * T(mag);
    return mpc;
  }

  auto params_of = [&](int region) -> const mat::MaterialParamsT<T>& {
    if (region < 0 || static_cast<std::size_t>(region) >= region_params.size())
      throw std::runtime_error("path_gain: unknown region id " + std::to_string(region));
    return region_params[static_cast<std::size_t>(region)];
  };

  if (path.kind == trace::PathKind::Scattered) {
    const trace::Interaction& it = path.interactions.front();
    const mat::MaterialParamsT<T>& mp = params_of(it.region);
    double r1 = length(it.point - tx);
    double r2 = length(rx - it.point);
    Vec3 d_in = normalize(it.point - tx);
    Vec3 d_out = normalize(rx - it.point);
    double cos_i = -dot(d_in, it.normal);
    double cos_s = dot(d_out, it.normal);
    if (cos_s <= 0.0 || cos_i <= 0.0) {
      mpc.amplitude = Cpx<T>{T(0.0), T(0.0)};
      return mpc;
    }
    Cpx<T> eta = mat::complex_permittivity(mp.eps_r, mp.sigma, f_hz);
    FresnelCoeffs<T> g = fresnel_from_cos(cos_i, eta);
    T gamma_bar = sqrt((abs_sq(g.te) + abs_sq(g.tm)) * T(0.5));
    double a_eff = std::fmin(path.scatter_patch_area > 0.0 ? path.scatter_patch_area : 1.0,
                             (10.0 * lambda) * (10.0 * lambda));
    double geo = lambda / (4.0 * kPi) / (r1 * r2) * std::sqrt(cos_s / kPi) * std::sqrt(a_eff);
    T mag = mp.scattering * gamma_bar * T(geo);
    mpc.amplitude = expj(phase) * mag;
    return mpc;
  }

  // Specular chain with a two-component transverse field.
  Vec3 d = normalize(first_target - tx);
  Vec3 b1 = detail::vertical_pol(d);
  Vec3 b2 = cross(d, b1);
  Cpx<T> c1{T(1.0), T(0.0)}, c2{T(0.0), T(0.0)};

  for (std::size_t k = 0; k < path.interactions.size(); ++k) {
    const trace::Interaction& it = path.interactions[k];
    const mat::MaterialParamsT<T>& mp = params_of(it.region);
    Vec3 n = it.normal;  // oriented toward the incoming segment
    Vec3 e_perp = cross(d, n);
    if (length_sq(e_perp) < 1e-18) {
      e_perp = b2;  // normal incidence: decomposition is arbitrary
    } else {
      e_perp = normalize(e_perp);
    }
    Vec3 e_par_in = cross(e_perp, d);
    Cpx<T> a_perp = c1 * T(dot(b1, e_perp)) + c2 * T(dot(b2, e_perp));
    Cpx<T> a_par = c1 * T(dot(b1, e_par_in)) + c2 * T(dot(b2, e_par_in));

    double cos_i = -dot(d, n);
    Cpx<T> eta = mat::complex_permittivity(mp.eps_r, mp.sigma, f_hz);
    FresnelCoeffs<T> g = fresnel_from_cos(cos_i, eta);
    T reduction = sqrt(T(1.0) - mp.scattering * mp.scattering);

    d = d - n * (2.0 * dot(d, n));
    Vec3 e_par_out = cross(e_perp, d);
    c1 = a_perp * g.te * reduction;
    c2 = a_par * g.tm * reduction;
    b1 = e_perp;
    b2 = e_par_out;
  }

  Vec3 v_rx = detail::vertical_pol(d);
  Cpx<T> copol = c1 * T(dot(b1, v_rx)) + c2 * T(dot(b2, v_rx));
  double spread = lambda / (4.0 * kPi * path.length);
  mpc.amplitude = copol * expj(phase) * T(spread);
  return mpc;
}

struct SynthesisConfig {
  double sample_rate = 2e9;  // Hz
  std::size_t n_taps = 512;
  bool build_cir = true;
};

template <class T>
struct SynthesisT {
  std::vector<MpcT<T>> mpcs;
  CirT<T> cir;
  std::size_t dropped_taps = 0;  // paths whose tap index fell outside the CIR
};
using Synthesis = SynthesisT<double>;

/// One MPC per path (amplitude times the global scale) plus a nearest-tap
/// binned CIR.
template <class T>
SynthesisT<T> synthesize(const std::vector<trace::PropagationPath>& paths, const Vec3& tx,
                         const Vec3& rx, const std::vector<mat::MaterialParamsT<T>>& region_params,
                         double f_hz, const T& scale, const SynthesisConfig& config = {}) {
  SynthesisT<T> out;
  if (config.build_cir) {
    out.cir.taps.assign(config.n_taps, Cpx<T>{T(0.0), T(0.0)});
    out.cir.sample_rate = config.sample_rate;
    out.cir.t0 = 0.0;
  }
  for (const trace::PropagationPath& p : paths) {
    MpcT<T> mpc = path_gain(p, tx, rx, region_params, f_hz);
    mpc.amplitude = mpc.amplitude * scale;
    if (config.build_cir) {
      auto tap = static_cast<long long>(std::llround(mpc.delay * config.sample_rate));
      if (tap < 0 || static_cast<std::size_t>(tap) >= config.n_taps) {
        ++out.dropped_taps;
      } else {
        out.cir.taps[static_cast<std::size_t>(tap)] += mpc.amplitude;
      }
    }
    out.mpcs.push_back(std::move(mpc));
  }
  return out;
}

/// Builds a CIR directly from an MPC list (shared code path for measured
/// snapshots).
template <class T>
CirT<T> mpcs_to_cir(const std::vector<MpcT<T>>& mpcs, const SynthesisConfig& config,
                    std::size_t* dropped = nullptr) {
  CirT<T> cir;
  cir.taps.assign(config.n_taps, Cpx<T>{T(0.0), T(0.0)});
  cir.sample_rate = config.sample_rate;
  for (const MpcT<T>& m : mpcs) {
    auto tap = static_cast<long long>(std::llround(m.delay * config.sample_rate));
    if (tap < 0 || static_cast<std::size_t>(tap) >= config.n_taps) {
      if (dropped) ++*dropped;
      continue;
    }
    cir.taps[static_cast<std::size_t>(tap)] += m.amplitude;
  }
  return cir;
}

/// EMA update of the global amplitude scale from matched LoS power means:
/// s* = sqrt(mean_meas / mean_pred), s <- beta s + (1 - beta) s*.
ScaleState calibrate_scale(const std::vector<MultipathComponent>& predicted_los,
                           const std::vector<MultipathComponent>& measured_los,
                           ScaleState state);

}  // namespace mmtwin::channel
