#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "mmtwin/channel.hpp"

using namespace mmtwin;
using namespace mmtwin::channel;

namespace {

constexpr double kC = 299792458.0;

trace::PropagationPath plane_bounce_path() {
  geom::Scene plane = fixtures::make_plane_scene();
  auto p = trace::refine_specular(plane, {0, 0, 2}, {4, 0, 2}, {0});
  REQUIRE(p.has_value());
  return *p;
}

std::complex<double> ref_fresnel_te(double theta, std::complex<double> eta) {
  double c = std::cos(theta);
  auto root = std::sqrt(eta - std::sin(theta) * std::sin(theta));
  return (c - root) / (c + root);
}

std::complex<double> ref_fresnel_tm(double theta, std::complex<double> eta) {
  double c = std::cos(theta);
  auto root = std::sqrt(eta - std::sin(theta) * std::sin(theta));
  return (eta * c - root) / (eta * c + root);
}

}  // namespace

TEST_CASE("fresnel worked values") {
  // Normal incidence on eps_r = 4: |Gamma| = 1/3 for both polarizations.
  auto g = fresnel(0.0, {4.0, 0.0});
  CHECK(g.te.re == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
  CHECK(g.te.im == doctest::Approx(0.0));
  CHECK(abs(g.tm) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // Index-matched interface reflects nothing.
  auto none = fresnel(0.7, {1.0, 0.0});
  CHECK(abs(none.te) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(abs(none.tm) == doctest::Approx(0.0).epsilon(1e-12));

  // Grazing limit.
  auto graze = fresnel(kPi / 2.0, {4.0, -0.3});
  CHECK(graze.te.re == doctest::Approx(-1.0));
  CHECK(graze.tm.re == doctest::Approx(-1.0));
  auto near_graze = fresnel(kPi / 2.0 - 1e-6, {4.0, -0.3});
  CHECK(abs(near_graze.te) == doctest::Approx(1.0).epsilon(1e-5));

  CHECK_THROWS(fresnel(-0.1, {4.0, 0.0}));
  CHECK_THROWS(fresnel(2.0, {4.0, 0.0}));
}

TEST_CASE("fresnel agrees with a std::complex reference and is passive") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> th(0.0, kPi / 2.0 - 1e-9);
  std::uniform_real_distribution<double> eps(1.0, 30.0);
  std::uniform_real_distribution<double> sig(0.0, 100.0);
  for (int i = 0; i < 20000; ++i) {
    double theta = th(rng);
    Cpx<double> eta = mat::complex_permittivity(eps(rng), sig(rng) + 1e-12, 60.5e9);
    auto g = fresnel(theta, eta);
    std::complex<double> eta_ref(eta.re, eta.im);
    auto te = ref_fresnel_te(theta, eta_ref);
    auto tm = ref_fresnel_tm(theta, eta_ref);
    CHECK(g.te.re == doctest::Approx(te.real()).epsilon(1e-10));
    CHECK(g.te.im == doctest::Approx(te.imag()).epsilon(1e-10));
    CHECK(g.tm.re == doctest::Approx(tm.real()).epsilon(1e-10));
    CHECK(g.tm.im == doctest::Approx(tm.imag()).epsilon(1e-10));
    REQUIRE(abs(g.te) <= 1.0 + 1e-12);
    REQUIRE(abs(g.tm) <= 1.0 + 1e-12);
  }
}

TEST_CASE("lambertian lobe") {
  Vec3 n{0, 0, 1};
  Vec3 in = normalize(Vec3{1, 0, -1});
  CHECK(lambertian_bsdf(in, {0, 0, 1}, n) == doctest::Approx(1.0 / kPi));
  // 60 degrees off the normal: cos(60)/pi.
  Vec3 out = normalize(Vec3{std::sin(kPi / 3.0), 0, std::cos(kPi / 3.0)});
  CHECK(lambertian_bsdf(in, out, n) == doctest::Approx(0.5 / kPi).epsilon(1e-12));
  CHECK(lambertian_bsdf(in, out, n) == doctest::Approx(0.15915).epsilon(1e-3));
  // Below the surface: zero.
  CHECK(lambertian_bsdf(in, {0, 0, -1}, n) == 0.0);
  CHECK(lambertian_bsdf(in, {1, 0, 0}, n) == doctest::Approx(0.0));
}

TEST_CASE("line-of-sight gain is Friis with carrier phase") {
  trace::PropagationPath los;
  los.kind = trace::PathKind::LoS;
  los.length = 10.0;
  double f = 60.5e9;
  auto mpc = path_gain<double>(los, {0, 0, 1}, {10, 0, 1}, {}, f);
  double lambda = kC / f;
  CHECK(abs(mpc.amplitude) == doctest::Approx(lambda / (4.0 * kPi * 10.0)).epsilon(1e-12));
  double pl_db = -10.0 * std::log10(value_of(mpc.power()));
  CHECK(pl_db == doctest::Approx(88.08).epsilon(1e-4));
  CHECK(mpc.delay == doctest::Approx(10.0 / kC));

  double expected_phase = std::fmod(-2.0 * kPi * f * 10.0 / kC, 2.0 * kPi);
  double got_phase = std::atan2(mpc.amplitude.im, mpc.amplitude.re);
  double diff = std::remainder(got_phase - expected_phase, 2.0 * kPi);
  CHECK(diff == doctest::Approx(0.0).epsilon(1e-9));

  // Departure direction is +x, arrival (pointing back toward TX) is -x.
  CHECK(mpc.aod_az == doctest::Approx(0.0));
  CHECK(std::fabs(mpc.aoa_az) == doctest::Approx(kPi));

  CHECK_THROWS(path_gain<double>(los, {0, 0, 1}, {10, 0, 1}, {}, 0.0));
}

TEST_CASE("single ground bounce reduces to the TM closed form") {
  trace::PropagationPath p = plane_bounce_path();
  double f = 28e9;
  double lambda = kC / f;
  double s_coeff = 0.3;
  std::vector<mat::MaterialParams> params{{0.5, 5.0, s_coeff}};
  auto mpc = path_gain<double>(p, {0, 0, 2}, {4, 0, 2}, params, f);

  Cpx<double> eta = mat::complex_permittivity(5.0, 0.5, f);
  auto tm = ref_fresnel_tm(kPi / 4.0, {eta.re, eta.im});
  double expected =
      std::abs(tm) * std::sqrt(1.0 - s_coeff * s_coeff) * lambda / (4.0 * kPi * p.length);
  CHECK(abs(mpc.amplitude) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(mpc.kind == trace::PathKind::Specular);

  // S = 0.6 diverts energy: amplitude scales by sqrt(1 - 0.36) = 0.8 relative
  // to the S -> 0 limit.
  std::vector<mat::MaterialParams> p06{{0.5, 5.0, 0.6}};
  std::vector<mat::MaterialParams> p00{{0.5, 5.0, 1e-12}};
  auto a06 = path_gain<double>(p, {0, 0, 2}, {4, 0, 2}, p06, f);
  auto a00 = path_gain<double>(p, {0, 0, 2}, {4, 0, 2}, p00, f);
  CHECK(abs(a06.amplitude) / abs(a00.amplitude) == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("near-perfect conductor reflects with unit magnitude") {
  trace::PropagationPath p = plane_bounce_path();
  std::vector<mat::MaterialParams> pec{{1e7, 1.0, 1e-9}};
  double f = 60.5e9;
  auto mpc = path_gain<double>(p, {0, 0, 2}, {4, 0, 2}, pec, f);
  double lambda = kC / f;
  CHECK(abs(mpc.amplitude) ==
        doctest::Approx(lambda / (4.0 * kPi * p.length)).epsilon(1e-3));
}

TEST_CASE("scattered path amplitude matches the patch formula") {
  trace::PropagationPath p;
  p.kind = trace::PathKind::Scattered;
  trace::Interaction it;
  it.point = {2, 0, 0};
  it.normal = {0, 0, 1};
  it.region = 0;
  it.kind = trace::InteractionKind::Scatter;
  p.interactions = {it};
  Vec3 tx{0, 0, 2}, rx{4, 0, 2};
  p.length = length(it.point - tx) + length(rx - it.point);
  p.scatter_patch_area = 1000.0;  // larger than the (10 lambda)^2 cap

  double f = 60.5e9;
  double lambda = kC / f;
  std::vector<mat::MaterialParams> params{{1.1437, 5.24, 0.4}};
  auto mpc = path_gain<double>(p, tx, rx, params, f);

  double r1 = std::sqrt(8.0), r2 = std::sqrt(8.0);
  double cos_i = 2.0 / r1, cos_s = 2.0 / r2;
  Cpx<double> eta = mat::complex_permittivity(5.24, 1.1437, f);
  auto te = ref_fresnel_te(std::acos(cos_i), {eta.re, eta.im});
  auto tm = ref_fresnel_tm(std::acos(cos_i), {eta.re, eta.im});
  double gbar = std::sqrt((std::norm(te) + std::norm(tm)) / 2.0);
  double a_eff = (10.0 * lambda) * (10.0 * lambda);
  double expected = lambda / (4.0 * kPi) / (r1 * r2) * 0.4 * gbar *
                    std::sqrt(cos_s / kPi) * std::sqrt(a_eff);
  CHECK(abs(mpc.amplitude) == doctest::Approx(expected).epsilon(1e-9));

  // Patch smaller than the cap: the triangle area wins.
  p.scatter_patch_area = 1e-4;
  auto small = path_gain<double>(p, tx, rx, params, f);
  CHECK(abs(small.amplitude) ==
        doctest::Approx(expected * std::sqrt(1e-4 / a_eff)).epsilon(1e-9));

  // Receiver below the surface sees nothing.
  auto dark = path_gain<double>(p, tx, {4, 0, -2}, params, f);
  CHECK(abs(dark.amplitude) == 0.0);
}

TEST_CASE("unknown region id is rejected") {
  trace::PropagationPath p = plane_bounce_path();
  p.interactions[0].region = 3;
  std::vector<mat::MaterialParams> params{{0.5, 5.0, 0.3}};
  CHECK_THROWS(path_gain<double>(p, {0, 0, 2}, {4, 0, 2}, params, 60e9));
}

TEST_CASE("CIR synthesis bins at the nearest tap") {
  trace::PropagationPath los;
  los.kind = trace::PathKind::LoS;
  los.length = 10.0 * 1e-9 * kC;  // exactly 10 ns
  SynthesisConfig cfg;
  cfg.sample_rate = 2e9;
  cfg.n_taps = 64;
  auto syn = synthesize<double>({los}, {0, 0, 0}, {1, 0, 0}, {}, 60e9, 1.0, cfg);
  REQUIRE(syn.mpcs.size() == 1);
  CHECK(syn.cir.taps.size() == 64);
  // 10 ns at 2 GHz = tap 20.
  CHECK(abs(syn.cir.taps[20]) == doctest::Approx(abs(syn.mpcs[0].amplitude)));
  for (std::size_t i = 0; i < 64; ++i)
    if (i != 20) CHECK(abs(syn.cir.taps[i]) == 0.0);
  CHECK(syn.dropped_taps == 0);

  // A path beyond the CIR span is counted, not binned.
  trace::PropagationPath late = los;
  late.length = 100.0 * 1e-9 * kC * 64.0;
  auto syn2 = synthesize<double>({los, late}, {0, 0, 0}, {1, 0, 0}, {}, 60e9, 1.0, cfg);
  CHECK(syn2.dropped_taps == 1);
  CHECK(syn2.mpcs.size() == 2);
}

TEST_CASE("same-tap paths add coherently") {
  double f = 50e9;  // lambda divides both lengths' phase relation cleanly below
  double d1 = 6.0, d2 = d1 + (kC / f) / 2.0;  // half-wavelength longer
  trace::PropagationPath a, b;
  a.kind = b.kind = trace::PathKind::LoS;
  a.length = d1;
  b.length = d2;
  SynthesisConfig cfg;
  cfg.sample_rate = 1e8;  // both fall into the same coarse tap
  cfg.n_taps = 16;
  auto syn = synthesize<double>({a, b}, {0, 0, 0}, {1, 0, 0}, {}, f, 1.0, cfg);
  std::size_t tap = static_cast<std::size_t>(std::llround(d1 / kC * cfg.sample_rate));
  double expect =
      std::abs(kC / f / (4.0 * kPi * d1) - kC / f / (4.0 * kPi * d2));  // opposite phases
  CHECK(abs(syn.cir.taps[tap]) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("synthesis scale and permutation behavior") {
  geom::Scene plane = fixtures::make_plane_scene();
  trace::TraceConfig tcfg;
  tcfg.n_rays = 10000;
  tcfg.scatter_keep_prob = 0.0;
  auto paths = trace::trace_paths(plane, {0, 0, 2}, {4, 0, 2}, tcfg);
  std::vector<mat::MaterialParams> params{{0.5, 5.0, 0.3}};

  auto s1 = synthesize<double>(paths, {0, 0, 2}, {4, 0, 2}, params, 60e9, 1.0);
  auto s2 = synthesize<double>(paths, {0, 0, 2}, {4, 0, 2}, params, 60e9, 2.0);
  for (std::size_t i = 0; i < s1.mpcs.size(); ++i)
    CHECK(value_of(s2.mpcs[i].power()) == doctest::Approx(4.0 * value_of(s1.mpcs[i].power())));

  std::vector<trace::PropagationPath> reversed(paths.rbegin(), paths.rend());
  auto s3 = synthesize<double>(reversed, {0, 0, 2}, {4, 0, 2}, params, 60e9, 1.0);
  for (std::size_t t = 0; t < s1.cir.taps.size(); ++t) {
    CHECK(s3.cir.taps[t].re == doctest::Approx(s1.cir.taps[t].re));
    CHECK(s3.cir.taps[t].im == doctest::Approx(s1.cir.taps[t].im));
  }
}

TEST_CASE("mpcs_to_cir matches the synthesis binning") {
  geom::Scene plane = fixtures::make_plane_scene();
  trace::TraceConfig tcfg;
  tcfg.n_rays = 10000;
  tcfg.scatter_keep_prob = 0.0;
  auto paths = trace::trace_paths(plane, {0, 0, 2}, {4, 0, 2}, tcfg);
  std::vector<mat::MaterialParams> params{{0.5, 5.0, 0.3}};
  SynthesisConfig cfg;
  auto syn = synthesize<double>(paths, {0, 0, 2}, {4, 0, 2}, params, 60e9, 1.0, cfg);
  auto cir = mpcs_to_cir(syn.mpcs, cfg);
  for (std::size_t t = 0; t < cir.taps.size(); ++t) {
    CHECK(cir.taps[t].re == syn.cir.taps[t].re);
    CHECK(cir.taps[t].im == syn.cir.taps[t].im);
  }
}

TEST_CASE("scale calibration EMA") {
  MultipathComponent pred, meas;
  pred.amplitude = {1.0, 0.0};  // power 1
  meas.amplitude = {2.0, 0.0};  // power 4
  ScaleState fresh{1.0, 0.0};   // beta 0: jump straight to s*
  auto s = calibrate_scale({pred}, {meas}, fresh);
  CHECK(s.s == doctest::Approx(2.0));

  ScaleState ema{1.0, 0.9};
  auto t = calibrate_scale({pred}, {meas}, ema);
  CHECK(t.s == doctest::Approx(0.9 * 1.0 + 0.1 * 2.0));  // 1.1

  // Matched power: no drift.
  auto u = calibrate_scale({meas}, {meas}, {1.0, 0.5});
  CHECK(u.s == doctest::Approx(1.0));

  MultipathComponent zero;
  CHECK_THROWS(calibrate_scale({zero}, {meas}, fresh));
  CHECK_THROWS(calibrate_scale({}, {meas}, fresh));
  CHECK_THROWS(calibrate_scale({pred}, {}, fresh));
}

TEST_CASE("path gain derivatives match finite differences") {
  trace::PropagationPath p = plane_bounce_path();
  double f = 60.5e9;
  auto power_at = [&](double sigma, double eps, double s) {
    std::vector<mat::MaterialParams> params{{sigma, eps, s}};
    auto mpc = path_gain<double>(p, {0, 0, 2}, {4, 0, 2}, params, f);
    return value_of(mpc.power());
  };

  std::vector<mat::MaterialParamsT<Dual>> dual_params{{Dual::seed(1.1437, 3, 0),
                                                       Dual::seed(5.24, 3, 1),
                                                       Dual::seed(0.3, 3, 2)}};
  auto mpc = path_gain<Dual>(p, {0, 0, 2}, {4, 0, 2}, dual_params, f);
  Dual pw = mpc.power();

  double h = 1e-5;
  double d_sigma = (power_at(1.1437 + h, 5.24, 0.3) - power_at(1.1437 - h, 5.24, 0.3)) / (2 * h);
  double d_eps = (power_at(1.1437, 5.24 + h, 0.3) - power_at(1.1437, 5.24 - h, 0.3)) / (2 * h);
  double d_s = (power_at(1.1437, 5.24, 0.3 + h) - power_at(1.1437, 5.24, 0.3 - h)) / (2 * h);
  CHECK(pw.grad(0) == doctest::Approx(d_sigma).epsilon(1e-5));
  CHECK(pw.grad(1) == doctest::Approx(d_eps).epsilon(1e-5));
  CHECK(pw.grad(2) == doctest::Approx(d_s).epsilon(1e-5));
}
