#include <cmath>
#include <random>

#include "doctest.h"
#include "mmtwin/beamsel.hpp"

using namespace mmtwin;
using namespace mmtwin::beam;
using channel::MultipathComponent;

namespace {

MultipathComponent mpc_at(double aoa_az_deg, double amp_re, double amp_im = 0.0) {
  MultipathComponent m;
  m.aoa_az = aoa_az_deg * channel::kPi / 180.0;
  m.amplitude = {amp_re, amp_im};
  return m;
}

}  // namespace

TEST_CASE("uniform codebook geometry") {
  BeamCodebook cb = BeamCodebook::uniform();
  REQUIRE(cb.boresights.size() == 8);
  CHECK(cb.boresights[0] == doctest::Approx(-157.5 * channel::kPi / 180.0));
  CHECK(cb.boresights[4] == doctest::Approx(22.5 * channel::kPi / 180.0));
  CHECK(cb.boresights[7] == doctest::Approx(157.5 * channel::kPi / 180.0));

  // Sector gain: mainlobe within half the beamwidth, floor elsewhere.
  CHECK(cb.gain_dbi(0.0) == 15.0);
  CHECK(cb.gain_dbi(14.9 * channel::kPi / 180.0) == 15.0);
  CHECK(cb.gain_dbi(-14.9 * channel::kPi / 180.0) == 15.0);
  CHECK(cb.gain_dbi(15.5 * channel::kPi / 180.0) == -10.0);
  CHECK(cb.gain_dbi(180.0 * channel::kPi / 180.0) == -10.0);
  // Wraps: 359 degrees off is 1 degree off.
  CHECK(cb.gain_dbi(359.0 * channel::kPi / 180.0) == 15.0);

  BeamCodebook bad = cb;
  bad.g_min_dbi = 20.0;
  CHECK_THROWS(bad.validate());
  bad = cb;
  bad.boresights.clear();
  CHECK_THROWS(bad.validate());
  bad = cb;
  bad.beamwidth = 0.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("shipped codebook and link budget files load") {
  BeamCodebook cb = BeamCodebook::load(std::string(MMTWIN_SOURCE_DIR) + "/data/codebook_8beam.json");
  CHECK(cb.boresights.size() == 8);
  CHECK(cb.g_max_dbi == 15.0);

  LinkBudget lb = LinkBudget::load(std::string(MMTWIN_SOURCE_DIR) + "/data/mcs_80211ad.json");
  CHECK(lb.mcs_table.size() == 12);
  CHECK(lb.mcs_table.front().phy_rate_mbps == doctest::Approx(385.0));
  // Thermal floor: -174 dBm/Hz over 2.16 GHz plus a 10 dB noise figure.
  CHECK(lb.noise_dbm() == doctest::Approx(-70.65).epsilon(1e-4));
}

TEST_CASE("link budget validation") {
  LinkBudget lb;
  lb.mcs_table = {{1, 2.0, 385.0}, {2, 4.0, 770.0}};
  lb.validate();
  LinkBudget bad = lb;
  bad.mcs_table[1].snr_threshold_db = 2.0;  // not strictly increasing
  CHECK_THROWS(bad.validate());
  bad = lb;
  bad.mcs_table[1].phy_rate_mbps = 100.0;  // rate decreases
  CHECK_THROWS(bad.validate());
  bad = lb;
  bad.mac_efficiency = 0.0;
  CHECK_THROWS(bad.validate());
  bad = lb;
  bad.mcs_table.clear();
  CHECK_THROWS(bad.validate());
}

TEST_CASE("effective gain: single component and phasor sum") {
  BeamCodebook cb = BeamCodebook::uniform();
  // One unit-power component on the boresight of beam 4 (22.5 degrees).
  auto g = effective_gain({mpc_at(22.5, 1.0)}, cb, 4);
  CHECK(g == doctest::Approx(std::pow(10.0, 1.5)));
  // The same component seen by the opposite beam gets the floor gain.
  auto off = effective_gain({mpc_at(22.5, 1.0)}, cb, 0);
  CHECK(off == doctest::Approx(std::pow(10.0, -1.0)));

  CHECK(effective_gain({}, cb, 0) == 0.0);

  // Two in-beam components with opposite phases cancel coherently ...
  auto cancel = effective_gain({mpc_at(20.0, 1.0), mpc_at(25.0, -1.0)}, cb, 4);
  CHECK(cancel == doctest::Approx(0.0));
  // ... but add in power-sum mode.
  auto psum = effective_gain({mpc_at(20.0, 1.0), mpc_at(25.0, -1.0)}, cb, 4, false);
  CHECK(psum == doctest::Approx(2.0 * std::pow(10.0, 1.5)));

  // Hand phasor: in-beam (1+0j) * sqrt(Gmax) plus out-of-beam (0+1j) * sqrt(Gmin).
  auto mixed = effective_gain({mpc_at(22.5, 1.0), mpc_at(-90.0, 0.0, 1.0)}, cb, 4);
  double a = std::sqrt(std::pow(10.0, 1.5)), b = std::sqrt(std::pow(10.0, -1.0));
  CHECK(mixed == doctest::Approx(a * a + b * b));

  CHECK_THROWS(effective_gain({}, cb, 99));
}

TEST_CASE("effective gain scales quadratically with amplitude") {
  BeamCodebook cb = BeamCodebook::uniform();
  std::vector<MultipathComponent> mpcs = {mpc_at(10.0, 0.5, 0.2), mpc_at(40.0, -0.1, 0.3)};
  std::vector<MultipathComponent> scaled = mpcs;
  for (auto& m : scaled) m.amplitude = m.amplitude * 3.0;
  for (std::size_t beam = 0; beam < 8; ++beam) {
    CHECK(effective_gain(scaled, cb, beam) ==
          doctest::Approx(9.0 * effective_gain(mpcs, cb, beam)).epsilon(1e-12));
  }
}

TEST_CASE("SNR, MCS lookup and throughput") {
  LinkBudget lb;
  lb.mcs_table = {{1, 2.0, 385.0}, {2, 4.0, 770.0}, {3, 20.0, 1155.0}};

  // Zero gain: no link.
  auto none = snr_and_rate(0.0, lb);
  CHECK(std::isinf(none.snr_db));
  CHECK(none.snr_db < 0.0);
  CHECK(none.mcs_index == -1);
  CHECK(none.throughput_mbps == 0.0);

  // Pick a gain, then pin an MCS threshold to the exact resulting SNR: the
  // comparison is inclusive, so that entry must be selected.
  double g = 1e-7;
  double snr = lb.tx_power_dbm + 10.0 * std::log10(g) - lb.noise_dbm();
  LinkBudget exact = lb;
  exact.mcs_table[1].snr_threshold_db = snr;
  auto hit = snr_and_rate(g, exact);
  CHECK(hit.snr_db == doctest::Approx(snr));
  CHECK(hit.mcs_index == 2);
  CHECK(hit.throughput_mbps == doctest::Approx(770.0 * lb.mac_efficiency));

  // Below the lowest threshold.
  double weak = std::pow(10.0, (1.0 + lb.noise_dbm() - lb.tx_power_dbm) / 10.0);
  auto low = snr_and_rate(weak, lb);
  CHECK(low.mcs_index == -1);
  CHECK(low.phy_rate_mbps == 0.0);

  // Far above the top threshold saturates at the top MCS.
  auto top = snr_and_rate(1.0, lb);
  CHECK(top.mcs_index == 3);
  CHECK(top.throughput_mbps == doctest::Approx(1155.0 * lb.mac_efficiency));
}

TEST_CASE("beam selection matches an exhaustive sweep") {
  BeamCodebook cb = BeamCodebook::uniform();
  LinkBudget lb;
  lb.mcs_table = {{1, 2.0, 385.0}, {2, 6.0, 770.0}, {3, 10.0, 1155.0}, {4, 14.0, 2310.0}};

  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> az(-channel::kPi, channel::kPi);
  std::uniform_real_distribution<double> amp(1e-5, 5e-4);
  std::uniform_int_distribution<int> n_mpc(1, 6);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<MultipathComponent> mpcs;
    int n = n_mpc(rng);
    for (int i = 0; i < n; ++i) {
      MultipathComponent m;
      m.aoa_az = az(rng);
      double phase = az(rng);
      double a = amp(rng);
      m.amplitude = {a * std::cos(phase), a * std::sin(phase)};
      mpcs.push_back(m);
    }
    BeamChoice got = select_beam(mpcs, cb, lb);

    std::size_t best_beam = 0;
    RateResult best_rate;
    bool have = false;
    for (std::size_t b = 0; b < cb.boresights.size(); ++b) {
      RateResult r = snr_and_rate(effective_gain(mpcs, cb, b), lb);
      if (!have || r.throughput_mbps > best_rate.throughput_mbps ||
          (r.throughput_mbps == best_rate.throughput_mbps && r.snr_db > best_rate.snr_db)) {
        best_beam = b;
        best_rate = r;
        have = true;
      }
    }
    CHECK(got.beam == best_beam);
    CHECK(got.rate.throughput_mbps == best_rate.throughput_mbps);
  }
}

TEST_CASE("beam selection prefers the boresight covering the strong path") {
  BeamCodebook cb = BeamCodebook::uniform();
  LinkBudget lb;
  lb.mcs_table = {{1, 2.0, 385.0}, {2, 6.0, 770.0}};
  // Strong component at 112.5 degrees, weak one elsewhere.
  auto choice = select_beam({mpc_at(112.5, 3e-4), mpc_at(-30.0, 1e-5)}, cb, lb);
  CHECK(choice.beam == 6);
  CHECK(choice.rate.mcs_index >= 1);

  // No energy at all: ties resolve to the lowest beam index.
  auto idle = select_beam({}, cb, lb);
  CHECK(idle.beam == 0);
  CHECK(idle.rate.mcs_index == -1);
}
