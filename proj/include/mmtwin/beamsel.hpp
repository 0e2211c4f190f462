#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mmtwin/channel.hpp"

namespace mmtwin::beam {

/// Sectored azimuth codebook: flat mainlobe gain within half the beamwidth of
/// the boresight, floor gain elsewhere.
struct BeamCodebook {
  double g_max_dbi = 15.0;
  double g_min_dbi = -10.0;
  double beamwidth = 30.0 * channel::kPi / 180.0;  // rad
  std::vector<double> boresights;                  // rad, in (-pi, pi]

  static BeamCodebook uniform(std::size_t n_beams = 8, double g_max_dbi = 15.0,
                              double g_min_dbi = -10.0, double beamwidth_deg = 30.0);
  static BeamCodebook load(const std::string& path);  // JSON, degrees on disk
  void validate() const;

  double gain_dbi(double delta_az) const;  // delta wrapped to [-pi, pi]
};

struct McsEntry {
  int index = 0;
  double snr_threshold_db = 0.0;
  double phy_rate_mbps = 0.0;
};

struct LinkBudget {
  double tx_power_dbm = 10.0;
  double bandwidth_hz = 2.16e9;
  double noise_figure_db = 10.0;
  double mac_efficiency = 0.7;       // fraction of PHY rate delivered end to end
  std::vector<McsEntry> mcs_table;   // thresholds strictly increasing with rate

  static LinkBudget load(const std::string& path);  // JSON MCS table + budget fields
  void validate() const;
  double noise_dbm() const;  // -174 dBm/Hz + 10 log10(bandwidth) + NF
};

/// Effective linear channel power gain of a beam over an MPC set.
/// Coherent: |sum_i a_i sqrt(g_i) e^{j arg a_i already in a_i}|^2;
/// power-sum mode (for phaseless measured data): sum_i |a_i|^2 g_i.
double effective_gain(const std::vector<channel::MultipathComponent>& mpcs,
                      const BeamCodebook& codebook, std::size_t beam_index,
                      bool coherent = true);

struct RateResult {
  double snr_db = 0.0;          // -inf for zero gain
  int mcs_index = -1;           // -1: below the lowest threshold
  double phy_rate_mbps = 0.0;
  double throughput_mbps = 0.0;
};

RateResult snr_and_rate(double gain_linear, const LinkBudget& budget);

struct BeamChoice {
  std::size_t beam = 0;
  RateResult rate;
  double gain_linear = 0.0;
};

/// Argmax over beams of throughput; SNR breaks rate ties, then lowest index.
BeamChoice select_beam(const std::vector<channel::MultipathComponent>& mpcs,
                       const BeamCodebook& codebook, const LinkBudget& budget,
                       bool coherent = true);

}  // namespace mmtwin::beam
