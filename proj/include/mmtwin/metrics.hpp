#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mmtwin/channel.hpp"
#include "mmtwin/dual.hpp"

namespace mmtwin::metrics {

/// Per-snapshot channel statistics over an MPC list.
struct SnapshotMetrics {
  double pathloss_db = 0.0;         // -10 log10 of total MPC power
  double rms_delay_spread = 0.0;    // s, power-weighted second central moment
  double aoa_azimuth_spread = 0.0;  // rad, circular spread of AoA azimuth
  double k_factor_db = 0.0;         // 10 log10(P_LoS / P_NLoS); +inf if no NLoS power
  bool has_los = false;             // k_factor_db is NaN when false

  double aoa_azimuth_spread_deg() const { return aoa_azimuth_spread * 180.0 / channel::kPi; }
};

/// K is reported only when los_index names the LoS component; absent index
/// leaves has_los false and k_factor_db NaN.
SnapshotMetrics snapshot_metrics(const std::vector<channel::MultipathComponent>& mpcs,
                                 std::optional<std::size_t> los_index = std::nullopt);

/// Convenience: los_index inferred from the MPC kind tags.
SnapshotMetrics snapshot_metrics_auto(const std::vector<channel::MultipathComponent>& mpcs);

/// SL = 20 log10(|e_reference| / |e_received|); positive when attenuated.
/// Throws on a vanishing magnitude on either side.
double shadow_loss_db(const Cpx<double>& e_reference, const Cpx<double>& e_received);

/// Coherent field of an MPC set: sum of complex amplitudes.
Cpx<double> coherent_field(const std::vector<channel::MultipathComponent>& mpcs);

/// Differentiable CIR features used by the calibration loss: total tap power
/// and the power-weighted RMS tap-delay spread.
template <class T>
struct TapFeaturesT {
  T power;
  T delay_spread;  // s
};
using TapFeatures = TapFeaturesT<double>;

template <class T>
TapFeaturesT<T> tap_features(const channel::CirT<T>& cir) {
  const double dt = 1.0 / cir.sample_rate;
  T p = T(0.0);
  T m1 = T(0.0);
  for (std::size_t l = 0; l < cir.taps.size(); ++l) {
    T w = abs_sq(cir.taps[l]);
    p += w;
    m1 += w * T(static_cast<double>(l) * dt);
  }
  if (value_of(p) <= 0.0) return {p, T(0.0)};
  T mean = m1 / p;
  T m2 = T(0.0);
  for (std::size_t l = 0; l < cir.taps.size(); ++l) {
    T d = T(static_cast<double>(l) * dt) - mean;
    m2 += d * d * abs_sq(cir.taps[l]);
  }
  m2 /= p;
  // Tiny floor keeps the sqrt differentiable for single-tap responses
  // (1e-15 s bias, far below the tap spacing).
  return {p, sqrt(m2 + T(1e-30))};
}

// ---------------------------------------------------------------------------
// Cluster matching between predicted and measured MPC sets
// ---------------------------------------------------------------------------

struct ClusterMatchConfig {
  double delay_gate = 5e-9;                        // s
  double angle_gate = 10.0 * channel::kPi / 180.0; // rad, AoA great-circle
};

struct MatchedPair {
  std::size_t pred_index = 0;
  std::size_t meas_index = 0;
  double delay_error = 0.0;     // s, |tau_pred - tau_meas|
  double angle_error = 0.0;     // rad
  double power_error_db = 0.0;  // 10 log10(P_pred / P_meas)
};

struct ClusterMatchResult {
  std::vector<MatchedPair> pairs;            // sorted by pred_index
  std::vector<std::size_t> unmatched_pred;   // false alarms
  std::vector<std::size_t> unmatched_meas;   // misses
  double total_cost = 0.0;                   // sum of normalized pair costs
};

/// Globally optimal one-to-one assignment (Hungarian algorithm). A pair is
/// admissible only within both gates; its cost is
/// delay_error/delay_gate + angle_error/angle_gate. Maximizes the number of
/// matches, then minimizes total cost.
ClusterMatchResult cluster_match(const std::vector<channel::MultipathComponent>& predicted,
                                 const std::vector<channel::MultipathComponent>& measured,
                                 const ClusterMatchConfig& config = {});

}  // namespace mmtwin::metrics
