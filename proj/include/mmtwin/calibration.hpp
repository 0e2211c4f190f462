#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmtwin/channel.hpp"
#include "mmtwin/geometry.hpp"
#include "mmtwin/materials.hpp"
#include "mmtwin/metrics.hpp"
#include "mmtwin/snapshots.hpp"
#include "mmtwin/tracer.hpp"

namespace mmtwin::cal {

struct CalibrationConfig {
  double lambda_p = 1.0;   // power-term weight
  double lambda_tau = 1.0; // delay-spread-term weight
  std::size_t batch = 0;   // snapshots per iteration; 0 = all
  double learning_rate = 1e-2;
  std::size_t max_iterations = 200;
  std::size_t retrace_period = 25;  // iterations between path re-discovery
  double ema_beta = 0.9;            // scale EMA decay
  double tolerance = 1e-6;          // stop when loss or its decrement falls below
  bool plain_gd = false;            // default: adaptive-moment first-order method
  double sample_rate = 2e9;         // Hz, CIR tap rate for loss features
  std::size_t n_taps = 512;
  trace::TraceConfig trace;

  void validate() const;
};

/// Batch-averaged SMAPE over (power, delay-spread) feature pairs. Power terms
/// require strictly positive powers; a tau pair with tau + tau_hat <= 0
/// contributes 0.
template <class T>
T smape_loss_t(const std::vector<metrics::TapFeaturesT<T>>& pred,
               const std::vector<metrics::TapFeatures>& meas, double lambda_p,
               double lambda_tau) {
  if (pred.size() != meas.size() || pred.empty())
    throw std::runtime_error("smape_loss: batch size mismatch or empty batch");
  T loss = T(0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (value_of(pred[i].power) <= 0.0 || meas[i].power <= 0.0)
      throw std::runtime_error("smape_loss: non-positive power");
    loss += abs(pred[i].power - meas[i].power) / (pred[i].power + meas[i].power) * T(lambda_p);
    T tau_sum = pred[i].delay_spread + meas[i].delay_spread;
    if (value_of(tau_sum) > 0.0)
      loss += abs(pred[i].delay_spread - meas[i].delay_spread) / tau_sum * T(lambda_tau);
  }
  return loss / T(static_cast<double>(pred.size()));
}

double smape_loss(const std::vector<metrics::TapFeatures>& pred,
                  const std::vector<metrics::TapFeatures>& meas, double lambda_p,
                  double lambda_tau);

struct GradientResult {
  std::vector<std::vector<double>> d_embedding;  // [region][latent dim]
  double d_scale = 0.0;                          // reported, not stepped
  double loss = 0.0;
};

/// Exact derivative of the SMAPE loss through tap features, CIR synthesis and
/// per-path EM coefficients, with path geometry held fixed (frozen_paths[i]
/// belongs to batch[i]). Regions untouched by any path get a zero gradient.
GradientResult gradients(const std::vector<snap::Snapshot>& batch,
                         const std::vector<const std::vector<trace::PropagationPath>*>& frozen_paths,
                         const std::vector<mat::MaterialEmbedding>& embeddings,
                         const mat::ReadoutWeights& weights, double scale,
                         const CalibrationConfig& config);

struct RegionReport {
  std::string label;
  mat::MaterialParams before, after;
  std::size_t path_touches = 0;  // paths across all snapshots interacting with the region
};

struct CalibrationResult {
  std::vector<mat::MaterialEmbedding> embeddings;
  double scale = 1.0;
  std::vector<double> loss_history;  // one entry per completed iteration
  std::vector<RegionReport> regions;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Few-shot gradient calibration. Paths are re-traced every retrace_period
/// iterations; the global scale is EMA-updated from LoS-tagged snapshots and
/// excluded from the gradient step. Throws on NaN/Inf loss with diagnostics.
CalibrationResult calibrate(const geom::Scene& scene,
                            std::vector<mat::MaterialEmbedding> embeddings,
                            const mat::ReadoutWeights& weights,
                            const std::vector<snap::Snapshot>& snapshots,
                            const CalibrationConfig& config);

/// Measured-side loss features: the snapshot's MPC list rendered to a CIR at
/// the configured tap rate (same code path as predictions).
metrics::TapFeatures measured_features(const snap::Snapshot& snapshot,
                                       const CalibrationConfig& config);

}  // namespace mmtwin::cal
