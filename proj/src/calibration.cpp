#include "mmtwin/calibration.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmtwin::cal {

void CalibrationConfig::validate() const {
  if (lambda_p < 0.0 || lambda_tau < 0.0 || (lambda_p == 0.0 && lambda_tau == 0.0))
    throw std::runtime_error("calibration: loss weights must be >= 0 and not both zero");
  if (learning_rate <= 0.0) throw std::runtime_error("calibration: learning rate must be > 0");
  if (retrace_period == 0) throw std::runtime_error("calibration: retrace period must be >= 1");
  if (ema_beta < 0.0 || ema_beta >= 1.0)
    throw std::runtime_error("calibration: EMA beta must be in [0, 1)");
  if (sample_rate <= 0.0 || n_taps == 0)
    throw std::runtime_error("calibration: invalid CIR feature configuration");
}

double smape_loss(const std::vector<metrics::TapFeatures>& pred,
                  const std::vector<metrics::TapFeatures>& meas, double lambda_p,
                  double lambda_tau) {
  return smape_loss_t<double>(pred, meas, lambda_p, lambda_tau);
}

metrics::TapFeatures measured_features(const snap::Snapshot& snapshot,
                                       const CalibrationConfig& config) {
  channel::SynthesisConfig scfg;
  scfg.sample_rate = config.sample_rate;
  scfg.n_taps = config.n_taps;
  channel::ChannelImpulseResponse cir = channel::mpcs_to_cir(snapshot.mpcs, scfg);
  return metrics::tap_features(cir);
}

GradientResult gradients(const std::vector<snap::Snapshot>& batch,
                         const std::vector<const std::vector<trace::PropagationPath>*>& frozen_paths,
                         const std::vector<mat::MaterialEmbedding>& embeddings,
                         const mat::ReadoutWeights& weights, double scale,
                         const CalibrationConfig& config) {
  if (batch.size() != frozen_paths.size() || batch.empty())
    throw std::runtime_error("gradients: batch and frozen path lists must align");
  const std::size_t n_regions = embeddings.size();
  const std::size_t dim = 3 * n_regions + 1;  // (sigma, eps_r, S) per region + scale

  std::vector<mat::MaterialParams> base(n_regions);
  std::vector<mat::MaterialParamsT<Dual>> params(n_regions);
  for (std::size_t r = 0; r < n_regions; ++r) {
    base[r] = mat::params_from_embedding(embeddings[r], weights);
    params[r].sigma = Dual::seed(base[r].sigma, dim, 3 * r);
    params[r].eps_r = Dual::seed(base[r].eps_r, dim, 3 * r + 1);
    params[r].scattering = Dual::seed(base[r].scattering, dim, 3 * r + 2);
  }
  Dual s = Dual::seed(scale, dim, 3 * n_regions);

  channel::SynthesisConfig scfg;
  scfg.sample_rate = config.sample_rate;
  scfg.n_taps = config.n_taps;

  std::vector<metrics::TapFeaturesT<Dual>> pred;
  std::vector<metrics::TapFeatures> meas;
  pred.reserve(batch.size());
  meas.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto syn = channel::synthesize<Dual>(*frozen_paths[i], batch[i].tx, batch[i].rx, params,
                                         batch[i].f_hz, s, scfg);
    pred.push_back(metrics::tap_features(syn.cir));
    meas.push_back(measured_features(batch[i], config));
  }
  Dual loss = smape_loss_t<Dual>(pred, meas, config.lambda_p, config.lambda_tau);

  GradientResult out;
  out.loss = loss.value();
  out.d_scale = loss.grad(3 * n_regions);
  out.d_embedding.assign(n_regions, std::vector<double>(weights.dim, 0.0));
  for (std::size_t r = 0; r < n_regions; ++r) {
    double d_sigma = loss.grad(3 * r);
    double d_eps = loss.grad(3 * r + 1);
    double d_s = loss.grad(3 * r + 2);
    // Chain through sigma = exp(v.w1), eps_r = 1 + exp(v.w2), S = sigmoid(v.w3).
    double g1 = d_sigma * base[r].sigma;
    double g2 = d_eps * (base[r].eps_r - 1.0);
    double g3 = d_s * base[r].scattering * (1.0 - base[r].scattering);
    for (std::size_t j = 0; j < weights.dim; ++j)
      out.d_embedding[r][j] = g1 * weights.w1[j] + g2 * weights.w2[j] + g3 * weights.w3[j];
  }
  return out;
}

CalibrationResult calibrate(const geom::Scene& scene,
                            std::vector<mat::MaterialEmbedding> embeddings,
                            const mat::ReadoutWeights& weights,
                            const std::vector<snap::Snapshot>& snapshots,
                            const CalibrationConfig& config) {
  config.validate();
  if (snapshots.empty()) throw std::runtime_error("calibrate: needs at least one snapshot");
  for (const snap::Snapshot& s : snapshots) s.validate();
  if (embeddings.size() != static_cast<std::size_t>(scene.region_count()))
    throw std::runtime_error("calibrate: one embedding per scene region required");

  const std::size_t n = snapshots.size();
  const std::size_t b = (config.batch == 0 || config.batch >= n) ? n : config.batch;
  const std::size_t n_regions = embeddings.size();

  CalibrationResult result;
  result.regions.resize(n_regions);
  for (std::size_t r = 0; r < n_regions; ++r) {
    result.regions[r].label = scene.region_labels()[r];
    result.regions[r].before = mat::params_from_embedding(embeddings[r], weights);
  }

  std::vector<std::vector<trace::PropagationPath>> paths(n);
  auto retrace = [&] {
    for (std::size_t i = 0; i < n; ++i)
      paths[i] = trace::trace_paths(scene, snapshots[i].tx, snapshots[i].rx, config.trace);
  };

  channel::ScaleState sstate;
  sstate.beta = config.ema_beta;

  // Adaptive-moment state, flattened over [region][latent dim].
  std::vector<double> m(n_regions * weights.dim, 0.0), v(n_regions * weights.dim, 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    if (iter % config.retrace_period == 0) retrace();
    if (iter == 0) {
      for (const auto& link : paths)
        for (const trace::PropagationPath& p : link)
          for (const trace::Interaction& it : p.interactions)
            ++result.regions[static_cast<std::size_t>(it.region)].path_touches;
    }

    std::size_t start = (iter * b) % n;
    std::vector<snap::Snapshot> batch;
    std::vector<const std::vector<trace::PropagationPath>*> batch_paths;
    for (std::size_t k = 0; k < b; ++k) {
      std::size_t i = (start + k) % n;
      batch.push_back(snapshots[i]);
      batch_paths.push_back(&paths[i]);
    }

    // EMA scale from LoS-tagged snapshots (unscaled predictions).
    std::vector<mat::MaterialParams> dparams(n_regions);
    for (std::size_t r = 0; r < n_regions; ++r)
      dparams[r] = mat::params_from_embedding(embeddings[r], weights);
    std::vector<channel::MultipathComponent> pred_los, meas_los;
    for (std::size_t k = 0; k < b; ++k) {
      const snap::Snapshot& sn = batch[k];
      if (!sn.los_index) continue;
      for (const trace::PropagationPath& p : *batch_paths[k]) {
        if (p.kind != trace::PathKind::LoS) continue;
        pred_los.push_back(channel::path_gain<double>(p, sn.tx, sn.rx, dparams, sn.f_hz));
        meas_los.push_back(sn.mpcs[*sn.los_index]);
        break;
      }
    }
    if (!pred_los.empty()) sstate = channel::calibrate_scale(pred_los, meas_los, sstate);

    GradientResult g = gradients(batch, batch_paths, embeddings, weights, sstate.s, config);
    if (!std::isfinite(g.loss))
      throw std::runtime_error("calibrate: loss diverged (NaN/Inf) at iteration " +
                               std::to_string(iter) + "; scale=" + std::to_string(sstate.s));
    result.loss_history.push_back(g.loss);
    result.iterations = iter + 1;
    if (g.loss < config.tolerance) {
      result.converged = true;
      break;
    }

    for (std::size_t r = 0; r < n_regions; ++r) {
      for (std::size_t j = 0; j < weights.dim; ++j) {
        std::size_t idx = r * weights.dim + j;
        double grad = g.d_embedding[r][j];
        double step;
        if (config.plain_gd) {
          step = config.learning_rate * grad;
        } else {
          m[idx] = kBeta1 * m[idx] + (1.0 - kBeta1) * grad;
          v[idx] = kBeta2 * v[idx] + (1.0 - kBeta2) * grad * grad;
          double t = static_cast<double>(iter + 1);
          double m_hat = m[idx] / (1.0 - std::pow(kBeta1, t));
          double v_hat = v[idx] / (1.0 - std::pow(kBeta2, t));
          step = config.learning_rate * m_hat / (std::sqrt(v_hat) + kEps);
        }
        embeddings[r].v[j] -= step;
      }
    }
  }

  result.embeddings = std::move(embeddings);
  result.scale = sstate.s;
  for (std::size_t r = 0; r < n_regions; ++r)
    result.regions[r].after = mat::params_from_embedding(result.embeddings[r], weights);
  return result;
}

}  // namespace mmtwin::cal
