#include "mmtwin/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmtwin::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec3 unit_from_angles(double az, double el) {
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

/// Hungarian algorithm (potentials form) for an n x n cost matrix.
/// Returns row -> column assignment minimizing total cost.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, n), way(n + 1, n);
  for (std::size_t i = 0; i < n; ++i) {
    p[n] = i;
    std::size_t j0 = n;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      std::size_t i0 = p[j0], j1 = n;
      double delta = kInf;
      for (std::size_t j = 0; j < n; ++j) {
        if (used[j]) continue;
        double cur = cost[i0][j] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != n);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != n);
  }
  std::vector<std::size_t> row_to_col(n, n);
  for (std::size_t j = 0; j < n; ++j)
    if (p[j] < n) row_to_col[p[j]] = j;
  return row_to_col;
}

}  // namespace

SnapshotMetrics snapshot_metrics(const std::vector<channel::MultipathComponent>& mpcs,
                                 std::optional<std::size_t> los_index) {
  if (mpcs.empty()) throw std::runtime_error("snapshot_metrics: empty MPC list");
  if (los_index && *los_index >= mpcs.size())
    throw std::runtime_error("snapshot_metrics: los_index out of range");

  double p_total = 0.0, m1 = 0.0, m2 = 0.0;
  double res_re = 0.0, res_im = 0.0;
  double p_los = 0.0;
  for (std::size_t i = 0; i < mpcs.size(); ++i) {
    const channel::MultipathComponent& m = mpcs[i];
    double p = m.power();
    p_total += p;
    m1 += p * m.delay;
    m2 += p * m.delay * m.delay;
    res_re += p * std::cos(m.aoa_az);
    res_im += p * std::sin(m.aoa_az);
    if (los_index && i == *los_index) p_los = p;
  }
  if (p_total <= 0.0) throw std::runtime_error("snapshot_metrics: zero total power");

  SnapshotMetrics out;
  out.pathloss_db = -10.0 * std::log10(p_total);

  double mean = m1 / p_total;
  double var = m2 / p_total - mean * mean;
  out.rms_delay_spread = std::sqrt(std::fmax(var, 0.0));

  double r = std::sqrt(res_re * res_re + res_im * res_im) / p_total;
  r = std::fmin(r, 1.0);
  out.aoa_azimuth_spread = r > 0.0 ? std::sqrt(-2.0 * std::log(r)) : kInf;

  out.has_los = los_index.has_value();
  if (!out.has_los) {
    out.k_factor_db = std::numeric_limits<double>::quiet_NaN();
  } else {
    double p_nlos = p_total - p_los;
    out.k_factor_db = p_nlos > 0.0 ? 10.0 * std::log10(p_los / p_nlos) : kInf;
  }
  return out;
}

SnapshotMetrics snapshot_metrics_auto(const std::vector<channel::MultipathComponent>& mpcs) {
  std::optional<std::size_t> los_index;
  for (std::size_t i = 0; i < mpcs.size(); ++i) {
    if (mpcs[i].kind == trace::PathKind::LoS) {
      los_index = i;
      break;
    }
  }
  return snapshot_metrics(mpcs, los_index);
}

double shadow_loss_db(const Cpx<double>& e_reference, const Cpx<double>& e_received) {
  double a_ref = abs(e_reference), a_cur = abs(e_received);
  if (a_ref <= 0.0 || a_cur <= 0.0)
    throw std::runtime_error("shadow_loss_db: zero field magnitude");
  return 20.0 * std::log10(a_ref / a_cur);
}

Cpx<double> coherent_field(const std::vector<channel::MultipathComponent>& mpcs) {
  Cpx<double> e{0.0, 0.0};
  for (const channel::MultipathComponent& m : mpcs) e += m.amplitude;
  return e;
}

ClusterMatchResult cluster_match(const std::vector<channel::MultipathComponent>& predicted,
                                 const std::vector<channel::MultipathComponent>& measured,
                                 const ClusterMatchConfig& config) {
  if (config.delay_gate <= 0.0 || config.angle_gate <= 0.0)
    throw std::runtime_error("cluster_match: gates must be positive");

  ClusterMatchResult out;
  const std::size_t np = predicted.size(), nm = measured.size();
  const std::size_t n = std::max(np, nm);
  if (n == 0) return out;

  // Admissible pair costs lie in [0, 2]; anything inadmissible (including
  // padding) costs more than any admissible pair, so the optimal assignment
  // first maximizes match count, then minimizes summed cost.
  constexpr double kNoMatch = 4.0;
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, kNoMatch));
  std::vector<std::vector<std::pair<double, double>>> err(
      n, std::vector<std::pair<double, double>>(n, {0.0, 0.0}));
  for (std::size_t i = 0; i < np; ++i) {
    Vec3 u = unit_from_angles(predicted[i].aoa_az, predicted[i].aoa_el);
    for (std::size_t j = 0; j < nm; ++j) {
      double d_err = std::fabs(predicted[i].delay - measured[j].delay);
      Vec3 w = unit_from_angles(measured[j].aoa_az, measured[j].aoa_el);
      double c = std::fmax(-1.0, std::fmin(1.0, dot(u, w)));
      double a_err = std::acos(c);
      if (d_err <= config.delay_gate && a_err <= config.angle_gate) {
        cost[i][j] = d_err / config.delay_gate + a_err / config.angle_gate;
        err[i][j] = {d_err, a_err};
      }
    }
  }

  std::vector<std::size_t> assign = hungarian(cost);
  std::vector<char> meas_used(nm, 0);
  for (std::size_t i = 0; i < np; ++i) {
    std::size_t j = assign[i];
    if (j < nm && cost[i][j] < kNoMatch) {
      double p_err = 10.0 * std::log10(predicted[i].power() / measured[j].power());
      out.pairs.push_back({i, j, err[i][j].first, err[i][j].second, p_err});
      out.total_cost += cost[i][j];
      meas_used[j] = 1;
    } else {
      out.unmatched_pred.push_back(i);
    }
  }
  for (std::size_t j = 0; j < nm; ++j)
    if (!meas_used[j]) out.unmatched_meas.push_back(j);
  return out;
}

}  // namespace mmtwin::metrics
