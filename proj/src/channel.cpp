#include "mmtwin/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace mmtwin::channel {

FresnelCoeffs<double> fresnel(double theta_i, const Cpx<double>& eta) {
  if (theta_i < 0.0 || theta_i > kPi / 2.0 + 1e-12)
    throw std::runtime_error("fresnel: incidence angle outside [0, pi/2]");
  if (theta_i >= kPi / 2.0 - 1e-15) {
    // Grazing limit: both coefficients tend to -1.
    return {{-1.0, 0.0}, {-1.0, 0.0}};
  }
  return fresnel_from_cos(std::cos(theta_i), eta);
}

double lambertian_bsdf(const Vec3& incident, const Vec3& scattered, const Vec3& normal) {
  (void)incident;  // Lambertian lobe is independent of the incoming direction
  double c = dot(normalize(scattered), normalize(normal));
  return c > 0.0 ? c / kPi : 0.0;
}

ScaleState calibrate_scale(const std::vector<MultipathComponent>& predicted_los,
                           const std::vector<MultipathComponent>& measured_los,
                           ScaleState state) {
  if (predicted_los.empty() || measured_los.empty())
    throw std::runtime_error("calibrate_scale: needs at least one matched LoS pair");
  double p_pred = 0.0, p_meas = 0.0;
  for (const MultipathComponent& m : predicted_los) p_pred += m.power();
  for (const MultipathComponent& m : measured_los) p_meas += m.power();
  p_pred /= static_cast<double>(predicted_los.size());
  p_meas /= static_cast<double>(measured_los.size());
  if (p_pred <= 0.0) throw std::runtime_error("calibrate_scale: zero predicted LoS power");
  double target = std::sqrt(p_meas / p_pred);
  state.s = state.beta * state.s + (1.0 - state.beta) * target;
  return state;
}

}  // namespace mmtwin::channel
