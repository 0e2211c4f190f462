#include "mmtwin/beamsel.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace mmtwin::beam {

namespace {
constexpr double kPi = channel::kPi;

double wrap_pi(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0.0) a += 2.0 * kPi;
  return a - kPi;
}
}  // namespace

BeamCodebook BeamCodebook::uniform(std::size_t n_beams, double g_max_dbi, double g_min_dbi,
                                   double beamwidth_deg) {
  BeamCodebook cb;
  cb.g_max_dbi = g_max_dbi;
  cb.g_min_dbi = g_min_dbi;
  cb.beamwidth = beamwidth_deg * kPi / 180.0;
  for (std::size_t i = 0; i < n_beams; ++i) {
    // Evenly spaced boresights wrapped into (-pi, pi].
    double az = 2.0 * kPi * (static_cast<double>(i) + 0.5) / static_cast<double>(n_beams) - kPi;
    cb.boresights.push_back(az);
  }
  cb.validate();
  return cb;
}

BeamCodebook BeamCodebook::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open codebook file: " + path);
  nlohmann::json j;
  in >> j;
  BeamCodebook cb;
  cb.g_max_dbi = j.at("g_max_dbi").get<double>();
  cb.g_min_dbi = j.at("g_min_dbi").get<double>();
  cb.beamwidth = j.at("beamwidth_deg").get<double>() * kPi / 180.0;
  for (const auto& b : j.at("beams"))
    cb.boresights.push_back(b.at("boresight_az_deg").get<double>() * kPi / 180.0);
  cb.validate();
  return cb;
}

void BeamCodebook::validate() const {
  if (boresights.empty()) throw std::runtime_error("codebook: no beams");
  if (g_max_dbi <= g_min_dbi) throw std::runtime_error("codebook: G_max must exceed G_min");
  if (beamwidth <= 0.0) throw std::runtime_error("codebook: beamwidth must be positive");
  for (double b : boresights)
    if (b <= -kPi - 1e-12 || b > kPi + 1e-12)
      throw std::runtime_error("codebook: boresight outside (-pi, pi]");
}

double BeamCodebook::gain_dbi(double delta_az) const {
  return std::fabs(wrap_pi(delta_az)) <= 0.5 * beamwidth ? g_max_dbi : g_min_dbi;
}

LinkBudget LinkBudget::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open link budget file: " + path);
  nlohmann::json j;
  in >> j;
  LinkBudget lb;
  lb.tx_power_dbm = j.value("tx_power_dbm", lb.tx_power_dbm);
  lb.bandwidth_hz = j.value("bandwidth_hz", lb.bandwidth_hz);
  lb.noise_figure_db = j.value("noise_figure_db", lb.noise_figure_db);
  lb.mac_efficiency = j.value("mac_efficiency", lb.mac_efficiency);
  for (const auto& m : j.at("mcs")) {
    lb.mcs_table.push_back({m.at("index").get<int>(), m.at("snr_db").get<double>(),
                            m.at("rate_mbps").get<double>()});
  }
  lb.validate();
  return lb;
}

void LinkBudget::validate() const {
  if (bandwidth_hz <= 0.0) throw std::runtime_error("link budget: bandwidth must be positive");
  if (mac_efficiency <= 0.0 || mac_efficiency > 1.0)
    throw std::runtime_error("link budget: MAC efficiency must be in (0, 1]");
  if (mcs_table.empty()) throw std::runtime_error("link budget: empty MCS table");
  for (std::size_t i = 1; i < mcs_table.size(); ++i) {
    if (mcs_table[i].snr_threshold_db <= mcs_table[i - 1].snr_threshold_db ||
        mcs_table[i].phy_rate_mbps <= mcs_table[i - 1].phy_rate_mbps)
      throw std::runtime_error("link budget: MCS thresholds must increase strictly with rate");
  }
}

double LinkBudget::noise_dbm() const {
  return -174.0 + 10.0 * std::log10(bandwidth_hz) + noise_figure_db;
}

double effective_gain(const std::vector<channel::MultipathComponent>& mpcs,
                      const BeamCodebook& codebook, std::size_t beam_index, bool coherent) {
  if (beam_index >= codebook.boresights.size())
    throw std::runtime_error("effective_gain: beam index out of range");
  double boresight = codebook.boresights[beam_index];
  if (coherent) {
    Cpx<double> acc{0.0, 0.0};
    for (const channel::MultipathComponent& m : mpcs) {
      double g = std::pow(10.0, codebook.gain_dbi(m.aoa_az - boresight) / 10.0);
      acc += m.amplitude * std::sqrt(g);
    }
    return abs_sq(acc);
  }
  double acc = 0.0;
  for (const channel::MultipathComponent& m : mpcs) {
    double g = std::pow(10.0, codebook.gain_dbi(m.aoa_az - boresight) / 10.0);
    acc += m.power() * g;
  }
  return acc;
}

RateResult snr_and_rate(double gain_linear, const LinkBudget& budget) {
  budget.validate();
  RateResult out;
  if (gain_linear <= 0.0) {
    out.snr_db = -std::numeric_limits<double>::infinity();
    return out;
  }
  double p_rx_dbm = budget.tx_power_dbm + 10.0 * std::log10(gain_linear);
  out.snr_db = p_rx_dbm - budget.noise_dbm();
  for (const McsEntry& m : budget.mcs_table) {
    if (m.snr_threshold_db <= out.snr_db) {
      out.mcs_index = m.index;
      out.phy_rate_mbps = m.phy_rate_mbps;
    }
  }
  out.throughput_mbps = out.phy_rate_mbps * budget.mac_efficiency;
  return out;
}

BeamChoice select_beam(const std::vector<channel::MultipathComponent>& mpcs,
                       const BeamCodebook& codebook, const LinkBudget& budget, bool coherent) {
  codebook.validate();
  BeamChoice best;
  bool have = false;
  for (std::size_t b = 0; b < codebook.boresights.size(); ++b) {
    double g = effective_gain(mpcs, codebook, b, coherent);
    RateResult r = snr_and_rate(g, budget);
    bool better = !have || r.throughput_mbps > best.rate.throughput_mbps ||
                  (r.throughput_mbps == best.rate.throughput_mbps && r.snr_db > best.rate.snr_db);
    if (better) {
      best = {b, r, g};
      have = true;
    }
  }
  return best;
}

}  // namespace mmtwin::beam
