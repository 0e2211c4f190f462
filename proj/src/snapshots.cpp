#include "mmtwin/snapshots.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace mmtwin::snap {

namespace {

constexpr double kDeg = channel::kPi / 180.0;

trace::PathKind kind_from_string(const std::string& s) {
  if (s == "los") return trace::PathKind::LoS;
  if (s == "specular") return trace::PathKind::Specular;
  if (s == "scattered") return trace::PathKind::Scattered;
  throw std::runtime_error("unknown MPC kind: " + s);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

void Snapshot::validate() const {
  if (f_hz <= 0.0) throw std::runtime_error("snapshot: carrier frequency must be > 0");
  if (mpcs.empty()) throw std::runtime_error("snapshot: needs at least one MPC");
  if (los_index && *los_index >= mpcs.size())
    throw std::runtime_error("snapshot: los_index out of range");
}

std::vector<Snapshot> load_snapshots(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open snapshot file: " + path);
  nlohmann::json j;
  in >> j;

  std::vector<Snapshot> out;
  for (const auto& js : j.at("snapshots")) {
    Snapshot s;
    auto tx = js.at("tx");
    auto rx = js.at("rx");
    s.tx = {tx.at(0).get<double>(), tx.at(1).get<double>(), tx.at(2).get<double>()};
    s.rx = {rx.at(0).get<double>(), rx.at(1).get<double>(), rx.at(2).get<double>()};
    s.f_hz = js.at("f_hz").get<double>();
    if (js.contains("los_index")) s.los_index = js.at("los_index").get<std::size_t>();
    for (const auto& jm : js.at("mpcs")) {
      channel::MultipathComponent m;
      m.delay = jm.at("delay_ns").get<double>() * 1e-9;
      m.aod_az = jm.at("aod_az_deg").get<double>() * kDeg;
      m.aod_el = jm.at("aod_el_deg").get<double>() * kDeg;
      m.aoa_az = jm.at("aoa_az_deg").get<double>() * kDeg;
      m.aoa_el = jm.at("aoa_el_deg").get<double>() * kDeg;
      if (jm.contains("amp_re")) {
        m.amplitude = {jm.at("amp_re").get<double>(), jm.at("amp_im").get<double>()};
      } else {
        double mag = std::pow(10.0, -jm.at("pathloss_db").get<double>() / 20.0);
        double phase = jm.contains("phase_deg") ? jm.at("phase_deg").get<double>() * kDeg : 0.0;
        m.amplitude = expj(phase) * mag;
      }
      m.kind = kind_from_string(jm.value("kind", "specular"));
      s.mpcs.push_back(m);
    }
    s.validate();
    out.push_back(std::move(s));
  }
  if (out.empty()) throw std::runtime_error("snapshot file contains no snapshots: " + path);
  return out;
}

void save_snapshots(const std::string& path, const std::vector<Snapshot>& snapshots) {
  nlohmann::json j;
  j["snapshots"] = nlohmann::json::array();
  for (const Snapshot& s : snapshots) {
    nlohmann::json js;
    js["tx"] = {s.tx.x, s.tx.y, s.tx.z};
    js["rx"] = {s.rx.x, s.rx.y, s.rx.z};
    js["f_hz"] = s.f_hz;
    if (s.los_index) js["los_index"] = *s.los_index;
    js["mpcs"] = nlohmann::json::array();
    for (const channel::MultipathComponent& m : s.mpcs) {
      nlohmann::json jm;
      jm["delay_ns"] = m.delay * 1e9;
      jm["aod_az_deg"] = m.aod_az / kDeg;
      jm["aod_el_deg"] = m.aod_el / kDeg;
      jm["aoa_az_deg"] = m.aoa_az / kDeg;
      jm["aoa_el_deg"] = m.aoa_el / kDeg;
      jm["amp_re"] = m.amplitude.re;
      jm["amp_im"] = m.amplitude.im;
      jm["kind"] = trace::to_string(m.kind);
      js["mpcs"].push_back(std::move(jm));
    }
    j["snapshots"].push_back(std::move(js));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write snapshot file: " + path);
  out << j.dump(2) << "\n";
}

std::string mpc_csv(const std::vector<std::vector<channel::MultipathComponent>>& per_snapshot) {
  std::string csv =
      "snapshot,delay_ns,aod_az_deg,aod_el_deg,aoa_az_deg,aoa_el_deg,pathloss_db,phase_deg,kind\n";
  for (std::size_t s = 0; s < per_snapshot.size(); ++s) {
    for (const channel::MultipathComponent& m : per_snapshot[s]) {
      double mag = abs(m.amplitude);
      double pl = mag > 0.0 ? -20.0 * std::log10(mag) : std::numeric_limits<double>::infinity();
      double phase = std::atan2(m.amplitude.im, m.amplitude.re);
      csv += std::to_string(s) + "," + fmt(m.delay * 1e9) + "," + fmt(m.aod_az / kDeg) + "," +
             fmt(m.aod_el / kDeg) + "," + fmt(m.aoa_az / kDeg) + "," + fmt(m.aoa_el / kDeg) + "," +
             fmt(pl) + "," + fmt(phase / kDeg) + "," + trace::to_string(m.kind) + "\n";
    }
  }
  return csv;
}

}  // namespace mmtwin::snap
