#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mmtwin/channel.hpp"
#include "mmtwin/vec3.hpp"

namespace mmtwin::snap {

/// One channel measurement (or prediction) at a fixed TX-RX configuration.
struct Snapshot {
  Vec3 tx, rx;
  double f_hz = 0.0;
  std::vector<channel::MultipathComponent> mpcs;
  std::optional<std::size_t> los_index;  // which MPC is the LoS component, if tagged

  void validate() const;  // f > 0, at least one MPC, los_index in range
};

/// Snapshot list JSON. Angles are degrees and delays nanoseconds on disk;
/// amplitudes are either explicit complex parts ("amp_re"/"amp_im") or
/// "pathloss_db" (+ optional "phase_deg").
std::vector<Snapshot> load_snapshots(const std::string& path);
void save_snapshots(const std::string& path, const std::vector<Snapshot>& snapshots);

/// CSV table of an MPC list, header row included. Columns: snapshot, delay_ns,
/// aod_az_deg, aod_el_deg, aoa_az_deg, aoa_el_deg, pathloss_db, phase_deg, kind.
std::string mpc_csv(const std::vector<std::vector<channel::MultipathComponent>>& per_snapshot);

}  // namespace mmtwin::snap
