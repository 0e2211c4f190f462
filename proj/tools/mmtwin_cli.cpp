// mmtwin command-line front end: ingest, trace, predict, calibrate, dynamics,
// beamsweep, report. Every run writes a manifest with input digests and the
// seed; timings go to a separate file so outputs stay byte-reproducible.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mmtwin/beamsel.hpp"
#include "mmtwin/calibration.hpp"
#include "mmtwin/channel.hpp"
#include "mmtwin/dynamics.hpp"
#include "mmtwin/geometry.hpp"
#include "mmtwin/materials.hpp"
#include "mmtwin/metrics.hpp"
#include "mmtwin/semantics.hpp"
#include "mmtwin/snapshots.hpp"
#include "mmtwin/tracer.hpp"

namespace {

using nlohmann::json;
using namespace mmtwin;

constexpr const char* kVersion = "mmtwin 0.1.0";
constexpr double kDeg = channel::kPi / 180.0;

std::string fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open input for digest: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

struct RunContext {
  std::string command;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<std::pair<std::string, std::string>> inputs;  // flag -> path
  json config = json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void add_input(const std::string& flag, const std::string& path) {
    if (!path.empty()) inputs.emplace_back(flag, path);
  }

  std::string out_path(const std::string& name) const {
    return (std::filesystem::path(out_dir) / name).string();
  }

  void write_manifest() const {
    json m;
    m["command"] = command;
    m["tool_version"] = kVersion;
    m["seed"] = seed;
    m["threads"] = threads;
    m["config"] = config;
    m["inputs"] = json::object();
    for (const auto& [flag, path] : inputs)
      m["inputs"][flag] = {{"path", path}, {"fnv1a64", fnv1a64_file(path)}};
    std::ofstream out(out_path("manifest.json"));
    out << m.dump(2) << "\n";

    json t;
    t["wall_clock_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream tout(out_path("timings.json"));
    tout << t.dump(2) << "\n";
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output: " + path);
  out << text;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

Vec3 parse_vec3(const std::string& s) {
  Vec3 v;
  char c1 = 0, c2 = 0;
  std::istringstream ss(s);
  if (!(ss >> v.x >> c1 >> v.y >> c2 >> v.z) || c1 != ',' || c2 != ',')
    throw std::runtime_error("expected x,y,z triple, got: " + s);
  return v;
}

// --------------------------------------------------------------------------
// Material assignment bundle: per-region label, parameters and embedding,
// plus the read-out seed so embeddings stay interpretable across runs.
// --------------------------------------------------------------------------

struct AssignmentBundle {
  std::uint64_t readout_seed = 0;
  std::size_t latent_dim = 8;
  std::vector<std::string> labels;
  std::vector<mat::MaterialEmbedding> embeddings;

  mat::ReadoutWeights weights() const {
    return mat::ReadoutWeights::random_orthonormal(latent_dim, readout_seed);
  }
  std::vector<mat::MaterialParams> params() const {
    mat::ReadoutWeights w = weights();
    std::vector<mat::MaterialParams> out;
    for (const auto& e : embeddings) out.push_back(mat::params_from_embedding(e, w));
    return out;
  }
};

AssignmentBundle load_assignments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open assignments file: " + path);
  json j;
  in >> j;
  AssignmentBundle b;
  b.readout_seed = j.at("readout_seed").get<std::uint64_t>();
  b.latent_dim = j.at("latent_dim").get<std::size_t>();
  for (const auto& r : j.at("regions")) {
    b.labels.push_back(r.at("label").get<std::string>());
    b.embeddings.push_back({r.at("embedding").get<std::vector<double>>()});
  }
  return b;
}

void save_assignments(const std::string& path, const AssignmentBundle& b) {
  mat::ReadoutWeights w = b.weights();
  json j;
  j["readout_seed"] = b.readout_seed;
  j["latent_dim"] = b.latent_dim;
  j["regions"] = json::array();
  for (std::size_t r = 0; r < b.embeddings.size(); ++r) {
    mat::MaterialParams p = mat::params_from_embedding(b.embeddings[r], w);
    j["regions"].push_back({{"label", b.labels[r]},
                            {"sigma", p.sigma},
                            {"eps_r", p.eps_r},
                            {"scattering", p.scattering},
                            {"embedding", b.embeddings[r].v}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write assignments file: " + path);
  out << j.dump(2) << "\n";
}

AssignmentBundle assignments_for_scene(const geom::Scene& scene, const std::string& path,
                                       const std::string& materials_path, std::uint64_t seed) {
  if (!path.empty()) {
    AssignmentBundle b = load_assignments(path);
    if (b.embeddings.size() != static_cast<std::size_t>(scene.region_count()))
      throw std::runtime_error("assignments file covers " + std::to_string(b.embeddings.size()) +
                               " regions; scene has " + std::to_string(scene.region_count()));
    return b;
  }
  if (materials_path.empty())
    throw std::runtime_error("need --assignments or --materials to set region materials");
  // Fall back to matching region labels against the database.
  mat::MaterialDb db = mat::MaterialDb::load(materials_path);
  AssignmentBundle b;
  b.readout_seed = seed;
  mat::ReadoutWeights w = b.weights();
  for (int r = 0; r < scene.region_count(); ++r) {
    const std::string& label = scene.region_labels()[static_cast<std::size_t>(r)];
    const mat::RadioMaterial& m = db.contains(label) ? db.lookup(label) : db.entries().front();
    b.labels.push_back(m.label);
    b.embeddings.push_back(mat::embedding_from_params(m.sigma, m.eps_r, m.s_mid(), w));
  }
  return b;
}

// Pose list for predict/trace: either a snapshot file or {"poses":[...]}.
struct Pose {
  Vec3 tx, rx;
  double f_hz = 0.0;
};

std::vector<Pose> load_poses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pose/snapshot file: " + path);
  json j;
  in >> j;
  std::vector<Pose> out;
  const char* key = j.contains("poses") ? "poses" : "snapshots";
  for (const auto& e : j.at(key)) {
    Pose p;
    p.tx = {e.at("tx").at(0).get<double>(), e.at("tx").at(1).get<double>(),
            e.at("tx").at(2).get<double>()};
    p.rx = {e.at("rx").at(0).get<double>(), e.at("rx").at(1).get<double>(),
            e.at("rx").at(2).get<double>()};
    p.f_hz = e.at("f_hz").get<double>();
    out.push_back(p);
  }
  if (out.empty()) throw std::runtime_error("no poses in file: " + path);
  return out;
}

std::string metrics_csv_row(std::size_t index, const metrics::SnapshotMetrics& m) {
  std::string k = m.has_los ? fmt(m.k_factor_db) : "nan";
  return std::to_string(index) + "," + fmt(m.pathloss_db) + "," + fmt(m.rms_delay_spread * 1e9) +
         "," + fmt(m.aoa_azimuth_spread_deg()) + "," + k + "\n";
}

// --------------------------------------------------------------------------
// Subcommand bodies
// --------------------------------------------------------------------------

void cmd_ingest(RunContext& ctx, const std::string& scene_path, const std::string& semantics_path,
                const std::string& materials_path, const std::string& text_path) {
  geom::MeshLoadReport report;
  geom::Scene scene = geom::load_mesh(scene_path, &report);
  mat::MaterialDb db = mat::MaterialDb::load(materials_path);
  sem::TextEmbeddingSet text = sem::TextEmbeddingSet::load(text_path);
  std::vector<sem::SemanticPoint> points = sem::load_semantic_points(semantics_path);

  AssignmentBundle bundle;
  bundle.readout_seed = ctx.seed;
  mat::ReadoutWeights weights = bundle.weights();
  std::vector<std::string> warnings = report.warnings;
  std::vector<sem::RegionAssignment> assigned =
      sem::assign_regions(scene, points, text, db, weights, {}, &warnings);
  for (const sem::RegionAssignment& a : assigned) {
    bundle.labels.push_back(a.label);
    bundle.embeddings.push_back(a.embedding);
  }
  save_assignments(ctx.out_path("assignments.json"), bundle);

  std::string wtxt;
  for (const std::string& w : warnings) wtxt += w + "\n";
  write_text(ctx.out_path("ingest_warnings.txt"), wtxt);
}

void cmd_trace(RunContext& ctx, const std::string& scene_path, const std::string& assignments_path,
               const std::string& materials_path, const Vec3& tx, const Vec3& rx, double f_hz,
               const trace::TraceConfig& tcfg) {
  geom::Scene scene = geom::load_mesh(scene_path);
  AssignmentBundle bundle = assignments_for_scene(scene, assignments_path, materials_path, ctx.seed);
  std::vector<trace::PropagationPath> paths = trace::trace_paths(scene, tx, rx, tcfg);
  write_text(ctx.out_path("paths.txt"), trace::serialize_paths(paths));

  auto syn = channel::synthesize<double>(paths, tx, rx, bundle.params(), f_hz, 1.0);
  write_text(ctx.out_path("mpcs.csv"), snap::mpc_csv({syn.mpcs}));
}

void cmd_predict(RunContext& ctx, const std::string& scene_path,
                 const std::string& assignments_path, const std::string& materials_path,
                 const std::string& snapshots_path, const trace::TraceConfig& tcfg) {
  geom::Scene scene = geom::load_mesh(scene_path);
  AssignmentBundle bundle = assignments_for_scene(scene, assignments_path, materials_path, ctx.seed);
  std::vector<Pose> poses = load_poses(snapshots_path);
  std::vector<mat::MaterialParams> params = bundle.params();

  std::vector<snap::Snapshot> predicted;
  std::vector<std::vector<channel::MultipathComponent>> mpc_lists;
  std::string csv = "snapshot,pathloss_db,rms_delay_spread_ns,aoa_azimuth_spread_deg,k_factor_db\n";
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Pose& p = poses[i];
    std::vector<trace::PropagationPath> paths = trace::trace_paths(scene, p.tx, p.rx, tcfg);
    auto syn = channel::synthesize<double>(paths, p.tx, p.rx, params, p.f_hz, 1.0);
    snap::Snapshot s;
    s.tx = p.tx;
    s.rx = p.rx;
    s.f_hz = p.f_hz;
    s.mpcs = syn.mpcs;
    for (std::size_t k = 0; k < s.mpcs.size(); ++k)
      if (s.mpcs[k].kind == trace::PathKind::LoS) s.los_index = k;
    csv += metrics_csv_row(i, s.los_index ? metrics::snapshot_metrics(s.mpcs, s.los_index)
                                          : metrics::snapshot_metrics(s.mpcs));
    mpc_lists.push_back(s.mpcs);
    predicted.push_back(std::move(s));
  }
  snap::save_snapshots(ctx.out_path("predicted_snapshots.json"), predicted);
  write_text(ctx.out_path("metrics.csv"), csv);
  write_text(ctx.out_path("mpcs.csv"), snap::mpc_csv(mpc_lists));
}

void cmd_calibrate(RunContext& ctx, const std::string& scene_path,
                   const std::string& assignments_path, const std::string& materials_path,
                   const std::string& snapshots_path, const cal::CalibrationConfig& ccfg) {
  geom::Scene scene = geom::load_mesh(scene_path);
  AssignmentBundle bundle = assignments_for_scene(scene, assignments_path, materials_path, ctx.seed);
  std::vector<snap::Snapshot> snapshots = snap::load_snapshots(snapshots_path);

  cal::CalibrationResult result =
      cal::calibrate(scene, bundle.embeddings, bundle.weights(), snapshots, ccfg);

  bundle.embeddings = result.embeddings;
  save_assignments(ctx.out_path("assignments.json"), bundle);

  std::string loss_csv = "iteration,loss\n";
  for (std::size_t i = 0; i < result.loss_history.size(); ++i)
    loss_csv += std::to_string(i) + "," + fmt(result.loss_history[i]) + "\n";
  write_text(ctx.out_path("loss_history.csv"), loss_csv);

  std::string reg_csv =
      "region,label,path_touches,sigma_before,eps_r_before,s_before,sigma_after,eps_r_after,"
      "s_after,scale\n";
  for (std::size_t r = 0; r < result.regions.size(); ++r) {
    const cal::RegionReport& rr = result.regions[r];
    reg_csv += std::to_string(r) + "," + rr.label + "," + std::to_string(rr.path_touches) + "," +
               fmt(rr.before.sigma) + "," + fmt(rr.before.eps_r) + "," +
               fmt(rr.before.scattering) + "," + fmt(rr.after.sigma) + "," +
               fmt(rr.after.eps_r) + "," + fmt(rr.after.scattering) + "," + fmt(result.scale) +
               "\n";
  }
  write_text(ctx.out_path("regions.csv"), reg_csv);
}

void cmd_dynamics(RunContext& ctx, const std::string& scene_path,
                  const std::string& assignments_path, const std::string& materials_path,
                  const std::string& trajectory_path, const Vec3& tx, const Vec3& rx, double f_hz,
                  const std::string& proxy_label, const trace::TraceConfig& tcfg) {
  geom::Scene scene = geom::load_mesh(scene_path);
  AssignmentBundle bundle = assignments_for_scene(scene, assignments_path, materials_path, ctx.seed);
  std::vector<dyn::TrajectoryStep> traj = dyn::load_trajectory(trajectory_path);

  mat::MaterialParams proxy_params{0.8, 8.0, 0.3};  // fallback body-like defaults
  if (!materials_path.empty()) {
    mat::MaterialDb db = mat::MaterialDb::load(materials_path);
    if (db.contains(proxy_label)) {
      const mat::RadioMaterial& m = db.lookup(proxy_label);
      proxy_params = {m.sigma, m.eps_r, m.s_mid()};
    }
  }

  dyn::ProxyObject shape;
  shape.label = proxy_label;
  std::vector<dyn::SweepStep> sweep = dyn::shadow_loss_sweep(scene, tx, rx, traj, bundle.params(),
                                                             proxy_params, f_hz, shape, tcfg);
  std::string csv = "t_s,shadow_loss_db,retraced,path_count\n";
  for (const dyn::SweepStep& s : sweep)
    csv += fmt(s.t) + "," + fmt(s.shadow_loss_db) + "," + (s.retraced ? "1" : "0") + "," +
           std::to_string(s.path_count) + "\n";
  write_text(ctx.out_path("shadow_loss.csv"), csv);
}

void cmd_beamsweep(RunContext& ctx, const std::string& snapshots_path,
                   const std::string& codebook_path, const std::string& mcs_path,
                   bool power_sum) {
  std::vector<snap::Snapshot> snapshots = snap::load_snapshots(snapshots_path);
  beam::BeamCodebook cb =
      codebook_path.empty() ? beam::BeamCodebook::uniform() : beam::BeamCodebook::load(codebook_path);
  beam::LinkBudget budget = beam::LinkBudget::load(mcs_path);

  std::string csv = "snapshot,beam,snr_db,mcs,phy_rate_mbps,throughput_mbps\n";
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    beam::BeamChoice c = beam::select_beam(snapshots[i].mpcs, cb, budget, !power_sum);
    csv += std::to_string(i) + "," + std::to_string(c.beam) + "," + fmt(c.rate.snr_db) + "," +
           std::to_string(c.rate.mcs_index) + "," + fmt(c.rate.phy_rate_mbps) + "," +
           fmt(c.rate.throughput_mbps) + "\n";
  }
  write_text(ctx.out_path("beams.csv"), csv);
}

void cmd_report(RunContext& ctx, const std::string& pred_path, const std::string& meas_path) {
  std::vector<snap::Snapshot> pred = snap::load_snapshots(pred_path);
  std::vector<snap::Snapshot> meas = snap::load_snapshots(meas_path);
  if (pred.size() != meas.size())
    throw std::runtime_error("report: snapshot count mismatch between files");

  std::vector<double> pl_err, tau_err, as_err;
  std::string csv =
      "snapshot,pathloss_err_db,rms_delay_spread_err_ns,aoa_azimuth_spread_err_deg,matched,misses,"
      "false_alarms\n";
  for (std::size_t i = 0; i < pred.size(); ++i) {
    metrics::SnapshotMetrics mp = metrics::snapshot_metrics(pred[i].mpcs, pred[i].los_index);
    metrics::SnapshotMetrics mm = metrics::snapshot_metrics(meas[i].mpcs, meas[i].los_index);
    double e_pl = mp.pathloss_db - mm.pathloss_db;
    double e_tau = (mp.rms_delay_spread - mm.rms_delay_spread) * 1e9;
    double e_as = mp.aoa_azimuth_spread_deg() - mm.aoa_azimuth_spread_deg();
    metrics::ClusterMatchResult cm = metrics::cluster_match(pred[i].mpcs, meas[i].mpcs);
    csv += std::to_string(i) + "," + fmt(e_pl) + "," + fmt(e_tau) + "," + fmt(e_as) + "," +
           std::to_string(cm.pairs.size()) + "," + std::to_string(cm.unmatched_meas.size()) + "," +
           std::to_string(cm.unmatched_pred.size()) + "\n";
    pl_err.push_back(std::fabs(e_pl));
    tau_err.push_back(std::fabs(e_tau));
    as_err.push_back(std::fabs(e_as));
  }
  write_text(ctx.out_path("report.csv"), csv);

  auto cdf = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  pl_err = cdf(pl_err);
  tau_err = cdf(tau_err);
  as_err = cdf(as_err);
  std::string cdf_csv = "fraction,abs_pathloss_err_db,abs_rms_delay_spread_err_ns,abs_aoa_spread_err_deg\n";
  for (std::size_t i = 0; i < pl_err.size(); ++i) {
    double frac = (static_cast<double>(i) + 1.0) / static_cast<double>(pl_err.size());
    cdf_csv += fmt(frac) + "," + fmt(pl_err[i]) + "," + fmt(tau_err[i]) + "," + fmt(as_err[i]) + "\n";
  }
  write_text(ctx.out_path("error_cdf.csv"), cdf_csv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kVersion) + " — mmWave digital-twin channel predictor"};
  app.require_subcommand(1);
  app.fallthrough();  // let global flags appear after the subcommand

  std::string scene, materials, semantics, snapshots, config_path, out_dir = ".";
  std::string assignments, text_embeddings, trajectory, codebook, mcs, pred_file, meas_file;
  std::string tx_str = "0,0,1", rx_str = "1,0,1", proxy_label = "human body";
  std::uint64_t seed = 0;
  int threads = 1;
  double f_ghz = 60.5;
  bool power_sum = false;

  trace::TraceConfig tcfg;
  cal::CalibrationConfig ccfg;

  app.add_option("--seed", seed, "RNG seed");
  app.add_option("--threads", threads, "worker thread count");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--config", config_path, "JSON config file overriding tracer defaults");

  auto add_trace_flags = [&](CLI::App* c) {
    c->add_option("--rays", tcfg.n_rays, "ray budget");
    c->add_option("--max-depth", tcfg.max_depth, "maximum bounce depth");
    c->add_option("--keep-prob", tcfg.scatter_keep_prob, "scatter keep probability");
    c->add_option("--f-ghz", f_ghz, "carrier frequency, GHz");
  };

  CLI::App* ingest = app.add_subcommand("ingest", "assign materials from semantic priors");
  ingest->add_option("--scene", scene)->required();
  ingest->add_option("--semantics", semantics)->required();
  ingest->add_option("--materials", materials)->required();
  ingest->add_option("--text-embeddings", text_embeddings)->required();

  CLI::App* trace_cmd = app.add_subcommand("trace", "dump propagation paths for one link");
  trace_cmd->add_option("--scene", scene)->required();
  trace_cmd->add_option("--assignments", assignments);
  trace_cmd->add_option("--materials", materials);
  trace_cmd->add_option("--tx", tx_str)->required();
  trace_cmd->add_option("--rx", rx_str)->required();
  add_trace_flags(trace_cmd);

  CLI::App* predict = app.add_subcommand("predict", "predict snapshots for pose list");
  predict->add_option("--scene", scene)->required();
  predict->add_option("--assignments", assignments);
  predict->add_option("--materials", materials);
  predict->add_option("--snapshots", snapshots)->required();
  add_trace_flags(predict);

  CLI::App* calibrate = app.add_subcommand("calibrate", "fit materials to measured snapshots");
  calibrate->add_option("--scene", scene)->required();
  calibrate->add_option("--assignments", assignments);
  calibrate->add_option("--materials", materials);
  calibrate->add_option("--snapshots", snapshots)->required();
  calibrate->add_option("--iterations", ccfg.max_iterations);
  calibrate->add_option("--lr", ccfg.learning_rate);
  calibrate->add_option("--batch", ccfg.batch);
  calibrate->add_option("--retrace-period", ccfg.retrace_period);
  calibrate->add_option("--lambda-p", ccfg.lambda_p);
  calibrate->add_option("--lambda-tau", ccfg.lambda_tau);
  calibrate->add_flag("--plain-gd", ccfg.plain_gd, "plain gradient descent instead of Adam-style");

  CLI::App* dynamics = app.add_subcommand("dynamics", "shadow-loss sweep along a trajectory");
  dynamics->add_option("--scene", scene)->required();
  dynamics->add_option("--assignments", assignments);
  dynamics->add_option("--materials", materials);
  dynamics->add_option("--trajectory", trajectory)->required();
  dynamics->add_option("--tx", tx_str)->required();
  dynamics->add_option("--rx", rx_str)->required();
  dynamics->add_option("--proxy-material", proxy_label);
  add_trace_flags(dynamics);

  CLI::App* beamsweep = app.add_subcommand("beamsweep", "select best beam per snapshot");
  beamsweep->add_option("--snapshots", snapshots)->required();
  beamsweep->add_option("--codebook", codebook);
  beamsweep->add_option("--mcs", mcs)->required();
  beamsweep->add_flag("--power-sum", power_sum, "phaseless power-sum combining");

  CLI::App* report = app.add_subcommand("report", "error tables for predicted vs measured");
  report->add_option("--pred", pred_file)->required();
  report->add_option("--meas", meas_file)->required();

  CLI11_PARSE(app, argc, argv);

  RunContext ctx;
  ctx.seed = seed;
  ctx.threads = threads;
  ctx.out_dir = out_dir;

  try {
    std::filesystem::create_directories(out_dir);

    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot open config file: " + config_path);
      json j;
      in >> j;
      tcfg.n_rays = j.value("rays", tcfg.n_rays);
      tcfg.max_depth = j.value("max_depth", tcfg.max_depth);
      tcfg.scatter_keep_prob = j.value("keep_prob", tcfg.scatter_keep_prob);
      tcfg.rx_capture_radius = j.value("rx_capture_radius", tcfg.rx_capture_radius);
      f_ghz = j.value("f_ghz", f_ghz);
      ccfg.sample_rate = j.value("sample_rate", ccfg.sample_rate);
      ccfg.n_taps = j.value("n_taps", ccfg.n_taps);
    }
    tcfg.rng_seed = seed;
    tcfg.threads = threads;
    ccfg.trace = tcfg;
    double f_hz = f_ghz * 1e9;

    ctx.config = {{"rays", tcfg.n_rays},
                  {"max_depth", tcfg.max_depth},
                  {"keep_prob", tcfg.scatter_keep_prob},
                  {"f_ghz", f_ghz}};

    if (ingest->parsed()) {
      ctx.command = "ingest";
      ctx.add_input("--scene", scene);
      ctx.add_input("--semantics", semantics);
      ctx.add_input("--materials", materials);
      ctx.add_input("--text-embeddings", text_embeddings);
      cmd_ingest(ctx, scene, semantics, materials, text_embeddings);
    } else if (trace_cmd->parsed()) {
      ctx.command = "trace";
      ctx.add_input("--scene", scene);
      ctx.add_input("--assignments", assignments);
      ctx.add_input("--materials", materials);
      ctx.config["tx"] = tx_str;
      ctx.config["rx"] = rx_str;
      cmd_trace(ctx, scene, assignments, materials, parse_vec3(tx_str), parse_vec3(rx_str), f_hz,
                tcfg);
    } else if (predict->parsed()) {
      ctx.command = "predict";
      ctx.add_input("--scene", scene);
      ctx.add_input("--assignments", assignments);
      ctx.add_input("--materials", materials);
      ctx.add_input("--snapshots", snapshots);
      cmd_predict(ctx, scene, assignments, materials, snapshots, tcfg);
    } else if (calibrate->parsed()) {
      ctx.command = "calibrate";
      ctx.add_input("--scene", scene);
      ctx.add_input("--assignments", assignments);
      ctx.add_input("--materials", materials);
      ctx.add_input("--snapshots", snapshots);
      ctx.config["iterations"] = ccfg.max_iterations;
      ctx.config["lr"] = ccfg.learning_rate;
      cmd_calibrate(ctx, scene, assignments, materials, snapshots, ccfg);
    } else if (dynamics->parsed()) {
      ctx.command = "dynamics";
      ctx.add_input("--scene", scene);
      ctx.add_input("--assignments", assignments);
      ctx.add_input("--materials", materials);
      ctx.add_input("--trajectory", trajectory);
      cmd_dynamics(ctx, scene, assignments, materials, trajectory, parse_vec3(tx_str),
                   parse_vec3(rx_str), f_hz, proxy_label, tcfg);
    } else if (beamsweep->parsed()) {
      ctx.command = "beamsweep";
      ctx.add_input("--snapshots", snapshots);
      ctx.add_input("--codebook", codebook);
      ctx.add_input("--mcs", mcs);
      cmd_beamsweep(ctx, snapshots, codebook, mcs, power_sum);
    } else if (report->parsed()) {
      ctx.command = "report";
      ctx.add_input("--pred", pred_file);
      ctx.add_input("--meas", meas_file);
      cmd_report(ctx, pred_file, meas_file);
    }

    ctx.write_manifest();
  } catch (const std::exception& e) {
    json err;
    err["command"] = ctx.command.empty() ? "unknown" : ctx.command;
    err["error"] = e.what();
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    std::ofstream out((std::filesystem::path(out_dir) / "error.json").string());
    if (out) out << err.dump(2) << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
