#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anc/algorithms.hpp"
#include "anc/metrics.hpp"
#include "anc/params.hpp"
#include "anc/scene.hpp"

namespace anc {

struct AlgorithmSpec {
  Algorithm algorithm = Algorithm::two_point_fxlms;
  HyperParams params;
  std::string label;  // output subdirectory; defaults to the algorithm name
};

struct ExperimentConfig {
  SceneConfig scene;
  std::optional<SyntheticRoomSpec> room;  // exactly one of room / ir_manifest
  std::string ir_manifest;
  std::vector<AlgorithmSpec> algorithms;
  std::string output_dir = "out";
  std::vector<std::uint64_t> seeds;
  double convergence_window_s = 0.25;
  long psd_segment = 1024;
  double psd_overlap = 0.5;

  void validate() const {
    scene.validate();
    if (room.has_value() == !ir_manifest.empty())
      throw ValidationError(
          "config must provide exactly one of \"room\" and \"ir_manifest\"");
    if (room) room->validate();
    if (algorithms.empty())
      throw ValidationError("config lists no algorithms");
    std::set<std::string> labels;
    for (const auto& a : algorithms) {
      a.params.validate();
      if (a.label.empty())
        throw ValidationError("algorithm label must not be empty");
      if (!labels.insert(a.label).second)
        throw ValidationError("duplicate algorithm label: " + a.label);
    }
    if (seeds.empty()) throw ValidationError("config lists no seeds");
    if (output_dir.empty()) throw ValidationError("output_dir must not be empty");
    if (!(convergence_window_s > 0))
      throw ValidationError("convergence_window_s must be > 0");
    if (psd_segment < 2 || psd_segment % 2 != 0)
      throw ValidationError("psd_segment must be even and >= 2");
    if (!(psd_overlap >= 0.0 && psd_overlap < 1.0))
      throw ValidationError("psd_overlap must be in [0, 1)");
    const SampleRange ss = steady_state_range(scene.n_samples());
    if (ss.end - ss.begin < psd_segment)
      throw ValidationError(
          "psd_segment longer than the steady-state window; shorten the "
          "segment or lengthen the run");
  }
};

// ----- JSON parsing -----

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j,
                                           const char* key, const char* ctx) {
  auto it = j.find(key);
  if (it == j.end())
    throw ValidationError(std::string(ctx) + ": missing field \"" + key + "\"");
  return *it;
}

template <typename T>
T json_as(const nlohmann::json& j, const char* key, const char* ctx) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string(ctx) + ": field \"" + key +
                          "\" has the wrong type");
  }
}

template <typename T>
void assign_if(const nlohmann::json& j, const char* key, T& out,
               const char* ctx) {
  auto it = j.find(key);
  if (it != j.end()) out = json_as<T>(*it, key, ctx);
}

inline Eigen::Vector3d parse_vec3(const nlohmann::json& j, const char* ctx) {
  if (!j.is_array() || j.size() != 3)
    throw ValidationError(std::string(ctx) + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline std::vector<Eigen::Vector3d> parse_vec3_list(const nlohmann::json& j,
                                                    const char* ctx) {
  if (!j.is_array())
    throw ValidationError(std::string(ctx) + ": expected a list of [x, y, z]");
  std::vector<Eigen::Vector3d> out;
  out.reserve(j.size());
  for (const auto& p : j) out.push_back(parse_vec3(p, ctx));
  return out;
}

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

inline NoiseSpec parse_noise_spec(const nlohmann::json& j) {
  NoiseSpec spec;
  const std::string kind =
      detail::json_as<std::string>(detail::require_field(j, "kind", "noise"),
                                   "kind", "noise");
  if (kind == "gaussian_white") {
    spec.kind = NoiseSpec::Kind::gaussian_white;
    detail::assign_if(j, "variance", spec.variance, "noise");
  } else if (kind == "file") {
    spec.kind = NoiseSpec::Kind::file;
    spec.path = detail::json_as<std::string>(
        detail::require_field(j, "path", "noise"), "path", "noise");
  } else {
    throw ValidationError("noise: unknown kind \"" + kind + "\"");
  }
  return spec;
}

inline SceneConfig parse_scene_config(const nlohmann::json& j) {
  SceneConfig cfg;
  detail::assign_if(j, "sample_rate_hz", cfg.sample_rate_hz, "scene");
  detail::assign_if(j, "n_speakers", cfg.n_speakers, "scene");
  detail::assign_if(j, "n_refs", cfg.n_refs, "scene");
  detail::assign_if(j, "n_primary_mics", cfg.n_primary_mics, "scene");
  detail::assign_if(j, "n_secondary_mics", cfg.n_secondary_mics, "scene");
  detail::assign_if(j, "filter_taps", cfg.filter_taps, "scene");
  detail::assign_if(j, "duration_s", cfg.duration_s, "scene");
  detail::assign_if(j, "seed", cfg.seed, "scene");
  if (auto it = j.find("noise"); it != j.end())
    cfg.noise = parse_noise_spec(*it);
  return cfg;
}

inline SyntheticRoomSpec parse_room_spec(const nlohmann::json& j) {
  SyntheticRoomSpec spec;
  if (auto it = j.find("room_m"); it != j.end())
    spec.room_m = detail::parse_vec3(*it, "room.room_m");
  if (auto it = j.find("source_m"); it != j.end())
    spec.source_m = detail::parse_vec3(*it, "room.source_m");
  spec.speakers_m = detail::parse_vec3_list(
      detail::require_field(j, "speakers_m", "room"), "room.speakers_m");
  spec.primary_mics_m = detail::parse_vec3_list(
      detail::require_field(j, "primary_mics_m", "room"),
      "room.primary_mics_m");
  spec.secondary_mics_m = detail::parse_vec3_list(
      detail::require_field(j, "secondary_mics_m", "room"),
      "room.secondary_mics_m");
  if (auto it = j.find("reference_mics_m"); it != j.end())
    spec.reference_mics_m =
        detail::parse_vec3_list(*it, "room.reference_mics_m");
  detail::assign_if(j, "rt60_s", spec.rt60_s, "room");
  detail::assign_if(j, "speed_of_sound_mps", spec.speed_of_sound_mps, "room");
  detail::assign_if(j, "ir_taps", spec.ir_taps, "room");
  detail::assign_if(j, "reflections_per_s", spec.reflections_per_s, "room");
  detail::assign_if(j, "seed", spec.seed, "room");
  return spec;
}

inline HyperParams parse_hyper_params(const nlohmann::json& j) {
  HyperParams p;
  detail::assign_if(j, "alpha", p.alpha, "algorithm");
  detail::assign_if(j, "epsilon", p.epsilon, "algorithm");
  detail::assign_if(j, "mu", p.mu, "algorithm");
  detail::assign_if(j, "normalized", p.normalized, "algorithm");
  detail::assign_if(j, "norm_floor", p.norm_floor, "algorithm");
  if (auto it = j.find("delta"); it != j.end()) {
    if (it->is_null())
      p.delta.reset();
    else
      p.delta = detail::json_as<double>(*it, "delta", "algorithm");
  }
  return p;
}

inline AlgorithmSpec parse_algorithm_spec(const nlohmann::json& j) {
  AlgorithmSpec spec;
  const std::string name = detail::json_as<std::string>(
      detail::require_field(j, "name", "algorithm"), "name", "algorithm");
  spec.algorithm = algorithm_from_name(name);
  spec.params = parse_hyper_params(j);
  spec.label = name;
  detail::assign_if(j, "label", spec.label, "algorithm");
  return spec;
}

// base_dir resolves relative paths in the config (IR manifest, noise file,
// output directory) against the config file's own location.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                                const std::string& base_dir) {
  namespace fs = std::filesystem;
  const auto resolve = [&](const std::string& p) -> std::string {
    if (p.empty() || base_dir.empty() || fs::path(p).is_absolute()) return p;
    return (fs::path(base_dir) / p).lexically_normal().string();
  };

  ExperimentConfig cfg;
  cfg.scene = parse_scene_config(detail::require_field(j, "scene", "config"));
  cfg.scene.noise.path = resolve(cfg.scene.noise.path);
  if (auto it = j.find("room"); it != j.end())
    cfg.room = parse_room_spec(*it);
  if (auto it = j.find("ir_manifest"); it != j.end())
    cfg.ir_manifest =
        resolve(detail::json_as<std::string>(*it, "ir_manifest", "config"));
  const auto& algos = detail::require_field(j, "algorithms", "config");
  if (!algos.is_array())
    throw ValidationError("config: \"algorithms\" must be a list");
  for (const auto& a : algos) cfg.algorithms.push_back(parse_algorithm_spec(a));
  if (auto it = j.find("outputs"); it != j.end())
    cfg.output_dir =
        resolve(detail::json_as<std::string>(*it, "outputs", "config"));
  if (auto it = j.find("seeds"); it != j.end())
    cfg.seeds =
        detail::json_as<std::vector<std::uint64_t>>(*it, "seeds", "config");
  if (cfg.seeds.empty()) cfg.seeds = {cfg.scene.seed};
  detail::assign_if(j, "convergence_window_s", cfg.convergence_window_s,
                    "config");
  detail::assign_if(j, "psd_segment", cfg.psd_segment, "config");
  detail::assign_if(j, "psd_overlap", cfg.psd_overlap, "config");
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_experiment_config(
      doc, std::filesystem::path(path).parent_path().string());
}

// ----- IR resolution -----

struct ResolvedScene {
  ImpulseResponseSet irs;
  std::optional<ScenePositions> positions;
};

inline ResolvedScene resolve_scene(const ExperimentConfig& cfg) {
  ResolvedScene out;
  if (cfg.room) {
    out.irs = generate_synthetic_irs(*cfg.room, cfg.scene);
    out.positions =
        ScenePositions{cfg.room->primary_mics_m, cfg.room->secondary_mics_m};
  } else {
    out.irs = load_ir_set(cfg.ir_manifest);
    out.positions = load_ir_positions(cfg.ir_manifest);
  }
  out.irs.validate_against(cfg.scene);
  return out;
}

// ----- snapshot statistics for batch comparisons -----

struct SnapshotStack {
  MatrixXd x_e, x_z;
  VectorXd d_e, d_z;
};

// Stacks recorded snapshots row-wise so the batch solver can treat them as
// one least-squares system over the collection period.
inline SnapshotStack stack_snapshots(const std::vector<SnapshotRecord>& snaps) {
  if (snaps.empty()) throw ValidationError("no snapshots to stack");
  const Eigen::Index L = snaps.front().snap.x_e.cols();
  const Eigen::Index n_e = snaps.front().snap.x_e.rows();
  const Eigen::Index n_z = snaps.front().snap.x_z.rows();
  const Eigen::Index T = static_cast<Eigen::Index>(snaps.size());
  SnapshotStack st;
  st.x_e.resize(T * n_e, L);
  st.x_z.resize(T * n_z, L);
  st.d_e.resize(T * n_e);
  st.d_z.resize(T * n_z);
  for (Eigen::Index i = 0; i < T; ++i) {
    const SnapshotRecord& r = snaps[static_cast<size_t>(i)];
    if (r.snap.x_e.rows() != n_e || r.snap.x_z.rows() != n_z ||
        r.snap.x_e.cols() != L || r.d_e.size() != n_e || r.d_z.size() != n_z)
      throw ValidationError("snapshot shapes are inconsistent");
    st.x_e.middleRows(i * n_e, n_e) = r.snap.x_e;
    st.x_z.middleRows(i * n_z, n_z) = r.snap.x_z;
    st.d_e.segment(i * n_e, n_e) = r.d_e;
    st.d_z.segment(i * n_z, n_z) = r.d_z;
  }
  return st;
}

// ----- exports -----

namespace detail {

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << body;
  if (!out) throw IoError("write failed: " + path);
}

inline VectorXd row_vector(const RowMatrixXd& m, int row) {
  return m.row(row).transpose();
}

}  // namespace detail

inline void write_convergence_csv(const std::string& path,
                                  const ExperimentResult& result,
                                  long window_samples) {
  std::string body = "t_seconds,mic_id,nr_db\n";
  const double fs = result.sample_rate_hz;
  const auto emit = [&](const RowMatrixXd& ctrl, const RowMatrixXd& base,
                        char prefix) {
    for (int m = 0; m < ctrl.rows(); ++m) {
      const VectorXd c = detail::row_vector(ctrl, m);
      const VectorXd b = detail::row_vector(base, m);
      for (const CurvePoint& p : convergence_curve(c, b, window_samples))
        body += detail::fmt_num(p.t_end / fs) + "," + prefix +
                std::to_string(m) + "," + detail::fmt_num(p.nr_db) + "\n";
    }
  };
  emit(result.e, result.d_e, 'e');
  emit(result.z, result.d_z, 'z');
  detail::write_text_file(path, body);
}

inline void write_psd_csv(const std::string& path,
                          const ExperimentResult& result, long segment,
                          double overlap) {
  const SampleRange ss = steady_state_range(result.n_samples());
  const long len = ss.end - ss.begin;
  std::string body = "freq_hz,mic_id,psd_db\n";
  const auto emit = [&](const RowMatrixXd& series, char prefix,
                        const char* suffix) {
    for (int m = 0; m < series.rows(); ++m) {
      const VectorXd seg = series.row(m).segment(ss.begin, len).transpose();
      const PsdEstimate psd =
          welch_psd(seg, result.sample_rate_hz, segment, overlap);
      const std::string mic = prefix + std::to_string(m) + suffix;
      for (Eigen::Index k = 0; k < psd.freq_hz.size(); ++k)
        body += detail::fmt_num(psd.freq_hz[k]) + "," + mic + "," +
                detail::fmt_num(psd.psd_db[k]) + "\n";
    }
  };
  emit(result.e, 'e', "");
  emit(result.z, 'z', "");
  emit(result.d_e, 'e', "_noise");
  emit(result.d_z, 'z', "_noise");
  detail::write_text_file(path, body);
}

inline void write_heatmap_csv(const std::string& path,
                              const ScenePositions& positions,
                              const std::vector<double>& primary_nr_db,
                              const std::vector<double>& secondary_nr_db) {
  std::vector<Eigen::Vector3d> pts = positions.primary_mics_m;
  pts.insert(pts.end(), positions.secondary_mics_m.begin(),
             positions.secondary_mics_m.end());
  std::vector<std::string> roles(positions.primary_mics_m.size(), "primary");
  roles.insert(roles.end(), positions.secondary_mics_m.size(), "secondary");
  std::vector<double> nr = primary_nr_db;
  nr.insert(nr.end(), secondary_nr_db.begin(), secondary_nr_db.end());
  std::string body = "x_m,y_m,z_m,mic_role,nr_db\n";
  for (const HeatmapRow& row : heatmap_table(pts, roles, nr))
    body += detail::fmt_num(row.position_m.x()) + "," +
            detail::fmt_num(row.position_m.y()) + "," +
            detail::fmt_num(row.position_m.z()) + "," + row.mic_role + "," +
            detail::fmt_num(row.nr_db) + "\n";
  detail::write_text_file(path, body);
}

// ----- experiment driver -----

struct RunRecord {
  AlgorithmSpec spec;
  std::uint64_t seed = 0;
  bool diverged = false;
  long divergence_step = 0;
  double last_finite_norm = 0.0;
  std::vector<double> primary_nr_db;
  std::vector<double> secondary_nr_db;
  ExperimentResult result;  // empty when diverged
};

struct ExperimentOutput {
  std::vector<RunRecord> runs;
  nlohmann::ordered_json summary;
  std::string summary_path;
};

namespace detail {

inline nlohmann::ordered_json params_json(const HyperParams& p) {
  nlohmann::ordered_json j;
  j["alpha"] = p.alpha;
  j["epsilon"] = p.epsilon;
  j["mu"] = p.mu;
  if (p.delta)
    j["delta"] = *p.delta;
  else
    j["delta"] = nullptr;
  j["normalized"] = p.normalized;
  j["norm_floor"] = p.norm_floor;
  return j;
}

}  // namespace detail

// Runs every (seed, algorithm) pair over the identical noise realization and
// impulse responses, writes per-run CSV exports plus one summary.json, and
// returns everything in memory. A diverged controller yields a diagnostic
// record instead of aborting the remaining runs. Nothing written contains a
// timestamp, so reruns of the same config are byte-identical.
inline ExperimentOutput run_experiment(const ExperimentConfig& cfg,
                                       bool write_outputs = true) {
  namespace fs = std::filesystem;
  cfg.validate();
  const ResolvedScene scene = resolve_scene(cfg);
  const long n = cfg.scene.n_samples();
  const SampleRange ss = steady_state_range(n);
  const long conv_window = std::max<long>(
      1, std::lround(cfg.convergence_window_s * cfg.scene.sample_rate_hz));

  if (write_outputs) fs::create_directories(cfg.output_dir);

  ExperimentOutput out;
  nlohmann::ordered_json summary;
  summary["scene"] = {
      {"digest", scene_digest_hex(cfg.scene, scene.irs)},
      {"sample_rate_hz", cfg.scene.sample_rate_hz},
      {"duration_s", cfg.scene.duration_s},
      {"n_speakers", cfg.scene.n_speakers},
      {"n_refs", cfg.scene.n_refs},
      {"n_primary_mics", cfg.scene.n_primary_mics},
      {"n_secondary_mics", cfg.scene.n_secondary_mics},
      {"filter_taps", cfg.scene.filter_taps},
      {"weight_length", cfg.scene.weight_length()},
  };
  summary["runs"] = nlohmann::ordered_json::array();
  summary["comparisons"] = nlohmann::ordered_json::array();

  for (std::uint64_t seed : cfg.seeds) {
    nlohmann::ordered_json comparison;
    comparison["seed"] = seed;
    comparison["mics"] = nlohmann::ordered_json::object();
    for (const AlgorithmSpec& spec : cfg.algorithms) {
      RunRecord rec;
      rec.spec = spec;
      rec.seed = seed;
      nlohmann::ordered_json rj;
      rj["algorithm"] = algorithm_name(spec.algorithm);
      rj["label"] = spec.label;
      rj["seed"] = seed;
      rj["params"] = detail::params_json(spec.params);
      try {
        rec.result = run_controller(cfg.scene, scene.irs, spec.algorithm,
                                    spec.params, n, seed);
        for (int m = 0; m < cfg.scene.n_primary_mics; ++m)
          rec.primary_nr_db.push_back(
              noise_reduction_db(detail::row_vector(rec.result.e, m),
                                 detail::row_vector(rec.result.d_e, m), ss));
        for (int m = 0; m < cfg.scene.n_secondary_mics; ++m)
          rec.secondary_nr_db.push_back(
              noise_reduction_db(detail::row_vector(rec.result.z, m),
                                 detail::row_vector(rec.result.d_z, m), ss));
        rj["status"] = "ok";
        rj["primary_nr_db"] = rec.primary_nr_db;
        rj["secondary_nr_db"] = rec.secondary_nr_db;
        double mean = 0;
        for (double v : rec.secondary_nr_db) mean += v;
        mean /= static_cast<double>(rec.secondary_nr_db.size());
        rj["secondary_nr_mean_db"] = mean;
        for (int m = 0; m < cfg.scene.n_primary_mics; ++m)
          comparison["mics"]["e" + std::to_string(m)][spec.label] =
              rec.primary_nr_db[static_cast<size_t>(m)];
        for (int m = 0; m < cfg.scene.n_secondary_mics; ++m)
          comparison["mics"]["z" + std::to_string(m)][spec.label] =
              rec.secondary_nr_db[static_cast<size_t>(m)];

        if (write_outputs) {
          const fs::path dir = fs::path(cfg.output_dir) / spec.label /
                               ("seed_" + std::to_string(seed));
          fs::create_directories(dir);
          write_convergence_csv((dir / "convergence.csv").string(), rec.result,
                                conv_window);
          write_psd_csv((dir / "psd.csv").string(), rec.result,
                        cfg.psd_segment, cfg.psd_overlap);
          if (scene.positions)
            write_heatmap_csv((dir / "heatmap.csv").string(), *scene.positions,
                              rec.primary_nr_db, rec.secondary_nr_db);
        }
      } catch (const DivergenceError& e) {
        rec.diverged = true;
        rec.divergence_step = e.step;
        rec.last_finite_norm = e.last_finite_norm;
        rj["status"] = "diverged";
        rj["divergence_step"] = e.step;
        rj["last_finite_norm"] = e.last_finite_norm;
        log_warn(std::string("run diverged: ") + spec.label + " seed " +
                 std::to_string(seed) + ": " + e.what());
      }
      summary["runs"].push_back(std::move(rj));
      out.runs.push_back(std::move(rec));
    }
    summary["comparisons"].push_back(std::move(comparison));
  }

  out.summary = std::move(summary);
  if (write_outputs) {
    out.summary_path =
        (fs::path(cfg.output_dir) / "summary.json").string();
    detail::write_text_file(out.summary_path, out.summary.dump(2) + "\n");
  }
  return out;
}

// Side-by-side per-mic NR table for previously written summaries; the first
// listed run is the reference for the delta columns.
inline std::string compare_summaries(const std::vector<std::string>& paths) {
  struct Entry {
    std::string label;
    std::map<std::string, double> nr;  // mic id -> NR dB
  };
  std::vector<Entry> entries;
  std::vector<std::string> mic_order;
  std::set<std::string> seen_mics;

  for (size_t f = 0; f < paths.size(); ++f) {
    std::ifstream in(paths[f]);
    if (!in) throw IoError("cannot open summary: " + paths[f]);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw IoError("summary " + paths[f] + " is not valid JSON: " + e.what());
    }
    if (!doc.contains("runs") || !doc["runs"].is_array())
      throw ValidationError("summary " + paths[f] + " has no runs array");
    for (const auto& run : doc["runs"]) {
      if (run.value("status", "") != "ok") continue;
      Entry entry;
      entry.label = run.value("label", run.value("algorithm", "?"));
      if (paths.size() > 1)
        entry.label += "@" + std::to_string(f + 1);
      if (run.contains("seed") && doc.contains("comparisons") &&
          doc["comparisons"].size() > 1)
        entry.label += ":s" + run["seed"].dump();
      const auto& pri = run.value("primary_nr_db", std::vector<double>{});
      const auto& sec = run.value("secondary_nr_db", std::vector<double>{});
      for (size_t m = 0; m < pri.size(); ++m) {
        const std::string id = "e" + std::to_string(m);
        entry.nr[id] = pri[m];
        if (seen_mics.insert(id).second) mic_order.push_back(id);
      }
      for (size_t m = 0; m < sec.size(); ++m) {
        const std::string id = "z" + std::to_string(m);
        entry.nr[id] = sec[m];
        if (seen_mics.insert(id).second) mic_order.push_back(id);
      }
      entries.push_back(std::move(entry));
    }
  }
  if (entries.empty())
    throw ValidationError("no successful runs found in the given summaries");

  std::string table = "mic";
  for (const Entry& e : entries) table += "," + e.label + "_nr_db";
  for (size_t i = 1; i < entries.size(); ++i)
    table += ",delta_" + entries[i].label + "_vs_" + entries[0].label;
  table += "\n";
  for (const std::string& mic : mic_order) {
    table += mic;
    for (const Entry& e : entries) {
      auto it = e.nr.find(mic);
      table += it == e.nr.end() ? ",-" : "," + detail::fmt_num(it->second);
    }
    for (size_t i = 1; i < entries.size(); ++i) {
      auto a = entries[i].nr.find(mic);
      auto b = entries[0].nr.find(mic);
      table += (a == entries[i].nr.end() || b == entries[0].nr.end())
                   ? ",-"
                   : "," + detail::fmt_num(a->second - b->second);
    }
    table += "\n";
  }
  return table;
}

}  // namespace anc
