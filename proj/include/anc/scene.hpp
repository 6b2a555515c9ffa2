#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anc/common.hpp"

namespace anc {

// ----- scene configuration -----

struct NoiseSpec {
  enum class Kind { gaussian_white, file };
  Kind kind = Kind::gaussian_white;
  double variance = 1.0;  // gaussian case
  std::string path;       // file case, raw f32le samples

  void validate() const {
    if (kind == Kind::gaussian_white && !(variance > 0.0))
      throw ValidationError("noise variance must be > 0");
    if (kind == Kind::file && path.empty())
      throw ValidationError("file noise requires a path");
  }
};

struct SceneConfig {
  int sample_rate_hz = 8000;
  int n_speakers = 2;        // N_s
  int n_refs = 1;            // N_r
  int n_primary_mics = 2;    // N_e
  int n_secondary_mics = 8;  // N_z
  int filter_taps = 32;      // N_t
  double duration_s = 20.0;
  NoiseSpec noise;
  std::uint64_t seed = 0;

  int weight_length() const { return n_speakers * n_refs * filter_taps; }
  long n_samples() const {
    return static_cast<long>(std::llround(duration_s * sample_rate_hz));
  }

  void validate() const {
    if (sample_rate_hz < 1) throw ValidationError("sample_rate_hz must be >= 1");
    if (n_speakers < 1 || n_refs < 1 || n_primary_mics < 1 ||
        n_secondary_mics < 1 || n_filter_taps_invalid())
      throw ValidationError(
          "all channel counts and filter_taps must be >= 1");
    if (duration_s * sample_rate_hz < filter_taps)
      throw ValidationError(
          "duration must cover at least one filter span (duration_s * "
          "sample_rate_hz >= filter_taps)");
    noise.validate();
  }

private:
  bool n_filter_taps_invalid() const { return filter_taps < 1; }
};

// All FIR propagation paths for one scene. Path groups may have different
// tap counts but are uniform within a group.
struct ImpulseResponseSet {
  int n_primary = 0;    // N_e
  int n_secondary = 0;  // N_z
  int n_speakers = 0;   // N_s
  int n_refs = 0;       // N_r

  std::vector<VectorXd> p_e;    // [N_e] source -> primary mics
  std::vector<VectorXd> p_z;    // [N_z] source -> secondary mics
  std::vector<VectorXd> g_e;    // [N_e*N_s] speakers -> primary, row-major
  std::vector<VectorXd> g_z;    // [N_z*N_s] speakers -> secondary
  std::vector<VectorXd> h_ref;  // [N_r] source -> reference mics

  const VectorXd& ge(int mic, int s) const { return g_e[mic * n_speakers + s]; }
  const VectorXd& gz(int mic, int s) const { return g_z[mic * n_speakers + s]; }
  VectorXd& ge(int mic, int s) { return g_e[mic * n_speakers + s]; }
  VectorXd& gz(int mic, int s) { return g_z[mic * n_speakers + s]; }

  // Ideal reference pickup: x_r == d.
  static VectorXd unit_impulse() {
    VectorXd h(1);
    h[0] = 1.0;
    return h;
  }

  int max_path_taps() const {
    int m = 0;
    for (const auto* group : {&p_e, &p_z, &g_e, &g_z, &h_ref})
      for (const auto& h : *group) m = std::max<int>(m, h.size());
    return m;
  }

  void validate() const {
    check_group(p_e, n_primary, "p_e");
    check_group(p_z, n_secondary, "p_z");
    check_group(g_e, n_primary * n_speakers, "g_e");
    check_group(g_z, n_secondary * n_speakers, "g_z");
    check_group(h_ref, n_refs, "h_ref");
  }

  void validate_against(const SceneConfig& config) const {
    validate();
    if (n_primary != config.n_primary_mics || n_secondary != config.n_secondary_mics ||
        n_speakers != config.n_speakers || n_refs != config.n_refs)
      throw ValidationError(
          "impulse response set shape does not match scene config (have N_e=" +
          std::to_string(n_primary) + ", N_z=" + std::to_string(n_secondary) +
          ", N_s=" + std::to_string(n_speakers) + ", N_r=" + std::to_string(n_refs) +
          ")");
  }

  std::uint64_t digest() const {
    Fnv1a64 h;
    for (int v : {n_primary, n_secondary, n_speakers, n_refs}) h.update_value(v);
    for (const auto* group : {&p_e, &p_z, &g_e, &g_z, &h_ref}) {
      for (const auto& ir : *group) {
        h.update_value<std::int64_t>(ir.size());
        h.update_vector(ir);
      }
    }
    return h.digest();
  }

private:
  static void check_group(const std::vector<VectorXd>& group, int expected,
                          const char* name) {
    if (static_cast<int>(group.size()) != expected)
      throw ValidationError(std::string(name) + " holds " +
                            std::to_string(group.size()) + " filters, expected " +
                            std::to_string(expected));
    std::size_t taps = group.empty() ? 0 : group.front().size();
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (group[i].size() == 0)
        throw ValidationError(std::string(name) + "[" + std::to_string(i) +
                              "] is empty");
      if (static_cast<std::size_t>(group[i].size()) != taps)
        throw ValidationError(std::string(name) + "[" + std::to_string(i) +
                              "] tap count differs within group");
      for (Eigen::Index k = 0; k < group[i].size(); ++k)
        if (!std::isfinite(group[i][k]))
          throw ValidationError(std::string(name) + "[" + std::to_string(i) +
                                "] has non-finite value at tap " +
                                std::to_string(k));
    }
  }
};

// Stochastic exponential-decay room model: direct path plus seeded late
// reflections whose energy envelope follows exp(-6 ln10 * t / rt60).
struct SyntheticRoomSpec {
  Eigen::Vector3d room_m{4.0, 3.0, 2.5};
  Eigen::Vector3d source_m{0.4, 1.5, 1.2};
  std::vector<Eigen::Vector3d> speakers_m;
  std::vector<Eigen::Vector3d> primary_mics_m;
  std::vector<Eigen::Vector3d> secondary_mics_m;
  std::vector<Eigen::Vector3d> reference_mics_m;  // empty -> ideal reference
  double rt60_s = 0.0;
  double speed_of_sound_mps = 343.0;
  int ir_taps = 256;
  double reflections_per_s = 1000.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (rt60_s < 0) throw ValidationError("rt60_s must be >= 0");
    if (ir_taps < 1) throw ValidationError("ir_taps must be >= 1");
    if (speed_of_sound_mps <= 0) throw ValidationError("speed_of_sound_mps must be > 0");
    if (rt60_s > 0 && reflections_per_s <= 0)
      throw ValidationError("reflections_per_s must be > 0 when rt60_s > 0");
    check_inside(source_m, "source");
    check_all(speakers_m, "speaker");
    check_all(primary_mics_m, "primary mic");
    check_all(secondary_mics_m, "secondary mic");
    check_all(reference_mics_m, "reference mic");
  }

private:
  void check_all(const std::vector<Eigen::Vector3d>& pts, const char* what) const {
    for (std::size_t i = 0; i < pts.size(); ++i)
      check_inside(pts[i], what + ("[" + std::to_string(i) + "]"));
  }
  void check_inside(const Eigen::Vector3d& p, const std::string& what) const {
    for (int k = 0; k < 3; ++k)
      if (p[k] < 0 || p[k] > room_m[k])
        throw ValidationError(what + " position outside room dimensions");
  }
};

namespace detail {

// One point-to-point FIR: direct tap from distance, then the reverberant tail.
inline VectorXd synth_path(const Eigen::Vector3d& from, const Eigen::Vector3d& to,
                           const SyntheticRoomSpec& spec, int sample_rate_hz,
                           std::uint64_t stream, const std::string& path_name) {
  const double dist = (to - from).norm();
  const double fs = sample_rate_hz;
  const int delay =
      static_cast<int>(std::lround(dist / spec.speed_of_sound_mps * fs));
  if (delay >= spec.ir_taps)
    throw ValidationError("direct-path delay (" + std::to_string(delay) +
                          " taps) exceeds ir_taps for path " + path_name);
  VectorXd h = VectorXd::Zero(spec.ir_taps);
  // 0.1 m floor keeps the 1/r gain finite at co-located points.
  const double direct_amp = 1.0 / std::max(dist, 0.1);
  h[delay] = direct_amp;

  if (spec.rt60_s > 0) {
    std::mt19937_64 rng(mix_seed(spec.seed, stream));
    std::exponential_distribution<double> gap(spec.reflections_per_s);
    std::normal_distribution<double> amp(0.0, 1.0);
    // Reflection gain chosen so the expected tail energy matches the
    // direct-path energy: sum of amp^2 * envelope integrates to direct_amp^2.
    const double gain =
        std::sqrt(6.0 * std::log(10.0) / (spec.reflections_per_s * spec.rt60_s));
    const double decay = 3.0 * std::log(10.0) / spec.rt60_s;  // amplitude rate
    double t = delay / fs + gap(rng);
    while (true) {
      const int tap = static_cast<int>(std::lround(t * fs));
      if (tap >= spec.ir_taps) break;
      const double envelope = std::exp(-decay * (t - delay / fs));
      h[tap] += direct_amp * gain * amp(rng) * envelope;
      t += gap(rng);
    }
  }
  return h;
}

}  // namespace detail

inline ImpulseResponseSet generate_synthetic_irs(const SyntheticRoomSpec& spec,
                                                 const SceneConfig& config) {
  spec.validate();
  if (static_cast<int>(spec.speakers_m.size()) != config.n_speakers ||
      static_cast<int>(spec.primary_mics_m.size()) != config.n_primary_mics ||
      static_cast<int>(spec.secondary_mics_m.size()) != config.n_secondary_mics)
    throw ValidationError("room position counts do not match scene config");
  if (!spec.reference_mics_m.empty() &&
      static_cast<int>(spec.reference_mics_m.size()) != config.n_refs)
    throw ValidationError("reference mic count does not match scene config");

  ImpulseResponseSet irs;
  irs.n_primary = config.n_primary_mics;
  irs.n_secondary = config.n_secondary_mics;
  irs.n_speakers = config.n_speakers;
  irs.n_refs = config.n_refs;

  // Independent seed stream per path, keyed by group and indices.
  std::uint64_t stream = 0;
  auto name = [](const char* group, int i, int j) {
    std::string s = std::string(group) + "[" + std::to_string(i) + "]";
    if (j >= 0) s += "[" + std::to_string(j) + "]";
    return s;
  };
  for (int j = 0; j < irs.n_primary; ++j)
    irs.p_e.push_back(detail::synth_path(spec.source_m, spec.primary_mics_m[j],
                                         spec, config.sample_rate_hz, ++stream,
                                         name("p_e", j, -1)));
  for (int k = 0; k < irs.n_secondary; ++k)
    irs.p_z.push_back(detail::synth_path(spec.source_m, spec.secondary_mics_m[k],
                                         spec, config.sample_rate_hz, ++stream,
                                         name("p_z", k, -1)));
  for (int j = 0; j < irs.n_primary; ++j)
    for (int s = 0; s < irs.n_speakers; ++s)
      irs.g_e.push_back(detail::synth_path(spec.speakers_m[s],
                                           spec.primary_mics_m[j], spec,
                                           config.sample_rate_hz, ++stream,
                                           name("g_e", j, s)));
  for (int k = 0; k < irs.n_secondary; ++k)
    for (int s = 0; s < irs.n_speakers; ++s)
      irs.g_z.push_back(detail::synth_path(spec.speakers_m[s],
                                           spec.secondary_mics_m[k], spec,
                                           config.sample_rate_hz, ++stream,
                                           name("g_z", k, s)));
  if (spec.reference_mics_m.empty()) {
    for (int r = 0; r < irs.n_refs; ++r)
      irs.h_ref.push_back(ImpulseResponseSet::unit_impulse());
  } else {
    for (int r = 0; r < irs.n_refs; ++r)
      irs.h_ref.push_back(detail::synth_path(spec.source_m,
                                             spec.reference_mics_m[r], spec,
                                             config.sample_rate_hz, ++stream,
                                             name("h_ref", r, -1)));
  }
  irs.validate();
  return irs;
}

// ----- noise -----

inline VectorXd generate_noise(const NoiseSpec& spec, long n_samples,
                               std::uint64_t seed) {
  spec.validate();
  if (n_samples < 1) throw ValidationError("n_samples must be >= 1");
  VectorXd out(n_samples);
  if (spec.kind == NoiseSpec::Kind::gaussian_white) {
    std::mt19937_64 rng(mix_seed(seed, 0x6e6f697365ULL));
    std::normal_distribution<double> dist(0.0, std::sqrt(spec.variance));
    for (long i = 0; i < n_samples; ++i) out[i] = dist(rng);
  } else {
    const std::vector<float> raw = read_f32_file(spec.path, -1);
    if (static_cast<long>(raw.size()) < n_samples)
      throw ValidationError("noise file " + spec.path + " holds " +
                            std::to_string(raw.size()) + " samples, need " +
                            std::to_string(n_samples));
    for (long i = 0; i < n_samples; ++i) out[i] = raw[static_cast<std::size_t>(i)];
  }
  return out;
}

// Digest over scene dimensions and all path coefficients; enough to detect a
// changed scene between runs.
inline std::string scene_digest_hex(const SceneConfig& config,
                                    const ImpulseResponseSet& irs) {
  Fnv1a64 h;
  for (int v : {config.sample_rate_hz, config.n_speakers, config.n_refs,
                config.n_primary_mics, config.n_secondary_mics,
                config.filter_taps})
    h.update_value(v);
  h.update_value(config.duration_s);
  h.update_value(irs.digest());
  return h.hex();
}

// ----- IR manifest I/O -----
//
// Manifest: JSON naming each path group {shape, dtype "f32le", file}; payload
// files are raw little-endian float32, row-major, tap index fastest.

namespace detail {

inline std::vector<VectorXd> read_ir_group(const nlohmann::json& entry,
                                           const std::filesystem::path& base,
                                           const std::string& name,
                                           std::vector<int>& shape_out) {
  if (!entry.contains("shape") || !entry.contains("file"))
    throw ValidationError("manifest entry " + name + " missing shape or file");
  if (entry.value("dtype", "f32le") != "f32le")
    throw ValidationError("manifest entry " + name + " has unsupported dtype");
  shape_out = entry.at("shape").get<std::vector<int>>();
  std::int64_t total = 1;
  for (int d : shape_out) {
    if (d < 1) throw ValidationError("manifest entry " + name + " has bad shape");
    total *= d;
  }
  const std::filesystem::path file = base / entry.at("file").get<std::string>();
  const std::vector<float> raw = read_f32_file(file.string(), total);
  const int taps = shape_out.back();
  const std::int64_t n_filters = total / taps;
  std::vector<VectorXd> group(static_cast<std::size_t>(n_filters));
  for (std::int64_t i = 0; i < n_filters; ++i) {
    VectorXd h(taps);
    for (int k = 0; k < taps; ++k) {
      const float v = raw[static_cast<std::size_t>(i * taps + k)];
      if (!std::isfinite(v))
        throw ValidationError("non-finite value in " + name + " at flat index " +
                              std::to_string(i * taps + k));
      h[k] = v;
    }
    group[static_cast<std::size_t>(i)] = std::move(h);
  }
  return group;
}

}  // namespace detail

inline ImpulseResponseSet load_ir_set(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open IR manifest: " + manifest_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed IR manifest " + manifest_path + ": " +
                          e.what());
  }
  if (!doc.contains("paths"))
    throw ValidationError("IR manifest missing \"paths\": " + manifest_path);
  const auto& paths = doc.at("paths");
  const std::filesystem::path base =
      std::filesystem::path(manifest_path).parent_path();

  ImpulseResponseSet irs;
  std::vector<int> sh;
  for (const char* required : {"p_e", "p_z", "g_e", "g_z"})
    if (!paths.contains(required))
      throw ValidationError(std::string("IR manifest missing path group ") +
                            required);

  auto expect_dims = [&](const std::string& name, std::size_t dims) {
    if (sh.size() != dims)
      throw ValidationError("manifest entry " + name + " must have " +
                            std::to_string(dims) + " dims");
  };
  irs.p_e = detail::read_ir_group(paths.at("p_e"), base, "p_e", sh);
  expect_dims("p_e", 2);
  irs.n_primary = sh[0];
  irs.p_z = detail::read_ir_group(paths.at("p_z"), base, "p_z", sh);
  expect_dims("p_z", 2);
  irs.n_secondary = sh[0];
  irs.g_e = detail::read_ir_group(paths.at("g_e"), base, "g_e", sh);
  expect_dims("g_e", 3);
  if (sh[0] != irs.n_primary)
    throw ValidationError("g_e mic count disagrees with p_e");
  irs.n_speakers = sh[1];
  irs.g_z = detail::read_ir_group(paths.at("g_z"), base, "g_z", sh);
  expect_dims("g_z", 3);
  if (sh[0] != irs.n_secondary)
    throw ValidationError("g_z mic count disagrees with p_z");
  if (sh[1] != irs.n_speakers)
    throw ValidationError("g_z speaker count disagrees with g_e");
  if (paths.contains("h_ref")) {
    irs.h_ref = detail::read_ir_group(paths.at("h_ref"), base, "h_ref", sh);
    expect_dims("h_ref", 2);
    irs.n_refs = sh[0];
  } else {
    irs.n_refs = doc.value("n_refs", 1);
    for (int r = 0; r < irs.n_refs; ++r)
      irs.h_ref.push_back(ImpulseResponseSet::unit_impulse());
  }
  irs.validate();
  return irs;
}

// Optional mic positions stored alongside the paths (used for heatmaps).
struct ScenePositions {
  std::vector<Eigen::Vector3d> primary_mics_m;
  std::vector<Eigen::Vector3d> secondary_mics_m;
};

inline std::optional<ScenePositions> load_ir_positions(
    const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open IR manifest: " + manifest_path);
  nlohmann::json doc = nlohmann::json::parse(in);
  if (!doc.contains("positions")) return std::nullopt;
  const auto& pos = doc.at("positions");
  ScenePositions out;
  auto read_list = [](const nlohmann::json& arr) {
    std::vector<Eigen::Vector3d> pts;
    for (const auto& p : arr) {
      auto v = p.get<std::vector<double>>();
      if (v.size() != 3) throw ValidationError("position must have 3 coordinates");
      pts.emplace_back(v[0], v[1], v[2]);
    }
    return pts;
  };
  if (pos.contains("primary_mics_m"))
    out.primary_mics_m = read_list(pos.at("primary_mics_m"));
  if (pos.contains("secondary_mics_m"))
    out.secondary_mics_m = read_list(pos.at("secondary_mics_m"));
  return out;
}

inline void save_ir_set(const ImpulseResponseSet& irs,
                        const std::string& out_dir,
                        const std::optional<ScenePositions>& positions =
                            std::nullopt,
                        std::optional<int> sample_rate_hz = std::nullopt) {
  irs.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path base(out_dir);

  auto dump_group = [&](const std::vector<VectorXd>& group,
                        const std::string& name, std::vector<int> shape) {
    std::vector<float> raw;
    for (const auto& h : group)
      for (Eigen::Index k = 0; k < h.size(); ++k)
        raw.push_back(static_cast<float>(h[k]));
    const std::string file = name + ".f32";
    write_f32_file((base / file).string(), raw);
    nlohmann::ordered_json entry;
    entry["shape"] = shape;
    entry["dtype"] = "f32le";
    entry["file"] = file;
    return entry;
  };

  const int pe_taps = static_cast<int>(irs.p_e.front().size());
  const int pz_taps = static_cast<int>(irs.p_z.front().size());
  const int ge_taps = static_cast<int>(irs.g_e.front().size());
  const int gz_taps = static_cast<int>(irs.g_z.front().size());
  const int href_taps = static_cast<int>(irs.h_ref.front().size());

  nlohmann::ordered_json doc;
  if (sample_rate_hz) doc["sample_rate_hz"] = *sample_rate_hz;
  doc["paths"]["p_e"] = dump_group(irs.p_e, "p_e", {irs.n_primary, pe_taps});
  doc["paths"]["p_z"] = dump_group(irs.p_z, "p_z", {irs.n_secondary, pz_taps});
  doc["paths"]["g_e"] =
      dump_group(irs.g_e, "g_e", {irs.n_primary, irs.n_speakers, ge_taps});
  doc["paths"]["g_z"] =
      dump_group(irs.g_z, "g_z", {irs.n_secondary, irs.n_speakers, gz_taps});
  doc["paths"]["h_ref"] = dump_group(irs.h_ref, "h_ref", {irs.n_refs, href_taps});
  if (positions) {
    auto to_json = [](const std::vector<Eigen::Vector3d>& pts) {
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (const auto& p : pts) arr.push_back({p[0], p[1], p[2]});
      return arr;
    };
    doc["positions"]["primary_mics_m"] = to_json(positions->primary_mics_m);
    doc["positions"]["secondary_mics_m"] = to_json(positions->secondary_mics_m);
  }
  std::ofstream out(base / "ir_manifest.json");
  if (!out) throw IoError("cannot write manifest in " + out_dir);
  out << doc.dump(2) << "\n";
}

}  // namespace anc
