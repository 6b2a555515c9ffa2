#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "anc/harness.hpp"

using namespace anc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& s) {
  return s.substr(0, s.find('\n'));
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::path("harness_test_scratch") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small causal scene: source -> primary arrives ~14 samples after the
// speaker's field can, well inside the 24-tap filter.
ExperimentConfig small_config(const fs::path& out_dir) {
  ExperimentConfig cfg;
  cfg.scene.sample_rate_hz = 8000;
  cfg.scene.n_speakers = 1;
  cfg.scene.n_refs = 1;
  cfg.scene.n_primary_mics = 1;
  cfg.scene.n_secondary_mics = 2;
  cfg.scene.filter_taps = 24;
  cfg.scene.duration_s = 1.0;
  cfg.scene.seed = 3;

  SyntheticRoomSpec room;
  room.room_m = {3.0, 3.0, 3.0};
  room.source_m = {0.3, 1.5, 1.5};
  room.speakers_m = {{0.9, 1.5, 1.5}};
  room.primary_mics_m = {{1.7, 1.5, 1.5}};
  room.secondary_mics_m = {{1.9, 1.4, 1.5}, {1.9, 1.6, 1.5}};
  room.ir_taps = 48;
  cfg.room = room;

  AlgorithmSpec two;
  two.algorithm = Algorithm::two_point_fxlms;
  two.params.alpha = 0.5;
  two.label = "two_point";
  AlgorithmSpec lcmv;
  lcmv.algorithm = Algorithm::lcmv_adaptive;
  lcmv.params.alpha = 0.25;
  lcmv.label = "lcmv";
  AlgorithmSpec unstable;
  unstable.algorithm = Algorithm::two_point_fxlms;
  unstable.params.alpha = 1e4;
  unstable.params.normalized = false;
  unstable.label = "unstable";
  cfg.algorithms = {two, lcmv, unstable};

  cfg.output_dir = out_dir.string();
  cfg.seeds = {1, 2};
  cfg.psd_segment = 256;
  return cfg;
}

}  // namespace

TEST_CASE("experiment config parsing") {
  SECTION("full config with defaults filled in") {
    const json doc = json::parse(R"({
      "scene": {"n_speakers": 1, "n_refs": 1, "n_primary_mics": 1,
                "n_secondary_mics": 2, "filter_taps": 8, "duration_s": 2.0,
                "seed": 9},
      "room": {"speakers_m": [[1.0, 1.0, 1.0]],
               "primary_mics_m": [[2.0, 1.0, 1.0]],
               "secondary_mics_m": [[2.5, 1.0, 1.0], [2.5, 1.5, 1.0]],
               "rt60_s": 0.2, "ir_taps": 128},
      "algorithms": [
        {"name": "two_point_fxlms", "alpha": 0.7},
        {"name": "lcmv_adaptive", "label": "mine", "delta": null},
        {"name": "multi_point_fxlms", "delta": 0.25, "normalized": false}
      ]
    })");
    const ExperimentConfig cfg = parse_experiment_config(doc, "");
    CHECK(cfg.scene.sample_rate_hz == 8000);  // default
    CHECK(cfg.scene.n_secondary_mics == 2);
    CHECK(cfg.scene.noise.kind == NoiseSpec::Kind::gaussian_white);
    REQUIRE(cfg.room.has_value());
    CHECK(cfg.room->rt60_s == 0.2);
    CHECK(cfg.room->room_m[0] == 4.0);  // default room kept
    REQUIRE(cfg.algorithms.size() == 3);
    CHECK(cfg.algorithms[0].label == "two_point_fxlms");  // label defaults
    CHECK(cfg.algorithms[0].params.alpha == 0.7);
    CHECK(cfg.algorithms[1].label == "mine");
    CHECK_FALSE(cfg.algorithms[1].params.delta.has_value());
    REQUIRE(cfg.algorithms[2].params.delta.has_value());
    CHECK(*cfg.algorithms[2].params.delta == 0.25);
    CHECK_FALSE(cfg.algorithms[2].params.normalized);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{9});  // scene seed fallback
    CHECK(cfg.output_dir == "out");
  }

  SECTION("relative paths resolve against the config directory") {
    const json doc = json::parse(R"({
      "scene": {"filter_taps": 8, "duration_s": 1.0,
                "noise": {"kind": "file", "path": "noise.f32"}},
      "ir_manifest": "irs/ir_manifest.json",
      "outputs": "results",
      "algorithms": [{"name": "two_point_fxlms"}],
      "seeds": [4, 5]
    })");
    const ExperimentConfig cfg = parse_experiment_config(doc, "/base/dir");
    CHECK(cfg.ir_manifest == "/base/dir/irs/ir_manifest.json");
    CHECK(cfg.output_dir == "/base/dir/results");
    CHECK(cfg.scene.noise.path == "/base/dir/noise.f32");
    CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5});
    // absolute paths pass through untouched
    const json doc2 = json::parse(R"({
      "scene": {"filter_taps": 8, "duration_s": 1.0},
      "ir_manifest": "/abs/ir_manifest.json",
      "algorithms": [{"name": "two_point_fxlms"}]
    })");
    CHECK(parse_experiment_config(doc2, "/base/dir").ir_manifest ==
          "/abs/ir_manifest.json");
  }

  SECTION("missing fields are reported by name") {
    const auto expect_mentions = [](const char* text, const std::string& needle) {
      try {
        parse_experiment_config(json::parse(text), "");
        FAIL("expected ValidationError");
      } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find(needle) != std::string::npos);
      }
    };
    expect_mentions(R"({"algorithms": []})", "scene");
    expect_mentions(R"({"scene": {}, "room": {"speakers_m": [], "primary_mics_m": [],
                        "secondary_mics_m": []},
                        "algorithms": [{"alpha": 0.1}]})",
                    "name");
    expect_mentions(R"({"scene": {}, "room": {},
                        "algorithms": [{"name": "two_point_fxlms"}]})",
                    "speakers_m");
    expect_mentions(R"({"scene": {"noise": {"kind": "file"}},
                        "room": {"speakers_m": [], "primary_mics_m": [],
                                 "secondary_mics_m": []},
                        "algorithms": [{"name": "two_point_fxlms"}]})",
                    "path");
    expect_mentions(R"({"scene": {"noise": {"kind": "pink"}},
                        "room": {"speakers_m": [], "primary_mics_m": [],
                                 "secondary_mics_m": []},
                        "algorithms": [{"name": "two_point_fxlms"}]})",
                    "pink");
    expect_mentions(R"({"scene": {},
                        "room": {"speakers_m": [[1, 1]], "primary_mics_m": [],
                                 "secondary_mics_m": []},
                        "algorithms": [{"name": "two_point_fxlms"}]})",
                    "[x, y, z]");
  }

  SECTION("unknown algorithm names are rejected") {
    const json doc = json::parse(R"({
      "scene": {},
      "room": {"speakers_m": [], "primary_mics_m": [], "secondary_mics_m": []},
      "algorithms": [{"name": "magic"}]
    })");
    CHECK_THROWS_AS(parse_experiment_config(doc, ""), ValidationError);
  }

  SECTION("config files load with paths relative to their location") {
    const fs::path dir = scratch_dir("load_config");
    {
      std::ofstream out(dir / "exp.json");
      out << R"({"scene": {"filter_taps": 8, "duration_s": 1.0},
                 "ir_manifest": "irs/ir_manifest.json",
                 "algorithms": [{"name": "two_point_fxlms"}]})";
    }
    const ExperimentConfig cfg =
        load_experiment_config((dir / "exp.json").string());
    CHECK(cfg.ir_manifest == (dir / "irs" / "ir_manifest.json").string());
    CHECK_THROWS_AS(load_experiment_config((dir / "absent.json").string()),
                    IoError);
    {
      std::ofstream out(dir / "broken.json");
      out << "{not json";
    }
    CHECK_THROWS_AS(load_experiment_config((dir / "broken.json").string()),
                    IoError);
  }
}

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg = small_config("unused_out");

  SECTION("the baseline fixture is valid") { CHECK_NOTHROW(cfg.validate()); }

  SECTION("exactly one impulse response source") {
    cfg.ir_manifest = "also.json";
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.room.reset();
    cfg.ir_manifest.clear();
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
  }

  SECTION("algorithm labels must be unique and present") {
    cfg.algorithms[1].label = cfg.algorithms[0].label;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.algorithms[1].label = "";
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.algorithms.clear();
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
  }

  SECTION("seeds must be present") {
    cfg.seeds.clear();
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
  }

  SECTION("psd segment must fit the steady-state window") {
    cfg.psd_segment = 4096;  // window is only 2000 samples
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
  }
}

TEST_CASE("snapshot stacking") {
  ReferenceSnapshot a;
  a.layout = {1, 1, 4};
  a.x_e = RowMatrixXd::Constant(1, 4, 1.0);
  a.x_z = RowMatrixXd::Constant(2, 4, 2.0);
  ReferenceSnapshot b = a;
  b.x_e.setConstant(3.0);
  b.x_z.setConstant(4.0);

  std::vector<SnapshotRecord> recs;
  recs.push_back({a, VectorXd::Constant(1, 10.0), VectorXd::Constant(2, 20.0)});
  recs.push_back({b, VectorXd::Constant(1, 30.0), VectorXd::Constant(2, 40.0)});

  const SnapshotStack st = stack_snapshots(recs);
  REQUIRE(st.x_e.rows() == 2);
  REQUIRE(st.x_z.rows() == 4);
  CHECK(st.x_e.row(0).cwiseEqual(1.0).all());
  CHECK(st.x_e.row(1).cwiseEqual(3.0).all());
  CHECK(st.x_z.row(3).cwiseEqual(4.0).all());
  CHECK(st.d_e[1] == 30.0);
  CHECK(st.d_z[0] == 20.0);
  CHECK(st.d_z[3] == 40.0);

  recs[1].snap.x_z = RowMatrixXd::Zero(3, 4);  // inconsistent N_z
  CHECK_THROWS_AS(stack_snapshots(recs), ValidationError);
  CHECK_THROWS_AS(stack_snapshots({}), ValidationError);
}

TEST_CASE("experiment driver") {
  const fs::path out_a = scratch_dir("driver_a");
  const ExperimentConfig cfg = small_config(out_a);
  const ExperimentOutput out = run_experiment(cfg);

  SECTION("one record per seed and algorithm, divergence contained") {
    REQUIRE(out.runs.size() == 6);
    int ok = 0, diverged = 0;
    for (const RunRecord& rec : out.runs) {
      if (rec.diverged) {
        ++diverged;
        CHECK(rec.spec.label == "unstable");
        CHECK(rec.divergence_step > 0);
      } else {
        ++ok;
        REQUIRE(rec.primary_nr_db.size() == 1);
        REQUIRE(rec.secondary_nr_db.size() == 2);
      }
    }
    CHECK(ok == 4);
    CHECK(diverged == 2);
  }

  SECTION("runs on one seed share the identical noise-only field") {
    const RunRecord& two = out.runs[0];
    const RunRecord& lcmv = out.runs[1];
    REQUIRE(two.seed == lcmv.seed);
    CHECK(two.result.d_e.cwiseEqual(lcmv.result.d_e).all());
    CHECK(two.result.d_z.cwiseEqual(lcmv.result.d_z).all());
  }

  SECTION("the controller actually helps at the primary mic") {
    CHECK(out.runs[0].primary_nr_db[0] > 3.0);
    CHECK(out.runs[1].primary_nr_db[0] > 3.0);
  }

  SECTION("exports exist with the documented headers") {
    for (const char* label : {"two_point", "lcmv"}) {
      for (const char* seed : {"seed_1", "seed_2"}) {
        const fs::path dir = out_a / label / seed;
        CHECK(first_line(read_file(dir / "convergence.csv")) ==
              "t_seconds,mic_id,nr_db");
        CHECK(first_line(read_file(dir / "psd.csv")) ==
              "freq_hz,mic_id,psd_db");
        CHECK(first_line(read_file(dir / "heatmap.csv")) ==
              "x_m,y_m,z_m,mic_role,nr_db");
      }
    }
    CHECK_FALSE(fs::exists(out_a / "unstable" / "seed_1"));
    const std::string conv = read_file(out_a / "two_point" / "seed_1" /
                                       "convergence.csv");
    CHECK(conv.find(",e0,") != std::string::npos);
    CHECK(conv.find(",z1,") != std::string::npos);
    const std::string psd = read_file(out_a / "two_point" / "seed_1" /
                                      "psd.csv");
    CHECK(psd.find(",e0_noise,") != std::string::npos);
  }

  SECTION("summary structure") {
    CHECK(out.summary_path == (out_a / "summary.json").string());
    const json doc = json::parse(read_file(out.summary_path));
    CHECK(doc["scene"]["n_secondary_mics"] == 2);
    CHECK(doc["scene"]["weight_length"] == 24);
    CHECK(doc["scene"]["digest"].is_string());
    REQUIRE(doc["runs"].size() == 6);
    int diverged = 0;
    for (const auto& run : doc["runs"]) {
      if (run["status"] == "diverged") {
        ++diverged;
        CHECK(run.contains("divergence_step"));
      } else {
        CHECK(run["status"] == "ok");
        CHECK(run["primary_nr_db"].size() == 1);
        CHECK(run.contains("secondary_nr_mean_db"));
      }
      CHECK(run["params"].contains("alpha"));
    }
    CHECK(diverged == 2);
    REQUIRE(doc["comparisons"].size() == 2);
    const auto& mics = doc["comparisons"][0]["mics"];
    CHECK(mics.contains("e0"));
    CHECK(mics.contains("z1"));
    CHECK(mics["e0"].contains("two_point"));
    CHECK(mics["e0"].contains("lcmv"));
    CHECK_FALSE(mics["e0"].contains("unstable"));
  }

  SECTION("a rerun into another directory is byte-identical") {
    const fs::path out_b = scratch_dir("driver_b");
    ExperimentConfig cfg_b = cfg;
    cfg_b.output_dir = out_b.string();
    const ExperimentOutput second = run_experiment(cfg_b);
    CHECK(out.summary.dump(2) == second.summary.dump(2));
    CHECK(read_file(out.summary_path) == read_file(second.summary_path));
    for (const char* label : {"two_point", "lcmv"}) {
      for (const char* seed : {"seed_1", "seed_2"}) {
        for (const char* f : {"convergence.csv", "psd.csv", "heatmap.csv"}) {
          CHECK(read_file(out_a / label / seed / f) ==
                read_file(out_b / label / seed / f));
        }
      }
    }
  }
}

TEST_CASE("experiments run from a saved impulse response manifest") {
  const fs::path dir = scratch_dir("manifest_run");
  ExperimentConfig cfg = small_config(dir / "out");
  cfg.seeds = {1};
  cfg.algorithms.resize(1);  // just two_point, keep it quick

  const ImpulseResponseSet irs = generate_synthetic_irs(*cfg.room, cfg.scene);

  SECTION("positions round-trip and produce a heatmap") {
    const ScenePositions pos{cfg.room->primary_mics_m,
                             cfg.room->secondary_mics_m};
    save_ir_set(irs, (dir / "irs").string(), pos, cfg.scene.sample_rate_hz);
    cfg.room.reset();
    cfg.ir_manifest = (dir / "irs" / "ir_manifest.json").string();
    const ExperimentOutput out = run_experiment(cfg);
    REQUIRE(out.runs.size() == 1);
    CHECK_FALSE(out.runs[0].diverged);
    CHECK(fs::exists(dir / "out" / "two_point" / "seed_1" / "heatmap.csv"));
  }

  SECTION("without stored positions the heatmap is skipped") {
    save_ir_set(irs, (dir / "irs_bare").string());
    cfg.room.reset();
    cfg.ir_manifest = (dir / "irs_bare" / "ir_manifest.json").string();
    const ExperimentOutput out = run_experiment(cfg);
    REQUIRE(out.runs.size() == 1);
    CHECK_FALSE(out.runs[0].diverged);
    const fs::path run_dir = dir / "out" / "two_point" / "seed_1";
    CHECK(fs::exists(run_dir / "convergence.csv"));
    CHECK_FALSE(fs::exists(run_dir / "heatmap.csv"));
  }
}

TEST_CASE("summary comparison table") {
  const fs::path dir = scratch_dir("compare");
  ExperimentConfig cfg = small_config(dir / "a");
  cfg.seeds = {1};
  cfg.algorithms.pop_back();  // drop the diverging run
  const ExperimentOutput a = run_experiment(cfg);

  SECTION("single summary: plain labels, delta vs the first run") {
    const std::string table = compare_summaries({a.summary_path});
    const std::string head = first_line(table);
    CHECK(head == "mic,two_point_nr_db,lcmv_nr_db,delta_lcmv_vs_two_point");
    CHECK(table.find("\ne0,") != std::string::npos);
    CHECK(table.find("\nz1,") != std::string::npos);
  }

  SECTION("two files get positional suffixes") {
    ExperimentConfig cfg_b = cfg;
    cfg_b.output_dir = (dir / "b").string();
    cfg_b.algorithms[0].params.alpha = 0.3;
    cfg_b.algorithms[1].params.alpha = 0.1;
    const ExperimentOutput b = run_experiment(cfg_b);
    const std::string table =
        compare_summaries({a.summary_path, b.summary_path});
    CHECK(first_line(table).find("two_point@1_nr_db") != std::string::npos);
    CHECK(first_line(table).find("lcmv@2_nr_db") != std::string::npos);
  }

  SECTION("multi-seed summaries mark each entry with its seed") {
    ExperimentConfig cfg_c = cfg;
    cfg_c.output_dir = (dir / "c").string();
    cfg_c.seeds = {1, 2};
    cfg_c.algorithms.resize(1);
    const ExperimentOutput c = run_experiment(cfg_c);
    const std::string table = compare_summaries({c.summary_path});
    CHECK(first_line(table).find("two_point:s1_nr_db") != std::string::npos);
    CHECK(first_line(table).find("two_point:s2_nr_db") != std::string::npos);
  }

  SECTION("summaries with no successful runs are rejected") {
    const fs::path bad = dir / "bad.json";
    {
      std::ofstream out(bad);
      out << R"({"runs": [{"status": "diverged", "label": "x"}]})";
    }
    CHECK_THROWS_AS(compare_summaries({bad.string()}), ValidationError);
    CHECK_THROWS_AS(compare_summaries({(dir / "missing.json").string()}),
                    IoError);
  }
}
