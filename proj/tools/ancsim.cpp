#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anc/harness.hpp"

namespace {

int cmd_run(const std::string& config_path) {
  const anc::ExperimentConfig cfg = anc::load_experiment_config(config_path);
  const anc::ExperimentOutput out = anc::run_experiment(cfg);
  for (const anc::RunRecord& rec : out.runs) {
    if (rec.diverged) {
      std::printf("%-18s seed %-6llu DIVERGED at step %ld\n",
                  rec.spec.label.c_str(),
                  static_cast<unsigned long long>(rec.seed),
                  rec.divergence_step);
      continue;
    }
    double sec_mean = 0;
    for (double v : rec.secondary_nr_db) sec_mean += v;
    sec_mean /= static_cast<double>(rec.secondary_nr_db.size());
    std::printf("%-18s seed %-6llu primary NR:", rec.spec.label.c_str(),
                static_cast<unsigned long long>(rec.seed));
    for (double v : rec.primary_nr_db) std::printf(" %6.2f", v);
    std::printf(" dB   secondary mean: %6.2f dB\n", sec_mean);
  }
  std::printf("summary: %s\n", out.summary_path.c_str());
  return 0;
}

int cmd_gen_irs(const std::string& spec_path, const std::string& out_dir) {
  std::ifstream in(spec_path);
  if (!in) throw anc::IoError("cannot open spec: " + spec_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw anc::IoError("spec " + spec_path + " is not valid JSON: " + e.what());
  }
  if (!doc.contains("room"))
    throw anc::ValidationError(
        "spec has no \"room\" block; impulse responses can only be "
        "generated for synthetic rooms");
  const anc::SyntheticRoomSpec room = anc::parse_room_spec(doc["room"]);

  anc::SceneConfig scene;
  if (doc.contains("scene")) {
    scene = anc::parse_scene_config(doc["scene"]);
  } else {
    scene.n_speakers = static_cast<int>(room.speakers_m.size());
    scene.n_primary_mics = static_cast<int>(room.primary_mics_m.size());
    scene.n_secondary_mics = static_cast<int>(room.secondary_mics_m.size());
    if (!room.reference_mics_m.empty())
      scene.n_refs = static_cast<int>(room.reference_mics_m.size());
    anc::detail::assign_if(doc, "sample_rate_hz", scene.sample_rate_hz,
                           "spec");
  }
  scene.validate();

  const anc::ImpulseResponseSet irs =
      anc::generate_synthetic_irs(room, scene);
  const anc::ScenePositions positions{room.primary_mics_m,
                                      room.secondary_mics_m};
  anc::save_ir_set(irs, out_dir, positions, scene.sample_rate_hz);
  std::printf("wrote %s/ir_manifest.json\n", out_dir.c_str());
  return 0;
}

int cmd_validate(const std::string& config_path) {
  const anc::ExperimentConfig cfg = anc::load_experiment_config(config_path);
  const anc::ResolvedScene scene = anc::resolve_scene(cfg);
  (void)scene;
  std::printf("config ok: %s\n", config_path.c_str());
  std::printf("L (weight length)    = %d\n", cfg.scene.weight_length());
  std::printf("N_e (primary mics)   = %d\n", cfg.scene.n_primary_mics);
  std::printf("N_z (secondary mics) = %d\n", cfg.scene.n_secondary_mics);
  std::printf("samples              = %ld @ %d Hz\n", cfg.scene.n_samples(),
              cfg.scene.sample_rate_hz);
  std::printf("algorithms           = %zu, seeds = %zu\n",
              cfg.algorithms.size(), cfg.seeds.size());
  return 0;
}

int cmd_compare(const std::vector<std::string>& summaries) {
  std::fputs(anc::compare_summaries(summaries).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multichannel active noise control simulator"};
  app.require_subcommand(1);

  std::string config_path, spec_path, out_dir;
  std::vector<std::string> summaries;

  CLI::App* run = app.add_subcommand("run", "run an experiment and write exports");
  run->add_option("config", config_path, "experiment config JSON")->required();
  CLI::App* gen =
      app.add_subcommand("gen-irs", "synthesize impulse responses to a manifest");
  gen->add_option("spec", spec_path, "room spec or experiment config JSON")
      ->required();
  gen->add_option("out", out_dir, "output directory")->required();
  CLI::App* val =
      app.add_subcommand("validate", "check a config and print dimensions");
  val->add_option("config", config_path, "experiment config JSON")->required();
  CLI::App* cmp =
      app.add_subcommand("compare", "tabulate per-mic NR across summaries");
  cmp->add_option("summaries", summaries, "summary.json files")
      ->required()
      ->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(config_path);
    if (*gen) return cmd_gen_irs(spec_path, out_dir);
    if (*val) return cmd_validate(config_path);
    if (*cmp) return cmd_compare(summaries);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
