// Command-line front end for the NBV planning toolkit: simulated search
// missions, batch statistics, greedy planning over image datasets, coverage
// maps, and standalone scene generation.

#include <nbv/nbv.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

namespace fs = std::filesystem;

// Precedence: --out flag, then NBV_OUTPUT_DIR, then config default.
std::string resolve_out_dir(const std::string& flag_value, const std::string& fallback) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("NBV_OUTPUT_DIR"); env && *env) return env;
  return fallback;
}

nbv::ExperimentConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return {};
  return nbv::load_experiment_config(path);
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::optional<uint64_t> seed;
  std::optional<std::string> heuristic;
  std::optional<int> nbv_views;
  bool trace = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_planning) {
  cmd->add_option("--config", opts.config_path, "JSON configuration file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "master seed override");
  if (with_planning) {
    cmd->add_option("--heuristic", opts.heuristic, "visibility|geometry");
    cmd->add_option("--nbv", opts.nbv_views, "number of planned views");
    cmd->add_flag("--trace", opts.trace, "write per-candidate fitness trace");
  }
}

nbv::ExperimentConfig make_config(const CommonOpts& opts) {
  nbv::ExperimentConfig cfg = load_config_or_default(opts.config_path);
  if (opts.seed) cfg.master_seed = *opts.seed;
  if (opts.heuristic) cfg.heuristic = nbv::parse_heuristic(*opts.heuristic);
  if (opts.nbv_views) cfg.nbv_views = *opts.nbv_views;
  if (opts.trace) cfg.trace_fitness = true;
  return cfg;
}

int cmd_simulate(const CommonOpts& opts) {
  const nbv::ExperimentConfig cfg = make_config(opts);
  const std::string out = resolve_out_dir(opts.out_dir, "out/simulate");
  const nbv::RunReport report = nbv::run_simulation_experiment(cfg, cfg.master_seed, out);
  const auto detected = report.detection.detected_curve();
  std::cout << "run complete: " << report.cameras.size() << " cameras, "
            << (detected.empty() ? 0 : detected[report.initial_camera_count - 1]) << " -> "
            << (detected.empty() ? 0 : detected.back()) << " of "
            << report.detection.manikin_count() << " targets detected\n"
            << "outputs in " << out << "\n";
  return 0;
}

int cmd_batch(const CommonOpts& opts, int runs) {
  const nbv::ExperimentConfig cfg = make_config(opts);
  const std::string out = resolve_out_dir(opts.out_dir, "out/batch");
  const nbv::BatchReport batch = nbv::run_batch(cfg, runs, out);
  std::cout << "batch complete: " << runs << " runs\n";
  if (!batch.mean_detected.empty()) {
    const std::size_t initial = batch.runs.front().initial_camera_count;
    std::cout << "mean detected after initial pass: " << batch.mean_detected[initial - 1]
              << ", after planning: " << batch.mean_detected.back() << "\n";
  }
  std::cout << "outputs in " << out << "\n";
  return 0;
}

int cmd_gen_scene(const CommonOpts& opts) {
  const nbv::ExperimentConfig cfg = make_config(opts);
  const std::string out = resolve_out_dir(opts.out_dir, "out/scene");
  fs::create_directories(out);
  const nbv::ForestScene scene =
      nbv::generate_scene(cfg.forest, nbv::derive_seed(cfg.master_seed, 1));
  const auto manikins = nbv::place_manikins(scene, cfg.manikin_count, cfg.manikin,
                                            nbv::derive_seed(cfg.master_seed, 2));
  nbv::save_obj((fs::path(out) / "scene.obj").string(), scene.mesh);
  nbv::save_face_tags((fs::path(out) / "scene_tags.csv").string(), scene.mesh);
  nbv::save_manikin_csv((fs::path(out) / "manikins.csv").string(), manikins);
  nbv::TriangleMesh bodies;
  for (const auto& m : manikins) bodies.append(m.body);
  if (!bodies.vertices.empty()) {
    nbv::save_obj((fs::path(out) / "manikins.obj").string(), bodies);
    nbv::save_face_tags((fs::path(out) / "manikins_tags.csv").string(), bodies);
  }
  std::cout << "scene: " << scene.trees.size() << " trees, " << scene.mesh.face_count()
            << " faces, " << manikins.size() << " targets\noutputs in " << out << "\n";
  return 0;
}

int cmd_coverage(const std::string& mesh_path, const std::string& tags_path,
                 const std::string& cameras_path, const std::string& out_ply,
                 const std::string& out_csv) {
  nbv::TriangleMesh mesh = nbv::load_obj(mesh_path);
  if (!tags_path.empty()) nbv::load_face_tags(tags_path, mesh);
  const auto scene = nbv::make_scene(std::move(mesh));
  const auto cameras = nbv::load_camera_csv(cameras_path);
  const nbv::VisibilityRecord record = nbv::visibility_matrix(*scene, cameras);
  if (!out_ply.empty()) nbv::coverage_export_ply(out_ply, scene->mesh, record.counts);
  if (!out_csv.empty()) nbv::coverage_export_csv(out_csv, record.counts);
  long seen = 0;
  for (int c : record.counts)
    if (c > 0) ++seen;
  std::cout << "coverage: " << seen << " of " << record.counts.size()
            << " vertices seen by " << cameras.size() << " cameras\n";
  return 0;
}

int cmd_dataset_nbv(const CommonOpts& opts, const std::string& mesh_path,
                    const std::string& tags_path, const std::string& dataset_path,
                    const std::string& initial_path, int n_views) {
  const nbv::ExperimentConfig cfg = make_config(opts);
  const std::string out = resolve_out_dir(opts.out_dir, "out/dataset");
  fs::create_directories(out);

  nbv::TriangleMesh mesh = nbv::load_obj(mesh_path);
  if (!tags_path.empty()) nbv::load_face_tags(tags_path, mesh);
  const auto scene = nbv::make_scene(std::move(mesh));
  const nbv::ImageDataset dataset = nbv::load_dataset(dataset_path);

  std::vector<nbv::CameraView> initial;
  if (!initial_path.empty()) initial = nbv::load_camera_csv(initial_path);
  nbv::FitnessContext ctx = nbv::make_fitness_context(scene, initial, cfg.fitness);
  nbv::coverage_export_ply((fs::path(out) / "coverage_before.ply").string(), scene->mesh,
                           nbv::full_mesh_counts(ctx));

  std::unique_ptr<nbv::FitnessTraceWriter> trace;
  if (cfg.trace_fitness)
    trace = std::make_unique<nbv::FitnessTraceWriter>(
        (fs::path(out) / "fitness_trace.csv").string());
  const nbv::SelectionResult result =
      nbv::greedy_select(ctx, dataset, cfg.heuristic, n_views, trace.get());

  nbv::save_selection_csv((fs::path(out) / "selected.csv").string(), result.steps);
  nbv::coverage_export_ply((fs::path(out) / "coverage_after.ply").string(), scene->mesh,
                           nbv::full_mesh_counts(result.context));

  const nbv::LabelReport report = nbv::label_report(dataset, result.steps);
  nlohmann::json j;
  j["selected"] = nlohmann::json::array();
  for (const auto& s : result.steps)
    j["selected"].push_back({{"step", s.step}, {"image_id", s.image_id}, {"score", s.score}});
  if (report.labeled) {
    j["detection"] = {{"manikins", report.views_per_manikin.size()},
                      {"detected", report.detected},
                      {"views_per_manikin", report.views_per_manikin}};
  } else {
    j["detection"] = "unlabeled";
  }
  std::ofstream rj((fs::path(out) / "report.json").string());
  rj << j.dump(2) << '\n';

  std::cout << "selected " << result.steps.size() << " of " << dataset.images.size()
            << " images with the " << nbv::to_string(cfg.heuristic) << " heuristic\n";
  if (report.labeled)
    std::cout << "labels: " << report.detected << " of " << report.views_per_manikin.size()
              << " targets covered by the selection\n";
  else
    std::cout << "labels: unlabeled dataset, no detection report\n";
  std::cout << "outputs in " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Next-best-view planning for UAV search under occlusion"};
  app.require_subcommand(1);

  CommonOpts sim_opts;
  CLI::App* simulate = app.add_subcommand("simulate", "run one simulated search mission");
  add_common(simulate, sim_opts, true);

  CommonOpts batch_opts;
  int batch_runs = 10;
  CLI::App* batch = app.add_subcommand("batch", "run repeated missions and aggregate");
  add_common(batch, batch_opts, true);
  batch->add_option("--runs", batch_runs, "number of runs")->check(CLI::PositiveNumber);

  CommonOpts scene_opts;
  CLI::App* gen_scene = app.add_subcommand("gen-scene", "generate a forest scene and targets");
  add_common(gen_scene, scene_opts, false);

  std::string cov_mesh, cov_tags, cov_cameras, cov_ply, cov_csv;
  CLI::App* coverage = app.add_subcommand("coverage", "per-vertex view counts for given cameras");
  coverage->add_option("--mesh", cov_mesh, "OBJ mesh")->required()->check(CLI::ExistingFile);
  coverage->add_option("--tags", cov_tags, "face tag CSV")->check(CLI::ExistingFile);
  coverage->add_option("--cameras", cov_cameras, "camera CSV")->required()->check(CLI::ExistingFile);
  coverage->add_option("--out-ply", cov_ply, "coverage PLY path");
  coverage->add_option("--out-csv", cov_csv, "coverage CSV path");

  CommonOpts ds_opts;
  std::string ds_mesh, ds_tags, ds_dataset, ds_initial;
  int ds_views = 20;
  CLI::App* dataset = app.add_subcommand("dataset-nbv", "greedy view selection over an image dataset");
  add_common(dataset, ds_opts, true);
  dataset->add_option("--mesh", ds_mesh, "OBJ mesh")->required()->check(CLI::ExistingFile);
  dataset->add_option("--tags", ds_tags, "face tag CSV")->check(CLI::ExistingFile);
  dataset->add_option("--dataset", ds_dataset, "posed image CSV")->required()->check(CLI::ExistingFile);
  dataset->add_option("--initial", ds_initial, "already-flown cameras CSV")->check(CLI::ExistingFile);
  dataset->add_option("--n-views", ds_views, "views to select")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(sim_opts);
    if (batch->parsed()) return cmd_batch(batch_opts, batch_runs);
    if (gen_scene->parsed()) return cmd_gen_scene(scene_opts);
    if (coverage->parsed()) return cmd_coverage(cov_mesh, cov_tags, cov_cameras, cov_ply, cov_csv);
    if (dataset->parsed())
      return cmd_dataset_nbv(ds_opts, ds_mesh, ds_tags, ds_dataset, ds_initial, ds_views);
  } catch (const std::exception& e) {
    nlohmann::json err;
    err["error"] = e.what();
    std::cerr << err.dump() << std::endl;
    return 1;
  }
  return 0;
}
