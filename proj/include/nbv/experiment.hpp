#pragma once

#include "nbv/camera.hpp"
#include "nbv/core.hpp"
#include "nbv/evolution.hpp"
#include "nbv/fitness.hpp"
#include "nbv/forest.hpp"
#include "nbv/render.hpp"
#include "nbv/visibility.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace nbv {

// ---------------------------------------------------------------------------
// Initial coverage pass: a nadir-looking grid over the survey area
// ---------------------------------------------------------------------------

struct GridSpec {
  int rows = 6;
  int cols = 6;
  double altitude = 25.0;    // m
  double pitch_deg = -90.0;  // straight down
};

struct CameraIntrinsics {
  double focal = 1.0;
  double hfov_deg = 84.0;
  double vfov_deg = 62.0;
};

// One camera per grid cell, positioned over the cell center.
inline std::vector<CameraView> make_initial_grid(const GridSpec& grid,
                                                 const CameraIntrinsics& intrinsics,
                                                 double width, double depth) {
  if (grid.rows <= 0 || grid.cols <= 0) throw std::invalid_argument("grid must be nonempty");
  std::vector<CameraView> cameras;
  cameras.reserve(static_cast<std::size_t>(grid.rows) * grid.cols);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const Vec3 position((c + 0.5) * width / grid.cols, (r + 0.5) * depth / grid.rows,
                          grid.altitude);
      cameras.push_back(make_camera(position, deg_to_rad(grid.pitch_deg), 0.0,
                                    intrinsics.focal, deg_to_rad(intrinsics.hfov_deg),
                                    deg_to_rad(intrinsics.vfov_deg)));
    }
  }
  return cameras;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct BoundsSpec {
  double margin_xy = 5.0;  // planning box extends this far beyond the area
  double z_min = 2.0;
  double z_max = 30.0;
  double pitch_min_deg = -90.0;
  double pitch_max_deg = 0.0;
};

inline PoseBounds make_pose_bounds(const BoundsSpec& spec, double width, double depth) {
  PoseBounds bounds;
  bounds.lo = {-spec.margin_xy, -spec.margin_xy, spec.z_min, deg_to_rad(spec.pitch_min_deg),
               -M_PI};
  bounds.hi = {width + spec.margin_xy, depth + spec.margin_xy, spec.z_max,
               deg_to_rad(spec.pitch_max_deg), M_PI};
  if (!bounds.valid()) throw std::invalid_argument("invalid pose bounds");
  return bounds;
}

struct ExperimentConfig {
  ForestParams forest;
  int manikin_count = 100;
  ManikinParams manikin;
  GridSpec grid;
  CameraIntrinsics intrinsics;
  BoundsSpec bounds;
  EvolutionConfig evolution;
  FitnessOptions fitness;
  RenderResolution detection;
  int nbv_views = 20;
  Heuristic heuristic = Heuristic::visibility;
  uint64_t master_seed = 1;
  bool trace_fitness = false;
};

namespace detail {

template <class T>
void maybe_get(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void maybe_get_range(const nlohmann::json& j, const char* key, Range& out) {
  if (!j.contains(key)) return;
  const auto& arr = j.at(key);
  out.lo = arr.at(0).get<double>();
  out.hi = arr.at(1).get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["forest"] = {{"width", c.forest.width},
                 {"depth", c.forest.depth},
                 {"tree_density", c.forest.tree_density},
                 {"trunk_radius", {c.forest.trunk_radius.lo, c.forest.trunk_radius.hi}},
                 {"trunk_height", {c.forest.trunk_height.lo, c.forest.trunk_height.hi}},
                 {"canopy_radius", {c.forest.canopy_radius.lo, c.forest.canopy_radius.hi}},
                 {"canopy_height", {c.forest.canopy_height.lo, c.forest.canopy_height.hi}},
                 {"canopy_jitter", c.forest.canopy_jitter},
                 {"ground_resolution", c.forest.ground_resolution}};
  j["manikins"] = {{"count", c.manikin_count},
                   {"length", c.manikin.length},
                   {"width", c.manikin.width},
                   {"height", c.manikin.height},
                   {"under_canopy", c.manikin.under_canopy}};
  j["grid"] = {{"rows", c.grid.rows},
               {"cols", c.grid.cols},
               {"altitude", c.grid.altitude},
               {"pitch_deg", c.grid.pitch_deg}};
  j["camera"] = {{"focal", c.intrinsics.focal},
                 {"hfov_deg", c.intrinsics.hfov_deg},
                 {"vfov_deg", c.intrinsics.vfov_deg}};
  j["bounds"] = {{"margin_xy", c.bounds.margin_xy},
                 {"z_min", c.bounds.z_min},
                 {"z_max", c.bounds.z_max},
                 {"pitch_min_deg", c.bounds.pitch_min_deg},
                 {"pitch_max_deg", c.bounds.pitch_max_deg}};
  j["evolution"] = {{"population", c.evolution.population},
                    {"generations", c.evolution.generations},
                    {"crossover_rate", c.evolution.crossover_rate},
                    {"mutation_rate", c.evolution.mutation_rate},
                    {"tournament_size", c.evolution.tournament_size},
                    {"sigma_fraction", c.evolution.sigma_fraction},
                    {"per_gene_mutation_prob", c.evolution.per_gene_mutation_prob}};
  j["fitness"] = {{"mu", c.fitness.mu},
                  {"lambda", c.fitness.lambda},
                  {"vertex_stride", c.fitness.vertex_stride}};
  j["detection"] = {{"width", c.detection.width}, {"height", c.detection.height}};
  j["nbv_views"] = c.nbv_views;
  j["heuristic"] = to_string(c.heuristic);
  j["master_seed"] = c.master_seed;
  j["trace_fitness"] = c.trace_fitness;
  return j;
}

// Missing keys keep their defaults, so partial configs are valid.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (j.contains("forest")) {
    const auto& f = j.at("forest");
    detail::maybe_get(f, "width", c.forest.width);
    detail::maybe_get(f, "depth", c.forest.depth);
    detail::maybe_get(f, "tree_density", c.forest.tree_density);
    detail::maybe_get_range(f, "trunk_radius", c.forest.trunk_radius);
    detail::maybe_get_range(f, "trunk_height", c.forest.trunk_height);
    detail::maybe_get_range(f, "canopy_radius", c.forest.canopy_radius);
    detail::maybe_get_range(f, "canopy_height", c.forest.canopy_height);
    detail::maybe_get(f, "canopy_jitter", c.forest.canopy_jitter);
    detail::maybe_get(f, "ground_resolution", c.forest.ground_resolution);
  }
  if (j.contains("manikins")) {
    const auto& m = j.at("manikins");
    detail::maybe_get(m, "count", c.manikin_count);
    detail::maybe_get(m, "length", c.manikin.length);
    detail::maybe_get(m, "width", c.manikin.width);
    detail::maybe_get(m, "height", c.manikin.height);
    detail::maybe_get(m, "under_canopy", c.manikin.under_canopy);
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    detail::maybe_get(g, "rows", c.grid.rows);
    detail::maybe_get(g, "cols", c.grid.cols);
    detail::maybe_get(g, "altitude", c.grid.altitude);
    detail::maybe_get(g, "pitch_deg", c.grid.pitch_deg);
  }
  if (j.contains("camera")) {
    const auto& cam = j.at("camera");
    detail::maybe_get(cam, "focal", c.intrinsics.focal);
    detail::maybe_get(cam, "hfov_deg", c.intrinsics.hfov_deg);
    detail::maybe_get(cam, "vfov_deg", c.intrinsics.vfov_deg);
  }
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    detail::maybe_get(b, "margin_xy", c.bounds.margin_xy);
    detail::maybe_get(b, "z_min", c.bounds.z_min);
    detail::maybe_get(b, "z_max", c.bounds.z_max);
    detail::maybe_get(b, "pitch_min_deg", c.bounds.pitch_min_deg);
    detail::maybe_get(b, "pitch_max_deg", c.bounds.pitch_max_deg);
  }
  if (j.contains("evolution")) {
    const auto& e = j.at("evolution");
    detail::maybe_get(e, "population", c.evolution.population);
    detail::maybe_get(e, "generations", c.evolution.generations);
    detail::maybe_get(e, "crossover_rate", c.evolution.crossover_rate);
    detail::maybe_get(e, "mutation_rate", c.evolution.mutation_rate);
    detail::maybe_get(e, "tournament_size", c.evolution.tournament_size);
    detail::maybe_get(e, "sigma_fraction", c.evolution.sigma_fraction);
    detail::maybe_get(e, "per_gene_mutation_prob", c.evolution.per_gene_mutation_prob);
  }
  if (j.contains("fitness")) {
    const auto& f = j.at("fitness");
    detail::maybe_get(f, "mu", c.fitness.mu);
    detail::maybe_get(f, "lambda", c.fitness.lambda);
    detail::maybe_get(f, "vertex_stride", c.fitness.vertex_stride);
  }
  if (j.contains("detection")) {
    const auto& d = j.at("detection");
    detail::maybe_get(d, "width", c.detection.width);
    detail::maybe_get(d, "height", c.detection.height);
  }
  detail::maybe_get(j, "nbv_views", c.nbv_views);
  if (j.contains("heuristic")) c.heuristic = parse_heuristic(j.at("heuristic").get<std::string>());
  detail::maybe_get(j, "master_seed", c.master_seed);
  detail::maybe_get(j, "trace_fitness", c.trace_fitness);
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path, 0, e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Single simulated search mission
// ---------------------------------------------------------------------------

struct RunReport {
  uint64_t run_seed = 0;
  std::vector<CameraView> cameras;  // initial grid followed by planned views
  int initial_camera_count = 0;
  DetectionTable detection;
  std::vector<EvolutionResult> planning;  // one optimizer run per planned view
  double mean_final_visibility = 0.0;     // mean per-vertex weight deficit 1-alpha
};

namespace detail {

inline std::string nbv_stats_name(int nbv_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ea_stats_%02d.csv", nbv_index);
  return buf;
}

// Mean per-vertex "visibility satisfaction" 1 - alpha_i over the evaluation
// subset; approaches 1 once every vertex is seen well past the knee.
inline double mean_visibility_satisfaction(const FitnessContext& ctx) {
  if (ctx.alpha.alpha.empty()) return 0.0;
  double total = 0.0;
  for (double a : ctx.alpha.alpha) total += 1.0 - a;
  return total / static_cast<double>(ctx.alpha.alpha.size());
}

}  // namespace detail

// Per-vertex view counts over the whole mesh (zero where not evaluated).
inline std::vector<int> full_mesh_counts(const FitnessContext& ctx) {
  std::vector<int> counts(ctx.scene->mesh.vertex_count(), 0);
  for (std::size_t i = 0; i < ctx.eval_vertices.size(); ++i)
    counts[ctx.eval_vertices[i]] = ctx.counts[i];
  return counts;
}

namespace detail {

}  // namespace detail

// Runs one mission: generate the world, fly the initial grid, then plan and
// commit nbv_views additional views with the evolutionary optimizer. When
// out_dir is nonempty every artifact lands there, flushed as each planning
// round completes.
inline RunReport run_simulation_experiment(const ExperimentConfig& cfg, uint64_t run_seed,
                                           const std::string& out_dir = {}) {
  namespace fs = std::filesystem;
  if (!cfg.evolution.valid()) throw std::invalid_argument("invalid optimizer settings");
  const bool persist = !out_dir.empty();
  if (persist) fs::create_directories(out_dir);
  const auto path = [&](const std::string& name) { return (fs::path(out_dir) / name).string(); };

  // World
  ForestScene forest = generate_scene(cfg.forest, derive_seed(run_seed, 1));
  const std::vector<Manikin> manikins =
      place_manikins(forest, cfg.manikin_count, cfg.manikin, derive_seed(run_seed, 2));
  if (persist) {
    save_obj(path("scene.obj"), forest.mesh);
    save_face_tags(path("scene_tags.csv"), forest.mesh);
    save_manikin_csv(path("manikins.csv"), manikins);
    TriangleMesh bodies;
    for (const Manikin& m : manikins) bodies.append(m.body);
    if (!bodies.vertices.empty()) {
      save_obj(path("manikins.obj"), bodies);
      save_face_tags(path("manikins_tags.csv"), bodies);
    }
  }
  const auto scene = make_scene(TriangleMesh(forest.mesh));

  RunReport report;
  report.run_seed = run_seed;
  report.cameras = make_initial_grid(cfg.grid, cfg.intrinsics, cfg.forest.width, cfg.forest.depth);
  report.initial_camera_count = static_cast<int>(report.cameras.size());
  if (persist) save_camera_csv(path("initial_cameras.csv"), report.cameras);

  FitnessContext ctx = make_fitness_context(scene, report.cameras, cfg.fitness);
  if (persist)
    coverage_export_ply(path("coverage_initial.ply"), scene->mesh, full_mesh_counts(ctx));

  const PoseBounds bounds = make_pose_bounds(cfg.bounds, cfg.forest.width, cfg.forest.depth);
  std::unique_ptr<FitnessTraceWriter> trace;
  if (persist && cfg.trace_fitness)
    trace = std::make_unique<FitnessTraceWriter>(path("fitness_trace.csv"));

  std::ofstream nbv_csv;
  if (persist) {
    nbv_csv.open(path("nbv_cameras.csv"));
    if (!nbv_csv) throw IoError("cannot write nbv camera CSV");
    nbv_csv << kCameraCsvHeader << '\n';
  }

  for (int nbv = 0; nbv < cfg.nbv_views; ++nbv) {
    EvolutionConfig evo = cfg.evolution;
    evo.seed = derive_seed(run_seed, 100 + static_cast<uint64_t>(nbv));
    std::atomic<int> candidate_counter{0};
    const auto fitness = [&](const Genome& g) {
      const CameraView cam = make_camera(Vec3(g[kGeneX], g[kGeneY], g[kGeneZ]), g[kGenePitch],
                                         g[kGeneYaw], cfg.intrinsics.focal,
                                         deg_to_rad(cfg.intrinsics.hfov_deg),
                                         deg_to_rad(cfg.intrinsics.vfov_deg));
      const double score = heuristic_score(ctx, cam, cfg.heuristic);
      if (trace) {
        const int id = candidate_counter.fetch_add(1);
        trace->row(nbv, id, visibility_fitness(ctx, cam), geometry_fitness(ctx, cam));
      }
      return score;
    };
    EvolutionResult ea = evolve(fitness, bounds, evo);
    const Genome& g = ea.best.genome;
    const CameraView chosen = make_camera(Vec3(g[kGeneX], g[kGeneY], g[kGeneZ]), g[kGenePitch],
                                          g[kGeneYaw], cfg.intrinsics.focal,
                                          deg_to_rad(cfg.intrinsics.hfov_deg),
                                          deg_to_rad(cfg.intrinsics.vfov_deg));
    ctx = commit_view(ctx, chosen);
    report.cameras.push_back(chosen);
    report.planning.push_back(std::move(ea));

    // Flush this round before the next begins so an interrupted run keeps
    // everything committed so far.
    if (persist) {
      save_generation_stats(path(detail::nbv_stats_name(nbv + 1)),
                            report.planning.back().stats);
      const CameraView& cam = chosen;
      nbv_csv << (report.initial_camera_count + nbv) << ','
              << detail::format_double(cam.position.x()) << ','
              << detail::format_double(cam.position.y()) << ','
              << detail::format_double(cam.position.z()) << ','
              << detail::format_double(rad_to_deg(cam.pitch)) << ','
              << detail::format_double(rad_to_deg(cam.yaw)) << ','
              << detail::format_double(cam.focal) << ','
              << detail::format_double(rad_to_deg(cam.hfov())) << ','
              << detail::format_double(rad_to_deg(cam.vfov())) << '\n';
      nbv_csv.flush();
      if (trace) trace->flush();
    }
  }
  report.mean_final_visibility = detail::mean_visibility_satisfaction(ctx);

  report.detection = detection_table(*scene, manikins, report.cameras, cfg.detection);
  if (persist) {
    const std::vector<int> counts = full_mesh_counts(ctx);
    coverage_export_ply(path("coverage_final.ply"), scene->mesh, counts);
    coverage_export_csv(path("coverage_final.csv"), counts);
    save_detection_csv(path("detection.csv"), report.detection);
    save_curves_csv(path("curves.csv"), report.detection);

    nlohmann::json j;
    j["schema_version"] = 1;
    j["config"] = to_json(cfg);
    j["run_seed"] = run_seed;
    j["tree_count"] = forest.trees.size();
    j["mesh_vertices"] = forest.mesh.vertex_count();
    j["mesh_faces"] = forest.mesh.face_count();
    j["eval_vertices"] = ctx.eval_count();
    j["camera_count"] = report.cameras.size();
    const auto detected = report.detection.detected_curve();
    const auto px = report.detection.pixel_curve();
    j["initial_detected"] = detected.empty() ? 0 : detected[report.initial_camera_count - 1];
    j["final_detected"] = detected.empty() ? 0 : detected.back();
    j["final_pixels"] = px.empty() ? 0 : px.back();
    j["mean_final_visibility"] = report.mean_final_visibility;
    std::ofstream out(path("report.json"));
    if (!out) throw IoError("cannot write report.json");
    out << j.dump(2) << '\n';
  }
  return report;
}

// ---------------------------------------------------------------------------
// Batch of repeated runs with derived seeds
// ---------------------------------------------------------------------------

struct BatchReport {
  std::vector<RunReport> runs;
  // Aggregates indexed by camera count - 1.
  std::vector<double> mean_detected, min_detected, max_detected;
  std::vector<double> mean_pixels;
};

inline void save_batch_csv(const std::string& path, const BatchReport& batch) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write batch CSV: " + path);
  out << "num_cameras,mean_detected,min_detected,max_detected,mean_pixels\n";
  for (std::size_t c = 0; c < batch.mean_detected.size(); ++c) {
    out << (c + 1) << ',' << detail::format_double(batch.mean_detected[c]) << ','
        << detail::format_double(batch.min_detected[c]) << ','
        << detail::format_double(batch.max_detected[c]) << ','
        << detail::format_double(batch.mean_pixels[c]) << '\n';
  }
}

inline BatchReport run_batch(const ExperimentConfig& cfg, int n_runs,
                             const std::string& out_dir = {}) {
  if (n_runs <= 0) throw std::invalid_argument("batch needs at least one run");
  namespace fs = std::filesystem;
  BatchReport batch;
  for (int r = 0; r < n_runs; ++r) {
    std::string run_dir;
    if (!out_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "run_%03d", r);
      run_dir = (fs::path(out_dir) / name).string();
    }
    batch.runs.push_back(run_simulation_experiment(cfg, derive_seed(cfg.master_seed, r), run_dir));
  }

  const int cameras = batch.runs.front().detection.camera_count();
  batch.mean_detected.assign(cameras, 0.0);
  batch.min_detected.assign(cameras, 1e300);
  batch.max_detected.assign(cameras, -1e300);
  batch.mean_pixels.assign(cameras, 0.0);
  for (const RunReport& run : batch.runs) {
    const auto detected = run.detection.detected_curve();
    const auto px = run.detection.pixel_curve();
    for (int c = 0; c < cameras; ++c) {
      batch.mean_detected[c] += detected[c];
      batch.min_detected[c] = std::min(batch.min_detected[c], static_cast<double>(detected[c]));
      batch.max_detected[c] = std::max(batch.max_detected[c], static_cast<double>(detected[c]));
      batch.mean_pixels[c] += static_cast<double>(px[c]);
    }
  }
  for (int c = 0; c < cameras; ++c) {
    batch.mean_detected[c] /= n_runs;
    batch.mean_pixels[c] /= n_runs;
  }
  if (!out_dir.empty()) save_batch_csv((fs::path(out_dir) / "aggregate.csv").string(), batch);
  return batch;
}

}  // namespace nbv
