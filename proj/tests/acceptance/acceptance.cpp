// Acceptance gate for the NBV planning toolkit.
//
// Runs the full simulated-search protocol plus an exact property suite and
// prints one PASS/FAIL line per criterion. The process exit code is the
// number of failed criteria, so `ctest` treats any failure as a test failure.
//
// Thresholds are pinned below and never adapt to the measured values.

#include <nbv/nbv.hpp>

#include "../support/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

using namespace nbv;

namespace {

// ---------------------------------------------------------------------------
// Pinned thresholds
// ---------------------------------------------------------------------------

constexpr int kRuns = 10;                          // seeded missions per heuristic
constexpr double kInitialDetectedLo = 25.0;        // mean manikins found by the bare grid
constexpr double kInitialDetectedHi = 55.0;
constexpr double kRunSecondsBudget = 300.0;        // wall-clock ceiling per mission
constexpr double kVisibilityFractionFloor = 0.85;  // mean detected fraction, J_v planning
constexpr double kGeometryFractionFloor = 0.70;    // mean detected fraction, J_d planning
constexpr double kConvergenceGainCap = 0.35;       // relative best-fitness gain, gen 20 -> 40
constexpr double kJacobianTol = 1e-4;              // analytic vs finite differences, relative
constexpr double kRoundTripTol = 1e-9;             // camera transform round trip, absolute
constexpr int kOracleMeshes = 10;                  // BVH vs exhaustive scan
constexpr int kOracleRays = 1000;
constexpr double kWeightKneeTol = 1e-12;           // view-count weight at the knee
constexpr double kLogDetTol = 1e-6;                // log-determinant vs dense eigen oracle
constexpr double kIncrementalTol = 1e-9;           // incremental vs batch information
constexpr int kPlantedSeeds = 20;                  // planted-optimum dataset trials
constexpr int kPlantedPoolSize = 500;
constexpr long kPlantedId = 137;

// Planning scores every mesh vertex (stride 1), the same resolution the
// shipped defaults use; the value is echoed in the output so the protocol is
// explicit.
constexpr int kEvalStride = 1;

constexpr uint64_t kMissionMasterSeed = 811;     // shared by both heuristics: same worlds
constexpr uint64_t kConvergenceMasterSeed = 555777;
constexpr uint64_t kPlantedMasterSeed = 7001;

int g_failures = 0;

void report(int criterion, bool pass, const std::string& text) {
  std::printf("%s - criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, text.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void note(const std::string& text) {
  std::printf("       %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

double mean(const std::vector<int>& values) {
  double total = 0.0;
  for (int v : values) total += v;
  return values.empty() ? 0.0 : total / static_cast<double>(values.size());
}

double mean_ll(const std::vector<long long>& values) {
  double total = 0.0;
  for (long long v : values) total += static_cast<double>(v);
  return values.empty() ? 0.0 : total / static_cast<double>(values.size());
}

// ---------------------------------------------------------------------------
// Simulated search missions (criteria 1-4, plus monotonicity evidence)
// ---------------------------------------------------------------------------

struct MissionStats {
  std::vector<int> initial;          // detected after the 36-view grid
  std::vector<int> final_detected;   // detected after 20 planned views
  std::vector<long long> pixels;     // total target pixels over all cameras
  double max_seconds = 0.0;
  bool curves_monotone = true;
  bool best_ever_monotone = true;
};

ExperimentConfig mission_config(Heuristic heuristic) {
  ExperimentConfig cfg;  // defaults: 30x30 m, 162 trees, 100 manikins, 6x6 grid,
                         // 20 planned views, population 50, 20 generations
  cfg.heuristic = heuristic;
  cfg.master_seed = kMissionMasterSeed;
  cfg.fitness.vertex_stride = kEvalStride;
  return cfg;
}

MissionStats run_missions(Heuristic heuristic, const char* tag) {
  const ExperimentConfig cfg = mission_config(heuristic);
  MissionStats stats;
  for (int r = 0; r < kRuns; ++r) {
    const auto started = std::chrono::steady_clock::now();
    const RunReport rep = run_simulation_experiment(cfg, derive_seed(cfg.master_seed, r));
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    stats.max_seconds = std::max(stats.max_seconds, seconds);

    const std::vector<int> curve = rep.detection.detected_curve();
    const std::vector<long long> px = rep.detection.pixel_curve();
    stats.initial.push_back(curve[rep.initial_camera_count - 1]);
    stats.final_detected.push_back(curve.back());
    stats.pixels.push_back(px.back());
    for (std::size_t c = 1; c < curve.size(); ++c)
      if (curve[c] < curve[c - 1]) stats.curves_monotone = false;
    for (const EvolutionResult& ea : rep.planning)
      for (std::size_t g = 1; g < ea.stats.size(); ++g)
        if (ea.stats[g].best_ever < ea.stats[g - 1].best_ever) stats.best_ever_monotone = false;

    note(fmt("[%s] run %d: grid %d -> final %d of %d detected, %lld px, %.1f s", tag, r,
             curve[rep.initial_camera_count - 1], curve.back(), rep.detection.manikin_count(),
             px.back(), seconds));
  }
  return stats;
}

// ---------------------------------------------------------------------------
// Optimizer convergence probe (criterion 5)
// ---------------------------------------------------------------------------

struct ConvergenceStats {
  double mean_gain = 0.0;
  double max_gain = 0.0;
  bool monotone = true;
  bool positive_baseline = true;
};

ConvergenceStats convergence_probe() {
  ConvergenceStats out;
  const ForestParams forest;
  const GridSpec grid;
  const CameraIntrinsics intr;
  const PoseBounds bounds = make_pose_bounds(BoundsSpec{}, forest.width, forest.depth);
  double total_gain = 0.0;
  for (int r = 0; r < kRuns; ++r) {
    const uint64_t seed = derive_seed(kConvergenceMasterSeed, r);
    const ForestScene world = generate_scene(forest, derive_seed(seed, 1));
    const auto scene = make_scene(TriangleMesh(world.mesh));
    const std::vector<CameraView> placed =
        make_initial_grid(grid, intr, forest.width, forest.depth);
    FitnessOptions fopt;
    fopt.vertex_stride = kEvalStride;
    const FitnessContext ctx = make_fitness_context(scene, placed, fopt);

    EvolutionConfig evo;
    evo.generations = 40;
    evo.seed = derive_seed(seed, 100);
    const auto fitness = [&](const Genome& g) {
      const CameraView cam =
          make_camera(Vec3(g[kGeneX], g[kGeneY], g[kGeneZ]), g[kGenePitch], g[kGeneYaw],
                      intr.focal, deg_to_rad(intr.hfov_deg), deg_to_rad(intr.vfov_deg));
      return visibility_fitness(ctx, cam);
    };
    const EvolutionResult ea = evolve(fitness, bounds, evo);
    for (std::size_t g = 1; g < ea.stats.size(); ++g)
      if (ea.stats[g].best_ever < ea.stats[g - 1].best_ever) out.monotone = false;

    const double b20 = ea.stats[20].best_ever;
    const double b40 = ea.stats[40].best_ever;
    if (b20 <= 0.0) {
      out.positive_baseline = false;
      continue;
    }
    const double gain = (b40 - b20) / b20;
    total_gain += gain;
    out.max_gain = std::max(out.max_gain, gain);
    note(fmt("[conv] run %d: best 20 gen %.3f, 40 gen %.3f, gain %.1f%%", r, b20, b40,
             100.0 * gain));
  }
  out.mean_gain = total_gain / kRuns;
  return out;
}

// ---------------------------------------------------------------------------
// Exact property suite (criterion 6)
// ---------------------------------------------------------------------------

CameraView random_aerial_camera(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> xy(-20.0, 50.0);
  std::uniform_real_distribution<double> z(2.0, 30.0);
  std::uniform_real_distribution<double> pitch(deg_to_rad(-90.0), 0.0);
  std::uniform_real_distribution<double> yaw(-M_PI, M_PI);
  return make_camera(Vec3(xy(rng), xy(rng), z(rng)), pitch(rng), yaw(rng), 1.0, deg_to_rad(84.0),
                     deg_to_rad(62.0));
}

bool check_jacobian(std::string& detail) {
  std::mt19937_64 rng(90210);
  std::uniform_real_distribution<double> ground(-15.0, 45.0);
  std::uniform_real_distribution<double> height(0.0, 5.0);
  double worst = 0.0;
  int tested = 0;
  while (tested < 1000) {
    const CameraView cam = random_aerial_camera(rng);
    const Vec3 point(ground(rng), ground(rng), height(rng));
    if (to_local(cam, point).z() < 0.5) continue;  // keep finite differences well posed
    ++tested;
    const Mat23 analytic = colinearity_jacobian(cam, point);
    const Mat23 fd = oracle::fd_jacobian(cam, point);
    const double scale = std::max(1.0, analytic.cwiseAbs().maxCoeff());
    worst = std::max(worst, (analytic - fd).cwiseAbs().maxCoeff() / scale);
  }
  detail = fmt("[a] projection jacobian vs finite differences: max rel err %.2e (tol %.0e)",
               worst, kJacobianTol);
  return worst < kJacobianTol;
}

bool check_round_trip(std::string& detail) {
  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> span(-50.0, 50.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const CameraView cam = random_aerial_camera(rng);
    const Vec3 p(span(rng), span(rng), span(rng));
    worst = std::max(worst, (to_global(cam, to_local(cam, p)) - p).norm());
  }
  detail = fmt("[b] camera transform round trip: max err %.2e (tol %.0e)", worst, kRoundTripTol);
  return worst < kRoundTripTol;
}

bool check_ray_oracle(std::string& detail) {
  std::mt19937_64 rng(20240816);
  long hits = 0;
  long mismatches = 0;
  for (int m = 0; m < kOracleMeshes; ++m) {
    const TriangleMesh soup = oracle::random_soup(300 + 170 * m, rng);
    const AccelIndex index(soup);
    for (int r = 0; r < kOracleRays; ++r) {
      const Ray ray = oracle::random_ray(rng);
      const auto fast = index.intersect_first(ray);
      const auto slow = oracle::brute_force_first_hit(soup, ray);
      if (fast.has_value() != slow.has_value()) {
        ++mismatches;
        continue;
      }
      if (fast) {
        ++hits;
        if (fast->t != slow->t || fast->face_id != slow->face_id) ++mismatches;
      }
      if (index.any_hit(ray) != oracle::brute_force_any_hit(soup, ray)) ++mismatches;
    }
  }
  detail = fmt("[c] accelerated ray casts vs exhaustive scan: %d meshes x %d rays, %ld hits, "
               "%ld mismatches (exact)",
               kOracleMeshes, kOracleRays, hits, mismatches);
  return mismatches == 0 && hits > 1000;
}

bool check_weight_knee(std::string& detail) {
  const double w = weight_for_count(3, 3.0);
  detail = fmt("[d] view-count weight at the knee: |w(3) - 1/2| = %.2e (tol %.0e)",
               std::abs(w - 0.5), kWeightKneeTol);
  return std::abs(w - 0.5) <= kWeightKneeTol;
}

bool check_logdet(std::string& detail) {
  std::mt19937_64 rng(555);
  std::uniform_real_distribution<double> entry(-1.0, 1.0);
  std::uniform_real_distribution<double> magnitude(-3.0, 3.0);
  const double lambda = 1e-9;
  double worst = 0.0;
  for (int i = 0; i < 300; ++i) {
    Eigen::Matrix<double, 5, 3> basis;
    for (int r = 0; r < 5; ++r)
      for (int c = 0; c < 3; ++c) basis(r, c) = entry(rng);
    const Mat3 g = std::pow(10.0, magnitude(rng)) * (basis.transpose() * basis);
    const double fast = detail::logdet_regularized(g, lambda);
    const double slow = oracle::eigen_logdet(g + lambda * Mat3::Identity());
    worst = std::max(worst, std::abs(fast - slow) / std::max(1.0, std::abs(slow)));
  }
  detail = fmt("[e] log-determinant vs dense eigen oracle: max rel err %.2e (tol %.0e)", worst,
               kLogDetTol);
  return worst < kLogDetTol;
}

bool check_incremental(std::string& detail) {
  ForestParams params;
  params.width = 14.0;
  params.depth = 14.0;
  const ForestScene world = generate_scene(params, 321);
  const auto scene = make_scene(TriangleMesh(world.mesh));

  std::vector<CameraView> cams;
  for (int i = 0; i < 6; ++i) {
    const double angle = i * M_PI / 3.0;
    cams.push_back(make_camera(Vec3(7.0 + 9.0 * std::cos(angle), 7.0 + 9.0 * std::sin(angle),
                                    6.0 + 3.0 * i),
                               deg_to_rad(-40.0 - 8.0 * i), angle + M_PI, 1.0, deg_to_rad(84.0),
                               deg_to_rad(62.0)));
  }

  const FitnessContext batch = make_fitness_context(scene, cams);
  const std::vector<CameraView> first(cams.begin(), cams.begin() + 1);
  FitnessContext incremental = make_fitness_context(scene, first);
  for (std::size_t i = 1; i < cams.size(); ++i)
    incremental = commit_view(incremental, cams[i]);

  bool counts_equal = incremental.counts == batch.counts;
  double worst_vertex = 0.0;
  for (std::size_t i = 0; i < batch.base_logdet.size(); ++i)
    worst_vertex =
        std::max(worst_vertex, std::abs(incremental.base_logdet[i] - batch.base_logdet[i]));
  const double sum_err = std::abs(incremental.base_sum - batch.base_sum) /
                         std::max<double>(1.0, static_cast<double>(batch.eval_count()));
  detail = fmt("[f] incremental vs batch information: counts %s, max per-vertex err %.2e, "
               "scaled sum err %.2e (tol %.0e)",
               counts_equal ? "equal" : "DIFFER", worst_vertex, sum_err, kIncrementalTol);
  return counts_equal && worst_vertex < kIncrementalTol && sum_err < kIncrementalTol;
}

bool check_greedy(std::string& detail) {
  ForestParams params;
  params.width = 10.0;
  params.depth = 10.0;
  params.tree_density = 0.08;
  const ForestScene world = generate_scene(params, 77);
  const auto scene = make_scene(TriangleMesh(world.mesh));
  const std::vector<CameraView> placed = {make_camera(
      Vec3(5.0, 5.0, 18.0), deg_to_rad(-90.0), 0.0, 1.0, deg_to_rad(84.0), deg_to_rad(62.0))};
  const FitnessContext ctx = make_fitness_context(scene, placed);

  ImageDataset dataset;
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> xy(-2.0, 12.0);
  std::uniform_real_distribution<double> z(4.0, 16.0);
  std::uniform_real_distribution<double> pitch(deg_to_rad(-90.0), deg_to_rad(-10.0));
  std::uniform_real_distribution<double> yaw(-M_PI, M_PI);
  for (long i = 0; i < 30; ++i) {
    PosedImage image;
    image.id = i;
    image.pose = make_camera(Vec3(xy(rng), xy(rng), z(rng)), pitch(rng), yaw(rng), 1.0,
                             deg_to_rad(84.0), deg_to_rad(62.0));
    dataset.images.push_back(image);
  }

  bool ok = true;
  for (const Heuristic heuristic : {Heuristic::visibility, Heuristic::geometry}) {
    const SelectionResult fast = greedy_select(ctx, dataset, heuristic, 6);
    const std::vector<long> slow = oracle::reference_greedy(ctx, dataset, heuristic, 6);
    for (std::size_t s = 0; s < slow.size(); ++s)
      if (fast.steps[s].image_id != slow[s]) ok = false;
  }
  detail = fmt("[g] greedy dataset selection vs reference implementation: %s "
               "(both heuristics, 6 steps of 30 candidates)",
               ok ? "identical pick sequences" : "SEQUENCES DIFFER");
  return ok;
}

// ---------------------------------------------------------------------------
// Planted-optimum dataset (criterion 7)
// ---------------------------------------------------------------------------

std::vector<CameraView> planted_pool(uint64_t seed, const CameraView& planted) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> xy(-5.0, 25.0);
  // Aerial decoys stay well above the slab so sight lines cannot dip more
  // than ~1.5 m beneath its rim.
  std::uniform_real_distribution<double> z(10.0, 30.0);
  std::uniform_real_distribution<double> pitch(deg_to_rad(-90.0), 0.0);
  std::uniform_real_distribution<double> yaw(-M_PI, M_PI);
  std::vector<CameraView> pool;
  pool.reserve(kPlantedPoolSize);
  for (int i = 0; i < kPlantedPoolSize; ++i)
    pool.push_back(make_camera(Vec3(xy(rng), xy(rng), z(rng)), pitch(rng), yaw(rng), 1.0,
                               deg_to_rad(84.0), deg_to_rad(62.0)));
  pool[kPlantedId] = planted;
  return pool;
}

void run_planted_optimum() {
  namespace fs = std::filesystem;
  // Flat 20x20 m lawn with a thin square slab hovering 0.5 m above its
  // center. A 4x4 overhead survey saturates every vertex it can see; the
  // ground vertices deeper than 1.5 m under the slab stay at zero views and
  // only a camera slipped beneath the slab can reach them.
  ForestParams lawn;
  lawn.width = 20.0;
  lawn.depth = 20.0;
  lawn.tree_density = 0.0;
  TriangleMesh world = generate_scene(lawn, 4242).mesh;
  TriangleMesh slab;
  slab.vertices = {Vec3(4.0, 4.0, 0.5), Vec3(16.0, 4.0, 0.5), Vec3(16.0, 16.0, 0.5),
                   Vec3(4.0, 16.0, 0.5)};
  slab.faces = {{0, 1, 2}, {0, 2, 3}};
  world.append(slab);
  const auto scene = make_scene(std::move(world));

  GridSpec survey;
  survey.rows = 4;
  survey.cols = 4;
  survey.altitude = 18.0;
  const CameraIntrinsics intr;
  const std::vector<CameraView> placed = make_initial_grid(survey, intr, lawn.width, lawn.depth);
  const FitnessContext ctx = make_fitness_context(scene, placed);

  int fresh = 0;
  for (int count : ctx.counts)
    if (count == 0) ++fresh;

  const CameraView planted =
      make_camera(Vec3(10.0, 2.5, 0.25), deg_to_rad(-1.0), deg_to_rad(90.0), intr.focal,
                  deg_to_rad(intr.hfov_deg), deg_to_rad(intr.vfov_deg));

  int correct = 0;
  long long worst_winner = -1;
  for (int trial = 0; trial < kPlantedSeeds; ++trial) {
    const std::vector<CameraView> pool =
        planted_pool(derive_seed(kPlantedMasterSeed, trial), planted);
    const fs::path csv = fs::temp_directory_path() / fmt("nbv_planted_%02d.csv", trial);
    save_camera_csv(csv.string(), pool);
    const ImageDataset dataset = load_dataset(csv.string());
    const SelectionResult sel = greedy_select(ctx, dataset, Heuristic::visibility, 1);
    if (sel.steps.at(0).image_id == kPlantedId)
      ++correct;
    else
      worst_winner = sel.steps.at(0).image_id;
  }

  const bool pass = correct == kPlantedSeeds;
  note(fmt("lawn+slab scene: %zu vertices, %d never seen by the %zu-view survey",
           scene->mesh.vertex_count(), fresh, placed.size()));
  report(7, pass,
         fmt("dataset mode finds the planted under-slab pose first in %d of %d seeded pools "
             "of %d candidates%s",
             correct, kPlantedSeeds, kPlantedPoolSize,
             pass ? "" : fmt(" (last wrong winner: image %lld)", worst_winner).c_str()));
}

}  // namespace

int main() {
  std::printf("NBV planning toolkit acceptance suite\n");
  std::printf("protocol: %d missions per heuristic, 30x30 m forest, 100 hidden manikins,\n",
              kRuns);
  std::printf("          6x6 nadir grid + 20 planned views, optimizer population 50 x 20 "
              "generations,\n");
  std::printf("          fitness mesh at full vertex resolution (stride %d), detection at "
              "160x120\n\n",
              kEvalStride);

  const MissionStats vis = run_missions(Heuristic::visibility, "J_v");
  const MissionStats geo = run_missions(Heuristic::geometry, "J_d");
  const ConvergenceStats conv = convergence_probe();

  const double mean_initial = mean(vis.initial);
  report(1,
         mean_initial >= kInitialDetectedLo && mean_initial <= kInitialDetectedHi &&
             vis.max_seconds <= kRunSecondsBudget && geo.max_seconds <= kRunSecondsBudget,
         fmt("bare 36-view grid detects %.1f of 100 manikins on average over %d runs "
             "(accepted range %.0f-%.0f), slowest mission %.0f s (budget %.0f s)",
             mean_initial, kRuns, kInitialDetectedLo, kInitialDetectedHi,
             std::max(vis.max_seconds, geo.max_seconds), kRunSecondsBudget));

  const double vis_fraction = mean(vis.final_detected) / 100.0;
  report(2, vis_fraction >= kVisibilityFractionFloor,
         fmt("visibility-driven planning reaches mean detected fraction %.3f "
             "(floor %.2f) after 20 planned views",
             vis_fraction, kVisibilityFractionFloor));

  const double geo_fraction = mean(geo.final_detected) / 100.0;
  report(3, geo_fraction >= kGeometryFractionFloor && vis_fraction > geo_fraction,
         fmt("geometry-driven planning reaches mean detected fraction %.3f (floor %.2f) "
             "while staying below the visibility heuristic's %.3f",
             geo_fraction, kGeometryFractionFloor, vis_fraction));

  const double vis_px = mean_ll(vis.pixels);
  const double geo_px = mean_ll(geo.pixels);
  report(4, geo_px > vis_px,
         fmt("geometry-driven views expose more target pixels: %.3g vs %.3g mean total",
             geo_px, vis_px));

  report(5,
         conv.mean_gain <= kConvergenceGainCap && conv.positive_baseline && conv.monotone &&
             vis.best_ever_monotone && geo.best_ever_monotone,
         fmt("doubling the optimizer budget to 40 generations gains %.1f%% mean best fitness "
             "(cap %.0f%%, max %.1f%%); best-ever fitness nondecreasing in every run",
             100.0 * conv.mean_gain, 100.0 * kConvergenceGainCap, 100.0 * conv.max_gain));

  {
    std::string detail;
    bool all_ok = true;
    for (auto* check : {&check_jacobian, &check_round_trip, &check_ray_oracle,
                        &check_weight_knee, &check_logdet, &check_incremental, &check_greedy}) {
      const bool ok = (*check)(detail);
      note(detail + (ok ? " - ok" : " - FAILED"));
      all_ok = all_ok && ok;
    }
    const bool monotone = vis.curves_monotone && geo.curves_monotone;
    note(fmt("[h] detection curves nondecreasing in all %d missions - %s", 2 * kRuns,
             monotone ? "ok" : "FAILED"));
    all_ok = all_ok && monotone;
    report(6, all_ok, "property suite (exact oracles, pinned tolerances)");
  }

  run_planted_optimum();

  std::printf("\n%d of 7 criteria passed\n", 7 - g_failures);
  return g_failures;
}
