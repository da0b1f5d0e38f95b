#pragma once

#include "nbv/camera.hpp"
#include "nbv/core.hpp"
#include "nbv/fitness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace nbv {

// One pre-captured candidate image: a pose plus optional per-manikin
// visibility labels (1 = the manikin shows in this image).
struct PosedImage {
  long id = 0;
  CameraView pose;
  std::vector<uint8_t> labels;
};

struct ImageDataset {
  std::vector<PosedImage> images;
  std::size_t label_count = 0;

  bool has_labels() const { return label_count > 0; }
};

// CSV: id,x,y,z,pitch_deg,yaw_deg,f,hfov_deg,vfov_deg[,sees_manikin_1,...].
// Label columns, when present, must be numbered consecutively from 1.
inline ImageDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path, 1, "empty dataset");
  const auto header = detail::split(detail::trim(line), ',');
  const std::vector<std::string> base = {"id",      "x", "y",        "z",
                                         "pitch_deg", "yaw_deg", "f", "hfov_deg",
                                         "vfov_deg"};
  if (header.size() < base.size())
    throw ParseError(path, 1, "expected at least " + std::to_string(base.size()) + " columns");
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (detail::trim(header[i]) != base[i])
      throw ParseError(path, 1, "column " + std::to_string(i + 1) + " must be '" + base[i] + "'");
  }
  ImageDataset dataset;
  dataset.label_count = header.size() - base.size();
  for (std::size_t k = 0; k < dataset.label_count; ++k) {
    const std::string expected = "sees_manikin_" + std::to_string(k + 1);
    if (detail::trim(header[base.size() + k]) != expected)
      throw ParseError(path, 1, "label column must be '" + expected + "'");
  }

  std::unordered_set<long> seen_ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = detail::trim(line);
    if (row.empty()) continue;
    const auto fields = detail::split(row, ',');
    if (fields.size() != base.size() + dataset.label_count)
      throw ParseError(path, line_no, "expected " +
                           std::to_string(base.size() + dataset.label_count) + " fields, got " +
                           std::to_string(fields.size()));
    PosedImage image;
    image.id = std::lround(detail::parse_double_field(fields[0], path, line_no, "id"));
    if (!seen_ids.insert(image.id).second)
      throw ParseError(path, line_no, "duplicate image id " + std::to_string(image.id));
    const double x = detail::parse_double_field(fields[1], path, line_no, "x");
    const double y = detail::parse_double_field(fields[2], path, line_no, "y");
    const double z = detail::parse_double_field(fields[3], path, line_no, "z");
    const double pitch = deg_to_rad(detail::parse_double_field(fields[4], path, line_no, "pitch_deg"));
    const double yaw = deg_to_rad(detail::parse_double_field(fields[5], path, line_no, "yaw_deg"));
    const double f = detail::parse_double_field(fields[6], path, line_no, "f");
    const double hfov = deg_to_rad(detail::parse_double_field(fields[7], path, line_no, "hfov_deg"));
    const double vfov = deg_to_rad(detail::parse_double_field(fields[8], path, line_no, "vfov_deg"));
    image.pose = make_camera(Vec3(x, y, z), pitch, yaw, f, hfov, vfov);
    for (std::size_t k = 0; k < dataset.label_count; ++k) {
      const std::string value = detail::trim(fields[base.size() + k]);
      if (value != "0" && value != "1")
        throw ParseError(path, line_no, "label must be 0 or 1, got '" + value + "'");
      image.labels.push_back(value == "1");
    }
    dataset.images.push_back(std::move(image));
  }
  return dataset;
}

// ---------------------------------------------------------------------------
// Greedy next-best-view over a fixed candidate set
// ---------------------------------------------------------------------------

struct SelectionStep {
  int step = 0;
  long image_id = 0;
  double score = 0.0;
};

struct SelectionResult {
  std::vector<SelectionStep> steps;
  FitnessContext context;  // state after all selected views were committed
};

// Picks n_views images one at a time, each maximizing the heuristic given
// everything committed so far. Selected images leave the candidate pool.
// Exact score ties resolve to the lowest image id.
inline SelectionResult greedy_select(const FitnessContext& initial, const ImageDataset& dataset,
                                     Heuristic heuristic, int n_views,
                                     FitnessTraceWriter* trace = nullptr) {
  if (n_views < 0) throw std::invalid_argument("n_views must be >= 0");
  if (static_cast<std::size_t>(n_views) > dataset.images.size())
    throw std::invalid_argument("dataset has " + std::to_string(dataset.images.size()) +
                                " images, fewer than the " + std::to_string(n_views) +
                                " requested views");

  SelectionResult result{{}, initial};
  std::vector<std::size_t> remaining(dataset.images.size());
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});

  for (int step = 0; step < n_views; ++step) {
    std::vector<double> scores(remaining.size());
    parallel_for(remaining.size(), [&](std::size_t i) {
      scores[i] = heuristic_score(result.context, dataset.images[remaining[i]].pose, heuristic);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < remaining.size(); ++i) {
      const long id = dataset.images[remaining[i]].id;
      const long best_id = dataset.images[remaining[best]].id;
      if (scores[i] > scores[best] || (scores[i] == scores[best] && id < best_id)) best = i;
    }
    if (trace) {
      for (std::size_t i = 0; i < remaining.size(); ++i) {
        const CameraView& pose = dataset.images[remaining[i]].pose;
        trace->row(step, static_cast<int>(dataset.images[remaining[i]].id),
                   visibility_fitness(result.context, pose),
                   geometry_fitness(result.context, pose));
      }
      trace->flush();
    }
    const PosedImage& chosen = dataset.images[remaining[best]];
    result.steps.push_back({step, chosen.id, scores[best]});
    result.context = commit_view(result.context, chosen.pose);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return result;
}

inline void save_selection_csv(const std::string& path,
                               const std::vector<SelectionStep>& steps) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write selection CSV: " + path);
  out << "step,image_id,score\n";
  for (const SelectionStep& s : steps)
    out << s.step << ',' << s.image_id << ',' << detail::format_double(s.score) << '\n';
}

// ---------------------------------------------------------------------------
// Label-based detection report
// ---------------------------------------------------------------------------

struct LabelReport {
  bool labeled = false;
  std::vector<int> views_per_manikin;  // selected images labeled 1, per manikin
  int detected = 0;                    // manikins with at least one such image
};

inline LabelReport label_report(const ImageDataset& dataset,
                                const std::vector<SelectionStep>& steps) {
  LabelReport report;
  if (!dataset.has_labels()) return report;  // caller prints an unlabeled marker
  report.labeled = true;
  report.views_per_manikin.assign(dataset.label_count, 0);
  for (const SelectionStep& s : steps) {
    const auto it = std::find_if(dataset.images.begin(), dataset.images.end(),
                                 [&](const PosedImage& im) { return im.id == s.image_id; });
    for (std::size_t k = 0; k < dataset.label_count; ++k)
      if (it->labels[k]) ++report.views_per_manikin[k];
  }
  for (int count : report.views_per_manikin)
    if (count > 0) ++report.detected;
  return report;
}

}  // namespace nbv
