#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdloc/scene.hpp"

namespace crowdloc {

// One anchor set: `s` positions relative to a cell origin, each inside
// [0, cell_w) x [0, cell_h).
struct AnchorLevel {
  int s = 0;
  std::vector<Point2> centers;

  friend bool operator==(const AnchorLevel&, const AnchorLevel&) = default;
};

// K anchor sets of strictly increasing size over a fixed grid cell.
class AnchorPyramid {
 public:
  AnchorPyramid(int cell_h, int cell_w, std::vector<AnchorLevel> levels);

  int cell_h() const noexcept { return cell_h_; }
  int cell_w() const noexcept { return cell_w_; }
  // Number of levels K.
  int depth() const noexcept { return static_cast<int>(levels_.size()); }
  // 1-based level index, matching the anchor-mask encoding.
  const AnchorLevel& level(int i) const { return levels_.at(static_cast<std::size_t>(i - 1)); }
  std::span<const AnchorLevel> levels() const noexcept { return levels_; }
  int anchors_at(int i) const { return level(i).s; }
  // Sum of s_i over all levels.
  int total_slots() const noexcept;

  std::string to_json() const;
  static AnchorPyramid from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static AnchorPyramid load(const std::filesystem::path& path);

  friend bool operator==(const AnchorPyramid&, const AnchorPyramid&) = default;

 private:
  int cell_h_;
  int cell_w_;
  std::vector<AnchorLevel> levels_;
};

// Points of every nonempty cell, relative to the cell origin. Output order is
// scene order, then row-major cell order; empty cells are omitted.
std::vector<std::vector<Point2>> crop_to_cells(std::span<const Scene> scenes,
                                               int cell_h, int cell_w);

struct KMeansResult {
  std::vector<Point2> centers;
  double inertia = 0.0;  // sum of squared distances to the assigned center
  int iterations = 0;
};

// Lloyd's algorithm with seeded k-means++ initialization. Stops once the
// largest center movement drops below `tol` or after `max_iter` iterations.
// Empty clusters are reseeded to the point farthest from its center.
// Throws ValidationError when there are fewer points than clusters.
KMeansResult kmeans(std::span<const Point2> points, int k, std::uint64_t seed,
                    int max_iter = 300, double tol = 1e-9);

struct PriorLearnStats {
  std::vector<double> inertia;      // per level
  std::vector<bool> used_fallback;  // per level
  std::size_t pooled_points = 0;
  std::size_t nonempty_cells = 0;
};

// s_i evenly spaced positions laid out on a near-square lattice in the cell.
std::vector<Point2> uniform_layout(int s, int cell_h, int cell_w);

// Runs K-means once per entry of `s_levels` over the pooled cell-relative
// points of all scenes. Levels whose population is smaller than s_i fall
// back to uniform_layout.
AnchorPyramid learn_pyramid(std::span<const Scene> scenes,
                            std::span<const int> s_levels, int cell_h,
                            int cell_w, std::uint64_t seed,
                            PriorLearnStats* stats = nullptr);

}  // namespace crowdloc
