#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "crowdloc/priors.hpp"
#include "crowdloc/scene.hpp"

namespace crowdloc {

// Per-cell active pyramid level: 0 means no anchors, 1..K selects level i.
// The K binary masks are views of this single field (is_active).
class AnchorMask {
 public:
  AnchorMask(int rows, int cols, int depth);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int depth() const noexcept { return depth_; }

  int level(int u, int v) const { return levels_.at(index(u, v)); }
  void set_level(int u, int v, int level);
  bool is_active(int i, int u, int v) const { return level(u, v) == i; }
  std::span<const int> levels() const noexcept { return levels_; }

  friend bool operator==(const AnchorMask&, const AnchorMask&) = default;

 private:
  std::size_t index(int u, int v) const;

  int rows_;
  int cols_;
  int depth_;
  std::vector<int> levels_;  // row-major, rows indexed by v
};

struct Anchor {
  int grid_u = 0;
  int grid_v = 0;
  int level = 0;  // 1..K
  int slot = 0;   // 1..s_level
  double base_x = 0.0;
  double base_y = 0.0;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

// Pre-sigmoid outputs of a locating head for one anchor.
struct RawPrediction {
  double ox = 0.0;
  double oy = 0.0;
  double c = 0.0;

  friend bool operator==(const RawPrediction&, const RawPrediction&) = default;
};

// A scored point: absolute position plus foreground probability.
struct Prediction {
  double x = 0.0;
  double y = 0.0;
  double p = 0.0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct Candidate {
  double x = 0.0;
  double y = 0.0;
  double p = 0.0;
  Anchor anchor;
  RawPrediction raw;

  Prediction prediction() const noexcept { return {x, y, p}; }
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

double sigmoid(double z) noexcept;

// Level i is assigned when s_i <= D < s_{i+1} (s_{K+1} = +inf). Cells below
// s_1 still get level 1 when D >= 0.5, i.e. when they round to one object.
AnchorMask build_anchor_mask(const DensityGrid& density,
                             const AnchorPyramid& pyramid);

// Anchors for every active cell in row-major cell order, then by slot.
std::vector<Anchor> instantiate_anchors(const AnchorMask& mask,
                                        const AnchorPyramid& pyramid);

// N_S: total anchors implied by the mask.
std::size_t candidate_count(const AnchorMask& mask, const AnchorPyramid& pyramid);

// x = base_x + sigmoid(ox) * cell_w - cell_w / 2 (likewise y), p = sigmoid(c).
std::vector<Candidate> decode_candidates(std::span<const Anchor> anchors,
                                         std::span<const RawPrediction> raw,
                                         int cell_h, int cell_w);

// Inference rule: in each cell keep the round(D(u,v)) most probable
// candidates, capped by what the cell owns. Ties go to the lower slot.
// Output is row-major by cell, then by descending p.
std::vector<Candidate> infer_select(std::span<const Candidate> candidates,
                                    const DensityGrid& density);

std::vector<Prediction> predictions_of(std::span<const Candidate> candidates);

// Candidate dump: header `cell_u,cell_v,level,slot,x,y,p`.
void write_candidates_csv(std::ostream& out, std::span<const Candidate> candidates);

// Reads a candidate dump, or any CSV whose header names x, y and p columns.
// The remaining provenance fields default to zero when absent.
std::vector<Candidate> read_candidates_csv(std::istream& in);

}  // namespace crowdloc
