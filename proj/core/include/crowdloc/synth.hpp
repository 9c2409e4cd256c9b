#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "crowdloc/aaps.hpp"
#include "crowdloc/count_loss.hpp"
#include "crowdloc/ctr.hpp"
#include "crowdloc/priors.hpp"
#include "crowdloc/scene.hpp"

namespace crowdloc {

struct SceneConfig {
  int width = 128;
  int height = 128;
  int n_clusters = 2;
  int min_points_per_cluster = 10;
  int max_points_per_cluster = 30;
  double cluster_sigma = 6.0;
  int background_points = 8;
  std::uint64_t seed = 0;
};

// Gaussian clusters around uniform centers (clipped to the image) plus
// uniform background points. Deterministic for a given seed.
Scene generate_scene(const SceneConfig& cfg);

// Free per-anchor logits standing in for learned locating heads. Parameters
// exist for every (cell, level, slot) so that the active subset can change
// with the density grid.
class ToyPredictor {
 public:
  ToyPredictor(int rows, int cols, const AnchorPyramid& pyramid);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

  RawPrediction& anchor_params(const Anchor& a);
  const RawPrediction& anchor_params(const Anchor& a) const;
  double& density_param(int u, int v);
  double density_param(int u, int v) const;

  const std::vector<RawPrediction>& all_anchor_params() const noexcept { return anchors_; }
  const std::vector<double>& all_density_params() const noexcept { return density_; }

  friend bool operator==(const ToyPredictor&, const ToyPredictor&) = default;

 private:
  std::size_t slot_index(const Anchor& a) const;

  int rows_;
  int cols_;
  std::vector<int> level_offset_;
  int slots_per_cell_;
  std::vector<RawPrediction> anchors_;
  std::vector<double> density_;
};

struct TrainConfig {
  bool use_ctr = true;
  // Use the ground-truth count grid instead of learning one with count_loss.
  bool oracle_density = true;
  int steps = 500;
  double lr = 0.1;
  std::uint64_t seed = 0;
  // Std. dev. (pixels) of per-step Gaussian noise on the training targets,
  // modelling annotations placed anywhere on a head. 0 disables it.
  double annotation_jitter = 0.0;
  // Learned density is density_cap * sigmoid(d).
  double density_cap = 16.0;
  double eval_sigma = 8.0;
  CascadeConfig cascade;
  LocateLossOptions locate;  // use_ctr above overrides locate.use_ctr
};

struct TraceRecord {
  int step = 0;
  double locate_loss = 0.0;
  double count_loss = 0.0;
  double iou = 0.0;
  double f1 = 0.0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct TrainResult {
  ToyPredictor predictor;
  std::vector<TraceRecord> trace;
  // Every candidate decoded after the final update.
  std::vector<Candidate> final_candidates;
  // The subset kept by the inference rule.
  std::vector<Candidate> final_selection;
};

// Plain gradient descent on the full loss stack. Each step records metrics
// for the current parameters and then applies the update. Throws
// NumericError naming the step if a loss turns non-finite.
TrainResult train_toy(const Scene& scene, const AnchorPyramid& pyramid,
                      const TrainConfig& cfg);

// `step,locate_loss,count_loss,iou,f1`
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);

}  // namespace crowdloc
