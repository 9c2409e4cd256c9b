#pragma once

#include <vector>

#include "crowdloc/matrix.hpp"
#include "crowdloc/scene.hpp"

namespace crowdloc {

// Which regions share a softmax when reweighting a level by its parent
// level's losses.
enum class SoftmaxScope {
  kParentLevel,   // all regions of the parent level in the image
  kSiblingGroup,  // parents that share a grandparent (all, at the top)
};

struct CascadeConfig {
  // Levels r = 0..t; a level-r region spans 2^r x 2^r cells.
  int t = 0;
  // Normalization constant (batch size in batched training).
  double batch_norm = 1.0;
  SoftmaxScope softmax_scope = SoftmaxScope::kParentLevel;
  // When false the region weights are constants for differentiation.
  bool differentiate_weights = false;
};

struct CascadeLoss {
  double value = 0.0;
  // weights[r](i, j): weight applied to the level-r region (i, j).
  std::vector<Matrix> weights;
};

struct CountLossOutput {
  double cascade = 0.0;
  double regularizer = 0.0;
  double total = 0.0;
  std::vector<Matrix> per_region_weights;
  Matrix grad;  // d total / d pred, laid out like the density grid
};

// Sums over 2^r x 2^r blocks. Edge blocks are zero-padded, so the result has
// ceil(rows / 2^r) x ceil(cols / 2^r) entries and preserves total mass.
Matrix region_counts(const Matrix& grid, int r);
Matrix region_counts(const DensityGrid& grid, int r);

// Coarse-to-fine L1 counting loss. Level-r regions carry the size factor
// 2^(r+1) / (rows * cols) and, below the coarsest level, a softmax weight of
// their parent region's loss.
CascadeLoss cascade_loss(const DensityGrid& pred, const DensityGrid& gt,
                         const CascadeConfig& cfg);

// (1/B) * sum |round(pred) - pred| with round-half-to-even.
double rounding_reg(const DensityGrid& pred, double batch_norm = 1.0);

CountLossOutput count_loss(const DensityGrid& pred, const DensityGrid& gt,
                           const CascadeConfig& cfg);

}  // namespace crowdloc
