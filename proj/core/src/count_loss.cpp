#include "crowdloc/count_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crowdloc/error.hpp"
#include "round.hpp"

namespace crowdloc {

namespace {

double sign(double v) noexcept { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::size_t coarse_extent(std::size_t n, int r) {
  const std::size_t side = std::size_t{1} << r;
  return (n + side - 1) / side;
}

void validate(const DensityGrid& pred, const DensityGrid& gt,
              const CascadeConfig& cfg) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
    throw ValidationError("prediction grid is " + std::to_string(pred.rows()) +
                          "x" + std::to_string(pred.cols()) +
                          " but ground truth is " + std::to_string(gt.rows()) +
                          "x" + std::to_string(gt.cols()));
  if (!gt.is_integral())
    throw ValidationError("ground-truth density grid must hold integer counts");
  if (cfg.t < 0 || cfg.t > 30 ||
      (1 << cfg.t) > std::min(pred.rows(), pred.cols()))
    throw ValidationError("cascade depth t=" + std::to_string(cfg.t) +
                          " needs 2^t <= min(rows, cols)");
  if (!(cfg.batch_norm > 0.0))
    throw ValidationError("batch normalization constant must be positive");
}

// Everything the loss and its gradient need, computed once.
struct CascadeState {
  std::vector<Matrix> signs;   // sign(pred_R - gt_R) per level
  std::vector<Matrix> losses;  // |pred_R - gt_R| / B per level
  std::vector<Matrix> weights;
  double value = 0.0;
};

// Index of the softmax group a level-(r+1) parent belongs to.
std::pair<std::size_t, std::size_t> group_of(std::size_t i, std::size_t j,
                                             int parent_level, int t,
                                             SoftmaxScope scope) {
  if (scope == SoftmaxScope::kParentLevel || parent_level == t) return {0, 0};
  return {i / 2, j / 2};
}

CascadeState evaluate(const DensityGrid& pred, const DensityGrid& gt,
                      const CascadeConfig& cfg) {
  validate(pred, gt, cfg);
  const int t = cfg.t;
  const double cells = static_cast<double>(pred.rows()) * pred.cols();

  CascadeState s;
  s.signs.resize(static_cast<std::size_t>(t) + 1);
  s.losses.resize(static_cast<std::size_t>(t) + 1);
  s.weights.resize(static_cast<std::size_t>(t) + 1);
  for (int r = 0; r <= t; ++r) {
    const auto pr = region_counts(pred.matrix(), r);
    const auto gr = region_counts(gt.matrix(), r);
    Matrix sg(pr.rows(), pr.cols()), ls(pr.rows(), pr.cols());
    for (std::size_t i = 0; i < pr.rows(); ++i)
      for (std::size_t j = 0; j < pr.cols(); ++j) {
        const double diff = pr(i, j) - gr(i, j);
        sg(i, j) = sign(diff);
        ls(i, j) = std::abs(diff) / cfg.batch_norm;
      }
    s.signs[static_cast<std::size_t>(r)] = std::move(sg);
    s.losses[static_cast<std::size_t>(r)] = std::move(ls);
  }

  s.weights[static_cast<std::size_t>(t)] =
      Matrix(s.losses[static_cast<std::size_t>(t)].rows(),
             s.losses[static_cast<std::size_t>(t)].cols(), 1.0);
  for (int r = t - 1; r >= 0; --r) {
    const auto& parent = s.losses[static_cast<std::size_t>(r) + 1];
    // Softmax over each group of parents, stabilized by the group max.
    Matrix soft(parent.rows(), parent.cols());
    const std::size_t gr = coarse_extent(parent.rows(), 1);
    const std::size_t gc = coarse_extent(parent.cols(), 1);
    Matrix gmax(gr, gc, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < parent.rows(); ++i)
      for (std::size_t j = 0; j < parent.cols(); ++j) {
        const auto [a, b] = group_of(i, j, r + 1, t, cfg.softmax_scope);
        gmax(a, b) = std::max(gmax(a, b), parent(i, j));
      }
    Matrix gsum(gr, gc, 0.0);
    for (std::size_t i = 0; i < parent.rows(); ++i)
      for (std::size_t j = 0; j < parent.cols(); ++j) {
        const auto [a, b] = group_of(i, j, r + 1, t, cfg.softmax_scope);
        soft(i, j) = std::exp(parent(i, j) - gmax(a, b));
        gsum(a, b) += soft(i, j);
      }
    for (std::size_t i = 0; i < parent.rows(); ++i)
      for (std::size_t j = 0; j < parent.cols(); ++j) {
        const auto [a, b] = group_of(i, j, r + 1, t, cfg.softmax_scope);
        soft(i, j) /= gsum(a, b);
      }
    const auto& child = s.losses[static_cast<std::size_t>(r)];
    Matrix w(child.rows(), child.cols());
    for (std::size_t i = 0; i < child.rows(); ++i)
      for (std::size_t j = 0; j < child.cols(); ++j) w(i, j) = soft(i / 2, j / 2);
    s.weights[static_cast<std::size_t>(r)] = std::move(w);
  }

  for (int r = t; r >= 0; --r) {
    const double alpha = std::ldexp(1.0, r + 1) / cells;
    const auto& ls = s.losses[static_cast<std::size_t>(r)];
    const auto& w = s.weights[static_cast<std::size_t>(r)];
    double level = 0.0;
    for (std::size_t i = 0; i < ls.size(); ++i) level += w.values()[i] * ls.values()[i];
    s.value += alpha * level;
  }
  return s;
}

Matrix cascade_grad(const DensityGrid& pred, const CascadeConfig& cfg,
                    const CascadeState& s) {
  const int t = cfg.t;
  const double cells = static_cast<double>(pred.rows()) * pred.cols();
  const double inv_b = 1.0 / cfg.batch_norm;

  // Gradient with respect to each region loss, then pushed down to cells.
  std::vector<Matrix> dloss(static_cast<std::size_t>(t) + 1);
  for (int r = 0; r <= t; ++r) {
    const double alpha = std::ldexp(1.0, r + 1) / cells;
    dloss[static_cast<std::size_t>(r)] = s.weights[static_cast<std::size_t>(r)];
    for (double& v : dloss[static_cast<std::size_t>(r)].values()) v *= alpha;
  }

  if (cfg.differentiate_weights) {
    for (int r = t - 1; r >= 0; --r) {
      const double alpha = std::ldexp(1.0, r + 1) / cells;
      const auto& child = s.losses[static_cast<std::size_t>(r)];
      const auto& parent = s.losses[static_cast<std::size_t>(r) + 1];
      const auto& w = s.weights[static_cast<std::size_t>(r)];
      // A(P): summed child loss per parent; soft(P) recovered from a child.
      Matrix a(parent.rows(), parent.cols(), 0.0), soft(parent.rows(), parent.cols());
      for (std::size_t i = 0; i < child.rows(); ++i)
        for (std::size_t j = 0; j < child.cols(); ++j) {
          a(i / 2, j / 2) += child(i, j);
          soft(i / 2, j / 2) = w(i, j);
        }
      const std::size_t gr = coarse_extent(parent.rows(), 1);
      const std::size_t gc = coarse_extent(parent.cols(), 1);
      Matrix mean(gr, gc, 0.0);
      for (std::size_t i = 0; i < parent.rows(); ++i)
        for (std::size_t j = 0; j < parent.cols(); ++j) {
          const auto [ga, gb] = group_of(i, j, r + 1, t, cfg.softmax_scope);
          mean(ga, gb) += soft(i, j) * a(i, j);
        }
      auto& dp = dloss[static_cast<std::size_t>(r) + 1];
      for (std::size_t i = 0; i < parent.rows(); ++i)
        for (std::size_t j = 0; j < parent.cols(); ++j) {
          const auto [ga, gb] = group_of(i, j, r + 1, t, cfg.softmax_scope);
          dp(i, j) += alpha * soft(i, j) * (a(i, j) - mean(ga, gb));
        }
    }
  }

  Matrix grad(static_cast<std::size_t>(pred.rows()), static_cast<std::size_t>(pred.cols()), 0.0);
  for (int r = 0; r <= t; ++r) {
    const auto& dl = dloss[static_cast<std::size_t>(r)];
    const auto& sg = s.signs[static_cast<std::size_t>(r)];
    for (std::size_t i = 0; i < grad.rows(); ++i)
      for (std::size_t j = 0; j < grad.cols(); ++j) {
        const std::size_t ri = i >> r, rj = j >> r;
        grad(i, j) += dl(ri, rj) * sg(ri, rj) * inv_b;
      }
  }
  return grad;
}

}  // namespace

Matrix region_counts(const Matrix& grid, int r) {
  if (r < 0 || r > 30) throw ValidationError("region level must be in [0, 30]");
  Matrix out(coarse_extent(grid.rows(), r), coarse_extent(grid.cols(), r), 0.0);
  for (std::size_t i = 0; i < grid.rows(); ++i)
    for (std::size_t j = 0; j < grid.cols(); ++j) out(i >> r, j >> r) += grid(i, j);
  return out;
}

Matrix region_counts(const DensityGrid& grid, int r) {
  return region_counts(grid.matrix(), r);
}

CascadeLoss cascade_loss(const DensityGrid& pred, const DensityGrid& gt,
                         const CascadeConfig& cfg) {
  auto s = evaluate(pred, gt, cfg);
  return {s.value, std::move(s.weights)};
}

double rounding_reg(const DensityGrid& pred, double batch_norm) {
  if (!(batch_norm > 0.0))
    throw ValidationError("batch normalization constant must be positive");
  double sum = 0.0;
  for (double v : pred.matrix().values())
    sum += std::abs(detail::round_half_even(v) - v);
  return sum / batch_norm;
}

CountLossOutput count_loss(const DensityGrid& pred, const DensityGrid& gt,
                           const CascadeConfig& cfg) {
  auto s = evaluate(pred, gt, cfg);
  CountLossOutput out;
  out.cascade = s.value;
  out.regularizer = rounding_reg(pred, cfg.batch_norm);
  out.total = out.cascade + out.regularizer;
  out.grad = cascade_grad(pred, cfg, s);
  // round() is piecewise constant, so only the |.| sign survives.
  const double inv_b = 1.0 / cfg.batch_norm;
  auto g = out.grad.values();
  const auto p = pred.matrix().values();
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] += sign(p[i] - detail::round_half_even(p[i])) * inv_b;
  out.per_region_weights = std::move(s.weights);
  return out;
}

}  // namespace crowdloc
