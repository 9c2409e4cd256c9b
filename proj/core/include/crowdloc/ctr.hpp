#pragma once

#include <span>
#include <vector>

#include "crowdloc/aaps.hpp"
#include "crowdloc/hungarian.hpp"
#include "crowdloc/scene.hpp"

namespace crowdloc {

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
  double eps = 1e-7;  // p is clamped to [eps, 1 - eps] before taking logs
};

// label 1: -alpha (1-p)^gamma log p;  label 0: -(1-alpha) p^gamma log(1-p).
double focal_loss(double p, int label, const FocalParams& params = {});

// d focal_loss / dp. Zero where the clamp is active.
double focal_loss_grad(double p, int label, const FocalParams& params = {});

double point_distance(const Prediction& t, const Point2& g) noexcept;

// cost(i, j) = focal_loss(p_i, 1) + ||t_i - g_j||. Rows are candidates.
Matrix dual_cost(std::span<const Prediction> candidates,
                 std::span<const Point2> gts, const FocalParams& params = {});

// cost(i, j) = ||t_i - g_j||.
Matrix distance_cost(std::span<const Prediction> candidates,
                     std::span<const Point2> gts);

// Training-time assignment with proxy targets. Index sets are ascending
// candidate (s*) or ground-truth (g_prime) indices; matchings map candidate
// index (row) to ground-truth index (col).
struct CtrResult {
  Matching omega1;             // dual-cost optimal matching
  std::vector<int> s1;         // candidates matched by omega1
  std::vector<int> s2;         // top-|G| candidates by p
  std::vector<int> s_prime;    // s2 \ s1
  std::vector<int> g_prime;    // gts whose omega1 partner has the lowest p
  Matching omega2;             // distance-optimal s_prime <-> g_prime
};

CtrResult ctr_match(std::span<const Prediction> candidates,
                    std::span<const Point2> gts, const FocalParams& params = {});

struct LocateLossOptions {
  bool use_ctr = true;
  double proxy_scale = 1.0;  // multiplier on the omega2 distance terms
  FocalParams focal;
};

struct PredictionGrad {
  double dx = 0.0;
  double dy = 0.0;
  double dp = 0.0;

  friend bool operator==(const PredictionGrad&, const PredictionGrad&) = default;
};

struct LocateLossOutput {
  double cls = 0.0;
  double dist = 0.0;
  double total = 0.0;
  std::vector<PredictionGrad> grads;  // one per candidate
};

// Focal classification over all candidates (label 1 only for s1) plus L2
// distance for omega1 pairs and, with use_ctr, for the omega2 proxy pairs.
// The matchings in `ctr` are held fixed.
LocateLossOutput locate_loss(std::span<const Prediction> candidates,
                             std::span<const Point2> gts, const CtrResult& ctr,
                             const LocateLossOptions& options = {});

}  // namespace crowdloc
