#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "crowdloc/hungarian.hpp"
#include "crowdloc/scene.hpp"

namespace crowdloc {

struct FixedSigma {
  double sigma = 8.0;
};
// sigma_j = sqrt(h_j^2 + w_j^2) from each point's box annotation.
struct BoxSigma {};
// Evaluate at every integer sigma in [lo, hi] and average P, R and F1.
struct SigmaRange {
  int lo = 1;
  int hi = 100;
};
using SigmaMode = std::variant<FixedSigma, BoxSigma, SigmaRange>;

enum class Aggregation {
  kMicro,  // sum tp/fp/fn over images, then compute P/R/F1
  kMacro,  // P/R/F1 per image, then average
};

struct EvalConfig {
  SigmaMode sigma = FixedSigma{};
  Aggregation aggregation = Aggregation::kMicro;
  int jobs = 1;  // worker threads for per-image matching
};

struct SigmaRow {
  double sigma = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct EvalResult {
  // For SigmaRange the counts are summed over all sigma steps.
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  double mae = 0.0;
  double mse = 0.0;   // mean squared count error
  double rmse = 0.0;  // sqrt(mse)
  std::size_t images = 0;
  std::vector<SigmaRow> per_sigma;  // one row per evaluated sigma
};

struct EvalMatch {
  std::size_t tp = 0, fp = 0, fn = 0;
  std::vector<MatchedPair> pairs;  // row = prediction, col = ground truth
};

double sigma_from_box(double h, double w);

// Maximum-cardinality matching over pairs within sigma_j of gt j; among
// those, the one with minimum total distance.
EvalMatch match_for_eval(std::span<const Point2> preds, std::span<const Point2> gts,
                         std::span<const double> sigma);

// P = tp/(tp+fp), R = tp/(tp+fn), F1 harmonic mean; 0 for empty denominators.
void fill_rates(std::size_t tp, std::size_t fp, std::size_t fn, double& precision,
                double& recall, double& f1) noexcept;

EvalResult evaluate(std::span<const std::vector<Point2>> preds,
                    std::span<const Scene> gts, const EvalConfig& cfg);

// Prediction list: CSV whose header names x and y columns; other columns
// are ignored.
std::vector<Point2> read_points_csv(std::istream& in);

// |s1 n s2| / |s1 u s2|; 1 when both are empty. Inputs are treated as sets.
double consistency_iou(std::span<const int> s1, std::span<const int> s2);

}  // namespace crowdloc
