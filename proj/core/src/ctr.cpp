#include "crowdloc/ctr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crowdloc/error.hpp"

namespace crowdloc {

namespace {

double clamp_probability(double p, const FocalParams& params) {
  return std::clamp(p, params.eps, 1.0 - params.eps);
}

void check_label(int label) {
  if (label != 0 && label != 1)
    throw ValidationError("focal loss label must be 0 or 1");
}

}  // namespace

double focal_loss(double p, int label, const FocalParams& params) {
  check_label(label);
  const double q = clamp_probability(p, params);
  if (label == 1) return -params.alpha * std::pow(1.0 - q, params.gamma) * std::log(q);
  return -(1.0 - params.alpha) * std::pow(q, params.gamma) * std::log(1.0 - q);
}

double focal_loss_grad(double p, int label, const FocalParams& params) {
  check_label(label);
  if (p <= params.eps || p >= 1.0 - params.eps) return 0.0;
  const double g = params.gamma;
  if (label == 1) {
    const double om = 1.0 - p;
    return params.alpha *
           (g * std::pow(om, g - 1.0) * std::log(p) - std::pow(om, g) / p);
  }
  return -(1.0 - params.alpha) *
         (g * std::pow(p, g - 1.0) * std::log(1.0 - p) - std::pow(p, g) / (1.0 - p));
}

double point_distance(const Prediction& t, const Point2& g) noexcept {
  return std::hypot(t.x - g.x, t.y - g.y);
}

Matrix dual_cost(std::span<const Prediction> candidates,
                 std::span<const Point2> gts, const FocalParams& params) {
  Matrix cost(candidates.size(), gts.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double cls = focal_loss(candidates[i].p, 1, params);
    for (std::size_t j = 0; j < gts.size(); ++j)
      cost(i, j) = cls + point_distance(candidates[i], gts[j]);
  }
  return cost;
}

Matrix distance_cost(std::span<const Prediction> candidates,
                     std::span<const Point2> gts) {
  Matrix cost(candidates.size(), gts.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    for (std::size_t j = 0; j < gts.size(); ++j)
      cost(i, j) = point_distance(candidates[i], gts[j]);
  return cost;
}

CtrResult ctr_match(std::span<const Prediction> candidates,
                    std::span<const Point2> gts, const FocalParams& params) {
  CtrResult out;
  if (candidates.empty() || gts.empty()) return out;

  out.omega1 = hungarian(dual_cost(candidates, gts, params));
  for (const auto& pr : out.omega1.pairs) out.s1.push_back(pr.row);
  std::ranges::sort(out.s1);

  // Top-|G| by probability; ties by ascending index.
  std::vector<int> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](int a, int b) {
    return candidates[static_cast<std::size_t>(a)].p >
           candidates[static_cast<std::size_t>(b)].p;
  });
  const std::size_t top = std::min(gts.size(), candidates.size());
  out.s2.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top));
  std::ranges::sort(out.s2);

  std::ranges::set_difference(out.s2, out.s1, std::back_inserter(out.s_prime));
  if (out.s_prime.empty()) return out;

  // Matched gts ranked by the probability of their omega1 partner, lowest
  // first.
  auto ranked = out.omega1.pairs;
  std::ranges::stable_sort(ranked, [&](const MatchedPair& a, const MatchedPair& b) {
    const double pa = candidates[static_cast<std::size_t>(a.row)].p;
    const double pb = candidates[static_cast<std::size_t>(b.row)].p;
    if (pa != pb) return pa < pb;
    return a.row < b.row;
  });
  for (std::size_t k = 0; k < out.s_prime.size(); ++k)
    out.g_prime.push_back(ranked[k].col);
  std::ranges::sort(out.g_prime);

  std::vector<Prediction> proxies;
  for (int i : out.s_prime) proxies.push_back(candidates[static_cast<std::size_t>(i)]);
  std::vector<Point2> targets;
  for (int j : out.g_prime) targets.push_back(gts[static_cast<std::size_t>(j)]);
  const auto local = hungarian(distance_cost(proxies, targets));
  for (const auto& pr : local.pairs)
    out.omega2.pairs.push_back({out.s_prime[static_cast<std::size_t>(pr.row)],
                                out.g_prime[static_cast<std::size_t>(pr.col)]});
  std::ranges::sort(out.omega2.pairs, {}, &MatchedPair::row);
  out.omega2.cost = local.cost;
  return out;
}

namespace {

double add_distance_terms(std::span<const Prediction> candidates,
                          std::span<const Point2> gts, const Matching& m,
                          double scale, std::vector<PredictionGrad>& grads) {
  double sum = 0.0;
  for (const auto& pr : m.pairs) {
    const auto& t = candidates[static_cast<std::size_t>(pr.row)];
    const auto& g = gts[static_cast<std::size_t>(pr.col)];
    const double d = point_distance(t, g);
    sum += d;
    if (d > 0.0) {
      auto& gr = grads[static_cast<std::size_t>(pr.row)];
      gr.dx += scale * (t.x - g.x) / d;
      gr.dy += scale * (t.y - g.y) / d;
    }
  }
  return scale * sum;
}

}  // namespace

LocateLossOutput locate_loss(std::span<const Prediction> candidates,
                             std::span<const Point2> gts, const CtrResult& ctr,
                             const LocateLossOptions& options) {
  LocateLossOutput out;
  out.grads.assign(candidates.size(), {});

  std::vector<char> positive(candidates.size(), 0);
  for (int i : ctr.s1) {
    if (i < 0 || static_cast<std::size_t>(i) >= candidates.size())
      throw ValidationError("matching refers to a candidate that does not exist");
    positive[static_cast<std::size_t>(i)] = 1;
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const int label = positive[i];
    out.cls += focal_loss(candidates[i].p, label, options.focal);
    out.grads[i].dp = focal_loss_grad(candidates[i].p, label, options.focal);
  }

  out.dist = add_distance_terms(candidates, gts, ctr.omega1, 1.0, out.grads);
  if (options.use_ctr && !ctr.omega2.empty())
    out.dist += add_distance_terms(candidates, gts, ctr.omega2,
                                   options.proxy_scale, out.grads);
  out.total = out.cls + out.dist;
  return out;
}

}  // namespace crowdloc
