#include "crowdloc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>
#include <thread>

#include "crowdloc/error.hpp"
#include "text_io.hpp"

namespace crowdloc {

double sigma_from_box(double h, double w) {
  if (!(h > 0.0) || !(w > 0.0))
    throw ValidationError("box height and width must be positive");
  return std::sqrt(h * h + w * w);
}

EvalMatch match_for_eval(std::span<const Point2> preds, std::span<const Point2> gts,
                         std::span<const double> sigma) {
  if (sigma.size() != gts.size())
    throw ValidationError("need one sigma per ground-truth point");
  for (std::size_t j = 0; j < sigma.size(); ++j)
    if (!(sigma[j] > 0.0)) throw ValidationError("sigma must be positive", {j});

  EvalMatch out;
  const std::size_t n = preds.size();
  const std::size_t m = gts.size();
  if (n > 0 && m > 0) {
    Matrix dist(n, m);
    double max_feasible = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        dist(i, j) = std::hypot(preds[i].x - gts[j].x, preds[i].y - gts[j].y);
        if (dist(i, j) <= sigma[j]) {
          any = true;
          max_feasible = std::max(max_feasible, dist(i, j));
        }
      }
    if (any) {
      // Infeasible pairs cost more than any full set of feasible ones, so the
      // optimum first minimizes how many of them it must use.
      const double penalty =
          (static_cast<double>(std::min(n, m)) + 1.0) * (max_feasible + 1.0);
      Matrix cost(n, m);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
          cost(i, j) = dist(i, j) <= sigma[j] ? dist(i, j) : penalty;
      for (const auto& pr : hungarian(cost).pairs)
        if (dist(static_cast<std::size_t>(pr.row), static_cast<std::size_t>(pr.col)) <=
            sigma[static_cast<std::size_t>(pr.col)])
          out.pairs.push_back(pr);
    }
  }
  out.tp = out.pairs.size();
  out.fp = n - out.tp;
  out.fn = m - out.tp;
  return out;
}

void fill_rates(std::size_t tp, std::size_t fp, std::size_t fn, double& precision,
                double& recall, double& f1) noexcept {
  precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

namespace {

struct ImageCounts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

std::vector<double> sigmas_for(const Scene& scene, const SigmaMode& mode, double fixed) {
  std::vector<double> out;
  out.reserve(scene.points().size());
  for (std::size_t j = 0; j < scene.points().size(); ++j) {
    const auto& p = scene.points()[j];
    if (std::holds_alternative<BoxSigma>(mode)) {
      if (!p.box)
        throw ValidationError("box sigma needs a box on every ground-truth point", {j});
      out.push_back(sigma_from_box(p.box->h, p.box->w));
    } else {
      out.push_back(fixed);
    }
  }
  return out;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index is written
// by exactly one worker, so results do not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

SigmaRow evaluate_at(std::span<const std::vector<Point2>> preds,
                     std::span<const Scene> gts, const SigmaMode& mode,
                     double fixed, const EvalConfig& cfg) {
  std::vector<ImageCounts> counts(gts.size());
  parallel_for(gts.size(), cfg.jobs, [&](std::size_t i) {
    const auto sig = sigmas_for(gts[i], mode, fixed);
    const auto m = match_for_eval(preds[i], gts[i].positions(), sig);
    counts[i] = {m.tp, m.fp, m.fn};
  });

  SigmaRow row;
  row.sigma = fixed;
  for (const auto& c : counts) {
    row.tp += c.tp;
    row.fp += c.fp;
    row.fn += c.fn;
  }
  if (cfg.aggregation == Aggregation::kMicro) {
    fill_rates(row.tp, row.fp, row.fn, row.precision, row.recall, row.f1);
  } else if (!counts.empty()) {
    for (const auto& c : counts) {
      double p, r, f;
      fill_rates(c.tp, c.fp, c.fn, p, r, f);
      row.precision += p;
      row.recall += r;
      row.f1 += f;
    }
    const double n = static_cast<double>(counts.size());
    row.precision /= n;
    row.recall /= n;
    row.f1 /= n;
  }
  return row;
}

}  // namespace

EvalResult evaluate(std::span<const std::vector<Point2>> preds,
                    std::span<const Scene> gts, const EvalConfig& cfg) {
  if (preds.size() != gts.size())
    throw ValidationError("got predictions for " + std::to_string(preds.size()) +
                          " images but ground truth for " + std::to_string(gts.size()));
  EvalResult out;
  out.images = gts.size();

  if (const auto* range = std::get_if<SigmaRange>(&cfg.sigma)) {
    if (range->lo < 1 || range->hi < range->lo)
      throw ValidationError("sigma range needs 1 <= lo <= hi");
    for (int s = range->lo; s <= range->hi; ++s)
      out.per_sigma.push_back(evaluate_at(preds, gts, cfg.sigma, s, cfg));
  } else if (const auto* fixed = std::get_if<FixedSigma>(&cfg.sigma)) {
    if (!(fixed->sigma > 0.0)) throw ValidationError("fixed sigma must be positive");
    out.per_sigma.push_back(evaluate_at(preds, gts, cfg.sigma, fixed->sigma, cfg));
  } else {
    auto row = evaluate_at(preds, gts, cfg.sigma, 0.0, cfg);
    row.sigma = 0.0;  // per-point radii
    out.per_sigma.push_back(row);
  }

  for (const auto& row : out.per_sigma) {
    out.tp += row.tp;
    out.fp += row.fp;
    out.fn += row.fn;
    out.precision += row.precision;
    out.recall += row.recall;
    out.f1 += row.f1;
  }
  const double steps = static_cast<double>(out.per_sigma.size());
  out.precision /= steps;
  out.recall /= steps;
  out.f1 /= steps;

  if (!gts.empty()) {
    for (std::size_t i = 0; i < gts.size(); ++i) {
      const double err = static_cast<double>(preds[i].size()) -
                         static_cast<double>(gts[i].points().size());
      out.mae += std::abs(err);
      out.mse += err * err;
    }
    out.mae /= static_cast<double>(gts.size());
    out.mse /= static_cast<double>(gts.size());
    out.rmse = std::sqrt(out.mse);
  }
  return out;
}

double consistency_iou(std::span<const int> s1, std::span<const int> s2) {
  std::vector<int> a(s1.begin(), s1.end()), b(s2.begin(), s2.end());
  std::ranges::sort(a);
  std::ranges::sort(b);
  a.erase(std::unique(a.begin(), a.end()), a.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  if (a.empty() && b.empty()) return 1.0;
  std::vector<int> inter, uni;
  std::ranges::set_intersection(a, b, std::back_inserter(inter));
  std::ranges::set_union(a, b, std::back_inserter(uni));
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

std::vector<Point2> read_points_csv(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto text = ss.str();
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ParseError("missing header", 1, "");

  const auto header = detail::split_csv_row(lines.front().text);
  std::optional<std::size_t> cx, cy;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto name = detail::trim(header[i]);
    if (name == "x") cx = i;
    if (name == "y") cy = i;
  }
  if (!cx) throw ParseError("header lacks column", 1, "x");
  if (!cy) throw ParseError("header lacks column", 1, "y");

  std::vector<Point2> out;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& line = lines[r];
    if (detail::trim(line.text).empty()) continue;
    const auto cells = detail::split_csv_row(line.text);
    auto real = [&](std::size_t col, const char* name) {
      if (col >= cells.size()) throw ParseError("missing value", line.line, name);
      const auto v = detail::parse_double(detail::trim(cells[col]));
      if (!v || !std::isfinite(*v)) throw ParseError("not a finite number", line.line, name);
      return *v;
    };
    out.push_back({real(*cx, "x"), real(*cy, "y")});
  }
  return out;
}

}  // namespace crowdloc
