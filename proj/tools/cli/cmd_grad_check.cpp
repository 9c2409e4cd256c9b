#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "commands.hpp"
#include "crowdloc/count_loss.hpp"
#include "crowdloc/error.hpp"
#include "json.hpp"

namespace crowdloc::cli {

namespace {

struct Row {
  int trial;
  std::size_t cell;
  double analytic;
  double numeric;
  double rel_err;
};

// True when x sits within `tol` of a kink of the loss: an integer or a
// half-integer (rounding flips) for the regularizer, or a zero residual of a
// region containing the cell.
bool near_kink(const std::vector<double>& pred, const DensityGrid& gt, std::size_t k, int t,
               double tol) {
  const double frac = pred[k] - std::floor(pred[k]);
  if (frac < tol || frac > 1.0 - tol || std::abs(frac - 0.5) < tol) return true;
  const auto rows = static_cast<std::size_t>(gt.rows());
  const auto cols = static_cast<std::size_t>(gt.cols());
  const Matrix p(rows, cols, pred);
  for (int r = 0; r <= t; ++r) {
    const auto pr = region_counts(p, r);
    const auto gr = region_counts(gt, r);
    const std::size_t i = (k / cols) >> r, j = (k % cols) >> r;
    if (std::abs(pr(i, j) - gr(i, j)) < tol) return true;
  }
  return false;
}

}  // namespace

Runner add_grad_check(CLI::App& app, const GlobalOptions& g) {
  struct Opts {
    int cells = 8;
    int t = 2;
    int trials = 50;
    double h = 1e-6;
    double tol = 1e-5;
    std::string scope = "parent";
  };
  auto o = std::make_shared<Opts>();
  app.add_option("--cells", o->cells, "Grid side length in cells")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--t", o->t, "Cascade depth")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--trials", o->trials, "Random grids to check")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--step", o->h, "Central-difference step")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--tol", o->tol, "Largest acceptable relative error")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--scope", o->scope, "Softmax normalization group")
      ->check(CLI::IsMember({"parent", "sibling"}))
      ->capture_default_str();

  return [o, &g] {
    CascadeConfig cfg;
    cfg.t = o->t;
    cfg.softmax_scope = o->scope == "parent" ? SoftmaxScope::kParentLevel
                                             : SoftmaxScope::kSiblingGroup;
    // Differentiate through the region weights so the analytic gradient is
    // the exact derivative that finite differences see.
    cfg.differentiate_weights = true;

    const auto n = static_cast<std::size_t>(o->cells);
    std::mt19937_64 rng(g.seed);
    std::uniform_real_distribution<double> pred_value(0.05, 4.0);
    std::uniform_int_distribution<int> gt_value(0, 4);

    std::vector<Row> rows;
    std::size_t skipped = 0;
    double worst = 0.0;
    for (int trial = 0; trial < o->trials; ++trial) {
      std::vector<double> p(n * n), q(n * n);
      for (auto& v : p) v = pred_value(rng);
      for (auto& v : q) v = gt_value(rng);
      const DensityGrid gt(1, 1, Matrix(n, n, q));
      const auto out = count_loss(DensityGrid(1, 1, Matrix(n, n, p)), gt, cfg);
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (near_kink(p, gt, k, o->t, 1e-4)) {
          ++skipped;
          continue;
        }
        auto at = [&](double x) {
          auto shifted = p;
          shifted[k] = x;
          return count_loss(DensityGrid(1, 1, Matrix(n, n, std::move(shifted))), gt, cfg).total;
        };
        const double numeric = (at(p[k] + o->h) - at(p[k] - o->h)) / (2.0 * o->h);
        const double analytic = out.grad.values()[k];
        const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        const double rel = std::abs(analytic - numeric) / scale;
        worst = std::max(worst, rel);
        rows.push_back({trial, k, analytic, numeric, rel});
      }
    }

    std::string body;
    if (resolve_format(g, "csv") == "csv") {
      std::ostringstream csv;
      csv << "trial,cell,analytic,numeric,rel_err\n";
      for (const auto& r : rows)
        csv << r.trial << ',' << r.cell << ',' << num(r.analytic) << ',' << num(r.numeric) << ','
            << num(r.rel_err) << '\n';
      body = csv.str();
    } else {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& r : rows)
        arr.push_back({{"trial", r.trial}, {"cell", r.cell}, {"analytic", r.analytic},
                       {"numeric", r.numeric}, {"rel_err", r.rel_err}});
      body = arr.dump(2) + "\n";
    }
    if (!(worst < o->tol))
      throw NumericError("max relative error " + num(worst) + " exceeds " + num(o->tol));

    OutputSet outputs;
    outputs.add_primary(g.out, std::move(body));
    outputs.commit();
    print_ok("grad-check", {{"trials", std::to_string(o->trials)},
                            {"checked", std::to_string(rows.size())},
                            {"skipped", std::to_string(skipped)},
                            {"max_rel_err", num(worst)}});
  };
}

}  // namespace crowdloc::cli
