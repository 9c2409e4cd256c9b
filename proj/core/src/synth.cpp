#include "crowdloc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "crowdloc/error.hpp"
#include "crowdloc/eval.hpp"
#include "text_io.hpp"

namespace crowdloc {

Scene generate_scene(const SceneConfig& cfg) {
  if (cfg.n_clusters < 0 || cfg.background_points < 0 ||
      cfg.min_points_per_cluster < 0 ||
      cfg.max_points_per_cluster < cfg.min_points_per_cluster)
    throw ValidationError("scene counts must be non-negative with min <= max");
  if (!(cfg.cluster_sigma >= 0.0))
    throw ValidationError("cluster sigma must be non-negative");

  std::mt19937_64 rng(cfg.seed);
  const double w = cfg.width;
  const double h = cfg.height;
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h);
  const double max_x = std::nextafter(w, 0.0);
  const double max_y = std::nextafter(h, 0.0);

  std::vector<GroundTruthPoint> points;
  for (int c = 0; c < cfg.n_clusters; ++c) {
    const double cx = ux(rng);
    const double cy = uy(rng);
    std::uniform_int_distribution<int> count(cfg.min_points_per_cluster,
                                             cfg.max_points_per_cluster);
    const int n = count(rng);
    std::normal_distribution<double> nx(cx, cfg.cluster_sigma), ny(cy, cfg.cluster_sigma);
    for (int i = 0; i < n; ++i) {
      const double x = std::clamp(nx(rng), 0.0, max_x);
      const double y = std::clamp(ny(rng), 0.0, max_y);
      points.push_back({x, y, std::nullopt});
    }
  }
  for (int i = 0; i < cfg.background_points; ++i) {
    const double x = ux(rng);
    const double y = uy(rng);
    points.push_back({x, y, std::nullopt});
  }
  return Scene(cfg.width, cfg.height, std::move(points));
}

ToyPredictor::ToyPredictor(int rows, int cols, const AnchorPyramid& pyramid)
    : rows_(rows), cols_(cols), slots_per_cell_(pyramid.total_slots()) {
  if (rows_ <= 0 || cols_ <= 0) throw ValidationError("predictor grid must be nonempty");
  int offset = 0;
  for (const auto& l : pyramid.levels()) {
    level_offset_.push_back(offset);
    offset += l.s;
  }
  const auto cells = static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_);
  anchors_.assign(cells * static_cast<std::size_t>(slots_per_cell_), RawPrediction{});
  density_.assign(cells, 0.0);
}

std::size_t ToyPredictor::slot_index(const Anchor& a) const {
  if (a.grid_u < 0 || a.grid_u >= cols_ || a.grid_v < 0 || a.grid_v >= rows_ ||
      a.level < 1 || a.level > static_cast<int>(level_offset_.size()))
    throw ValidationError("anchor outside the predictor layout");
  const std::size_t cell = static_cast<std::size_t>(a.grid_v) * static_cast<std::size_t>(cols_) +
                           static_cast<std::size_t>(a.grid_u);
  return cell * static_cast<std::size_t>(slots_per_cell_) +
         static_cast<std::size_t>(level_offset_[static_cast<std::size_t>(a.level - 1)]) +
         static_cast<std::size_t>(a.slot - 1);
}

RawPrediction& ToyPredictor::anchor_params(const Anchor& a) {
  return anchors_.at(slot_index(a));
}

const RawPrediction& ToyPredictor::anchor_params(const Anchor& a) const {
  return anchors_.at(slot_index(a));
}

double& ToyPredictor::density_param(int u, int v) {
  return density_.at(static_cast<std::size_t>(v) * static_cast<std::size_t>(cols_) +
                     static_cast<std::size_t>(u));
}

double ToyPredictor::density_param(int u, int v) const {
  return density_.at(static_cast<std::size_t>(v) * static_cast<std::size_t>(cols_) +
                     static_cast<std::size_t>(u));
}

namespace {

DensityGrid current_density(const ToyPredictor& model, const DensityGrid& gt,
                            const TrainConfig& cfg) {
  if (cfg.oracle_density) return gt;
  DensityGrid d(gt.rows(), gt.cols(), gt.cell_h(), gt.cell_w());
  for (int v = 0; v < gt.rows(); ++v)
    for (int u = 0; u < gt.cols(); ++u)
      d.set(u, v, cfg.density_cap * sigmoid(model.density_param(u, v)));
  return d;
}

std::vector<Candidate> decode_current(const ToyPredictor& model,
                                      const DensityGrid& density,
                                      const AnchorPyramid& pyramid) {
  const auto mask = build_anchor_mask(density, pyramid);
  const auto anchors = instantiate_anchors(mask, pyramid);
  std::vector<RawPrediction> raw;
  raw.reserve(anchors.size());
  for (const auto& a : anchors) raw.push_back(model.anchor_params(a));
  return decode_candidates(anchors, raw, pyramid.cell_h(), pyramid.cell_w());
}

double selection_f1(std::span<const Candidate> candidates, const DensityGrid& density,
                    const std::vector<Point2>& truth, double sigma) {
  const auto picked = infer_select(candidates, density);
  std::vector<Point2> pts;
  pts.reserve(picked.size());
  for (const auto& c : picked) pts.push_back({c.x, c.y});
  const std::vector<double> radii(truth.size(), sigma);
  const auto m = match_for_eval(pts, truth, radii);
  double p, r, f;
  fill_rates(m.tp, m.fp, m.fn, p, r, f);
  return f;
}

}  // namespace

TrainResult train_toy(const Scene& scene, const AnchorPyramid& pyramid,
                      const TrainConfig& cfg) {
  if (scene.points().empty()) throw ValidationError("training scene has no points");
  if (cfg.steps < 1) throw ValidationError("training needs at least one step");
  if (!std::isfinite(cfg.lr)) throw ValidationError("learning rate must be finite");

  const auto gt = gt_density_grid(scene, pyramid.cell_h(), pyramid.cell_w());
  ToyPredictor model(gt.rows(), gt.cols(), pyramid);
  const auto truth = scene.positions();

  LocateLossOptions locate = cfg.locate;
  locate.use_ctr = cfg.use_ctr;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const double cw = pyramid.cell_w();
  const double ch = pyramid.cell_h();

  std::vector<TraceRecord> trace;
  trace.reserve(static_cast<std::size_t>(cfg.steps));
  for (int step = 1; step <= cfg.steps; ++step) {
    const auto density = current_density(model, gt, cfg);
    const auto candidates = decode_current(model, density, pyramid);
    const auto preds = predictions_of(candidates);

    auto targets = truth;
    if (cfg.annotation_jitter > 0.0) {
      for (auto& t : targets) {
        t.x += cfg.annotation_jitter * jitter(rng);
        t.y += cfg.annotation_jitter * jitter(rng);
      }
    }

    const auto ctr = ctr_match(preds, targets, locate.focal);
    const auto loc = locate_loss(preds, targets, ctr, locate);

    TraceRecord rec;
    rec.step = step;
    rec.locate_loss = loc.total;
    rec.iou = consistency_iou(ctr.s1, ctr.s2);
    rec.f1 = selection_f1(candidates, density, truth, cfg.eval_sigma);

    std::optional<CountLossOutput> cnt;
    if (!cfg.oracle_density) {
      cnt = count_loss(density, gt, cfg.cascade);
      rec.count_loss = cnt->total;
    }
    if (!std::isfinite(rec.locate_loss) || !std::isfinite(rec.count_loss))
      throw NumericError("training diverged at step " + std::to_string(step));
    trace.push_back(rec);

    for (std::size_t k = 0; k < candidates.size(); ++k) {
      const auto& c = candidates[k];
      const auto& g = loc.grads[k];
      auto& prm = model.anchor_params(c.anchor);
      const double sx = sigmoid(c.raw.ox);
      const double sy = sigmoid(c.raw.oy);
      prm.ox -= cfg.lr * g.dx * cw * sx * (1.0 - sx);
      prm.oy -= cfg.lr * g.dy * ch * sy * (1.0 - sy);
      prm.c -= cfg.lr * g.dp * c.p * (1.0 - c.p);
    }
    if (cnt) {
      for (int v = 0; v < gt.rows(); ++v)
        for (int u = 0; u < gt.cols(); ++u) {
          double& d = model.density_param(u, v);
          const double s = sigmoid(d);
          d -= cfg.lr * cnt->grad(static_cast<std::size_t>(v), static_cast<std::size_t>(u)) *
               cfg.density_cap * s * (1.0 - s);
        }
    }
  }

  const auto density = current_density(model, gt, cfg);
  const auto candidates = decode_current(model, density, pyramid);
  auto selection = infer_select(candidates, density);
  return {std::move(model), std::move(trace), candidates, std::move(selection)};
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << "step,locate_loss,count_loss,iou,f1\n";
  for (const auto& r : trace)
    out << r.step << ',' << detail::format_double(r.locate_loss) << ','
        << detail::format_double(r.count_loss) << ',' << detail::format_double(r.iou)
        << ',' << detail::format_double(r.f1) << '\n';
}

}  // namespace crowdloc
