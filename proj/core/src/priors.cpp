#include "crowdloc/priors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "crowdloc/error.hpp"
#include "json.hpp"
#include "text_io.hpp"

namespace crowdloc {

using nlohmann::json;

AnchorPyramid::AnchorPyramid(int cell_h, int cell_w,
                             std::vector<AnchorLevel> levels)
    : cell_h_(cell_h), cell_w_(cell_w), levels_(std::move(levels)) {
  if (cell_h_ <= 0 || cell_w_ <= 0)
    throw ValidationError("pyramid cell size must be positive");
  if (levels_.empty())
    throw ValidationError("anchor pyramid needs at least one level");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const auto& lvl = levels_[i];
    if (lvl.s <= 0)
      throw ValidationError("anchor count must be positive", {i});
    if (i > 0 && lvl.s <= levels_[i - 1].s)
      throw ValidationError("anchor counts must be strictly increasing", {i});
    if (static_cast<int>(lvl.centers.size()) != lvl.s)
      throw ValidationError("level has " + std::to_string(lvl.centers.size()) +
                                " centers but s=" + std::to_string(lvl.s),
                            {i});
    for (const auto& c : lvl.centers) {
      if (!(c.x >= 0.0 && c.x < cell_w_ && c.y >= 0.0 && c.y < cell_h_))
        throw ValidationError("anchor center outside the cell", {i});
    }
  }
}

int AnchorPyramid::total_slots() const noexcept {
  int n = 0;
  for (const auto& l : levels_) n += l.s;
  return n;
}

std::string AnchorPyramid::to_json() const {
  json levels = json::array();
  for (const auto& l : levels_) {
    json centers = json::array();
    for (const auto& c : l.centers) centers.push_back({c.x, c.y});
    levels.push_back({{"s", l.s}, {"centers", std::move(centers)}});
  }
  json doc{{"cell_h", cell_h_}, {"cell_w", cell_w_}, {"levels", std::move(levels)}};
  return doc.dump(2) + "\n";
}

AnchorPyramid AnchorPyramid::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), 0, "");
  }
  try {
    std::vector<AnchorLevel> levels;
    for (const auto& l : doc.at("levels")) {
      AnchorLevel lvl;
      lvl.s = l.at("s").get<int>();
      for (const auto& c : l.at("centers")) {
        if (!c.is_array() || c.size() != 2)
          throw ParseError("center must be [dx, dy]", 0, "levels.centers");
        lvl.centers.push_back({c[0].get<double>(), c[1].get<double>()});
      }
      levels.push_back(std::move(lvl));
    }
    return AnchorPyramid(doc.at("cell_h").get<int>(), doc.at("cell_w").get<int>(),
                         std::move(levels));
  } catch (const json::exception& e) {
    throw ParseError(e.what(), 0, "pyramid");
  }
}

void AnchorPyramid::save(const std::filesystem::path& path) const {
  detail::write_file(path, to_json());
}

AnchorPyramid AnchorPyramid::load(const std::filesystem::path& path) {
  return from_json(detail::read_file(path));
}

std::vector<std::vector<Point2>> crop_to_cells(std::span<const Scene> scenes,
                                               int cell_h, int cell_w) {
  if (cell_h <= 0 || cell_w <= 0)
    throw ValidationError("grid cell size must be positive");
  std::vector<std::vector<Point2>> out;
  for (const auto& scene : scenes) {
    // (v, u) keys give row-major order.
    std::map<std::pair<int, int>, std::vector<Point2>> cells;
    for (const auto& p : scene.points()) {
      const int u = static_cast<int>(std::floor(p.x / cell_w));
      const int v = static_cast<int>(std::floor(p.y / cell_h));
      cells[{v, u}].push_back(
          {p.x - static_cast<double>(u) * cell_w, p.y - static_cast<double>(v) * cell_h});
    }
    for (auto& [key, pts] : cells) out.push_back(std::move(pts));
  }
  return out;
}

namespace {

double sq_dist(const Point2& a, const Point2& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

std::vector<Point2> kmeanspp_init(std::span<const Point2> points, int k,
                                  std::mt19937_64& rng) {
  std::vector<Point2> centers;
  centers.reserve(static_cast<std::size_t>(k));
  std::uniform_int_distribution<std::size_t> pick(0, points.size() - 1);
  centers.push_back(points[pick(rng)]);

  std::vector<double> d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) d2[i] = sq_dist(points[i], centers[0]);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t chosen = 0;
    if (total > 0.0) {
      double target = unit(rng) * total;
      chosen = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      // Every point coincides with a center already; any pick is as good.
      chosen = pick(rng);
    }
    centers.push_back(points[chosen]);
    for (std::size_t i = 0; i < points.size(); ++i)
      d2[i] = std::min(d2[i], sq_dist(points[i], centers.back()));
  }
  return centers;
}

}  // namespace

KMeansResult kmeans(std::span<const Point2> points, int k, std::uint64_t seed,
                    int max_iter, double tol) {
  if (k < 1) throw ValidationError("k-means needs k >= 1");
  if (points.size() < static_cast<std::size_t>(k))
    throw ValidationError("k-means needs at least k=" + std::to_string(k) +
                          " points, got " + std::to_string(points.size()) +
                          "; fall back to a fixed layout");

  std::mt19937_64 rng(seed);
  KMeansResult result;
  result.centers = kmeanspp_init(points, k, rng);

  const std::size_t n = points.size();
  const auto nk = static_cast<std::size_t>(k);
  std::vector<std::size_t> label(n, 0);

  auto assign = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < nk; ++c) {
        const double d = sq_dist(points[i], result.centers[c]);
        if (d < best) {
          best = d;
          label[i] = c;
        }
      }
    }
  };

  for (int iter = 0; iter < max_iter; ++iter) {
    assign();
    std::vector<double> sx(nk, 0.0), sy(nk, 0.0);
    std::vector<std::size_t> count(nk, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sx[label[i]] += points[i].x;
      sy[label[i]] += points[i].y;
      ++count[label[i]];
    }
    std::vector<Point2> next(nk);
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < nk; ++c) {
      if (count[c] > 0) {
        next[c] = {sx[c] / count[c], sy[c] / count[c]};
        continue;
      }
      // Reseed to the point farthest from its current center.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = sq_dist(points[i], result.centers[label[i]]);
        if (!taken[i] && d > far_d) {
          far_d = d;
          far = i;
        }
      }
      taken[far] = true;
      next[c] = points[far];
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < nk; ++c)
      shift = std::max(shift, std::sqrt(sq_dist(next[c], result.centers[c])));
    result.centers = std::move(next);
    result.iterations = iter + 1;
    if (shift < tol) break;
  }

  assign();
  result.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    result.inertia += sq_dist(points[i], result.centers[label[i]]);
  return result;
}

std::vector<Point2> uniform_layout(int s, int cell_h, int cell_w) {
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(s))));
  const int rows = (s + cols - 1) / cols;
  std::vector<Point2> out;
  out.reserve(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) {
    const int r = i / cols;
    const int c = i % cols;
    out.push_back({(c + 0.5) * cell_w / cols, (r + 0.5) * cell_h / rows});
  }
  return out;
}

AnchorPyramid learn_pyramid(std::span<const Scene> scenes,
                            std::span<const int> s_levels, int cell_h,
                            int cell_w, std::uint64_t seed,
                            PriorLearnStats* stats) {
  if (s_levels.empty()) throw ValidationError("need at least one anchor level");
  for (std::size_t i = 1; i < s_levels.size(); ++i)
    if (s_levels[i] <= s_levels[i - 1])
      throw ValidationError("anchor levels must be strictly increasing", {i});

  const auto cells = crop_to_cells(scenes, cell_h, cell_w);
  std::vector<Point2> pooled;
  for (const auto& c : cells) pooled.insert(pooled.end(), c.begin(), c.end());
  if (pooled.empty())
    throw ValidationError("no annotated points to learn anchor priors from");

  PriorLearnStats local;
  local.pooled_points = pooled.size();
  local.nonempty_cells = cells.size();

  // Largest representable value strictly below the cell extent.
  const double max_x = std::nextafter(static_cast<double>(cell_w), 0.0);
  const double max_y = std::nextafter(static_cast<double>(cell_h), 0.0);

  std::vector<AnchorLevel> levels;
  for (std::size_t i = 0; i < s_levels.size(); ++i) {
    const int s = s_levels[i];
    AnchorLevel lvl{s, {}};
    if (pooled.size() < static_cast<std::size_t>(s)) {
      lvl.centers = uniform_layout(s, cell_h, cell_w);
      local.inertia.push_back(std::numeric_limits<double>::quiet_NaN());
      local.used_fallback.push_back(true);
    } else {
      auto fit = kmeans(pooled, s, seed + i);
      for (auto& c : fit.centers)
        c = {std::clamp(c.x, 0.0, max_x), std::clamp(c.y, 0.0, max_y)};
      // Canonical order so that equal fits serialize identically.
      std::ranges::sort(fit.centers, [](const Point2& a, const Point2& b) {
        return a.y != b.y ? a.y < b.y : a.x < b.x;
      });
      lvl.centers = std::move(fit.centers);
      local.inertia.push_back(fit.inertia);
      local.used_fallback.push_back(false);
    }
    levels.push_back(std::move(lvl));
  }
  if (stats) *stats = std::move(local);
  return AnchorPyramid(cell_h, cell_w, std::move(levels));
}

}  // namespace crowdloc
