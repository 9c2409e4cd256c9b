#include "crowdloc/aaps.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "crowdloc/error.hpp"
#include "round.hpp"
#include "text_io.hpp"

namespace crowdloc {

AnchorMask::AnchorMask(int rows, int cols, int depth)
    : rows_(rows), cols_(cols), depth_(depth) {
  if (rows_ < 0 || cols_ < 0 || depth_ < 1)
    throw ValidationError("invalid anchor mask geometry");
  levels_.assign(static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_), 0);
}

std::size_t AnchorMask::index(int u, int v) const {
  if (u < 0 || u >= cols_ || v < 0 || v >= rows_)
    throw ValidationError("cell (" + std::to_string(u) + "," +
                          std::to_string(v) + ") outside the anchor mask");
  return static_cast<std::size_t>(v) * static_cast<std::size_t>(cols_) +
         static_cast<std::size_t>(u);
}

void AnchorMask::set_level(int u, int v, int level) {
  if (level < 0 || level > depth_)
    throw ValidationError("mask level out of range");
  levels_[index(u, v)] = level;
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

AnchorMask build_anchor_mask(const DensityGrid& density,
                             const AnchorPyramid& pyramid) {
  if (density.cell_h() != pyramid.cell_h() || density.cell_w() != pyramid.cell_w())
    throw ValidationError("density grid cell " + std::to_string(density.cell_h()) +
                          "x" + std::to_string(density.cell_w()) +
                          " does not match pyramid cell " +
                          std::to_string(pyramid.cell_h()) + "x" +
                          std::to_string(pyramid.cell_w()));
  AnchorMask mask(density.rows(), density.cols(), pyramid.depth());
  const int k = pyramid.depth();
  for (int v = 0; v < density.rows(); ++v) {
    for (int u = 0; u < density.cols(); ++u) {
      const double d = density.at(u, v);
      int level = 0;
      for (int i = k; i >= 1; --i) {
        if (d >= pyramid.anchors_at(i)) {
          level = i;
          break;
        }
      }
      if (level == 0 && d >= 0.5) level = 1;
      mask.set_level(u, v, level);
    }
  }
  return mask;
}

namespace {

void check_geometry(const AnchorMask& mask, const AnchorPyramid& pyramid) {
  if (mask.depth() != pyramid.depth())
    throw ValidationError("anchor mask depth " + std::to_string(mask.depth()) +
                          " does not match pyramid depth " +
                          std::to_string(pyramid.depth()));
}

}  // namespace

std::vector<Anchor> instantiate_anchors(const AnchorMask& mask,
                                        const AnchorPyramid& pyramid) {
  check_geometry(mask, pyramid);
  std::vector<Anchor> out;
  out.reserve(candidate_count(mask, pyramid));
  for (int v = 0; v < mask.rows(); ++v) {
    for (int u = 0; u < mask.cols(); ++u) {
      const int level = mask.level(u, v);
      if (level == 0) continue;
      const auto& lvl = pyramid.level(level);
      const double ox = static_cast<double>(u) * pyramid.cell_w();
      const double oy = static_cast<double>(v) * pyramid.cell_h();
      for (int j = 0; j < lvl.s; ++j) {
        const auto& c = lvl.centers[static_cast<std::size_t>(j)];
        out.push_back({u, v, level, j + 1, ox + c.x, oy + c.y});
      }
    }
  }
  return out;
}

std::size_t candidate_count(const AnchorMask& mask, const AnchorPyramid& pyramid) {
  check_geometry(mask, pyramid);
  std::size_t n = 0;
  for (int level : mask.levels())
    if (level > 0) n += static_cast<std::size_t>(pyramid.anchors_at(level));
  return n;
}

std::vector<Candidate> decode_candidates(std::span<const Anchor> anchors,
                                         std::span<const RawPrediction> raw,
                                         int cell_h, int cell_w) {
  if (anchors.size() != raw.size())
    throw ValidationError("got " + std::to_string(raw.size()) +
                          " raw predictions for " +
                          std::to_string(anchors.size()) + " anchors");
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < raw.size(); ++i)
    if (!std::isfinite(raw[i].ox) || !std::isfinite(raw[i].oy) ||
        !std::isfinite(raw[i].c))
      bad.push_back(i);
  if (!bad.empty())
    throw NumericError("non-finite logits for " + std::to_string(bad.size()) +
                       " anchor(s), first at index " + std::to_string(bad.front()));

  const double half_w = 0.5 * cell_w;
  const double half_h = 0.5 * cell_h;
  std::vector<Candidate> out;
  out.reserve(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const auto& a = anchors[i];
    const auto& r = raw[i];
    out.push_back({a.base_x + sigmoid(r.ox) * cell_w - half_w,
                   a.base_y + sigmoid(r.oy) * cell_h - half_h, sigmoid(r.c), a, r});
  }
  return out;
}

std::vector<Candidate> infer_select(std::span<const Candidate> candidates,
                                    const DensityGrid& density) {
  // Group by (v, u) so the output comes out row-major.
  std::map<std::pair<int, int>, std::vector<const Candidate*>> cells;
  for (const auto& c : candidates) {
    if (c.anchor.grid_u < 0 || c.anchor.grid_u >= density.cols() ||
        c.anchor.grid_v < 0 || c.anchor.grid_v >= density.rows())
      throw ValidationError("candidate cell outside the density grid");
    cells[{c.anchor.grid_v, c.anchor.grid_u}].push_back(&c);
  }
  std::vector<Candidate> out;
  for (auto& [key, group] : cells) {
    const double want = detail::round_half_even(density.at(key.second, key.first));
    const auto keep = std::min(group.size(), static_cast<std::size_t>(std::max(want, 0.0)));
    std::ranges::stable_sort(group, [](const Candidate* a, const Candidate* b) {
      if (a->p != b->p) return a->p > b->p;
      return a->anchor.slot < b->anchor.slot;
    });
    for (std::size_t i = 0; i < keep; ++i) out.push_back(*group[i]);
  }
  return out;
}

std::vector<Prediction> predictions_of(std::span<const Candidate> candidates) {
  std::vector<Prediction> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.prediction());
  return out;
}

void write_candidates_csv(std::ostream& out, std::span<const Candidate> candidates) {
  out << "cell_u,cell_v,level,slot,x,y,p\n";
  for (const auto& c : candidates) {
    out << c.anchor.grid_u << ',' << c.anchor.grid_v << ',' << c.anchor.level
        << ',' << c.anchor.slot << ',' << detail::format_double(c.x) << ','
        << detail::format_double(c.y) << ',' << detail::format_double(c.p) << '\n';
  }
}

std::vector<Candidate> read_candidates_csv(std::istream& in) {
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto text = ss.str();
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ParseError("missing header", 1, "");

  const auto header = detail::split_csv_row(lines.front().text);
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::trim(header[i]) == name) return i;
    return std::nullopt;
  };
  const auto cx = column("x"), cy = column("y"), cp = column("p");
  const auto cu = column("cell_u"), cv = column("cell_v");
  const auto cl = column("level"), cs = column("slot");
  if (!cx) throw ParseError("header lacks column", 1, "x");
  if (!cy) throw ParseError("header lacks column", 1, "y");
  if (!cp) throw ParseError("header lacks column", 1, "p");

  std::vector<Candidate> out;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto& line = lines[r];
    if (detail::trim(line.text).empty()) continue;
    const auto cells = detail::split_csv_row(line.text);
    auto real = [&](std::size_t col, const char* name) {
      if (col >= cells.size()) throw ParseError("missing value", line.line, name);
      const auto v = detail::parse_double(detail::trim(cells[col]));
      if (!v) throw ParseError("not a number", line.line, name);
      return *v;
    };
    auto integer = [&](std::optional<std::size_t> col, const char* name) {
      if (!col) return 0;
      if (*col >= cells.size()) throw ParseError("missing value", line.line, name);
      const auto v = detail::parse_int(detail::trim(cells[*col]));
      if (!v) throw ParseError("not an integer", line.line, name);
      return static_cast<int>(*v);
    };
    Candidate c;
    c.x = real(*cx, "x");
    c.y = real(*cy, "y");
    c.p = real(*cp, "p");
    if (!(c.p >= 0.0 && c.p <= 1.0))
      throw ParseError("probability outside [0,1]", line.line, "p");
    c.anchor.grid_u = integer(cu, "cell_u");
    c.anchor.grid_v = integer(cv, "cell_v");
    c.anchor.level = integer(cl, "level");
    c.anchor.slot = integer(cs, "slot");
    c.anchor.base_x = c.x;
    c.anchor.base_y = c.y;
    out.push_back(c);
  }
  return out;
}

}  // namespace crowdloc
