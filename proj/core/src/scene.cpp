#include "crowdloc/scene.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "crowdloc/error.hpp"
#include "json.hpp"
#include "text_io.hpp"

namespace crowdloc {

using nlohmann::json;

Scene::Scene(int width, int height, std::vector<GroundTruthPoint> points)
    : width_(width), height_(height), points_(std::move(points)) {
  if (width_ <= 0 || height_ <= 0) {
    throw ValidationError("scene dimensions must be positive, got " +
                          std::to_string(width_) + "x" +
                          std::to_string(height_));
  }
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    const bool in_bounds = std::isfinite(p.x) && std::isfinite(p.y) &&
                           p.x >= 0.0 && p.x < width_ && p.y >= 0.0 &&
                           p.y < height_;
    const bool box_ok = !p.box || (p.box->h > 0.0 && p.box->w > 0.0 &&
                                   std::isfinite(p.box->h) &&
                                   std::isfinite(p.box->w));
    if (!in_bounds || !box_ok) bad.push_back(i);
  }
  if (!bad.empty()) {
    throw ValidationError("points outside the " + std::to_string(width_) +
                              "x" + std::to_string(height_) +
                              " image or with invalid box extent",
                          std::move(bad));
  }
}

std::vector<Point2> Scene::positions() const {
  std::vector<Point2> out;
  out.reserve(points_.size());
  for (const auto& p : points_) out.push_back(p.position());
  return out;
}

DensityGrid::DensityGrid(int rows, int cols, int cell_h, int cell_w)
    : DensityGrid(cell_h, cell_w,
                  Matrix(static_cast<std::size_t>(std::max(rows, 0)),
                         static_cast<std::size_t>(std::max(cols, 0)))) {
  if (rows <= 0 || cols <= 0)
    throw ValidationError("density grid needs at least one cell");
}

DensityGrid::DensityGrid(int cell_h, int cell_w, Matrix values)
    : cell_h_(cell_h), cell_w_(cell_w), values_(std::move(values)) {
  if (cell_h_ <= 0 || cell_w_ <= 0)
    throw ValidationError("grid cell size must be positive");
  std::vector<std::size_t> bad;
  const auto v = values_.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!(v[i] >= 0.0) || !std::isfinite(v[i])) bad.push_back(i);
  if (!bad.empty())
    throw ValidationError("density values must be finite and non-negative",
                          std::move(bad));
}

DensityGrid DensityGrid::zeros_for(ImageSize size, int cell_h, int cell_w) {
  if (cell_h <= 0 || cell_w <= 0)
    throw ValidationError("grid cell size must be positive");
  const int rows = (size.height + cell_h - 1) / cell_h;
  const int cols = (size.width + cell_w - 1) / cell_w;
  return DensityGrid(rows, cols, cell_h, cell_w);
}

void DensityGrid::set(int u, int v, double value) {
  if (!(value >= 0.0) || !std::isfinite(value))
    throw ValidationError("density values must be finite and non-negative");
  values_(static_cast<std::size_t>(v), static_cast<std::size_t>(u)) = value;
}

double DensityGrid::total() const noexcept {
  double sum = 0.0;
  for (double v : values_.values()) sum += v;
  return sum;
}

bool DensityGrid::is_integral() const noexcept {
  return std::ranges::all_of(values_.values(),
                             [](double v) { return v == std::floor(v); });
}

DensityGrid gt_density_grid(const Scene& scene, int cell_h, int cell_w) {
  auto grid = DensityGrid::zeros_for(scene.size(), cell_h, cell_w);
  for (const auto& p : scene.points()) {
    const int u = static_cast<int>(std::floor(p.x / cell_w));
    const int v = static_cast<int>(std::floor(p.y / cell_h));
    grid.set(u, v, grid.at(u, v) + 1.0);
  }
  return grid;
}

namespace {

std::size_t line_of_byte(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + byte, '\n'));
}

double number_field(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError("missing required field", 0, where + "." + key);
  if (!it->is_number())
    throw ParseError("expected a number", 0, where + "." + key);
  return it->get<double>();
}

int int_field(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("missing required field", 0, key);
  if (!it->is_number_integer())
    throw ParseError("expected an integer", 0, key);
  return it->get<int>();
}

std::optional<BoxExtent> box_fields(std::optional<double> h,
                                    std::optional<double> w,
                                    const std::string& where, std::size_t line) {
  if (h.has_value() != w.has_value())
    throw ParseError("box extent needs both h and w", line, where);
  if (!h) return std::nullopt;
  return BoxExtent{*h, *w};
}

Scene parse_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), line_of_byte(text, e.byte), "");
  }
  if (!doc.is_object()) throw ParseError("expected a JSON object", 1, "");
  const int width = int_field(doc, "width");
  const int height = int_field(doc, "height");
  const auto pts = doc.find("points");
  if (pts == doc.end()) throw ParseError("missing required field", 0, "points");
  if (!pts->is_array()) throw ParseError("expected an array", 0, "points");

  std::vector<GroundTruthPoint> points;
  points.reserve(pts->size());
  for (std::size_t i = 0; i < pts->size(); ++i) {
    const auto& item = (*pts)[i];
    const std::string where = "points[" + std::to_string(i) + "]";
    if (!item.is_object()) throw ParseError("expected an object", 0, where);
    GroundTruthPoint p;
    p.x = number_field(item, "x", where);
    p.y = number_field(item, "y", where);
    std::optional<double> h, w;
    if (item.contains("h") && !item["h"].is_null()) h = number_field(item, "h", where);
    if (item.contains("w") && !item["w"].is_null()) w = number_field(item, "w", where);
    p.box = box_fields(h, w, where, 0);
    points.push_back(p);
  }
  return Scene(width, height, std::move(points));
}

Scene parse_csv(std::string_view text, ImageSize size) {
  const auto rows = detail::split_lines(text);
  if (rows.empty()) throw ParseError("missing header", 1, "");
  const auto header = detail::split_csv_row(rows.front().text);
  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::trim(header[i]) == name) return i;
    return std::nullopt;
  };
  const auto cx = column("x");
  const auto cy = column("y");
  const auto ch = column("h");
  const auto cw = column("w");
  if (!cx) throw ParseError("header lacks column", 1, "x");
  if (!cy) throw ParseError("header lacks column", 1, "y");
  if (ch.has_value() != cw.has_value())
    throw ParseError("header must carry both h and w or neither", 1,
                     ch ? "w" : "h");

  std::vector<GroundTruthPoint> points;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (detail::trim(row.text).empty()) continue;
    const auto cells = detail::split_csv_row(row.text);
    auto read = [&](std::optional<std::size_t> col,
                    const char* name) -> std::optional<double> {
      if (!col || *col >= cells.size()) return std::nullopt;
      const auto cell = detail::trim(cells[*col]);
      if (cell.empty()) return std::nullopt;
      const auto v = detail::parse_double(cell);
      if (!v) throw ParseError("not a number: '" + std::string(cell) + "'",
                               row.line, name);
      return v;
    };
    const auto x = read(cx, "x");
    const auto y = read(cy, "y");
    if (!x) throw ParseError("missing value", row.line, "x");
    if (!y) throw ParseError("missing value", row.line, "y");
    GroundTruthPoint p{*x, *y, std::nullopt};
    p.box = box_fields(read(ch, "h"), read(cw, "w"), "h/w", row.line);
    points.push_back(p);
  }
  return Scene(size.width, size.height, std::move(points));
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto out = path;
  out += ".meta.json";
  return out;
}

ImageSize read_sidecar(const std::filesystem::path& path) {
  const auto text = detail::read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(e.what()) + " in " + path.string(),
                     line_of_byte(text, e.byte), "");
  }
  return {int_field(doc, "width"), int_field(doc, "height")};
}

}  // namespace

Scene parse_annotations(std::string_view text, AnnotationFormat format,
                        std::optional<ImageSize> size) {
  if (format == AnnotationFormat::kJson) return parse_json(text);
  if (!size) throw ValidationError("CSV annotations need an image size");
  return parse_csv(text, *size);
}

Scene load_annotations(const std::filesystem::path& path,
                       AnnotationFormat format, std::optional<ImageSize> size) {
  const auto text = detail::read_file(path);
  if (format == AnnotationFormat::kCsv && !size) {
    const auto meta = sidecar_path(path);
    if (!std::filesystem::exists(meta))
      throw ValidationError("CSV annotations need an image size: pass it "
                            "explicitly or provide " + meta.string());
    size = read_sidecar(meta);
  }
  return parse_annotations(text, format, size);
}

std::string format_annotations(const Scene& scene, AnnotationFormat format) {
  if (format == AnnotationFormat::kJson) {
    json pts = json::array();
    for (const auto& p : scene.points()) {
      json item{{"x", p.x}, {"y", p.y}};
      if (p.box) {
        item["h"] = p.box->h;
        item["w"] = p.box->w;
      }
      pts.push_back(std::move(item));
    }
    json doc{{"width", scene.width()},
             {"height", scene.height()},
             {"points", std::move(pts)}};
    return doc.dump(2) + "\n";
  }
  const bool any_box = std::ranges::any_of(
      scene.points(), [](const auto& p) { return p.box.has_value(); });
  std::ostringstream out;
  out << (any_box ? "x,y,h,w\n" : "x,y\n");
  for (const auto& p : scene.points()) {
    out << detail::format_double(p.x) << ',' << detail::format_double(p.y);
    if (any_box) {
      out << ',';
      if (p.box)
        out << detail::format_double(p.box->h) << ','
            << detail::format_double(p.box->w);
      else
        out << ',';
    }
    out << '\n';
  }
  return out.str();
}

void save_annotations(const Scene& scene, const std::filesystem::path& path,
                      AnnotationFormat format) {
  detail::write_file(path, format_annotations(scene, format));
  if (format == AnnotationFormat::kCsv) {
    json meta{{"width", scene.width()}, {"height", scene.height()}};
    detail::write_file(sidecar_path(path), meta.dump() + "\n");
  }
}

AnnotationFormat format_from_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::ranges::transform(ext, ext.begin(),
                         [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv") return AnnotationFormat::kCsv;
  if (ext == ".json") return AnnotationFormat::kJson;
  throw ValidationError("cannot infer annotation format from '" +
                        path.string() + "' (expected .json or .csv)");
}

}  // namespace crowdloc
