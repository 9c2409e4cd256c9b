#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crowdloc/matrix.hpp"

namespace crowdloc {

// Image-plane coordinate convention used across the library: x is the
// horizontal axis (columns), y the vertical axis (rows). Grid index u counts
// x-cells of width cell_w, v counts y-cells of height cell_h.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

struct BoxExtent {
  double h = 0.0;
  double w = 0.0;

  friend bool operator==(const BoxExtent&, const BoxExtent&) = default;
};

// Annotated head location. The optional box drives per-point match radii
// during evaluation.
struct GroundTruthPoint {
  double x = 0.0;
  double y = 0.0;
  std::optional<BoxExtent> box;

  Point2 position() const noexcept { return {x, y}; }
  friend bool operator==(const GroundTruthPoint&,
                         const GroundTruthPoint&) = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;
};

// An annotated image. Construction validates every point against the image
// bounds and throws ValidationError listing the offending indices.
class Scene {
 public:
  Scene(int width, int height, std::vector<GroundTruthPoint> points = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  ImageSize size() const noexcept { return {width_, height_}; }
  std::span<const GroundTruthPoint> points() const noexcept { return points_; }
  std::vector<Point2> positions() const;

  friend bool operator==(const Scene&, const Scene&) = default;

 private:
  int width_;
  int height_;
  std::vector<GroundTruthPoint> points_;
};

// Per-cell count field over a regular grid. Storage is row-major with rows
// indexed by v (y-cells) and columns by u (x-cells).
class DensityGrid {
 public:
  DensityGrid(int rows, int cols, int cell_h, int cell_w);
  DensityGrid(int cell_h, int cell_w, Matrix values);

  // Grid covering `size` with partial edge cells where the image does not
  // divide evenly.
  static DensityGrid zeros_for(ImageSize size, int cell_h, int cell_w);

  int rows() const noexcept { return static_cast<int>(values_.rows()); }
  int cols() const noexcept { return static_cast<int>(values_.cols()); }
  int cell_h() const noexcept { return cell_h_; }
  int cell_w() const noexcept { return cell_w_; }

  double at(int u, int v) const { return values_(v, u); }
  void set(int u, int v, double value);

  const Matrix& matrix() const noexcept { return values_; }
  double total() const noexcept;
  bool is_integral() const noexcept;

  friend bool operator==(const DensityGrid&, const DensityGrid&) = default;

 private:
  int cell_h_;
  int cell_w_;
  Matrix values_;
};

enum class AnnotationFormat { kJson, kCsv };

// Parses annotation text. CSV input carries no image size, so `size` must be
// supplied for it.
Scene parse_annotations(std::string_view text, AnnotationFormat format,
                        std::optional<ImageSize> size = std::nullopt);

// Loads an annotation file. For CSV the image size comes from `size` when
// given, otherwise from a sidecar `<path>.meta.json` holding width/height.
Scene load_annotations(const std::filesystem::path& path,
                       AnnotationFormat format,
                       std::optional<ImageSize> size = std::nullopt);

std::string format_annotations(const Scene& scene, AnnotationFormat format);

// Writes `scene` to `path`; CSV output also writes the sidecar.
void save_annotations(const Scene& scene, const std::filesystem::path& path,
                      AnnotationFormat format);

AnnotationFormat format_from_extension(const std::filesystem::path& path);

// Ground-truth count grid: each point lands in the half-open cell
// [u*cell_w, (u+1)*cell_w) x [v*cell_h, (v+1)*cell_h).
DensityGrid gt_density_grid(const Scene& scene, int cell_h, int cell_w);

}  // namespace crowdloc
