#pragma once

// Shared domain types for the tracking toolkit.
//
// Coordinates: pixel origin at the top-left corner of the video, x to the
// right, y downward. A feature cell (y, x) is centred on pixel
// ((y + 0.5) * patch, (x + 0.5) * patch).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace headtrack {

enum class Axis { t = 0, h = 1, w = 2 };
enum class DescriptorKind { query = 0, key = 1, hidden = 2 };

const char* to_string(Axis axis);
const char* to_string(DescriptorKind kind);

/// Per-head channel split of a 3D rotary embedding. Channels are grouped
/// contiguously: [0, d_t) temporal, [d_t, d_t + d_h) vertical, the rest
/// horizontal; within a group pair i occupies channels (2i, 2i + 1).
struct RopeLayout {
  int d_t = 8;
  int d_h = 12;
  int d_w = 12;
  double base = 10000.0;

  int dim() const { return d_t + d_h + d_w; }
  int axis_dim(Axis axis) const;
  int axis_offset(Axis axis) const;
  int pairs(Axis axis) const { return axis_dim(axis) / 2; }
  int total_pairs() const { return dim() / 2; }

  bool operator==(const RopeLayout&) const = default;
};

struct VolumeDims {
  int layers = 1;
  int heads = 1;
  int frames = 1;
  int grid_h = 1;
  int grid_w = 1;
  int head_dim = 2;
  int patch_size = 1;
  int video_h = 1;
  int video_w = 1;

  bool operator==(const VolumeDims&) const = default;
};

/// Dense per-(layer, head) descriptor grids.
///
/// query/key are stored [layer][head][frame][y][x][channel]; hidden is stored
/// [layer][frame][y][x][heads * head_dim]. Arrays are row-major float32.
class FeatureVolume {
 public:
  FeatureVolume() = default;
  FeatureVolume(VolumeDims dims, RopeLayout rope);

  const VolumeDims& dims() const { return dims_; }
  const RopeLayout& rope() const { return rope_; }

  bool has(DescriptorKind kind) const { return arrays_[index(kind)].has_value(); }
  /// Channel count of one descriptor of this kind (head_dim, or heads * head_dim for hidden).
  int descriptor_dim(DescriptorKind kind) const;
  std::size_t expected_size(DescriptorKind kind) const;

  /// Installs an array. Throws DomainError when the size does not match.
  void set(DescriptorKind kind, std::vector<float> values);
  void erase(DescriptorKind kind) { arrays_[index(kind)].reset(); }

  /// Whole array of a kind. Throws DescriptorUnavailable when absent.
  std::span<const float> data(DescriptorKind kind) const;
  std::span<float> mutable_data(DescriptorKind kind);

  /// Offset of the descriptor of one cell. `head` is ignored for hidden.
  std::size_t offset(DescriptorKind kind, int layer, int head, int frame, int y, int x) const;
  /// Stored descriptor at an integer cell.
  std::span<const float> cell(DescriptorKind kind, int layer, int head, int frame, int y, int x) const;

  /// Bitmask over present kinds (bit0 query, bit1 key, bit2 hidden).
  std::uint32_t kinds_mask() const;

 private:
  static std::size_t index(DescriptorKind kind) { return static_cast<std::size_t>(kind); }

  VolumeDims dims_;
  RopeLayout rope_;
  std::optional<std::vector<float>> arrays_[3];
};

struct ValidationReport {
  bool ok = true;
  std::string message;
  std::optional<DescriptorKind> kind;
  std::optional<std::size_t> flat_index;
};

/// Checks every FeatureVolume invariant; reports the first violation.
ValidationReport validate_feature_volume(const FeatureVolume& fv);

/// Bilinear sample of a descriptor at fractional cell coordinates.
std::vector<float> descriptor_at(const FeatureVolume& fv, DescriptorKind kind, int layer, int head,
                                 int frame, double y_cell, double x_cell);

inline double pixel_to_cell(double pixel, int patch_size) { return pixel / patch_size - 0.5; }
inline double cell_to_pixel(double cell, int patch_size) { return (cell + 0.5) * patch_size; }

struct QueryPoint {
  int id = 0;
  int t0 = 0;
  double x = 0.0;
  double y = 0.0;

  bool operator==(const QueryPoint&) const = default;
};

struct TrackPoint {
  int t = 0;
  double x = 0.0;
  double y = 0.0;
  bool visible = true;
  double fb_deviation = 0.0;  // pixels in the 256x256 frame; +inf when undefined

  bool operator==(const TrackPoint&) const = default;
};

struct Trajectory {
  QueryPoint query;
  std::vector<TrackPoint> points;
  int warnings = 0;   // refinement steps skipped because the blend was degenerate
  std::string error;  // non-empty when the query could not be tracked at all

  bool operator==(const Trajectory&) const = default;
};

struct GroundTruthPoint {
  double x = 0.0;
  double y = 0.0;
  bool visible = true;

  bool operator==(const GroundTruthPoint&) const = default;
};

struct GroundTruthTrack {
  QueryPoint query;
  std::vector<GroundTruthPoint> points;

  bool operator==(const GroundTruthTrack&) const = default;
};

struct GroundTruthSet {
  int video_h = 0;
  int video_w = 0;
  int frames = 0;
  std::vector<GroundTruthTrack> tracks;

  std::vector<QueryPoint> queries() const;
  bool operator==(const GroundTruthSet&) const = default;
};

/// Raw RGB video, [frame][y][x][channel] bytes.
struct Video {
  int frames = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;

  Video() = default;
  Video(int f, int h, int w) : frames(f), height(h), width(w), rgb(static_cast<std::size_t>(f) * h * w * 3, 0) {}

  std::size_t index(int t, int y, int x, int c = 0) const {
    return ((static_cast<std::size_t>(t) * height + y) * width + x) * 3 + c;
  }
  std::uint8_t& at(int t, int y, int x, int c) { return rgb[index(t, y, x, c)]; }
  std::uint8_t at(int t, int y, int x, int c) const { return rgb[index(t, y, x, c)]; }

  bool operator==(const Video&) const = default;
};

}  // namespace headtrack
