#pragma once

// Per-point tracking over a FeatureVolume: descriptor preparation, correlation
// maps, map upsampling, soft-argmax localisation, query refinement and
// forward-backward visibility.

#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "headtrack/model.hpp"
#include "headtrack/rope.hpp"

namespace headtrack {

/// Which harvested tensor feeds the query side and the target side.
enum class DescriptorMode { query_query, key_key, query_key, key_query, hidden_hidden };
enum class Similarity { cosine, dot };
/// low_first keeps the lowest-frequency pairs, high_first the highest.
enum class BandOrder { low_first, high_first };
/// direct: one hop from the current frame back to the query frame.
/// hop_by_hop: step back one frame at a time, re-sampling at each landing.
enum class BackwardMode { direct, hop_by_hop };
enum class Side { source, target };
/// feature: target descriptors are bilinearly sampled (then filtered and
/// normalised) on a lattice of step 1/U cells whose nodes include every cell
/// centre. map: the cell-resolution correlation map is upsampled instead.
enum class UpsampleMode { feature, map };

const char* to_string(DescriptorMode mode);
std::optional<DescriptorMode> parse_descriptor_mode(std::string_view name);
std::pair<DescriptorKind, DescriptorKind> decompose(DescriptorMode mode);
const char* to_string(UpsampleMode mode);
std::optional<UpsampleMode> parse_upsample_mode(std::string_view name);

struct TrackerToggles {
  bool refinement = true;
  bool frequency_filter = true;
  bool soft_argmax = true;
  bool fb_check = true;
  bool upsampling = true;

  bool operator==(const TrackerToggles&) const = default;
};

struct TrackerConfig {
  int layer = 0;
  int head = 0;
  /// Track with the concatenation of every head's unit-normalised descriptor.
  bool aggregate_layer = false;
  DescriptorMode descriptor = DescriptorMode::key_key;
  Similarity similarity = Similarity::cosine;
  KeepFractions keep_low = KeepFractions::uniform(0.85);
  bool pooled_filter = false;
  BandOrder band_order = BandOrder::low_first;
  double temperature = 0.002;  // adjacent 1/U lattice nodes differ by ~0.01 in cosine
  int window_radius = 3;  // cells; 0 = whole map
  int upsample_factor = 4;
  UpsampleMode upsample_mode = UpsampleMode::feature;
  double refine_alpha = 0.1;
  double fb_threshold = 8.0;  // pixels in the 256x256 frame
  BackwardMode backward = BackwardMode::direct;
  TrackerToggles toggles;

  bool operator==(const TrackerConfig&) const = default;
};

/// Throws DomainError when the config is inconsistent with the volume.
void validate(const TrackerConfig& cfg, const FeatureVolume& fv);

/// The mask frequency filtering applies under `cfg`.
BandMask effective_mask(const TrackerConfig& cfg, const RopeLayout& layout);

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const PixelPoint&) const = default;
};

/// Similarity grid. Entry (r, c) sits at cell coordinates (r * scale_y, c * scale_x).
struct CorrelationMap {
  int frame = 0;
  int rows = 0;
  int cols = 0;
  double scale_y = 1.0;  // cells per entry
  double scale_x = 1.0;
  int patch_size = 1;
  std::vector<double> values;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

std::vector<float> prepare_descriptor(const FeatureVolume& fv, const TrackerConfig& cfg, Side side, int frame,
                                      double y_cell, double x_cell);
CorrelationMap correlation_map(std::span<const float> q, const FeatureVolume& fv, const TrackerConfig& cfg,
                               int frame);
/// Corner-aligned bilinear upsampling: the first and last entries of each axis
/// stay on the first and last cell centres.
CorrelationMap upsample_map(const CorrelationMap& m, int factor);
/// Softmax-weighted mean of entry centres inside the window around the hard
/// argmax (ties: smallest row-major index). `soft = false` returns the hard
/// argmax centre.
PixelPoint soft_argmax(const CorrelationMap& m, double temperature, int window_radius, bool soft = true);
/// d <- normalize((1 - alpha) d + alpha f_new). Returns d unchanged and sets
/// `degenerate` when the blend (or f_new) cannot be normalised.
std::vector<float> refine_query(std::span<const float> d, const FeatureVolume& fv, const TrackerConfig& cfg,
                                int frame, PixelPoint tracked, bool* degenerate = nullptr);
/// Backward-hop deviation in 256x256-normalised pixels; +inf when a hop is degenerate.
double fb_deviation(const FeatureVolume& fv, const TrackerConfig& cfg, int t_query, PixelPoint p_query, int t_now,
                    PixelPoint p_now);
Trajectory track_point(const FeatureVolume& fv, const TrackerConfig& cfg, const QueryPoint& q);
std::vector<Trajectory> track_video(const FeatureVolume& fv, const TrackerConfig& cfg,
                                    std::span<const QueryPoint> queries);

/// Pixel distance after rescaling both axes into a 256x256 frame.
double distance_256(PixelPoint a, PixelPoint b, int video_h, int video_w);

/// Tracking engine bound to one volume and config. Target-side descriptors of
/// every frame are prepared once at construction; all methods are const and
/// safe to call concurrently.
class Tracker {
 public:
  Tracker(const FeatureVolume& fv, TrackerConfig cfg);

  const FeatureVolume& volume() const { return *fv_; }
  const TrackerConfig& config() const { return cfg_; }
  int descriptor_dim() const { return dim_; }

  std::vector<float> prepare(Side side, int frame, double y_cell, double x_cell) const;
  std::vector<float> prepare_at_pixel(Side side, int frame, PixelPoint p) const;
  CorrelationMap correlate(std::span<const float> q, int frame) const;
  /// Target lattice: cell grid, or the 1/U lattice under feature upsampling.
  int lattice_rows() const { return rows_; }
  int lattice_cols() const { return cols_; }
  double lattice_step() const { return step_; }

  /// correlate -> optional map upsampling -> soft-argmax.
  PixelPoint localize(std::span<const float> q, int frame) const;
  double fb_deviation(int t_query, PixelPoint p_query, int t_now, PixelPoint p_now) const;
  std::vector<float> refine(std::span<const float> d, int frame, PixelPoint tracked, bool* degenerate) const;

  struct RunOptions {
    std::optional<std::vector<float>> initial_descriptor;  // replaces the descriptor sampled at the query
    bool forward = true;
    bool backward = true;
    bool query_visible = true;
  };
  struct Run {
    Trajectory trajectory;
    std::vector<float> forward_descriptor;   // state after the last forward frame
    std::vector<float> backward_descriptor;  // state after the last backward frame
  };
  Run run(const QueryPoint& q, const RunOptions& options) const;
  Trajectory track(const QueryPoint& q) const;

 private:
  void prepare_targets();
  std::vector<float> prepare_kind(DescriptorKind kind, int frame, double y_cell, double x_cell) const;

  const FeatureVolume* fv_;
  TrackerConfig cfg_;
  DescriptorKind source_;
  DescriptorKind target_;
  BandMask mask_;
  int dim_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  double step_ = 1.0;  // cells per lattice entry
  std::vector<float> targets_;              // [frame][row][col][dim]
  std::vector<std::uint8_t> frame_degenerate_;
};

}  // namespace headtrack
