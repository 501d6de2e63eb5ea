#pragma once

// Head-level analysis: synthetic calibration videos with analytic ground
// truth, per-head scoring, best-head selection, layer aggregation, attention
// taxonomy and frequency sweeps.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "headtrack/metrics.hpp"
#include "headtrack/model.hpp"
#include "headtrack/tracker.hpp"

namespace headtrack {

// ---------------------------------------------------------------------------
// Calibration videos

enum class MotionPreset { translate, circular, mixed };
enum class OccluderPreset { none, moving_bar };

const char* to_string(MotionPreset m);
const char* to_string(OccluderPreset o);
std::optional<MotionPreset> parse_motion(std::string_view s);
std::optional<OccluderPreset> parse_occluder(std::string_view s);

struct Velocity {
  double x = 0.0;
  double y = 0.0;
};

struct CalibrationSpec {
  int n_videos = 1;
  int frames = 8;
  int video_h = 64;
  int video_w = 64;
  int sprites = 2;
  MotionPreset motion = MotionPreset::translate;
  double max_speed = 2.0;  // pixels per frame
  OccluderPreset occluder = OccluderPreset::none;
  std::uint64_t texture_seed = 0;

  int sprite_size = 24;
  /// When set, every translating sprite moves with exactly this velocity.
  std::optional<Velocity> velocity;
  double texture_wavelength = 24.0;  // pixels; larger is smoother
  int queries_per_video = 12;
  double sprite_query_fraction = 0.5;
  int query_frame = 0;
  int query_grid = 8;  // snap queries to centres of this pixel grid; 0 = no snapping
  int query_margin = 4;
  int bar_width = 12;
  double bar_speed = 6.0;
};

struct CalibrationSample {
  Video video;
  GroundTruthSet gt;
};

/// Throws DomainError when a sprite does not fit the frame.
std::vector<CalibrationSample> generate_calibration(const CalibrationSpec& spec);

// ---------------------------------------------------------------------------
// Head scoring

struct HeadScore {
  int layer = 0;
  int head = 0;
  double delta_avg = 0.0;
  double aj = 0.0;
  double oa = 0.0;
  std::string error;  // tracker failure recorded instead of thrown

  bool operator==(const HeadScore&) const = default;
};

/// One video's features and its ground truth.
struct EvalCase {
  const FeatureVolume* volume = nullptr;
  const GroundTruthSet* gt = nullptr;
};

/// Scores pooled over every case with `cfg` as-is.
HeadScore score_config(std::span<const EvalCase> cases, const TrackerConfig& cfg);
/// One score per (layer, head), ordered layer-major.
std::vector<HeadScore> score_heads(std::span<const EvalCase> cases, const TrackerConfig& base);
/// argmax of delta_avg; ties go to the lower (layer, head).
std::pair<int, int> select_head(std::span<const HeadScore> scores);
/// Tracks with the concatenation of every head's unit-normalised descriptor.
HeadScore layer_aggregate_score(std::span<const EvalCase> cases, int layer, const TrackerConfig& base);

struct LayerSummary {
  int layer = 0;
  HeadScore aggregate;
  double head_min = 0.0;
  double head_mean = 0.0;
  double head_max = 0.0;
};
std::vector<LayerSummary> summarize_layers(std::span<const EvalCase> cases, std::span<const HeadScore> scores,
                                           const TrackerConfig& base);

// ---------------------------------------------------------------------------
// Attention taxonomy (diagnostic only; never consumed by tracking)

enum class HeadLabel { positional, matching, semantic };
const char* to_string(HeadLabel label);

struct HeadDiagnostics {
  double p_self = 0.0;    // mass within radius 1 of the same cell, same frame
  double p_corr = 0.0;    // share of cross-frame mass within radius 1 of the same cell
  double entropy = 0.0;   // mean row entropy / log(F*H*W)
  double corr_baseline = 0.0;  // p_corr under uniform attention
};

struct HeadClass {
  HeadLabel label = HeadLabel::semantic;
  HeadDiagnostics diagnostics;
};

HeadClass classify_head(std::span<const float> attention, int frames, int grid_h, int grid_w);

// ---------------------------------------------------------------------------
// Frequency sweep

struct SweepPoint {
  double fraction = 0.0;
  double delta_avg = 0.0;
  bool degenerate = false;  // the mask kept no channel
};

/// For each fraction, keeps that share of pairs per axis (lowest frequencies
/// for low_first, highest for high_first) and scores the tracker.
std::vector<SweepPoint> frequency_sweep(std::span<const EvalCase> cases, const TrackerConfig& cfg,
                                        std::span<const double> fractions, BandOrder direction);

}  // namespace headtrack
