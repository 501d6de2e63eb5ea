#pragma once

// TAP-Vid point-tracking metrics.
//
// Distances are measured after rescaling x by 256 / video_w and y by
// 256 / video_h (both frames become 256x256) unless native pixels are
// requested. Frames where the ground truth is occluded do not count toward
// delta_avg, count toward OA, and enter AJ only as false positives.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "headtrack/model.hpp"

namespace headtrack {

inline constexpr std::array<double, 5> kThresholds{1.0, 2.0, 4.0, 8.0, 16.0};

struct MetricOptions {
  bool native_pixels = false;
};

struct MetricReport {
  double aj = 0.0;
  double delta_avg = 0.0;
  double oa = 0.0;
  std::array<double, 5> within{};   // fraction of visible GT points within each threshold
  std::array<double, 5> jaccard{};  // Jaccard per threshold
  std::size_t points = 0;           // (query, frame) pairs
  std::size_t visible_gt = 0;
  std::size_t predicted_visible = 0;
};

/// Raw counts; merging accumulators pools several videos into one report.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(MetricOptions options = {}) : options_(options) {}

  /// Throws DomainError when query ids or frame counts do not match.
  void add(std::span<const Trajectory> predictions, const GroundTruthSet& gt);
  void merge(const MetricAccumulator& other);
  MetricReport report() const;

 private:
  MetricOptions options_;
  std::size_t points_ = 0;
  std::size_t visible_gt_ = 0;
  std::size_t predicted_visible_ = 0;
  std::size_t occlusion_correct_ = 0;
  std::array<std::size_t, 5> within_{};
  std::array<std::size_t, 5> tp_{};
  std::array<std::size_t, 5> fp_{};
  std::array<std::size_t, 5> fn_{};
};

MetricReport evaluate(std::span<const Trajectory> predictions, const GroundTruthSet& gt, MetricOptions options = {});

/// Per-threshold fractions plus their mean.
struct DeltaResult {
  std::array<double, 5> within{};
  double mean = 0.0;
};
DeltaResult delta_avg(std::span<const Trajectory> predictions, const GroundTruthSet& gt, MetricOptions options = {});
double occlusion_accuracy(std::span<const Trajectory> predictions, const GroundTruthSet& gt);
double average_jaccard(std::span<const Trajectory> predictions, const GroundTruthSet& gt, MetricOptions options = {});

}  // namespace headtrack
