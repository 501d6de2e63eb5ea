#pragma once

// Long-video tracking: frames are split into consecutive chunks whose feature
// volumes are loaded one at a time; each query's last position in a chunk
// becomes its query point in the next.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "headtrack/model.hpp"
#include "headtrack/toyvdit.hpp"
#include "headtrack/tracker.hpp"

namespace headtrack {

inline constexpr int kDefaultChunkLen = 16;

struct Span {
  int begin = 0;  // inclusive
  int end = 0;    // exclusive

  int length() const { return end - begin; }
  bool contains(int t) const { return t >= begin && t < end; }
  bool operator==(const Span&) const = default;
};

struct ChunkPlan {
  std::vector<Span> spans;

  int frames() const { return spans.empty() ? 0 : spans.back().end; }
  /// Index of the span holding frame t, or -1.
  int span_of(int t) const;
  bool operator==(const ChunkPlan&) const = default;
};

/// Greedy spans of chunk_len; a trailing 1-frame remainder joins the previous span.
ChunkPlan split_plan(int frames, int chunk_len);
/// Throws DomainError unless the spans partition [0, F) contiguously.
void validate(const ChunkPlan& plan);

/// Yields one feature volume per span, in any order requested.
class ChunkProvider {
 public:
  virtual ~ChunkProvider() = default;
  virtual ChunkPlan plan() const = 0;
  virtual FeatureVolume load(std::size_t index) const = 0;
};

/// Frames [begin, end) of a volume.
FeatureVolume slice_frames(const FeatureVolume& fv, Span span);

/// Slices chunks out of one resident volume.
class InMemoryProvider : public ChunkProvider {
 public:
  InMemoryProvider(FeatureVolume volume, int chunk_len);
  ChunkPlan plan() const override { return plan_; }
  FeatureVolume load(std::size_t index) const override;

 private:
  FeatureVolume volume_;
  ChunkPlan plan_;
};

/// Runs the toy extractor on each chunk's frames independently.
class ToyVideoProvider : public ChunkProvider {
 public:
  ToyVideoProvider(const Video& video, const ToyWeights& model, std::vector<int> layers, int chunk_len);
  ChunkPlan plan() const override { return plan_; }
  FeatureVolume load(std::size_t index) const override;

 private:
  const Video* video_;
  const ToyWeights* model_;
  std::vector<int> layers_;
  ChunkPlan plan_;
};

/// One HTF1 file per span; the plan follows each file's frame count.
class FileProvider : public ChunkProvider {
 public:
  explicit FileProvider(std::vector<std::filesystem::path> files);
  /// stem.chunk000.htf1, stem.chunk001.htf1, ... until the first missing index.
  static FileProvider from_stem(const std::filesystem::path& stem);
  /// Text file listing one path per line, relative paths resolved against its directory.
  static FileProvider from_manifest(const std::filesystem::path& manifest);

  ChunkPlan plan() const override { return plan_; }
  FeatureVolume load(std::size_t index) const override;
  const std::vector<std::filesystem::path>& files() const { return files_; }

 private:
  std::vector<std::filesystem::path> files_;
  ChunkPlan plan_;
};

std::filesystem::path chunk_path(const std::filesystem::path& stem, std::size_t index);

struct LongTrackOptions {
  /// Hand the refined descriptor across boundaries; false re-samples at the handoff point.
  bool handoff_descriptor = true;
};

/// Tracks every query over the whole plan. Queries may start in any span;
/// they are tracked forward and backward from it, handing off at each boundary.
std::vector<Trajectory> track_long(const ChunkProvider& provider, const TrackerConfig& cfg,
                                   std::span<const QueryPoint> queries, LongTrackOptions options = {});

}  // namespace headtrack
