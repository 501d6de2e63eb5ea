#pragma once

// File formats: HTF1 feature volumes, HVID raw video, JSON-lines trajectories
// and JSON ground-truth documents. Binary formats are little-endian.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "headtrack/model.hpp"

namespace headtrack {

inline constexpr std::size_t kHtf1HeaderBytes = 60;
inline constexpr std::size_t kHvidHeaderBytes = 21;

struct Htf1Header {
  VolumeDims dims;
  RopeLayout rope;
  std::uint32_t kinds = 0;  // bit0 query, bit1 key, bit2 hidden

  /// Payload bytes implied by the dimensions and kinds.
  std::uint64_t payload_bytes() const;
};

std::vector<std::uint8_t> encode_htf1(const FeatureVolume& fv);
/// Throws ParseError (bad_magic, bad_version, truncated_payload, trailing_bytes,
/// bad_dimensions, non_finite).
FeatureVolume decode_htf1(std::span<const std::uint8_t> bytes);
Htf1Header decode_htf1_header(std::span<const std::uint8_t> bytes);

void write_htf1(const std::filesystem::path& path, const FeatureVolume& fv);
FeatureVolume read_htf1(const std::filesystem::path& path);
/// Reads only the header; the payload length is still checked against the file size.
Htf1Header read_htf1_header(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_hvid(const Video& video);
Video decode_hvid(std::span<const std::uint8_t> bytes);
void write_hvid(const std::filesystem::path& path, const Video& video);
Video read_hvid(const std::filesystem::path& path);

/// Trajectories with the pixel frame they were measured in.
struct TrajectoryFile {
  int video_h = 0;
  int video_w = 0;
  int frames = 0;
  std::vector<Trajectory> trajectories;

  bool operator==(const TrajectoryFile&) const = default;
};

/// One header line, then one line per query. +inf fb_deviation is written as null.
void write_trajectories(std::ostream& out, const TrajectoryFile& file);
TrajectoryFile read_trajectories(std::istream& in);
void write_trajectories(const std::filesystem::path& path, const TrajectoryFile& file);
TrajectoryFile read_trajectories(const std::filesystem::path& path);

void write_ground_truth(std::ostream& out, const GroundTruthSet& gt);
GroundTruthSet read_ground_truth(std::istream& in);
void write_ground_truth(const std::filesystem::path& path, const GroundTruthSet& gt);
GroundTruthSet read_ground_truth(const std::filesystem::path& path);

/// JSON array of {"id", "t", "x", "y"}.
void write_queries(std::ostream& out, std::span<const QueryPoint> queries);
std::vector<QueryPoint> read_queries(std::istream& in);
std::vector<QueryPoint> read_queries(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace headtrack
