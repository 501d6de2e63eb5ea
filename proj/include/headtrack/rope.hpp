#pragma once

// 3D rotary positional embedding: per-axis frequencies, rotation angles,
// rotation application, frequency-band masks and band-energy norms.
//
// Band ordering everywhere: pair index 0 is the highest frequency (omega = 1),
// frequencies decrease with the pair index.

#include <cstdint>
#include <span>
#include <vector>

#include "headtrack/model.hpp"

namespace headtrack {

struct Position3 {
  std::int64_t m_t = 0;
  std::int64_t m_h = 0;
  std::int64_t m_w = 0;
};

/// Per-axis fraction of the lowest-frequency pairs to keep.
struct KeepFractions {
  double t = 1.0;
  double h = 1.0;
  double w = 1.0;

  static KeepFractions uniform(double f) { return {f, f, f}; }
  double get(Axis axis) const { return axis == Axis::t ? t : (axis == Axis::h ? h : w); }
  bool operator==(const KeepFractions&) const = default;
};

/// Channel keep flags; both channels of a pair share one flag.
struct BandMask {
  std::vector<std::uint8_t> keep;

  std::size_t size() const { return keep.size(); }
  std::size_t kept_channels() const;
  bool none_kept() const { return kept_channels() == 0; }
  bool operator==(const BandMask&) const = default;
};

/// omega_i = base^(-2i / d_axis), i = 0 .. d_axis/2 - 1.
std::vector<double> band_frequencies(const RopeLayout& layout, Axis axis);

/// theta for every pair, ordered t-pairs, h-pairs, w-pairs.
std::vector<double> rotation_angles(const RopeLayout& layout, Position3 pos);

std::vector<float> apply_rope(std::span<const float> v, const RopeLayout& layout, Position3 pos);
void apply_rope_inplace(std::span<float> v, const RopeLayout& layout, Position3 pos);

/// Number of pairs kept for a fraction: ceil(fraction * pairs), clamped.
int kept_pair_count(double fraction, int pairs);

/// Keeps, per axis, the ceil(f * pairs) lowest-frequency pairs.
BandMask lowpass_mask(const RopeLayout& layout, KeepFractions keep_low);
/// Keeps, per axis, the ceil(f * pairs) highest-frequency pairs.
BandMask highpass_mask(const RopeLayout& layout, KeepFractions keep_high);
/// Ranks all pairs of all axes together by frequency and keeps the lowest
/// ceil(f * total_pairs). Ties in omega resolve toward the temporal axis.
BandMask pooled_lowpass_mask(const RopeLayout& layout, double keep_low);

std::vector<float> filter_descriptor(std::span<const float> v, const BandMask& mask);
void filter_descriptor_inplace(std::span<float> v, const BandMask& mask);

/// Mean (over frames and cells) Euclidean norm of the descriptor restricted to
/// each of `n_bands` contiguous groups of the axis's pairs; band 0 holds the
/// highest frequencies.
std::vector<double> band_norms(const FeatureVolume& fv, DescriptorKind kind, int layer, int head, Axis axis,
                               int n_bands);

/// Rotation angle omega_i * m for every pair i and offset m in [0, max_offset].
/// Result is row-major [pairs][max_offset + 1].
std::vector<std::vector<double>> angle_table(const RopeLayout& layout, Axis axis, int max_offset);

}  // namespace headtrack
