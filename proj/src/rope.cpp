#include "headtrack/rope.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "headtrack/errors.hpp"

namespace headtrack {

namespace {

constexpr Axis kAxes[3] = {Axis::t, Axis::h, Axis::w};

std::int64_t position_on(Position3 pos, Axis axis) {
  switch (axis) {
    case Axis::t: return pos.m_t;
    case Axis::h: return pos.m_h;
    case Axis::w: return pos.m_w;
  }
  return 0;
}

void check_fraction(double f) {
  if (!(f >= 0.0 && f <= 1.0)) throw DomainError("keep fraction must lie in [0, 1]");
}

}  // namespace

std::size_t BandMask::kept_channels() const {
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), std::uint8_t{1}));
}

std::vector<double> band_frequencies(const RopeLayout& layout, Axis axis) {
  const int d = layout.axis_dim(axis);
  std::vector<double> omega(static_cast<std::size_t>(d / 2));
  for (int i = 0; i < d / 2; ++i) {
    omega[i] = std::pow(layout.base, -2.0 * i / d);
  }
  return omega;
}

std::vector<double> rotation_angles(const RopeLayout& layout, Position3 pos) {
  std::vector<double> theta;
  theta.reserve(static_cast<std::size_t>(layout.total_pairs()));
  for (Axis axis : kAxes) {
    const double m = static_cast<double>(position_on(pos, axis));
    for (double w : band_frequencies(layout, axis)) theta.push_back(w * m);
  }
  return theta;
}

void apply_rope_inplace(std::span<float> v, const RopeLayout& layout, Position3 pos) {
  if (v.size() != static_cast<std::size_t>(layout.dim())) {
    throw DomainError("apply_rope: vector length " + std::to_string(v.size()) + " != " +
                      std::to_string(layout.dim()));
  }
  const auto theta = rotation_angles(layout, pos);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double c = std::cos(theta[i]);
    const double s = std::sin(theta[i]);
    const double x = v[2 * i];
    const double y = v[2 * i + 1];
    v[2 * i] = static_cast<float>(x * c - y * s);
    v[2 * i + 1] = static_cast<float>(x * s + y * c);
  }
}

std::vector<float> apply_rope(std::span<const float> v, const RopeLayout& layout, Position3 pos) {
  std::vector<float> out(v.begin(), v.end());
  apply_rope_inplace(out, layout, pos);
  return out;
}

int kept_pair_count(double fraction, int pairs) {
  check_fraction(fraction);
  // Guard against 0.5 * 4 evaluating to 2.0000000001 and rounding up.
  const double raw = fraction * pairs;
  const double nearest = std::round(raw);
  const int count = std::abs(raw - nearest) < 1e-9 ? static_cast<int>(nearest) : static_cast<int>(std::ceil(raw));
  return std::clamp(count, 0, pairs);
}

BandMask lowpass_mask(const RopeLayout& layout, KeepFractions keep_low) {
  BandMask mask;
  mask.keep.assign(static_cast<std::size_t>(layout.dim()), 0);
  for (Axis axis : kAxes) {
    const int pairs = layout.pairs(axis);
    const int kept = kept_pair_count(keep_low.get(axis), pairs);
    const int offset = layout.axis_offset(axis);
    for (int i = pairs - kept; i < pairs; ++i) {
      mask.keep[offset + 2 * i] = 1;
      mask.keep[offset + 2 * i + 1] = 1;
    }
  }
  return mask;
}

BandMask highpass_mask(const RopeLayout& layout, KeepFractions keep_high) {
  BandMask mask;
  mask.keep.assign(static_cast<std::size_t>(layout.dim()), 0);
  for (Axis axis : kAxes) {
    const int pairs = layout.pairs(axis);
    const int kept = kept_pair_count(keep_high.get(axis), pairs);
    const int offset = layout.axis_offset(axis);
    for (int i = 0; i < kept; ++i) {
      mask.keep[offset + 2 * i] = 1;
      mask.keep[offset + 2 * i + 1] = 1;
    }
  }
  return mask;
}

BandMask pooled_lowpass_mask(const RopeLayout& layout, double keep_low) {
  struct PairRef {
    double omega;
    int channel;
  };
  std::vector<PairRef> all;
  for (Axis axis : kAxes) {
    const auto omega = band_frequencies(layout, axis);
    for (std::size_t i = 0; i < omega.size(); ++i) {
      all.push_back({omega[i], layout.axis_offset(axis) + 2 * static_cast<int>(i)});
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const PairRef& a, const PairRef& b) { return a.omega < b.omega; });
  const int kept = kept_pair_count(keep_low, static_cast<int>(all.size()));
  BandMask mask;
  mask.keep.assign(static_cast<std::size_t>(layout.dim()), 0);
  for (int i = 0; i < kept; ++i) {
    mask.keep[all[i].channel] = 1;
    mask.keep[all[i].channel + 1] = 1;
  }
  return mask;
}

void filter_descriptor_inplace(std::span<float> v, const BandMask& mask) {
  if (v.size() != mask.size()) {
    throw DomainError("filter_descriptor: vector length " + std::to_string(v.size()) + " != mask length " +
                      std::to_string(mask.size()));
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!mask.keep[i]) v[i] = 0.0f;
  }
}

std::vector<float> filter_descriptor(std::span<const float> v, const BandMask& mask) {
  std::vector<float> out(v.begin(), v.end());
  filter_descriptor_inplace(out, mask);
  return out;
}

std::vector<double> band_norms(const FeatureVolume& fv, DescriptorKind kind, int layer, int head, Axis axis,
                               int n_bands) {
  if (kind == DescriptorKind::hidden) throw DomainError("band_norms: hidden states carry no rotary channels");
  const auto& d = fv.dims();
  if (layer < 0 || layer >= d.layers || head < 0 || head >= d.heads) {
    throw DomainError("band_norms: layer/head out of range");
  }
  const int pairs = fv.rope().pairs(axis);
  if (n_bands < 1 || pairs % n_bands != 0) {
    throw DomainError("band_norms: " + std::to_string(n_bands) + " bands do not divide " + std::to_string(pairs) +
                      " pairs");
  }
  const int per_band = pairs / n_bands;
  const int offset = fv.rope().axis_offset(axis);
  std::vector<double> sums(static_cast<std::size_t>(n_bands), 0.0);
  std::size_t cells = 0;
  for (int t = 0; t < d.frames; ++t) {
    for (int y = 0; y < d.grid_h; ++y) {
      for (int x = 0; x < d.grid_w; ++x) {
        const auto v = fv.cell(kind, layer, head, t, y, x);
        for (int b = 0; b < n_bands; ++b) {
          double sq = 0.0;
          for (int c = offset + 2 * b * per_band; c < offset + 2 * (b + 1) * per_band; ++c) {
            sq += static_cast<double>(v[c]) * v[c];
          }
          sums[b] += std::sqrt(sq);
        }
        ++cells;
      }
    }
  }
  for (auto& s : sums) s /= static_cast<double>(cells);
  return sums;
}

std::vector<std::vector<double>> angle_table(const RopeLayout& layout, Axis axis, int max_offset) {
  if (max_offset < 1) throw DomainError("angle_table: max_offset must be >= 1");
  const auto omega = band_frequencies(layout, axis);
  std::vector<std::vector<double>> table(omega.size(), std::vector<double>(static_cast<std::size_t>(max_offset) + 1));
  for (std::size_t i = 0; i < omega.size(); ++i) {
    for (int m = 0; m <= max_offset; ++m) table[i][m] = omega[i] * m;
  }
  return table;
}

}  // namespace headtrack
