#include "headtrack/model.hpp"

#include <algorithm>
#include <cmath>

#include "headtrack/errors.hpp"

namespace headtrack {

const char* to_string(Axis axis) {
  switch (axis) {
    case Axis::t: return "t";
    case Axis::h: return "h";
    case Axis::w: return "w";
  }
  return "?";
}

const char* to_string(DescriptorKind kind) {
  switch (kind) {
    case DescriptorKind::query: return "query";
    case DescriptorKind::key: return "key";
    case DescriptorKind::hidden: return "hidden";
  }
  return "?";
}

const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::bad_magic: return "bad magic";
    case ParseErrorKind::bad_version: return "bad version";
    case ParseErrorKind::truncated_payload: return "truncated payload";
    case ParseErrorKind::trailing_bytes: return "trailing bytes";
    case ParseErrorKind::bad_dimensions: return "bad dimensions";
    case ParseErrorKind::non_finite: return "non-finite value";
    case ParseErrorKind::schema: return "schema violation";
    case ParseErrorKind::io: return "i/o error";
  }
  return "?";
}

int RopeLayout::axis_dim(Axis axis) const {
  switch (axis) {
    case Axis::t: return d_t;
    case Axis::h: return d_h;
    case Axis::w: return d_w;
  }
  return 0;
}

int RopeLayout::axis_offset(Axis axis) const {
  switch (axis) {
    case Axis::t: return 0;
    case Axis::h: return d_t;
    case Axis::w: return d_t + d_h;
  }
  return 0;
}

FeatureVolume::FeatureVolume(VolumeDims dims, RopeLayout rope) : dims_(dims), rope_(rope) {}

int FeatureVolume::descriptor_dim(DescriptorKind kind) const {
  return kind == DescriptorKind::hidden ? dims_.heads * dims_.head_dim : dims_.head_dim;
}

std::size_t FeatureVolume::expected_size(DescriptorKind /*kind*/) const {
  // hidden holds heads * head_dim channels per (layer, cell): same element count.
  return static_cast<std::size_t>(dims_.layers) * dims_.heads * dims_.frames * dims_.grid_h * dims_.grid_w *
         dims_.head_dim;
}

void FeatureVolume::set(DescriptorKind kind, std::vector<float> values) {
  if (values.size() != expected_size(kind)) {
    throw DomainError(std::string("feature array for ") + to_string(kind) + " has " +
                      std::to_string(values.size()) + " elements, expected " +
                      std::to_string(expected_size(kind)));
  }
  arrays_[index(kind)] = std::move(values);
}

std::span<const float> FeatureVolume::data(DescriptorKind kind) const {
  const auto& a = arrays_[index(kind)];
  if (!a) throw DescriptorUnavailable(std::string("descriptor kind not present: ") + to_string(kind));
  return *a;
}

std::span<float> FeatureVolume::mutable_data(DescriptorKind kind) {
  auto& a = arrays_[index(kind)];
  if (!a) throw DescriptorUnavailable(std::string("descriptor kind not present: ") + to_string(kind));
  return *a;
}

std::size_t FeatureVolume::offset(DescriptorKind kind, int layer, int head, int frame, int y, int x) const {
  const auto& d = dims_;
  if (kind == DescriptorKind::hidden) {
    const std::size_t cell = ((static_cast<std::size_t>(layer) * d.frames + frame) * d.grid_h + y) * d.grid_w + x;
    return cell * static_cast<std::size_t>(d.heads) * d.head_dim;
  }
  const std::size_t cell =
      (((static_cast<std::size_t>(layer) * d.heads + head) * d.frames + frame) * d.grid_h + y) * d.grid_w + x;
  return cell * static_cast<std::size_t>(d.head_dim);
}

std::span<const float> FeatureVolume::cell(DescriptorKind kind, int layer, int head, int frame, int y,
                                           int x) const {
  return data(kind).subspan(offset(kind, layer, head, frame, y, x), static_cast<std::size_t>(descriptor_dim(kind)));
}

std::uint32_t FeatureVolume::kinds_mask() const {
  std::uint32_t mask = 0;
  for (std::uint32_t i = 0; i < 3; ++i) {
    if (arrays_[i]) mask |= 1u << i;
  }
  return mask;
}

ValidationReport validate_feature_volume(const FeatureVolume& fv) {
  auto fail = [](std::string msg) {
    ValidationReport r;
    r.ok = false;
    r.message = std::move(msg);
    return r;
  };
  const auto& d = fv.dims();
  const auto& rope = fv.rope();
  if (d.layers < 1 || d.heads < 1 || d.frames < 1 || d.grid_h < 1 || d.grid_w < 1 || d.head_dim < 1 ||
      d.patch_size < 1 || d.video_h < 1 || d.video_w < 1) {
    return fail("dimension counts must be >= 1");
  }
  if (d.head_dim % 2 != 0) return fail("head_dim must be even");
  if (rope.d_t % 2 != 0 || rope.d_h % 2 != 0 || rope.d_w % 2 != 0) return fail("RopeLayout groups must be even");
  if (rope.d_t < 2 || rope.d_h < 2 || rope.d_w < 2) return fail("RopeLayout groups must hold at least one pair");
  if (rope.dim() != d.head_dim) {
    return fail("RopeLayout sum d_t+d_h+d_w = " + std::to_string(rope.dim()) + " != head_dim " +
                std::to_string(d.head_dim));
  }
  if (!(rope.base > 0.0) || !std::isfinite(rope.base)) return fail("RopeLayout base must be positive");
  if (!(d.patch_size * d.grid_w >= d.video_w && d.video_w > d.patch_size * (d.grid_w - 1))) {
    return fail("video_w inconsistent with grid_w * patch_size");
  }
  if (!(d.patch_size * d.grid_h >= d.video_h && d.video_h > d.patch_size * (d.grid_h - 1))) {
    return fail("video_h inconsistent with grid_h * patch_size");
  }
  if (fv.kinds_mask() == 0) return fail("no descriptor kinds present");
  for (auto kind : {DescriptorKind::query, DescriptorKind::key, DescriptorKind::hidden}) {
    if (!fv.has(kind)) continue;
    const auto values = fv.data(kind);
    if (values.size() != fv.expected_size(kind)) {
      auto r = fail(std::string("array size mismatch for ") + to_string(kind));
      r.kind = kind;
      return r;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i])) {
        auto r = fail(std::string("non-finite value in ") + to_string(kind) + " at flat index " + std::to_string(i));
        r.kind = kind;
        r.flat_index = i;
        return r;
      }
    }
  }
  return {};
}

std::vector<float> descriptor_at(const FeatureVolume& fv, DescriptorKind kind, int layer, int head, int frame,
                                 double y_cell, double x_cell) {
  const auto& d = fv.dims();
  if (!fv.has(kind)) throw DescriptorUnavailable(std::string("descriptor kind not present: ") + to_string(kind));
  if (layer < 0 || layer >= d.layers || frame < 0 || frame >= d.frames ||
      (kind != DescriptorKind::hidden && (head < 0 || head >= d.heads))) {
    throw DomainError("descriptor_at: layer/head/frame out of range");
  }
  if (!(y_cell >= 0.0 && y_cell <= d.grid_h - 1) || !(x_cell >= 0.0 && x_cell <= d.grid_w - 1)) {
    throw DomainError("descriptor_at: cell coordinates out of range");
  }
  const int y0 = std::min(static_cast<int>(std::floor(y_cell)), d.grid_h - 1);
  const int x0 = std::min(static_cast<int>(std::floor(x_cell)), d.grid_w - 1);
  const double fy = y_cell - y0;
  const double fx = x_cell - x0;
  const int y1 = std::min(y0 + 1, d.grid_h - 1);
  const int x1 = std::min(x0 + 1, d.grid_w - 1);

  const auto a = fv.cell(kind, layer, head, frame, y0, x0);
  std::vector<float> out(a.begin(), a.end());
  if (fy == 0.0 && fx == 0.0) return out;

  const auto b = fv.cell(kind, layer, head, frame, y0, x1);
  const auto c = fv.cell(kind, layer, head, frame, y1, x0);
  const auto e = fv.cell(kind, layer, head, frame, y1, x1);
  const double w00 = (1.0 - fy) * (1.0 - fx);
  const double w01 = (1.0 - fy) * fx;
  const double w10 = fy * (1.0 - fx);
  const double w11 = fy * fx;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(w00 * a[i] + w01 * b[i] + w10 * c[i] + w11 * e[i]);
  }
  return out;
}

std::vector<QueryPoint> GroundTruthSet::queries() const {
  std::vector<QueryPoint> out;
  out.reserve(tracks.size());
  for (const auto& t : tracks) out.push_back(t.query);
  return out;
}

}  // namespace headtrack
