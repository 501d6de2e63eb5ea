#include "headtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "headtrack/errors.hpp"

namespace headtrack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

// Returns false for the zero vector.
bool normalize(std::span<float> v) {
  const double n = std::sqrt(dot(v, v));
  if (!(n > 0.0) || !std::isfinite(n)) return false;
  for (auto& x : v) x = static_cast<float>(x / n);
  return true;
}

double clamp_cell(double c, int n) { return std::clamp(c, 0.0, static_cast<double>(n - 1)); }

// Sample -> band filter -> unit-normalise (cosine). Layer aggregation
// concatenates every head's unit block and rescales by 1/sqrt(heads).
std::vector<float> prepare_impl(const FeatureVolume& fv, const TrackerConfig& cfg, const BandMask& mask,
                                DescriptorKind kind, int frame, double y_cell, double x_cell) {
  const bool cosine = cfg.similarity == Similarity::cosine;
  // Hidden states carry no rotary channels; the band filter does not apply.
  const bool filter = cfg.toggles.frequency_filter && kind != DescriptorKind::hidden;
  auto one_head = [&](int head) {
    auto v = descriptor_at(fv, kind, cfg.layer, head, frame, y_cell, x_cell);
    if (filter) filter_descriptor_inplace(v, mask);
    if (cosine && !normalize(v)) throw DegenerateDescriptor("zero descriptor under cosine similarity");
    return v;
  };
  if (!cfg.aggregate_layer) return one_head(cfg.head);
  const int heads = fv.dims().heads;
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(fv.descriptor_dim(kind)) * heads);
  for (int h = 0; h < heads; ++h) {
    const auto v = one_head(h);
    out.insert(out.end(), v.begin(), v.end());
  }
  if (cosine && heads > 1) {
    const double s = 1.0 / std::sqrt(static_cast<double>(heads));
    for (auto& x : out) x = static_cast<float>(x * s);
  }
  return out;
}

}  // namespace

const char* to_string(DescriptorMode mode) {
  switch (mode) {
    case DescriptorMode::query_query: return "query-query";
    case DescriptorMode::key_key: return "key-key";
    case DescriptorMode::query_key: return "query-key";
    case DescriptorMode::key_query: return "key-query";
    case DescriptorMode::hidden_hidden: return "hidden-hidden";
  }
  return "?";
}

std::optional<DescriptorMode> parse_descriptor_mode(std::string_view name) {
  for (auto m : {DescriptorMode::query_query, DescriptorMode::key_key, DescriptorMode::query_key,
                 DescriptorMode::key_query, DescriptorMode::hidden_hidden}) {
    if (name == to_string(m)) return m;
  }
  return std::nullopt;
}

std::pair<DescriptorKind, DescriptorKind> decompose(DescriptorMode mode) {
  using K = DescriptorKind;
  switch (mode) {
    case DescriptorMode::query_query: return {K::query, K::query};
    case DescriptorMode::key_key: return {K::key, K::key};
    case DescriptorMode::query_key: return {K::query, K::key};
    case DescriptorMode::key_query: return {K::key, K::query};
    case DescriptorMode::hidden_hidden: return {K::hidden, K::hidden};
  }
  return {K::key, K::key};
}

const char* to_string(UpsampleMode mode) { return mode == UpsampleMode::feature ? "feature" : "map"; }

std::optional<UpsampleMode> parse_upsample_mode(std::string_view name) {
  if (name == "feature") return UpsampleMode::feature;
  if (name == "map") return UpsampleMode::map;
  return std::nullopt;
}

void validate(const TrackerConfig& cfg, const FeatureVolume& fv) {
  const auto& d = fv.dims();
  if (cfg.layer < 0 || cfg.layer >= d.layers) throw DomainError("tracker: layer " + std::to_string(cfg.layer) + " out of range");
  if (!cfg.aggregate_layer && (cfg.head < 0 || cfg.head >= d.heads)) {
    throw DomainError("tracker: head " + std::to_string(cfg.head) + " out of range");
  }
  for (double v : {cfg.temperature, cfg.refine_alpha, cfg.fb_threshold, cfg.keep_low.t, cfg.keep_low.h, cfg.keep_low.w}) {
    if (!std::isfinite(v)) throw DomainError("tracker: non-finite config value");
  }
  if (!(cfg.temperature > 0.0)) throw DomainError("tracker: temperature must be positive");
  if (cfg.window_radius < 0) throw DomainError("tracker: window_radius must be >= 0");
  if (cfg.upsample_factor < 1) throw DomainError("tracker: upsample_factor must be >= 1");
  if (!(cfg.refine_alpha >= 0.0 && cfg.refine_alpha <= 1.0)) throw DomainError("tracker: refine_alpha outside [0, 1]");
  if (!(cfg.fb_threshold >= 0.0)) throw DomainError("tracker: fb_threshold must be >= 0");
  for (double f : {cfg.keep_low.t, cfg.keep_low.h, cfg.keep_low.w}) {
    if (!(f >= 0.0 && f <= 1.0)) throw DomainError("tracker: keep_low fractions must lie in [0, 1]");
  }
}

BandMask effective_mask(const TrackerConfig& cfg, const RopeLayout& layout) {
  if (cfg.pooled_filter) {
    if (cfg.band_order == BandOrder::high_first) {
      // Pooled high-first is the complement ranking of the pooled low-pass.
      const int total = layout.total_pairs();
      const int kept = kept_pair_count(cfg.keep_low.t, total);
      BandMask all_low = pooled_lowpass_mask(layout, static_cast<double>(total - kept) / total);
      for (auto& k : all_low.keep) k = k ? 0 : 1;
      return all_low;
    }
    return pooled_lowpass_mask(layout, cfg.keep_low.t);
  }
  return cfg.band_order == BandOrder::low_first ? lowpass_mask(layout, cfg.keep_low)
                                                : highpass_mask(layout, cfg.keep_low);
}

double distance_256(PixelPoint a, PixelPoint b, int video_h, int video_w) {
  const double dx = (a.x - b.x) * 256.0 / video_w;
  const double dy = (a.y - b.y) * 256.0 / video_h;
  return std::sqrt(dx * dx + dy * dy);
}

CorrelationMap upsample_map(const CorrelationMap& m, int factor) {
  if (factor < 1) throw DomainError("upsample_map: factor must be >= 1");
  if (factor == 1) return m;
  CorrelationMap out;
  out.frame = m.frame;
  out.patch_size = m.patch_size;
  out.rows = m.rows * factor;
  out.cols = m.cols * factor;
  out.scale_y = m.rows > 1 ? m.scale_y * (m.rows - 1) / (out.rows - 1) : 0.0;
  out.scale_x = m.cols > 1 ? m.scale_x * (m.cols - 1) / (out.cols - 1) : 0.0;
  out.values.resize(static_cast<std::size_t>(out.rows) * out.cols);

  auto source = [](int k, int n_in, int n_out, int& i0, int& i1, double& f) {
    if (n_in == 1) {
      i0 = i1 = 0;
      f = 0.0;
      return;
    }
    const double s = static_cast<double>(k) * (n_in - 1) / (n_out - 1);
    i0 = std::min(static_cast<int>(std::floor(s)), n_in - 1);
    i1 = std::min(i0 + 1, n_in - 1);
    f = s - i0;
  };
  for (int r = 0; r < out.rows; ++r) {
    int r0, r1;
    double fr;
    source(r, m.rows, out.rows, r0, r1, fr);
    for (int c = 0; c < out.cols; ++c) {
      int c0, c1;
      double fc;
      source(c, m.cols, out.cols, c0, c1, fc);
      const double top = (1.0 - fc) * m.at(r0, c0) + fc * m.at(r0, c1);
      const double bottom = (1.0 - fc) * m.at(r1, c0) + fc * m.at(r1, c1);
      out.values[static_cast<std::size_t>(r) * out.cols + c] = (1.0 - fr) * top + fr * bottom;
    }
  }
  return out;
}

PixelPoint soft_argmax(const CorrelationMap& m, double temperature, int window_radius, bool soft) {
  if (!(temperature > 0.0)) throw DomainError("soft_argmax: temperature must be positive");
  std::size_t best = 0;
  for (std::size_t i = 1; i < m.values.size(); ++i) {
    if (m.values[i] > m.values[best]) best = i;
  }
  const int br = static_cast<int>(best / m.cols);
  const int bc = static_cast<int>(best % m.cols);
  auto to_pixel = [&](double r, double c) {
    return PixelPoint{cell_to_pixel(c * m.scale_x, m.patch_size), cell_to_pixel(r * m.scale_y, m.patch_size)};
  };
  if (!soft) return to_pixel(br, bc);

  int r_lo = 0, r_hi = m.rows - 1, c_lo = 0, c_hi = m.cols - 1;
  if (window_radius > 0) {
    const int ry = m.scale_y > 0.0 ? static_cast<int>(std::floor(window_radius / m.scale_y + 1e-9)) : m.rows;
    const int rx = m.scale_x > 0.0 ? static_cast<int>(std::floor(window_radius / m.scale_x + 1e-9)) : m.cols;
    r_lo = std::max(0, br - ry);
    r_hi = std::min(m.rows - 1, br + ry);
    c_lo = std::max(0, bc - rx);
    c_hi = std::min(m.cols - 1, bc + rx);
  }
  const double peak = m.values[best];
  double z = 0.0, sr = 0.0, sc = 0.0;
  for (int r = r_lo; r <= r_hi; ++r) {
    for (int c = c_lo; c <= c_hi; ++c) {
      const double w = std::exp((m.at(r, c) - peak) / temperature);
      z += w;
      sr += w * r;
      sc += w * c;
    }
  }
  return to_pixel(sr / z, sc / z);
}

Tracker::Tracker(const FeatureVolume& fv, TrackerConfig cfg) : fv_(&fv), cfg_(cfg) {
  validate(cfg_, fv);
  std::tie(source_, target_) = decompose(cfg_.descriptor);
  if (!fv.has(source_)) throw DescriptorUnavailable(std::string("descriptor kind not present: ") + to_string(source_));
  if (!fv.has(target_)) throw DescriptorUnavailable(std::string("descriptor kind not present: ") + to_string(target_));
  if (source_ == DescriptorKind::hidden && cfg_.aggregate_layer) {
    throw DomainError("tracker: layer aggregation is defined over per-head descriptors");
  }
  mask_ = effective_mask(cfg_, fv.rope());
  const int per_head = fv.descriptor_dim(source_);
  dim_ = cfg_.aggregate_layer ? per_head * fv.dims().heads : per_head;
  const auto& d = fv.dims();
  const bool lattice = cfg_.toggles.upsampling && cfg_.upsample_mode == UpsampleMode::feature && cfg_.upsample_factor > 1;
  const int u = lattice ? cfg_.upsample_factor : 1;
  rows_ = u * (d.grid_h - 1) + 1;
  cols_ = u * (d.grid_w - 1) + 1;
  step_ = 1.0 / u;
  prepare_targets();
}

std::vector<float> Tracker::prepare_kind(DescriptorKind kind, int frame, double y_cell, double x_cell) const {
  return prepare_impl(*fv_, cfg_, mask_, kind, frame, y_cell, x_cell);
}

void Tracker::prepare_targets() {
  const int frames = fv_->dims().frames;
  const std::size_t entries = static_cast<std::size_t>(rows_) * cols_;
  targets_.assign(static_cast<std::size_t>(frames) * entries * dim_, 0.0f);
  frame_degenerate_.assign(static_cast<std::size_t>(frames), 0);
  for (int t = 0; t < frames; ++t) {
    for (int r = 0; r < rows_; ++r) {
      for (int c = 0; c < cols_; ++c) {
        try {
          const auto v = prepare_kind(target_, t, r * step_, c * step_);
          std::copy(v.begin(), v.end(), &targets_[(t * entries + static_cast<std::size_t>(r) * cols_ + c) * dim_]);
        } catch (const DegenerateDescriptor&) {
          frame_degenerate_[t] = 1;
        }
      }
    }
  }
}

std::vector<float> Tracker::prepare(Side side, int frame, double y_cell, double x_cell) const {
  return prepare_kind(side == Side::source ? source_ : target_, frame, y_cell, x_cell);
}

std::vector<float> Tracker::prepare_at_pixel(Side side, int frame, PixelPoint p) const {
  const auto& d = fv_->dims();
  return prepare(side, frame, clamp_cell(pixel_to_cell(p.y, d.patch_size), d.grid_h),
                 clamp_cell(pixel_to_cell(p.x, d.patch_size), d.grid_w));
}

CorrelationMap Tracker::correlate(std::span<const float> q, int frame) const {
  const auto& d = fv_->dims();
  if (frame < 0 || frame >= d.frames) throw DomainError("correlation_map: frame out of range");
  if (q.size() != static_cast<std::size_t>(dim_)) throw DomainError("correlation_map: descriptor length mismatch");
  if (frame_degenerate_[frame]) throw DegenerateDescriptor("frame " + std::to_string(frame) + " has zero target descriptors");
  CorrelationMap m;
  m.frame = frame;
  m.rows = rows_;
  m.cols = cols_;
  m.scale_y = step_;
  m.scale_x = step_;
  m.patch_size = d.patch_size;
  m.values.resize(static_cast<std::size_t>(rows_) * cols_);
  // Cosine scores do not depend on the query's scale.
  double scale = 1.0;
  if (cfg_.similarity == Similarity::cosine) {
    const double n = std::sqrt(dot(q, q));
    if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateDescriptor("zero query descriptor under cosine similarity");
    scale = 1.0 / n;
  }
  const std::size_t base = static_cast<std::size_t>(frame) * m.values.size() * dim_;
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    m.values[i] = scale * dot(q, std::span<const float>(targets_).subspan(base + i * dim_, dim_));
  }
  return m;
}

PixelPoint Tracker::localize(std::span<const float> q, int frame) const {
  CorrelationMap m = correlate(q, frame);
  if (cfg_.toggles.upsampling && cfg_.upsample_mode == UpsampleMode::map && cfg_.upsample_factor > 1) {
    m = upsample_map(m, cfg_.upsample_factor);
  }
  return soft_argmax(m, cfg_.temperature, cfg_.window_radius, cfg_.toggles.soft_argmax);
}

double Tracker::fb_deviation(int t_query, PixelPoint p_query, int t_now, PixelPoint p_now) const {
  const auto& d = fv_->dims();
  if (t_query == t_now) throw DomainError("fb_deviation: query and current frame coincide");
  try {
    PixelPoint p = p_now;
    if (cfg_.backward == BackwardMode::direct) {
      const auto desc = prepare_at_pixel(Side::source, t_now, p);
      p = localize(desc, t_query);
    } else {
      const int step = t_query < t_now ? -1 : 1;
      for (int s = t_now; s != t_query; s += step) {
        const auto desc = prepare_at_pixel(Side::source, s, p);
        p = localize(desc, s + step);
      }
    }
    return distance_256(p, p_query, d.video_h, d.video_w);
  } catch (const DegenerateDescriptor&) {
    return kInf;
  } catch (const DescriptorUnavailable&) {
    return kInf;
  }
}

std::vector<float> Tracker::refine(std::span<const float> d, int frame, PixelPoint tracked, bool* degenerate) const {
  if (degenerate) *degenerate = false;
  std::vector<float> current(d.begin(), d.end());
  if (cfg_.refine_alpha == 0.0) return current;
  std::vector<float> fresh;
  try {
    fresh = prepare_at_pixel(Side::source, frame, tracked);
  } catch (const DegenerateDescriptor&) {
    if (degenerate) *degenerate = true;
    return current;
  }
  const double a = cfg_.refine_alpha;
  std::vector<float> blended(current.size());
  for (std::size_t i = 0; i < blended.size(); ++i) {
    blended[i] = static_cast<float>((1.0 - a) * current[i] + a * fresh[i]);
  }
  if (cfg_.similarity == Similarity::cosine && !normalize(blended)) {
    if (degenerate) *degenerate = true;
    return current;
  }
  return blended;
}

Tracker::Run Tracker::run(const QueryPoint& q, const RunOptions& options) const {
  const auto& d = fv_->dims();
  if (q.t0 < 0 || q.t0 >= d.frames) throw DomainError("track_point: query frame out of range");
  if (!(q.x >= 0.0 && q.x < d.video_w && q.y >= 0.0 && q.y < d.video_h)) {
    throw DomainError("track_point: query outside the video");
  }
  Run out;
  Trajectory& traj = out.trajectory;
  traj.query = q;
  traj.points.resize(static_cast<std::size_t>(d.frames));
  for (int t = 0; t < d.frames; ++t) traj.points[t] = {t, q.x, q.y, false, kInf};
  traj.points[q.t0] = {q.t0, q.x, q.y, options.query_visible, 0.0};

  const PixelPoint origin{q.x, q.y};
  std::vector<float> initial;
  if (options.initial_descriptor) {
    initial = *options.initial_descriptor;
    if (initial.size() != static_cast<std::size_t>(dim_)) throw DomainError("track_point: initial descriptor length mismatch");
  } else {
    try {
      initial = prepare_at_pixel(Side::source, q.t0, origin);
    } catch (const DegenerateDescriptor& e) {
      traj.error = e.what();
      out.forward_descriptor.clear();
      out.backward_descriptor.clear();
      return out;
    }
  }

  auto sweep = [&](int step) {
    std::vector<float> desc = initial;
    PixelPoint last = origin;
    for (int t = q.t0 + step; t >= 0 && t < d.frames; t += step) {
      TrackPoint& pt = traj.points[t];
      PixelPoint p;
      try {
        p = localize(desc, t);
      } catch (const DegenerateDescriptor&) {
        pt = {t, last.x, last.y, false, kInf};
        continue;
      }
      const double dev = fb_deviation(q.t0, origin, t, p);
      const bool visible = !cfg_.toggles.fb_check || dev <= cfg_.fb_threshold;
      if (visible) {
        pt = {t, p.x, p.y, true, dev};
        last = p;
        if (cfg_.toggles.refinement) {
          bool degenerate = false;
          desc = refine(desc, t, p, &degenerate);
          if (degenerate) ++traj.warnings;
        }
      } else {
        pt = {t, last.x, last.y, false, dev};
      }
    }
    return desc;
  };
  out.forward_descriptor = options.forward ? sweep(+1) : initial;
  out.backward_descriptor = options.backward ? sweep(-1) : initial;
  return out;
}

Trajectory Tracker::track(const QueryPoint& q) const { return run(q, RunOptions{}).trajectory; }

std::vector<float> prepare_descriptor(const FeatureVolume& fv, const TrackerConfig& cfg, Side side, int frame,
                                      double y_cell, double x_cell) {
  validate(cfg, fv);
  const auto [src, tgt] = decompose(cfg.descriptor);
  return prepare_impl(fv, cfg, effective_mask(cfg, fv.rope()), side == Side::source ? src : tgt, frame, y_cell,
                      x_cell);
}

CorrelationMap correlation_map(std::span<const float> q, const FeatureVolume& fv, const TrackerConfig& cfg, int frame) {
  return Tracker(fv, cfg).correlate(q, frame);
}

std::vector<float> refine_query(std::span<const float> d, const FeatureVolume& fv, const TrackerConfig& cfg, int frame,
                                PixelPoint tracked, bool* degenerate) {
  return Tracker(fv, cfg).refine(d, frame, tracked, degenerate);
}

double fb_deviation(const FeatureVolume& fv, const TrackerConfig& cfg, int t_query, PixelPoint p_query, int t_now,
                    PixelPoint p_now) {
  return Tracker(fv, cfg).fb_deviation(t_query, p_query, t_now, p_now);
}

Trajectory track_point(const FeatureVolume& fv, const TrackerConfig& cfg, const QueryPoint& q) {
  return Tracker(fv, cfg).track(q);
}

std::vector<Trajectory> track_video(const FeatureVolume& fv, const TrackerConfig& cfg,
                                    std::span<const QueryPoint> queries) {
  std::vector<Trajectory> out;
  out.reserve(queries.size());
  if (queries.empty()) return out;
  const Tracker tracker(fv, cfg);
  for (const auto& q : queries) {
    try {
      out.push_back(tracker.track(q));
    } catch (const std::exception& e) {
      Trajectory t;
      t.query = q;
      t.error = e.what();
      for (int f = 0; f < fv.dims().frames; ++f) t.points.push_back({f, q.x, q.y, false, kInf});
      out.push_back(std::move(t));
    }
  }
  return out;
}

}  // namespace headtrack
