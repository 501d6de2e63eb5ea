#include "headtrack/headlab.hpp"

#include <algorithm>
#include <cmath>

#include "headtrack/errors.hpp"

namespace headtrack {

namespace {

constexpr double kRowSumTolerance = 1e-4;

HeadScore from_report(int layer, int head, const MetricReport& r) {
  HeadScore s;
  s.layer = layer;
  s.head = head;
  s.delta_avg = r.delta_avg;
  s.aj = r.aj;
  s.oa = r.oa;
  return s;
}

HeadScore score_or_error(std::span<const EvalCase> cases, const TrackerConfig& cfg) {
  try {
    return score_config(cases, cfg);
  } catch (const std::exception& e) {
    HeadScore s;
    s.layer = cfg.layer;
    s.head = cfg.head;
    s.error = e.what();
    return s;
  }
}

}  // namespace

HeadScore score_config(std::span<const EvalCase> cases, const TrackerConfig& cfg) {
  MetricAccumulator acc;
  for (const auto& c : cases) {
    if (c.volume == nullptr || c.gt == nullptr) throw DomainError("score: null case");
    const auto& d = c.volume->dims();
    if (d.frames != c.gt->frames || d.video_h != c.gt->video_h || d.video_w != c.gt->video_w) {
      throw DomainError("score: feature volume and ground truth disagree on frames or pixel size");
    }
    const auto queries = c.gt->queries();
    const auto trajectories = track_video(*c.volume, cfg, queries);
    acc.add(trajectories, *c.gt);
  }
  return from_report(cfg.layer, cfg.head, acc.report());
}

std::vector<HeadScore> score_heads(std::span<const EvalCase> cases, const TrackerConfig& base) {
  if (cases.empty()) throw DomainError("score_heads: no cases");
  const auto& d = cases.front().volume->dims();
  std::vector<HeadScore> out;
  out.reserve(static_cast<std::size_t>(d.layers) * d.heads);
  for (int l = 0; l < d.layers; ++l) {
    for (int h = 0; h < d.heads; ++h) {
      TrackerConfig cfg = base;
      cfg.layer = l;
      cfg.head = h;
      cfg.aggregate_layer = false;
      out.push_back(score_or_error(cases, cfg));
    }
  }
  return out;
}

std::pair<int, int> select_head(std::span<const HeadScore> scores) {
  if (scores.empty()) throw DomainError("select_head: no scores");
  const HeadScore* best = &scores.front();
  for (const auto& s : scores) {
    if (s.delta_avg > best->delta_avg ||
        (s.delta_avg == best->delta_avg && std::pair(s.layer, s.head) < std::pair(best->layer, best->head))) {
      best = &s;
    }
  }
  return {best->layer, best->head};
}

HeadScore layer_aggregate_score(std::span<const EvalCase> cases, int layer, const TrackerConfig& base) {
  TrackerConfig cfg = base;
  cfg.layer = layer;
  cfg.head = 0;
  cfg.aggregate_layer = true;
  auto s = score_or_error(cases, cfg);
  s.layer = layer;
  s.head = -1;
  return s;
}

std::vector<LayerSummary> summarize_layers(std::span<const EvalCase> cases, std::span<const HeadScore> scores,
                                           const TrackerConfig& base) {
  std::vector<int> layers;
  for (const auto& s : scores) {
    if (std::find(layers.begin(), layers.end(), s.layer) == layers.end()) layers.push_back(s.layer);
  }
  std::sort(layers.begin(), layers.end());
  std::vector<LayerSummary> out;
  for (int l : layers) {
    LayerSummary row;
    row.layer = l;
    row.aggregate = layer_aggregate_score(cases, l, base);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    int n = 0;
    for (const auto& s : scores) {
      if (s.layer != l) continue;
      lo = std::min(lo, s.delta_avg);
      hi = std::max(hi, s.delta_avg);
      sum += s.delta_avg;
      ++n;
    }
    row.head_min = lo;
    row.head_max = hi;
    row.head_mean = sum / n;
    out.push_back(row);
  }
  return out;
}

const char* to_string(HeadLabel label) {
  switch (label) {
    case HeadLabel::positional: return "positional";
    case HeadLabel::matching: return "matching";
    case HeadLabel::semantic: return "semantic";
  }
  return "?";
}

HeadClass classify_head(std::span<const float> attention, int frames, int grid_h, int grid_w) {
  if (frames < 1 || grid_h < 1 || grid_w < 1) throw DomainError("classify_head: dimensions must be positive");
  const std::size_t cells = static_cast<std::size_t>(grid_h) * grid_w;
  const std::size_t n = cells * frames;
  if (attention.size() != n * n) {
    throw DomainError("classify_head: expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
  }

  double self_sum = 0.0, corr_sum = 0.0, entropy_sum = 0.0, baseline_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = attention.subspan(i * n, n);
    double total = 0.0;
    for (float a : row) {
      if (!std::isfinite(a) || a < 0.0f) throw DomainError("classify_head: entries must be finite and non-negative");
      total += a;
    }
    if (std::abs(total - 1.0) > kRowSumTolerance) {
      throw DomainError("classify_head: row " + std::to_string(i) + " sums to " + std::to_string(total));
    }
    const int fi = static_cast<int>(i / cells);
    const int yi = static_cast<int>(i % cells) / grid_w;
    const int xi = static_cast<int>(i % cells) % grid_w;

    double self = 0.0, near_other = 0.0, other = 0.0, h = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = row[j];
      if (a > 0.0) h -= a * std::log(a);
      const int fj = static_cast<int>(j / cells);
      const int yj = static_cast<int>(j % cells) / grid_w;
      const int xj = static_cast<int>(j % cells) % grid_w;
      const bool near = std::abs(yj - yi) <= 1 && std::abs(xj - xi) <= 1;
      if (fj == fi) {
        if (near) self += a;
      } else {
        other += a;
        if (near) near_other += a;
      }
    }
    self_sum += self;
    entropy_sum += h;
    if (frames > 1) {
      corr_sum += other > 0.0 ? near_other / other : 0.0;
      const int ny = std::min(yi + 1, grid_h - 1) - std::max(yi - 1, 0) + 1;
      const int nx = std::min(xi + 1, grid_w - 1) - std::max(xi - 1, 0) + 1;
      baseline_sum += static_cast<double>(ny * nx) / static_cast<double>(cells);
    }
  }

  HeadClass out;
  auto& d = out.diagnostics;
  d.p_self = self_sum / n;
  d.p_corr = corr_sum / n;
  d.corr_baseline = baseline_sum / n;
  d.entropy = n > 1 ? entropy_sum / n / std::log(static_cast<double>(n)) : 0.0;
  if (d.p_self >= 0.5) {
    out.label = HeadLabel::positional;
  } else if (frames > 1 && d.p_corr >= 2.0 * d.corr_baseline && d.entropy <= 0.5) {
    out.label = HeadLabel::matching;
  } else {
    out.label = HeadLabel::semantic;
  }
  return out;
}

std::vector<SweepPoint> frequency_sweep(std::span<const EvalCase> cases, const TrackerConfig& cfg,
                                        std::span<const double> fractions, BandOrder direction) {
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] >= 0.0 && fractions[i] <= 1.0)) throw DomainError("frequency_sweep: fractions must lie in [0, 1]");
    if (i > 0 && fractions[i] < fractions[i - 1]) throw DomainError("frequency_sweep: fractions must be sorted");
  }
  if (cases.empty()) throw DomainError("frequency_sweep: no cases");
  const RopeLayout& layout = cases.front().volume->rope();
  std::vector<SweepPoint> out;
  for (double f : fractions) {
    TrackerConfig c = cfg;
    c.keep_low = KeepFractions::uniform(f);
    c.band_order = direction;
    c.toggles.frequency_filter = true;
    SweepPoint p;
    p.fraction = f;
    if (effective_mask(c, layout).none_kept()) {
      p.degenerate = true;
    } else {
      p.delta_avg = score_config(cases, c).delta_avg;
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace headtrack
