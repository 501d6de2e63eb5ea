#include "headtrack/metrics.hpp"

#include <cmath>
#include <unordered_map>

#include "headtrack/errors.hpp"

namespace headtrack {

namespace {

double ratio(std::size_t num, std::size_t den) {
  // An empty denominator means there was nothing to get wrong.
  return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

void MetricAccumulator::add(std::span<const Trajectory> predictions, const GroundTruthSet& gt) {
  if (predictions.size() != gt.tracks.size()) {
    throw DomainError("metrics: " + std::to_string(predictions.size()) + " trajectories for " +
                      std::to_string(gt.tracks.size()) + " ground-truth tracks");
  }
  std::unordered_map<int, const Trajectory*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.query.id, &p).second) throw DomainError("metrics: duplicate query id " + std::to_string(p.query.id));
  }
  const double sx = options_.native_pixels ? 1.0 : 256.0 / gt.video_w;
  const double sy = options_.native_pixels ? 1.0 : 256.0 / gt.video_h;

  for (const auto& track : gt.tracks) {
    const auto it = by_id.find(track.query.id);
    if (it == by_id.end()) throw DomainError("metrics: no prediction for query id " + std::to_string(track.query.id));
    const Trajectory& pred = *it->second;
    if (pred.points.size() != track.points.size() || track.points.size() != static_cast<std::size_t>(gt.frames)) {
      throw DomainError("metrics: frame count mismatch for query id " + std::to_string(track.query.id));
    }
    for (std::size_t t = 0; t < track.points.size(); ++t) {
      const auto& g = track.points[t];
      const auto& p = pred.points[t];
      ++points_;
      if (g.visible) ++visible_gt_;
      if (p.visible) ++predicted_visible_;
      if (g.visible == p.visible) ++occlusion_correct_;
      const double dx = (p.x - g.x) * sx;
      const double dy = (p.y - g.y) * sy;
      const double err = std::sqrt(dx * dx + dy * dy);
      for (std::size_t k = 0; k < kThresholds.size(); ++k) {
        const bool close = err < kThresholds[k];
        if (g.visible && close) ++within_[k];
        if (g.visible && p.visible && close) ++tp_[k];
        if (p.visible && (!g.visible || !close)) ++fp_[k];
        if (g.visible && (!p.visible || !close)) ++fn_[k];
      }
    }
  }
}

void MetricAccumulator::merge(const MetricAccumulator& o) {
  points_ += o.points_;
  visible_gt_ += o.visible_gt_;
  predicted_visible_ += o.predicted_visible_;
  occlusion_correct_ += o.occlusion_correct_;
  for (std::size_t k = 0; k < kThresholds.size(); ++k) {
    within_[k] += o.within_[k];
    tp_[k] += o.tp_[k];
    fp_[k] += o.fp_[k];
    fn_[k] += o.fn_[k];
  }
}

MetricReport MetricAccumulator::report() const {
  MetricReport r;
  r.points = points_;
  r.visible_gt = visible_gt_;
  r.predicted_visible = predicted_visible_;
  r.oa = ratio(occlusion_correct_, points_);
  double dsum = 0.0, jsum = 0.0;
  for (std::size_t k = 0; k < kThresholds.size(); ++k) {
    r.within[k] = ratio(within_[k], visible_gt_);
    r.jaccard[k] = ratio(tp_[k], tp_[k] + fp_[k] + fn_[k]);
    dsum += r.within[k];
    jsum += r.jaccard[k];
  }
  r.delta_avg = dsum / kThresholds.size();
  r.aj = jsum / kThresholds.size();
  return r;
}

MetricReport evaluate(std::span<const Trajectory> predictions, const GroundTruthSet& gt, MetricOptions options) {
  MetricAccumulator acc(options);
  acc.add(predictions, gt);
  return acc.report();
}

DeltaResult delta_avg(std::span<const Trajectory> predictions, const GroundTruthSet& gt, MetricOptions options) {
  const auto r = evaluate(predictions, gt, options);
  return {r.within, r.delta_avg};
}

double occlusion_accuracy(std::span<const Trajectory> predictions, const GroundTruthSet& gt) {
  return evaluate(predictions, gt).oa;
}

double average_jaccard(std::span<const Trajectory> predictions, const GroundTruthSet& gt, MetricOptions options) {
  return evaluate(predictions, gt, options).aj;
}

}  // namespace headtrack
