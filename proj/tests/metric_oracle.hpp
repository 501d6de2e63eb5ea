#pragma once

#include <array>
#include <cmath>
#include <map>

#include "headtrack/model.hpp"

namespace oracle {

struct Scores {
  double delta = 0, oa = 0, aj = 0;
};

// Literal restatement of the TAP-Vid counts: enumerate every (query, frame)
// pair into explicit TP/FP/FN/within sets per threshold.
inline Scores brute_force(const std::vector<headtrack::Trajectory>& pred, const headtrack::GroundTruthSet& gt) {
  const double thresholds[5] = {1, 2, 4, 8, 16};
  std::map<int, const headtrack::Trajectory*> by_id;
  for (const auto& p : pred) by_id[p.query.id] = &p;
  double within[5] = {}, tp[5] = {}, fp[5] = {}, fn[5] = {};
  double visible = 0, correct = 0, total = 0;
  for (const auto& track : gt.tracks) {
    const auto& p = *by_id.at(track.query.id);
    for (std::size_t t = 0; t < track.points.size(); ++t) {
      const auto& g = track.points[t];
      const auto& q = p.points[t];
      total += 1;
      correct += (g.visible == q.visible) ? 1 : 0;
      visible += g.visible ? 1 : 0;
      const double e = std::hypot((q.x - g.x) * 256.0 / gt.video_w, (q.y - g.y) * 256.0 / gt.video_h);
      for (int k = 0; k < 5; ++k) {
        const bool in = e < thresholds[k];
        if (g.visible && in) within[k] += 1;
        if (g.visible && q.visible && in) tp[k] += 1;
        if (q.visible && !(g.visible && in)) fp[k] += 1;
        if (g.visible && !(q.visible && in)) fn[k] += 1;
      }
    }
  }
  Scores s;
  for (int k = 0; k < 5; ++k) {
    s.delta += (visible > 0 ? within[k] / visible : 1.0) / 5;
    const double den = tp[k] + fp[k] + fn[k];
    s.aj += (den > 0 ? tp[k] / den : 1.0) / 5;
  }
  s.oa = total > 0 ? correct / total : 1.0;
  return s;
}

}  // namespace oracle
