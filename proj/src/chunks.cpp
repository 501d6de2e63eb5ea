#include "headtrack/chunks.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>

#include "headtrack/errors.hpp"
#include "headtrack/formats.hpp"

namespace headtrack {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Trajectory failed(const QueryPoint& q, int frames, const std::string& what) {
  Trajectory t;
  t.query = q;
  t.error = what;
  for (int f = 0; f < frames; ++f) t.points.push_back({f, q.x, q.y, false, kInf});
  return t;
}

void check_chunk(const FeatureVolume& fv, const VolumeDims& ref, const RopeLayout& rope, Span span, std::size_t index) {
  const auto& d = fv.dims();
  const std::string where = "track_long: chunk " + std::to_string(index);
  if (d.frames != span.length()) {
    throw DomainError(where + " has " + std::to_string(d.frames) + " frames, span needs " + std::to_string(span.length()));
  }
  VolumeDims a = d, b = ref;
  a.frames = b.frames = 0;
  if (!(a == b) || !(fv.rope() == rope)) throw DomainError(where + " dimensions differ from chunk 0");
}

// Where a query leaves a chunk and what it carries into the neighbour.
struct Handoff {
  PixelPoint at;
  bool visible = true;
  std::vector<float> descriptor;
};

struct QueryState {
  int span = 0;
  bool done = false;  // failed; later chunks leave the placeholder points
  Handoff forward;
  Handoff backward;
};

}  // namespace

int ChunkPlan::span_of(int t) const {
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].contains(t)) return static_cast<int>(i);
  }
  return -1;
}

ChunkPlan split_plan(int frames, int chunk_len) {
  if (chunk_len < 2) throw DomainError("split_plan: chunk_len must be >= 2");
  if (frames < 1) throw DomainError("split_plan: frames must be >= 1");
  ChunkPlan plan;
  for (int s = 0; s < frames; s += chunk_len) plan.spans.push_back({s, std::min(s + chunk_len, frames)});
  if (plan.spans.size() > 1 && plan.spans.back().length() == 1) {
    plan.spans.pop_back();
    plan.spans.back().end = frames;
  }
  return plan;
}

void validate(const ChunkPlan& plan) {
  if (plan.spans.empty()) throw DomainError("chunk plan: no spans");
  int expect = 0;
  for (std::size_t i = 0; i < plan.spans.size(); ++i) {
    const auto& s = plan.spans[i];
    if (s.begin != expect || s.end <= s.begin) throw DomainError("chunk plan: spans must be contiguous and non-empty");
    expect = s.end;
  }
}

FeatureVolume slice_frames(const FeatureVolume& fv, Span span) {
  const auto& d = fv.dims();
  if (span.begin < 0 || span.end > d.frames || span.length() < 1) throw DomainError("slice_frames: span out of range");
  VolumeDims nd = d;
  nd.frames = span.length();
  FeatureVolume out(nd, fv.rope());
  const std::size_t frame_elems = static_cast<std::size_t>(d.grid_h) * d.grid_w * d.head_dim;
  for (auto kind : {DescriptorKind::query, DescriptorKind::key, DescriptorKind::hidden}) {
    if (!fv.has(kind)) continue;
    const auto src = fv.data(kind);
    // query/key: [layer][head][frame]..., hidden: [layer][frame][.. heads*D]; both are
    // (layers * heads) outer blocks of F frames once hidden's frame block is widened.
    const bool hidden = kind == DescriptorKind::hidden;
    const std::size_t block = hidden ? frame_elems * d.heads : frame_elems;
    const std::size_t outer = hidden ? d.layers : static_cast<std::size_t>(d.layers) * d.heads;
    std::vector<float> dst;
    dst.reserve(fv.expected_size(kind) / d.frames * nd.frames);
    for (std::size_t o = 0; o < outer; ++o) {
      const auto first = src.begin() + static_cast<std::ptrdiff_t>((o * d.frames + span.begin) * block);
      dst.insert(dst.end(), first, first + static_cast<std::ptrdiff_t>(span.length() * block));
    }
    out.set(kind, std::move(dst));
  }
  return out;
}

InMemoryProvider::InMemoryProvider(FeatureVolume volume, int chunk_len)
    : volume_(std::move(volume)), plan_(split_plan(volume_.dims().frames, chunk_len)) {}

FeatureVolume InMemoryProvider::load(std::size_t index) const { return slice_frames(volume_, plan_.spans.at(index)); }

ToyVideoProvider::ToyVideoProvider(const Video& video, const ToyWeights& model, std::vector<int> layers, int chunk_len)
    : video_(&video), model_(&model), layers_(std::move(layers)), plan_(split_plan(video.frames, chunk_len)) {}

FeatureVolume ToyVideoProvider::load(std::size_t index) const {
  const Span s = plan_.spans.at(index);
  Video clip(s.length(), video_->height, video_->width);
  const std::size_t frame_bytes = static_cast<std::size_t>(video_->height) * video_->width * 3;
  std::copy_n(video_->rgb.begin() + static_cast<std::ptrdiff_t>(s.begin * frame_bytes), clip.rgb.size(), clip.rgb.begin());
  return extract_features(clip, *model_, layers_).volume;
}

std::filesystem::path chunk_path(const std::filesystem::path& stem, std::size_t index) {
  char suffix[32];
  std::snprintf(suffix, sizeof suffix, ".chunk%03zu.htf1", index);
  return std::filesystem::path(stem.string() + suffix);
}

FileProvider::FileProvider(std::vector<std::filesystem::path> files) : files_(std::move(files)) {
  if (files_.empty()) throw DomainError("FileProvider: no chunk files");
  int begin = 0;
  for (const auto& f : files_) {
    const int n = read_htf1_header(f).dims.frames;
    plan_.spans.push_back({begin, begin + n});
    begin += n;
  }
}

FileProvider FileProvider::from_stem(const std::filesystem::path& stem) {
  std::vector<std::filesystem::path> files;
  for (std::size_t i = 0; std::filesystem::exists(chunk_path(stem, i)); ++i) files.push_back(chunk_path(stem, i));
  if (files.empty()) throw DomainError("FileProvider: no file matches " + chunk_path(stem, 0).string());
  return FileProvider(std::move(files));
}

FileProvider FileProvider::from_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw ParseError(ParseErrorKind::io, "cannot open " + manifest.string());
  std::vector<std::filesystem::path> files;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::filesystem::path p(line);
    files.push_back(p.is_absolute() ? p : manifest.parent_path() / p);
  }
  return FileProvider(std::move(files));
}

FeatureVolume FileProvider::load(std::size_t index) const { return read_htf1(files_.at(index)); }

std::vector<Trajectory> track_long(const ChunkProvider& provider, const TrackerConfig& cfg,
                                   std::span<const QueryPoint> queries, LongTrackOptions options) {
  const ChunkPlan plan = provider.plan();
  validate(plan);
  const int frames = plan.frames();
  const int n_chunks = static_cast<int>(plan.spans.size());

  std::vector<Trajectory> out;
  std::vector<QueryState> state(queries.size());
  out.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    Trajectory t;
    t.query = q;
    for (int f = 0; f < frames; ++f) t.points.push_back({f, q.x, q.y, false, kInf});
    out.push_back(std::move(t));
    // An out-of-range t0 is reported by the first chunk's tracker.
    state[i].span = std::max(plan.span_of(q.t0), 0);
  }
  if (queries.empty()) return out;

  auto fail = [&](std::size_t i, const std::string& what) {
    out[i] = failed(queries[i], frames, what);
    state[i].done = true;
  };
  auto copy_points = [&](std::size_t i, const Trajectory& local, Span span, int from, int to) {
    for (int k = from; k < to; ++k) {
      TrackPoint p = local.points[k];
      p.t = span.begin + k;
      out[i].points[p.t] = p;
    }
    out[i].warnings += local.warnings;
  };

  std::optional<VolumeDims> ref;
  RopeLayout ref_rope;
  auto load = [&](int c) {
    FeatureVolume fv = provider.load(static_cast<std::size_t>(c));
    if (!ref) {
      ref = fv.dims();
      ref_rope = fv.rope();
    }
    check_chunk(fv, *ref, ref_rope, plan.spans[c], static_cast<std::size_t>(c));
    return fv;
  };

  // Forward: each query starts in its own span and is handed to later spans.
  for (int c = 0; c < n_chunks; ++c) {
    const Span span = plan.spans[c];
    const FeatureVolume fv = load(c);
    const Tracker tracker(fv, cfg);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      auto& st = state[i];
      if (st.done || st.span > c) continue;
      const auto& q = queries[i];
      try {
        if (st.span == c) {
          const QueryPoint local{q.id, q.t0 - span.begin, q.x, q.y};
          const auto run = tracker.run(local, {});
          if (!run.trajectory.error.empty()) {
            // Degenerate query descriptor: only the query frame is known.
            fail(i, run.trajectory.error);
            out[i].points[q.t0] = {q.t0, q.x, q.y, true, 0.0};
            continue;
          }
          copy_points(i, run.trajectory, span, 0, span.length());
          const auto& first = run.trajectory.points.front();
          const auto& last = run.trajectory.points.back();
          st.forward = {{last.x, last.y}, last.visible, run.forward_descriptor};
          st.backward = {{first.x, first.y}, first.visible, run.backward_descriptor};
        } else {
          const QueryPoint local{q.id, 0, st.forward.at.x, st.forward.at.y};
          Tracker::RunOptions ro;
          if (options.handoff_descriptor) ro.initial_descriptor = st.forward.descriptor;
          ro.backward = false;
          ro.query_visible = st.forward.visible;
          auto run = tracker.run(local, ro);
          if (!st.forward.visible) run.trajectory.points.front().fb_deviation = kInf;
          copy_points(i, run.trajectory, span, 0, span.length());
          const auto& last = run.trajectory.points.back();
          st.forward = {{last.x, last.y}, last.visible, run.forward_descriptor};
          if (!run.trajectory.error.empty()) fail(i, run.trajectory.error);
        }
      } catch (const std::exception& e) {
        fail(i, e.what());
      }
    }
  }

  // Backward: queries that started after span c are handed back into it.
  for (int c = n_chunks - 2; c >= 0; --c) {
    bool needed = false;
    for (const auto& st : state) needed = needed || (!st.done && st.span > c);
    if (!needed) continue;
    const Span span = plan.spans[c];
    const FeatureVolume fv = load(c);
    const Tracker tracker(fv, cfg);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      auto& st = state[i];
      if (st.done || st.span <= c) continue;
      const auto& q = queries[i];
      try {
        const QueryPoint local{q.id, span.length() - 1, st.backward.at.x, st.backward.at.y};
        Tracker::RunOptions ro;
        if (options.handoff_descriptor) ro.initial_descriptor = st.backward.descriptor;
        ro.forward = false;
        ro.query_visible = st.backward.visible;
        auto run = tracker.run(local, ro);
        if (!st.backward.visible) run.trajectory.points.back().fb_deviation = kInf;
        copy_points(i, run.trajectory, span, 0, span.length());
        const auto& first = run.trajectory.points.front();
        st.backward = {{first.x, first.y}, first.visible, run.backward_descriptor};
        if (!run.trajectory.error.empty()) fail(i, run.trajectory.error);
      } catch (const std::exception& e) {
        fail(i, e.what());
      }
    }
  }
  return out;
}

}  // namespace headtrack
