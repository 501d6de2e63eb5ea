// Acceptance run: one PASS/FAIL line per criterion, each with its measured
// values and wall time against the runtime budget. Exit status is the number
// of failures. An optional argument filters criteria by substring.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "headtrack/chunks.hpp"
#include "headtrack/errors.hpp"
#include "headtrack/formats.hpp"
#include "headtrack/headlab.hpp"
#include "headtrack/metrics.hpp"
#include "headtrack/philox.hpp"
#include "headtrack/rope.hpp"
#include "headtrack/toyvdit.hpp"
#include "headtrack/tracker.hpp"
#include "metric_oracle.hpp"

using namespace headtrack;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

std::vector<float> gaussian(PhiloxStream& rng, int n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

int below(PhiloxStream& rng, int n) { return std::min(n - 1, static_cast<int>(rng.uniform() * n)); }

// Toy model features for one rendered video.
struct Case {
  CalibrationSample sample;
  FeatureBank bank;
  EvalCase view() const { return {&bank.volume, &sample.gt}; }
};

std::vector<Case> toy_cases(const CalibrationSpec& cs, const ToyModelSpec& ms) {
  const auto weights = init_toy_model(ms);
  std::vector<Case> out;
  for (auto& s : generate_calibration(cs)) {
    auto bank = extract_features(s.video, weights);
    out.push_back({std::move(s), std::move(bank)});
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome rope_identity() {
  const RopeLayout l{8, 12, 12, 10000.0};
  PhiloxStream rng(1001, 0);
  double worst_rel = 0, worst_norm = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto q = gaussian(rng, 32), k = gaussian(rng, 32);
    const Position3 m{below(rng, 64), below(rng, 64), below(rng, 64)};
    const Position3 n{below(rng, 64), below(rng, 64), below(rng, 64)};
    const auto rq = apply_rope(q, l, m), rk = apply_rope(k, l, n);
    const auto rel = apply_rope(q, l, {m.m_t - n.m_t, m.m_h - n.m_h, m.m_w - n.m_w});
    worst_rel = std::max(worst_rel, std::abs(dot(rq, rk) - dot(rel, k)));
    worst_norm = std::max(worst_norm, std::abs(std::sqrt(dot(rq, rq)) - std::sqrt(dot(q, q))));
  }
  int table_mismatch = 0;
  for (int d : {4, 8, 16}) {
    const RopeLayout ld{d, d, d, 10000.0};
    for (auto axis : {Axis::t, Axis::h, Axis::w}) {
      const auto w = band_frequencies(ld, axis);
      if (static_cast<int>(w.size()) != d / 2) ++table_mismatch;
      for (int i = 0; i < static_cast<int>(w.size()); ++i) {
        if (w[i] != std::pow(10000.0, -2.0 * i / d)) ++table_mismatch;
      }
    }
  }
  return {worst_rel <= 1e-4 && worst_norm <= 1e-4 && table_mismatch == 0,
          format("max |<Rq,Rk>-<R(m-n)q,k>| %.2e, max norm drift %.2e, omega mismatches %d", worst_rel, worst_norm,
                 table_mismatch)};
}

Outcome filter_suite() {
  const RopeLayout l{8, 12, 12, 10000.0};
  int violations = 0;
  auto subset = [](const BandMask& a, const BandMask& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a.keep[i] && !b.keep[i]) return false;
    }
    return true;
  };
  // Monotone in the keep fraction, for every mask family.
  for (int i = 0; i < 20; ++i) {
    const double f0 = i / 20.0, f1 = (i + 1) / 20.0;
    if (!subset(lowpass_mask(l, KeepFractions::uniform(f0)), lowpass_mask(l, KeepFractions::uniform(f1)))) ++violations;
    if (!subset(highpass_mask(l, KeepFractions::uniform(f0)), highpass_mask(l, KeepFractions::uniform(f1)))) ++violations;
    if (!subset(pooled_lowpass_mask(l, f0), pooled_lowpass_mask(l, f1))) ++violations;
  }
  PhiloxStream rng(1002, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto v = gaussian(rng, 32);
    const KeepFractions keep{rng.uniform(), rng.uniform(), rng.uniform()};
    for (const auto& m : {lowpass_mask(l, keep), highpass_mask(l, keep), pooled_lowpass_mask(l, keep.t)}) {
      const auto once = filter_descriptor(v, m);
      if (filter_descriptor(once, m) != once) ++violations;
    }
    if (filter_descriptor(v, lowpass_mask(l, KeepFractions::uniform(1.0))) != v) ++violations;
    for (float x : filter_descriptor(v, lowpass_mask(l, KeepFractions::uniform(0.0)))) violations += x != 0.0f;
  }
  // keep 0.5: exactly the upper half of each axis's pair indices.
  const auto half = lowpass_mask(l, KeepFractions::uniform(0.5));
  for (auto axis : {Axis::t, Axis::h, Axis::w}) {
    const int pairs = l.pairs(axis);
    for (int p = 0; p < pairs; ++p) {
      const bool want = p >= pairs - (pairs + 1) / 2;
      const int ch = l.axis_offset(axis) + 2 * p;
      violations += (half.keep[ch] != want) + (half.keep[ch + 1] != want);
    }
  }
  // Band energies over all axes add up to the squared norm.
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    FeatureVolume fv({1, 1, 1, 1, 1, 32, 8, 8, 8}, l);
    const auto v = gaussian(rng, 32);
    fv.set(DescriptorKind::key, v);
    double energy = 0;
    for (auto axis : {Axis::t, Axis::h, Axis::w}) {
      for (double b : band_norms(fv, DescriptorKind::key, 0, 0, axis, l.pairs(axis))) energy += b * b;
    }
    worst = std::max(worst, std::abs(energy - dot(v, v)) / dot(v, v));
  }
  return {violations == 0 && worst <= 1e-5,
          format("mask/filter violations %d, max band quadrature rel. error %.2e", violations, worst)};
}

CorrelationMap random_map(PhiloxStream& rng, int rows, int cols) {
  CorrelationMap m;
  m.rows = rows;
  m.cols = cols;
  m.patch_size = 8;
  for (int i = 0; i < rows * cols; ++i) m.values.push_back(2.0 * rng.uniform() - 1.0);
  return m;
}

PixelPoint entry_centre(const CorrelationMap& m, int r, int c) {
  return {cell_to_pixel(c * m.scale_x, m.patch_size), cell_to_pixel(r * m.scale_y, m.patch_size)};
}

Outcome soft_argmax_suite() {
  PhiloxStream rng(1003, 0);
  double onehot_err = 0, sym_err = 0, conv_err = 0;
  int outside = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int rows = 1 + below(rng, 12), cols = 1 + below(rng, 12);
    auto m = random_map(rng, rows, cols);
    if (trial % 2) m = upsample_map(m, 1 + below(rng, 4));

    // The estimate is a convex combination of entry centres, so it stays in
    // their bounding box.
    const int radius = below(rng, 4);
    const double tau = std::pow(10.0, -3.0 + 4.0 * rng.uniform());
    const auto p = soft_argmax(m, tau, radius);
    const auto lo = entry_centre(m, 0, 0), hi = entry_centre(m, m.rows - 1, m.cols - 1);
    if (p.x < lo.x - 1e-9 || p.x > hi.x + 1e-9 || p.y < lo.y - 1e-9 || p.y > hi.y + 1e-9) ++outside;

    // One-hot: the soft estimate is the hot entry's centre.
    auto one = m;
    one.values.assign(one.values.size(), 0.0);
    const int ur = below(rng, one.rows), uc = below(rng, one.cols);
    one.values[static_cast<std::size_t>(ur) * one.cols + uc] = 1.0;
    const auto oh = soft_argmax(one, 0.002, radius);
    const auto oc = entry_centre(one, ur, uc);
    onehot_err = std::max(onehot_err, std::hypot(oh.x - oc.x, oh.y - oc.y));

    // Two equal peaks under a whole-map window land on their midpoint.
    if (cols >= 2) {
      auto two = random_map(rng, 1, cols);
      for (auto& v : two.values) v *= 0.5;
      const int a = below(rng, cols);
      int b = below(rng, cols - 1);
      b += b >= a;
      two.values[a] = two.values[b] = 1.0;
      const auto mid = soft_argmax(two, 1e-3, 0);
      sym_err = std::max(sym_err, std::abs(mid.x - 0.5 * (entry_centre(two, 0, a).x + entry_centre(two, 0, b).x)));
    }

    // tau -> 0 approaches the hard argmax of a map with a unique maximum.
    auto uniq = m;
    const auto top = std::max_element(uniq.values.begin(), uniq.values.end());
    *top += 0.01;
    const auto cold = soft_argmax(uniq, 1e-4, radius);
    const auto argmax = soft_argmax(uniq, 1e-4, radius, false);
    conv_err = std::max(conv_err, std::hypot(cold.x - argmax.x, cold.y - argmax.y));
  }
  return {onehot_err <= 1e-9 && sym_err <= 1e-9 && conv_err <= 1e-3 && outside == 0,
          format("one-hot err %.1e px, midpoint err %.1e px, tau->0 err %.1e px, outside hull %d/1000", onehot_err,
                 sym_err, conv_err, outside)};
}

Outcome metric_oracle() {
  PhiloxStream rng(1004, 0);
  double worst = 0;
  int perfect_miss = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int nq = 1 + below(rng, 5), nf = 1 + below(rng, 8);
    GroundTruthSet gt{32 + below(rng, 200), 32 + below(rng, 200), nf, {}};
    std::vector<Trajectory> pred, perfect;
    for (int q = 0; q < nq; ++q) {
      GroundTruthTrack t;
      t.query = {q, 0, 0, 0};
      Trajectory p, e;
      p.query = e.query = t.query;
      for (int f = 0; f < nf; ++f) {
        const double x = rng.uniform() * gt.video_w, y = rng.uniform() * gt.video_h;
        const bool vis = rng.uniform() < 0.7;
        t.points.push_back({x, y, vis});
        const double s = 20.0 * rng.uniform();
        p.points.push_back({f, x + s * (rng.uniform() - 0.5), y + s * (rng.uniform() - 0.5), rng.uniform() < 0.7, 0});
        e.points.push_back({f, x, y, vis, 0});
      }
      gt.tracks.push_back(t);
      pred.push_back(p);
      perfect.push_back(e);
    }
    const auto r = evaluate(pred, gt);
    const auto o = oracle::brute_force(pred, gt);
    worst = std::max({worst, std::abs(r.delta_avg - o.delta), std::abs(r.oa - o.oa), std::abs(r.aj - o.aj)});
    const auto one = evaluate(perfect, gt);
    perfect_miss += !(one.delta_avg == 1.0 && one.oa == 1.0 && one.aj == 1.0);
  }
  return {worst <= 1e-9 && perfect_miss == 0,
          format("max |library - enumerator| %.1e over 200 instances, perfect instances not scoring 1.0: %d", worst,
                 perfect_miss)};
}

Outcome static_scene() {
  double maxd = 0, maxfb = 0;
  int hidden = 0, points = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CalibrationSpec cs;
    cs.frames = 8;
    cs.video_h = cs.video_w = 64;
    cs.sprites = 0;
    cs.queries_per_video = 32;
    cs.texture_seed = seed;
    ToyModelSpec ms;
    ms.layers = 1;
    ms.heads = 4;
    ms.seed = seed;
    ms.planted = PlantedHead{0, 1};
    const auto cases = toy_cases(cs, ms);
    TrackerConfig cfg;
    cfg.head = 1;
    cfg.upsample_factor = 1;
    const auto& c = cases.at(0);
    for (const auto& t : track_video(c.bank.volume, cfg, c.sample.gt.queries())) {
      for (const auto& p : t.points) {
        maxd = std::max(maxd, std::hypot(p.x - t.query.x, p.y - t.query.y));
        maxfb = std::max(maxfb, p.fb_deviation);
        hidden += !p.visible;
        ++points;
      }
    }
  }
  return {maxd <= 0.5 && hidden == 0 && maxfb < 1e-3,
          format("5 seeds, %d points: max drift %.2e px, not visible %d, max fb %.2e px", points, maxd, hidden, maxfb)};
}

Outcome motion() {
  bool ok = true;
  std::ostringstream os;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CalibrationSpec cs;
    cs.frames = 8;
    cs.video_h = cs.video_w = 256;
    cs.sprites = 1;
    cs.sprite_size = 96;
    cs.texture_wavelength = 48;
    cs.query_margin = 8;
    cs.velocity = Velocity{2.0, 1.0};
    cs.queries_per_video = 16;
    cs.sprite_query_fraction = 1.0;
    cs.texture_seed = seed;
    ToyModelSpec ms;
    ms.layers = 1;
    ms.heads = 4;
    ms.noise_level = 0.0;
    ms.seed = seed;
    ms.planted = PlantedHead{0, 1};
    const auto cases = toy_cases(cs, ms);
    const auto& c = cases.at(0);
    TrackerConfig cfg;
    cfg.head = 1;
    const auto trajs = track_video(c.bank.volume, cfg, c.sample.gt.queries());
    const auto r = evaluate(trajs, c.sample.gt);
    double epe = 0;
    int n = 0;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      for (std::size_t t = 0; t < trajs[i].points.size(); ++t) {
        const auto& g = c.sample.gt.tracks[i].points[t];
        if (!g.visible) continue;
        epe += std::hypot(trajs[i].points[t].x - g.x, trajs[i].points[t].y - g.y);
        ++n;
      }
    }
    epe /= n;
    ok = ok && epe <= 4.0 && r.delta_avg >= 0.8;
    os << (seed ? "; " : "") << format("seed %d EPE %.2f px delta %.3f", static_cast<int>(seed), epe, r.delta_avg);
  }
  return {ok, os.str()};
}

Outcome selection() {
  int hits = 0;
  std::ostringstream misses;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CalibrationSpec cs;
    cs.n_videos = 1;
    cs.video_h = cs.video_w = 128;
    cs.sprite_size = 48;
    cs.texture_wavelength = 48;
    cs.queries_per_video = 40;
    cs.texture_seed = seed;
    ToyModelSpec ms;
    ms.seed = seed;
    ms.planted = PlantedHead{static_cast<int>(seed % ms.layers), static_cast<int>(seed * 3 % ms.heads)};
    const auto cases = toy_cases(cs, ms);
    std::vector<EvalCase> views;
    for (const auto& c : cases) views.push_back(c.view());
    const auto scores = score_heads(views, TrackerConfig{});
    const auto [layer, head] = select_head(scores);
    if (layer == ms.planted->layer && head == ms.planted->head) {
      ++hits;
    } else {
      misses << format(" seed %d picked (%d,%d)", static_cast<int>(seed), layer, head);
    }
  }
  return {hits >= 19, format("%d/20 seeds recover the planted head", hits) + misses.str()};
}

Outcome sweep() {
  const std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
  bool ok = true;
  std::ostringstream os;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    CalibrationSpec cs;
    cs.n_videos = 2;
    cs.texture_seed = seed;
    ToyModelSpec ms;
    ms.layers = 2;
    ms.heads = 4;
    ms.seed = seed;
    ms.planted = PlantedHead{1, 2};
    const auto cases = toy_cases(cs, ms);
    std::vector<EvalCase> views;
    for (const auto& c : cases) views.push_back(c.view());
    TrackerConfig cfg;
    cfg.layer = 1;
    cfg.head = 2;
    const auto low = frequency_sweep(views, cfg, fractions, BandOrder::low_first);
    const auto high = frequency_sweep(views, cfg, fractions, BandOrder::high_first);
    os << (seed ? "; " : "") << "seed " << seed << " low/high";
    for (std::size_t i = 0; i < fractions.size(); ++i) {
      ok = ok && (i + 1 < fractions.size() ? low[i].delta_avg >= high[i].delta_avg : low[i].delta_avg == high[i].delta_avg);
      os << format(" %.3f/%.3f", low[i].delta_avg, high[i].delta_avg);
    }
  }
  return {ok, os.str()};
}

Outcome ablation() {
  double oa_full = 0, oa_nofb = 0, d_full = 0, d_noup = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CalibrationSpec cs;
    cs.video_h = cs.video_w = 256;
    cs.sprites = 2;
    cs.sprite_size = 96;
    cs.occluder = OccluderPreset::moving_bar;
    cs.bar_width = 48;
    cs.bar_speed = 24.0;
    cs.texture_wavelength = 48;
    cs.queries_per_video = 24;
    cs.texture_seed = seed;
    ToyModelSpec ms;
    ms.layers = 1;
    ms.heads = 4;
    ms.seed = seed;
    ms.planted = PlantedHead{0, 1};
    const auto cases = toy_cases(cs, ms);
    const EvalCase view = cases.at(0).view();
    TrackerConfig cfg;
    cfg.head = 1;
    auto nofb = cfg, noup = cfg;
    nofb.toggles.fb_check = false;
    noup.toggles.upsampling = false;
    const auto full = score_config({&view, 1}, cfg);
    oa_full += full.oa / 5;
    d_full += full.delta_avg / 5;
    oa_nofb += score_config({&view, 1}, nofb).oa / 5;
    d_noup += score_config({&view, 1}, noup).delta_avg / 5;
  }
  return {oa_nofb < oa_full && d_noup < d_full,
          format("mean OA %.3f full vs %.3f without fb_check; mean delta %.3f full vs %.3f without upsampling", oa_full,
                 oa_nofb, d_full, d_noup)};
}

Outcome chunking() {
  CalibrationSpec cs;
  cs.frames = 32;
  cs.sprites = 1;
  cs.velocity = Velocity{1.0, 0.5};
  cs.queries_per_video = 12;
  cs.texture_seed = 5;
  ToyModelSpec ms;
  ms.layers = 1;
  ms.heads = 4;
  ms.seed = 5;
  ms.planted = PlantedHead{0, 1};
  const auto cases = toy_cases(cs, ms);
  const auto& c = cases.at(0);
  TrackerConfig cfg;
  cfg.head = 1;
  const auto queries = c.sample.gt.queries();

  const auto out = track_long(InMemoryProvider(c.bank.volume, 16), cfg, queries);
  int bad_length = 0, handoff_mismatch = 0, errors = 0;
  for (const auto& t : out) {
    bad_length += t.points.size() != 32;
    for (std::size_t f = 0; f < t.points.size(); ++f) bad_length += t.points[f].t != static_cast<int>(f);
    handoff_mismatch += !(t.points[16].x == t.points[15].x && t.points[16].y == t.points[15].y);
    errors += !t.error.empty();
  }
  int single_mismatch = 0;
  for (int frames : {16, 12}) {
    const auto part = slice_frames(c.bank.volume, {0, frames});
    single_mismatch += !(track_long(InMemoryProvider(part, 16), cfg, queries) == track_video(part, cfg, queries));
  }
  return {bad_length == 0 && handoff_mismatch == 0 && errors == 0 && single_mismatch == 0,
          format("F=32/chunk 16, %zu queries: length violations %d, handoff mismatches %d, errors %d; "
                 "single-chunk (F=16, F=12) mismatches %d",
                 out.size(), bad_length, handoff_mismatch, errors, single_mismatch)};
}

Outcome formats() {
  const auto dir = std::filesystem::temp_directory_path() / "headtrack_acceptance";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  CalibrationSpec cs;
  cs.occluder = OccluderPreset::moving_bar;
  cs.texture_seed = 11;
  ToyModelSpec ms;
  ms.layers = 2;
  ms.heads = 2;
  ms.seed = 11;
  const auto cases = toy_cases(cs, ms);
  const auto& c = cases.at(0);
  const auto trajs = track_video(c.bank.volume, TrackerConfig{}, c.sample.gt.queries());
  const TrajectoryFile tf{cs.video_h, cs.video_w, cs.frames, trajs};

  int unequal = 0;
  auto twice = [&](const char* name, auto write, auto read) {
    const auto a = dir / (std::string(name) + ".1"), b = dir / (std::string(name) + ".2");
    write(a);
    write_file_bytes(b, {});
    read(a, b);
    unequal += read_file_bytes(a) != read_file_bytes(b);
  };
  twice("htf1", [&](auto p) { write_htf1(p, c.bank.volume); }, [](auto a, auto b) { write_htf1(b, read_htf1(a)); });
  twice("hvid", [&](auto p) { write_hvid(p, c.sample.video); }, [](auto a, auto b) { write_hvid(b, read_hvid(a)); });
  twice("traj", [&](auto p) { write_trajectories(p, tf); },
        [](auto a, auto b) { write_trajectories(b, read_trajectories(a)); });
  twice("gt", [&](auto p) { write_ground_truth(p, c.sample.gt); },
        [](auto a, auto b) { write_ground_truth(b, read_ground_truth(a)); });
  const bool values_equal = read_trajectories(dir / "traj.1") == tf && read_ground_truth(dir / "gt.1") == c.sample.gt &&
                            read_hvid(dir / "hvid.1") == c.sample.video;

  int missed = 0;
  auto expect = [&](ParseErrorKind kind, auto&& fn) {
    try {
      fn();
      ++missed;
    } catch (const ParseError& e) {
      missed += e.kind() != kind;
    }
  };
  for (const char* name : {"htf1.1", "hvid.1"}) {
    auto bytes = read_file_bytes(dir / name);
    const bool htf1 = name[1] == 't';
    auto decode = [&](const std::vector<std::uint8_t>& b) { htf1 ? (void)decode_htf1(b) : (void)decode_hvid(b); };
    auto cut = bytes;
    cut.resize(bytes.size() - 3);
    expect(ParseErrorKind::truncated_payload, [&] { decode(cut); });
    auto magic = bytes;
    magic[0] ^= 0x20;
    expect(ParseErrorKind::bad_magic, [&] { decode(magic); });
  }
  std::filesystem::remove_all(dir);
  return {unequal == 0 && values_equal && missed == 0,
          format("write-read-write byte mismatches %d of 4, value round trips %s, negative cases missed %d of 4",
                 unequal, values_equal ? "equal" : "DIFFER", missed)};
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::string filter = argc > 1 ? argv[1] : "";
  const std::vector<Criterion> criteria{
      {"rope-identity", 5, rope_identity},
      {"frequency-filter", 5, filter_suite},
      {"soft-argmax", 10, soft_argmax_suite},
      {"metric-oracle", 10, metric_oracle},
      {"static-scene", 30, static_scene},
      {"motion", 60, motion},
      {"planted-head-selection", 300, selection},
      {"frequency-sweep", 120, sweep},
      {"ablation-direction", 300, ablation},
      {"chunking", 30, chunking},
      {"format-round-trips", 5, formats},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (!filter.empty() && std::string(c.name).find(filter) == std::string::npos) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs < c.budget_s;
    failures += !pass;
    std::printf("%s %s: %s [%.1f s, budget %.0f s]\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                c.budget_s);
    std::fflush(stdout);
  }
  return failures;
}
