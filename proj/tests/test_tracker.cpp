#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "headtrack/errors.hpp"
#include "headtrack/tracker.hpp"

using namespace headtrack;

namespace {

const RopeLayout kSmall{2, 2, 2, 10000.0};

// One-hot key descriptors: cell i of frame t holds basis vector (i mod D).
FeatureVolume one_hot_volume(int frames, int gh, int gw, int d) {
  FeatureVolume fv(fixtures::dims(1, 1, frames, gh, gw, d), {2, 2, d - 4, 10000.0});
  std::vector<float> v(fv.expected_size(DescriptorKind::key), 0.0f);
  for (int t = 0; t < frames; ++t) {
    for (int i = 0; i < gh * gw; ++i) v[(static_cast<std::size_t>(t) * gh * gw + i) * d + (i % d)] = 1.0f;
  }
  fv.set(DescriptorKind::key, std::move(v));
  return fv;
}

CorrelationMap map_of(int rows, int cols, std::vector<double> values, int patch = 8) {
  CorrelationMap m;
  m.rows = rows;
  m.cols = cols;
  m.patch_size = patch;
  m.values = std::move(values);
  return m;
}

TrackerConfig exact_config() {
  TrackerConfig cfg;
  cfg.toggles.upsampling = false;
  cfg.toggles.frequency_filter = false;
  return cfg;
}

}  // namespace

TEST_SUITE("tracker") {

TEST_CASE("descriptor modes") {
  for (auto m : {DescriptorMode::query_query, DescriptorMode::key_key, DescriptorMode::query_key,
                 DescriptorMode::key_query, DescriptorMode::hidden_hidden}) {
    CHECK(parse_descriptor_mode(to_string(m)) == m);
  }
  CHECK(decompose(DescriptorMode::query_key) == std::pair{DescriptorKind::query, DescriptorKind::key});
  CHECK_FALSE(parse_descriptor_mode("key"));
  CHECK(parse_upsample_mode("map") == UpsampleMode::map);
  CHECK_FALSE(parse_upsample_mode("bicubic"));
}

TEST_CASE("config validation") {
  const auto fv = fixtures::random_volume(fixtures::dims(1, 2, 2, 2, 2, 6), kSmall, 1);
  TrackerConfig cfg;
  CHECK_NOTHROW(validate(cfg, fv));
  cfg.head = 2;
  CHECK_THROWS_AS(validate(cfg, fv), DomainError);
  cfg = {};
  cfg.temperature = 0.0;
  CHECK_THROWS_AS(validate(cfg, fv), DomainError);
  cfg = {};
  cfg.upsample_factor = 0;
  CHECK_THROWS_AS(validate(cfg, fv), DomainError);
  cfg = {};
  cfg.refine_alpha = 1.5;
  CHECK_THROWS_AS(validate(cfg, fv), DomainError);
  cfg = {};
  cfg.keep_low.h = -0.1;
  CHECK_THROWS_AS(validate(cfg, fv), DomainError);
  cfg = {};
  cfg.descriptor = DescriptorMode::hidden_hidden;
  CHECK_THROWS_AS(Tracker(fv, cfg), DescriptorUnavailable);
}

TEST_CASE("prepare_descriptor") {
  const auto fv = fixtures::random_volume(fixtures::dims(1, 1, 1, 2, 2, 6), kSmall, 2);
  TrackerConfig cfg;
  const auto key = fv.cell(DescriptorKind::key, 0, 0, 0, 1, 0);
  const auto unit = prepare_descriptor(fv, cfg, Side::source, 0, 1, 0);
  double n = 0;
  for (float x : key) n += x * x;
  n = std::sqrt(n);
  for (int i = 0; i < 6; ++i) CHECK(unit[i] == doctest::Approx(key[i] / n).epsilon(1e-6));

  cfg.similarity = Similarity::dot;
  cfg.toggles.frequency_filter = false;
  const auto raw = prepare_descriptor(fv, cfg, Side::target, 0, 1, 0);
  CHECK(std::equal(raw.begin(), raw.end(), key.begin(), key.end()));

  cfg = {};
  cfg.keep_low = KeepFractions::uniform(0.0);
  CHECK_THROWS_AS(prepare_descriptor(fv, cfg, Side::source, 0, 0, 0), DegenerateDescriptor);
}

TEST_CASE("correlation map of orthogonal descriptors") {
  const auto fv = one_hot_volume(1, 2, 3, 6);
  const auto cfg = exact_config();
  std::vector<float> q(6, 0.0f);
  q[4] = 1.0f;  // equals cell index 4 = (1, 1)
  const auto m = correlation_map(q, fv, cfg, 0);
  REQUIRE(m.values.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(m.values[i] == (i == 4 ? 1.0 : 0.0));
  for (auto& x : q) x *= 5.0f;
  CHECK(correlation_map(q, fv, cfg, 0).values == m.values);
}

TEST_CASE("correlation map matches a brute-force oracle") {
  const auto fv = fixtures::random_volume(fixtures::dims(1, 1, 2, 2, 2, 6), kSmall, 3);
  PhiloxStream rng(4, 0);
  std::vector<float> q(6);
  for (auto& x : q) x = static_cast<float>(rng.normal());
  for (auto sim : {Similarity::cosine, Similarity::dot}) {
    auto cfg = exact_config();
    cfg.similarity = sim;
    std::vector<float> qn = q;
    if (sim == Similarity::cosine) {
      double n = 0;
      for (float x : q) n += x * x;
      for (auto& x : qn) x = static_cast<float>(x / std::sqrt(n));
    }
    const auto m = correlation_map(qn, fv, cfg, 1);
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 2; ++x) {
        const auto c = fv.cell(DescriptorKind::key, 0, 0, 1, y, x);
        double d = 0, cn = 0;
        for (int i = 0; i < 6; ++i) {
          d += qn[i] * c[i];
          cn += c[i] * c[i];
        }
        if (sim == Similarity::cosine) d /= std::sqrt(cn);
        CHECK(m.at(y, x) == doctest::Approx(d).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("upsample_map") {
  const auto m = map_of(1, 2, {0.0, 1.0});
  CHECK(upsample_map(m, 1).values == m.values);
  const auto u = upsample_map(m, 2);
  REQUIRE(u.cols == 4);
  CHECK(u.values[0] == doctest::Approx(0.0));
  CHECK(u.values[1] == doctest::Approx(1.0 / 3));
  CHECK(u.values[2] == doctest::Approx(2.0 / 3));
  CHECK(u.values[3] == doctest::Approx(1.0));
  CHECK(u.scale_x == doctest::Approx(1.0 / 3));
  const auto c = upsample_map(map_of(3, 2, std::vector<double>(6, 0.25)), 4);
  CHECK(c.rows == 12);
  for (double v : c.values) CHECK(v == doctest::Approx(0.25));
  CHECK_THROWS_AS(upsample_map(m, 0), DomainError);
}

TEST_CASE("soft_argmax") {
  std::vector<double> v(25, 0.0);
  v[2 * 5 + 3] = 1.0;
  const auto hot = soft_argmax(map_of(5, 5, v), 1e-3, 0);
  CHECK(hot.x == doctest::Approx(cell_to_pixel(3, 8)));
  CHECK(hot.y == doctest::Approx(cell_to_pixel(2, 8)));

  const auto two = soft_argmax(map_of(1, 5, {0.0, 0.9, 0.2, 0.9, 0.0}), 0.3, 0);
  CHECK(two.x == doctest::Approx(cell_to_pixel(2, 8)));

  const auto pair = soft_argmax(map_of(1, 2, {1.0, 2.0}, 1), 1.0, 0);
  const double offset = std::exp(2.0) / (std::exp(1.0) + std::exp(2.0));
  CHECK(offset == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(pair.x == doctest::Approx(0.5 + offset));

  // The window is centred on the hard argmax; mass outside it is ignored.
  const auto windowed = soft_argmax(map_of(1, 7, {0.95, 0, 0, 0, 1.0, 0, 0}), 10.0, 1);
  CHECK(windowed.x == doctest::Approx(cell_to_pixel(4, 8)));
  // soft = false returns the hard argmax; ties go to the smallest index.
  CHECK(soft_argmax(map_of(1, 3, {0.5, 0.5, 0.1}), 1.0, 0, false).x == doctest::Approx(4.0));
  CHECK_THROWS_AS(soft_argmax(map_of(1, 1, {1.0}), 0.0, 0), DomainError);
}

TEST_CASE("refine_query") {
  FeatureVolume fv(fixtures::dims(1, 1, 1, 1, 1, 6), kSmall);
  fv.set(DescriptorKind::key, {0, 1, 0, 0, 0, 0});
  auto cfg = exact_config();
  const std::vector<float> d{1, 0, 0, 0, 0, 0};
  const PixelPoint p{4, 4};

  cfg.refine_alpha = 0.0;
  CHECK(refine_query(d, fv, cfg, 0, p) == d);
  cfg.refine_alpha = 1.0;
  auto r = refine_query(d, fv, cfg, 0, p);
  CHECK(r[0] == doctest::Approx(0.0));
  CHECK(r[1] == doctest::Approx(1.0));
  cfg.refine_alpha = 0.1;
  r = refine_query(d, fv, cfg, 0, p);
  const double n = std::hypot(0.9, 0.1);
  CHECK(r[0] == doctest::Approx(0.9 / n));
  CHECK(r[1] == doctest::Approx(0.1 / n));

  // (1 - a) d + a f = 0 cannot be normalised: d is kept and flagged.
  fv.set(DescriptorKind::key, {-1, 0, 0, 0, 0, 0});
  cfg.refine_alpha = 0.5;
  bool degenerate = false;
  CHECK(refine_query(d, fv, cfg, 0, p, &degenerate) == d);
  CHECK(degenerate);
}

TEST_CASE("fb_deviation matches a two-hop oracle") {
  const auto fv = fixtures::random_volume(fixtures::dims(1, 1, 2, 2, 2, 6), kSmall, 11);
  auto cfg = exact_config();
  cfg.temperature = 0.7;
  cfg.window_radius = 0;

  auto unit = [&](int t, double y, double x) {
    auto v = descriptor_at(fv, DescriptorKind::key, 0, 0, t, y, x);
    double n = 0;
    for (float a : v) n += a * a;
    for (auto& a : v) a = static_cast<float>(a / std::sqrt(n));
    return v;
  };
  // Off-centre landing on frame 1, so the backward descriptor is interpolated.
  const PixelPoint now{9.0, 5.0}, query{4.0, 12.0};
  const auto d = unit(1, pixel_to_cell(now.y, 8), pixel_to_cell(now.x, 8));
  double z = 0, sx = 0, sy = 0;
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) {
      const auto c = unit(0, y, x);
      double s = 0;
      for (int i = 0; i < 6; ++i) s += d[i] * c[i];
      const double w = std::exp(s / cfg.temperature);
      z += w;
      sx += w * cell_to_pixel(x, 8);
      sy += w * cell_to_pixel(y, 8);
    }
  }
  const double want = std::hypot((sx / z - query.x) * 256.0 / 16, (sy / z - query.y) * 256.0 / 16);
  CHECK(fb_deviation(fv, cfg, 0, query, 1, now) == doctest::Approx(want).epsilon(1e-6));

  // A zero descriptor on the backward hop is the +inf sentinel.
  auto zero = fv;
  auto data = zero.mutable_data(DescriptorKind::key);
  std::fill(data.begin() + 4 * 6, data.end(), 0.0f);
  CHECK(fb_deviation(zero, cfg, 0, query, 1, now) == std::numeric_limits<double>::infinity());
}

TEST_CASE("integer-cell shift is tracked exactly") {
  // Frame t holds frame 0 shifted right by t cells (columns wrap).
  const int F = 3, G = 6, D = 8;
  const auto base = fixtures::random_volume(fixtures::dims(1, 1, 1, G, G, D), {2, 2, 4}, 21);
  FeatureVolume fv(fixtures::dims(1, 1, F, G, G, D), {2, 2, 4});
  std::vector<float> v(fv.expected_size(DescriptorKind::key));
  for (int t = 0; t < F; ++t) {
    for (int y = 0; y < G; ++y) {
      for (int x = 0; x < G; ++x) {
        const auto src = base.cell(DescriptorKind::key, 0, 0, 0, y, (x - t + G) % G);
        std::copy(src.begin(), src.end(), v.begin() + fv.offset(DescriptorKind::key, 0, 0, t, y, x));
      }
    }
  }
  fv.set(DescriptorKind::key, std::move(v));
  auto cfg = exact_config();
  cfg.toggles.soft_argmax = false;
  const QueryPoint q{0, 0, cell_to_pixel(1, 8), cell_to_pixel(2, 8)};
  const auto traj = track_point(fv, cfg, q);
  for (int t = 0; t < F; ++t) {
    CHECK(traj.points[t].x == doctest::Approx(cell_to_pixel(1 + t, 8)));
    CHECK(traj.points[t].y == doctest::Approx(cell_to_pixel(2, 8)));
    CHECK(traj.points[t].visible);
    CHECK(traj.points[t].fb_deviation == 0.0);
  }
}

TEST_CASE("feature lattice") {
  const auto fv = fixtures::random_volume(fixtures::dims(1, 1, 1, 3, 4, 6), kSmall, 5);
  TrackerConfig cfg;
  cfg.upsample_factor = 4;
  const Tracker lattice(fv, cfg);
  CHECK(lattice.lattice_rows() == 9);
  CHECK(lattice.lattice_cols() == 13);
  CHECK(lattice.lattice_step() == 0.25);
  // The node at a cell centre scores exactly like the cell.
  const auto q = lattice.prepare(Side::source, 0, 1, 2);
  const auto m = lattice.correlate(q, 0);
  CHECK(m.at(4, 8) == doctest::Approx(1.0).epsilon(1e-6));
  // A sub-cell query scores 1 at its own node, which the cell grid lacks.
  const auto sub = lattice.prepare(Side::source, 0, 1.25, 2.5);
  CHECK(lattice.correlate(sub, 0).at(5, 10) == doctest::Approx(1.0).epsilon(1e-6));

  cfg.upsample_mode = UpsampleMode::map;
  const Tracker map(fv, cfg);
  CHECK(map.lattice_rows() == 3);
  cfg.toggles.upsampling = false;
  cfg.upsample_mode = UpsampleMode::feature;
  CHECK(Tracker(fv, cfg).lattice_cols() == 4);
}

TEST_CASE("track contracts") {
  const auto fv = fixtures::random_volume(fixtures::dims(1, 1, 4, 3, 3, 6), kSmall, 8);
  TrackerConfig cfg;
  cfg.fb_threshold = 0.0;
  const QueryPoint q{7, 1, 10.0, 13.0};
  const auto strict = track_point(fv, cfg, q);
  REQUIRE(strict.points.size() == 4);
  CHECK(strict.points[1] == TrackPoint{1, 10.0, 13.0, true, 0.0});
  cfg.toggles.fb_check = false;
  for (const auto& p : track_point(fv, cfg, q).points) CHECK(p.visible);

  CHECK(track_video(fv, cfg, {}).empty());
  const std::vector<QueryPoint> dup{q, q};
  const auto two = track_video(fv, cfg, dup);
  CHECK(two[0] == two[1]);

  const std::vector<QueryPoint> bad{{0, 9, 1.0, 1.0}};
  const auto failed = track_video(fv, cfg, bad);
  CHECK_FALSE(failed[0].error.empty());
  CHECK_THROWS_AS(track_point(fv, cfg, bad[0]), DomainError);
  CHECK_THROWS_AS(track_point(fv, cfg, {0, 0, 24.0, 1.0}), DomainError);
}

TEST_CASE("layer aggregate of one head equals that head") {
  const auto fv = fixtures::random_volume(fixtures::dims(1, 1, 3, 3, 3, 6), kSmall, 9);
  TrackerConfig cfg;
  const QueryPoint q{0, 0, 12.0, 12.0};
  auto agg = cfg;
  agg.aggregate_layer = true;
  CHECK(track_point(fv, cfg, q) == track_point(fv, agg, q));
}

TEST_CASE("distance_256") {
  CHECK(distance_256({0, 0}, {3, 4}, 256, 256) == doctest::Approx(5.0));
  CHECK(distance_256({0, 0}, {1, 0}, 64, 128) == doctest::Approx(2.0));
  CHECK(distance_256({0, 0}, {0, 1}, 64, 128) == doctest::Approx(4.0));
}

}
