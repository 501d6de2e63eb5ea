#include <algorithm>
#include <cmath>
#include <numbers>

#include "headtrack/errors.hpp"
#include "headtrack/headlab.hpp"
#include "headtrack/philox.hpp"

namespace headtrack {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Sum of oriented sinusoids per colour channel, evaluated at continuous
// coordinates so that sub-pixel motion renders consistently.
struct Texture {
  struct Wave {
    double kx, ky;
    double phase[3];
    double amp[3];
  };
  double base[3] = {128, 128, 128};
  std::vector<Wave> waves;

  static Texture random(PhiloxStream& rng, double wavelength, int n_waves = 10) {
    Texture t;
    for (auto& b : t.base) b = 107.5 + 40.0 * rng.uniform();
    for (int i = 0; i < n_waves; ++i) {
      Wave w;
      const double lambda = wavelength * std::exp2(2.0 * rng.uniform() - 1.0);
      const double theta = kTwoPi * rng.uniform();
      w.kx = kTwoPi * std::cos(theta) / lambda;
      w.ky = kTwoPi * std::sin(theta) / lambda;
      for (int c = 0; c < 3; ++c) {
        w.phase[c] = kTwoPi * rng.uniform();
        w.amp[c] = 25.0 * (0.5 + rng.uniform());
      }
      t.waves.push_back(w);
    }
    return t;
  }

  double value(double x, double y, int c) const {
    double v = base[c];
    for (const auto& w : waves) v += w.amp[c] * std::cos(w.kx * x + w.ky * y + w.phase[c]);
    return v;
  }
};

struct Sprite {
  MotionPreset motion = MotionPreset::translate;
  double x0 = 0, y0 = 0;  // top-left at t = 0 (translate)
  Velocity v;
  double cx = 0, cy = 0, radius = 0, omega = 0, phi = 0;  // circular
  Texture texture;

  Velocity top_left(int t) const {
    if (motion == MotionPreset::circular) {
      return {cx + radius * std::cos(phi + omega * t), cy + radius * std::sin(phi + omega * t)};
    }
    return {x0 + v.x * t, y0 + v.y * t};
  }
};

struct Scene {
  int frames = 0, height = 0, width = 0, size = 0;
  Texture background;
  std::vector<Sprite> sprites;
  bool bar = false;
  double bar_x0 = 0, bar_speed = 0;
  int bar_width = 0;

  bool bar_covers(double x, int t) const {
    if (!bar) return false;
    const double left = bar_x0 + bar_speed * t;
    return x >= left && x < left + bar_width;
  }
  bool sprite_covers(std::size_t k, double x, double y, int t) const {
    const auto p = sprites[k].top_left(t);
    return x >= p.x && x < p.x + size && y >= p.y && y < p.y + size;
  }
  // -2: bar, -1: background, otherwise the top-most sprite index.
  int top_object(double x, double y, int t) const {
    if (bar_covers(x, t)) return -2;
    for (std::size_t k = sprites.size(); k-- > 0;) {
      if (sprite_covers(k, x, y, t)) return static_cast<int>(k);
    }
    return -1;
  }
  bool in_frame(double x, double y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

double place(PhiloxStream& rng, double travel, int extent, int size) {
  // Choose a start so that [start, start + size) stays inside [0, extent)
  // over the whole travel when possible.
  double lo = std::max(0.0, -travel);
  double hi = extent - size - std::max(0.0, travel);
  if (hi < lo) {
    lo = 0.0;
    hi = extent - size;
  }
  // Whole-pixel starts keep edges on pixel boundaries under integer motion.
  return std::floor(lo + (hi - lo) * rng.uniform());
}

Video render(const Scene& s) {
  Video v(s.frames, s.height, s.width);
  for (int t = 0; t < s.frames; ++t) {
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const int top = s.top_object(px, py, t);
        for (int c = 0; c < 3; ++c) {
          double value;
          if (top == -2) {
            value = 24.0;
          } else if (top == -1) {
            value = s.background.value(px, py, c);
          } else {
            const auto p = s.sprites[top].top_left(t);
            value = s.sprites[top].texture.value(px - p.x, py - p.y, c);
          }
          v.at(t, y, x, c) = static_cast<std::uint8_t>(std::clamp(std::round(value), 0.0, 255.0));
        }
      }
    }
  }
  return v;
}

double snap(double v, int grid) {
  if (grid <= 0) return v;
  return (std::floor(v / grid) + 0.5) * grid;
}

}  // namespace

const char* to_string(MotionPreset m) {
  switch (m) {
    case MotionPreset::translate: return "translate";
    case MotionPreset::circular: return "circular";
    case MotionPreset::mixed: return "mixed";
  }
  return "?";
}

const char* to_string(OccluderPreset o) { return o == OccluderPreset::none ? "none" : "moving-bar"; }

std::optional<MotionPreset> parse_motion(std::string_view s) {
  for (auto m : {MotionPreset::translate, MotionPreset::circular, MotionPreset::mixed}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

std::optional<OccluderPreset> parse_occluder(std::string_view s) {
  if (s == "none") return OccluderPreset::none;
  if (s == "moving-bar") return OccluderPreset::moving_bar;
  return std::nullopt;
}

std::vector<CalibrationSample> generate_calibration(const CalibrationSpec& spec) {
  if (spec.n_videos < 0 || spec.frames < 1 || spec.video_h < 1 || spec.video_w < 1 || spec.sprites < 0) {
    throw DomainError("calibration: dimensions must be positive");
  }
  if (!(spec.max_speed >= 0.0)) throw DomainError("calibration: max_speed must be >= 0");
  if (spec.sprites > 0 && (spec.sprite_size < 1 || spec.sprite_size > spec.video_h || spec.sprite_size > spec.video_w)) {
    throw DomainError("calibration: sprite of size " + std::to_string(spec.sprite_size) + " does not fit a " +
                      std::to_string(spec.video_w) + "x" + std::to_string(spec.video_h) + " frame");
  }
  if (spec.query_frame < 0 || spec.query_frame >= spec.frames) throw DomainError("calibration: query_frame out of range");
  if (!(spec.texture_wavelength > 0.0)) throw DomainError("calibration: texture_wavelength must be positive");

  std::vector<CalibrationSample> out;
  for (int vid = 0; vid < spec.n_videos; ++vid) {
    PhiloxStream rng(spec.texture_seed, 0x5CE0'0000ull + static_cast<std::uint64_t>(vid));
    Scene s;
    s.frames = spec.frames;
    s.height = spec.video_h;
    s.width = spec.video_w;
    s.size = spec.sprite_size;
    s.background = Texture::random(rng, spec.texture_wavelength);
    const double travel_t = spec.frames - 1;
    for (int k = 0; k < spec.sprites; ++k) {
      Sprite sp;
      sp.texture = Texture::random(rng, spec.texture_wavelength);
      sp.motion = spec.motion == MotionPreset::mixed ? (k % 2 == 0 ? MotionPreset::translate : MotionPreset::circular)
                                                     : spec.motion;
      const double angle = kTwoPi * rng.uniform();
      const double speed = spec.max_speed * (0.5 + 0.5 * rng.uniform());
      if (sp.motion == MotionPreset::translate) {
        sp.v = spec.velocity ? *spec.velocity : Velocity{speed * std::cos(angle), speed * std::sin(angle)};
        sp.x0 = place(rng, sp.v.x * travel_t, spec.video_w, spec.sprite_size);
        sp.y0 = place(rng, sp.v.y * travel_t, spec.video_h, spec.sprite_size);
      } else {
        sp.radius = std::min({6.0, (spec.video_w - spec.sprite_size) / 2.0, (spec.video_h - spec.sprite_size) / 2.0});
        sp.omega = sp.radius > 0.0 ? speed / sp.radius : 0.0;
        sp.phi = angle;
        sp.cx = sp.radius + (spec.video_w - spec.sprite_size - 2 * sp.radius) * rng.uniform();
        sp.cy = sp.radius + (spec.video_h - spec.sprite_size - 2 * sp.radius) * rng.uniform();
      }
      s.sprites.push_back(std::move(sp));
    }
    if (spec.occluder == OccluderPreset::moving_bar) {
      s.bar = true;
      s.bar_width = spec.bar_width;
      s.bar_speed = spec.bar_speed;
      const double sweep = spec.bar_speed * travel_t;
      const double lo = -spec.bar_width * 0.5;
      const double hi = std::max(lo, spec.video_w - spec.bar_width * 0.5 - sweep);
      s.bar_x0 = std::floor(lo + (hi - lo) * rng.uniform());
    }

    CalibrationSample sample;
    sample.video = render(s);
    auto& gt = sample.gt;
    gt.video_h = spec.video_h;
    gt.video_w = spec.video_w;
    gt.frames = spec.frames;

    const int t0 = spec.query_frame;
    const int n_sprite_q = spec.sprites > 0 ? static_cast<int>(std::lround(spec.queries_per_video * spec.sprite_query_fraction)) : 0;
    const double m = spec.query_margin;
    int next_id = 0;
    for (int qi = 0; qi < spec.queries_per_video; ++qi) {
      const bool on_sprite = qi < n_sprite_q;
      const int owner = on_sprite ? qi % spec.sprites : -1;
      for (int attempt = 0; attempt < 256; ++attempt) {
        double x, y;
        if (on_sprite) {
          const auto p = s.sprites[owner].top_left(t0);
          x = snap(p.x + m + (spec.sprite_size - 2 * m) * rng.uniform(), spec.query_grid);
          y = snap(p.y + m + (spec.sprite_size - 2 * m) * rng.uniform(), spec.query_grid);
          if (x < p.x + m || x >= p.x + spec.sprite_size - m || y < p.y + m || y >= p.y + spec.sprite_size - m) continue;
        } else {
          x = snap(spec.video_w * rng.uniform(), spec.query_grid);
          y = snap(spec.video_h * rng.uniform(), spec.query_grid);
          bool near_sprite = false;
          for (std::size_t k = 0; k < s.sprites.size(); ++k) {
            const auto p = s.sprites[k].top_left(t0);
            if (x >= p.x - m && x < p.x + spec.sprite_size + m && y >= p.y - m && y < p.y + spec.sprite_size + m) {
              near_sprite = true;
            }
          }
          if (near_sprite) continue;
        }
        if (!s.in_frame(x, y) || s.top_object(x, y, t0) != owner) continue;

        GroundTruthTrack track;
        track.query = {next_id++, t0, x, y};
        const auto anchor = on_sprite ? s.sprites[owner].top_left(t0) : Velocity{};
        for (int t = 0; t < spec.frames; ++t) {
          GroundTruthPoint g;
          if (on_sprite) {
            const auto p = s.sprites[owner].top_left(t);
            g.x = x + (p.x - anchor.x);
            g.y = y + (p.y - anchor.y);
          } else {
            g.x = x;
            g.y = y;
          }
          g.visible = s.in_frame(g.x, g.y) && s.top_object(g.x, g.y, t) == owner;
          track.points.push_back(g);
        }
        gt.tracks.push_back(std::move(track));
        break;
      }
    }
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace headtrack
