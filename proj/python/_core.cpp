// Python bindings. Arrays cross the boundary as NumPy copies; tensors keep
// the C++ memory layout ([layer][head][frame][y][x][channel] for query/key).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "headtrack/chunks.hpp"
#include "headtrack/errors.hpp"
#include "headtrack/formats.hpp"
#include "headtrack/headlab.hpp"
#include "headtrack/metrics.hpp"
#include "headtrack/rope.hpp"
#include "headtrack/toyvdit.hpp"
#include "headtrack/tracker.hpp"

namespace py = pybind11;
using namespace headtrack;

namespace {

py::array_t<float> kind_array(const FeatureVolume& fv, DescriptorKind kind) {
  const auto& d = fv.dims();
  const auto data = fv.data(kind);
  std::vector<py::ssize_t> shape;
  if (kind == DescriptorKind::hidden) {
    shape = {d.layers, d.frames, d.grid_h, d.grid_w, static_cast<py::ssize_t>(d.heads) * d.head_dim};
  } else {
    shape = {d.layers, d.heads, d.frames, d.grid_h, d.grid_w, d.head_dim};
  }
  py::array_t<float> out(shape);
  std::copy(data.begin(), data.end(), out.mutable_data());
  return out;
}

void set_kind(FeatureVolume& fv, DescriptorKind kind, const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  fv.set(kind, std::vector<float>(a.data(), a.data() + a.size()));
}

py::array_t<std::uint8_t> video_array(const Video& v) {
  py::array_t<std::uint8_t> out({v.frames, v.height, v.width, 3});
  std::copy(v.rgb.begin(), v.rgb.end(), out.mutable_data());
  return out;
}

Video to_video(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 4 || a.shape(3) != 3) throw DomainError("video must have shape (F, H, W, 3)");
  Video v(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), v.rgb.begin());
  return v;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Point tracking from video transformer attention heads";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DescriptorUnavailable>(m, "DescriptorUnavailable", PyExc_KeyError);
  py::register_exception<DegenerateDescriptor>(m, "DegenerateDescriptor", PyExc_ArithmeticError);

  py::enum_<Axis>(m, "Axis").value("t", Axis::t).value("h", Axis::h).value("w", Axis::w);
  py::enum_<DescriptorKind>(m, "DescriptorKind")
      .value("query", DescriptorKind::query)
      .value("key", DescriptorKind::key)
      .value("hidden", DescriptorKind::hidden);

  py::class_<RopeLayout>(m, "RopeLayout")
      .def(py::init<int, int, int, double>(), py::arg("d_t") = 8, py::arg("d_h") = 12, py::arg("d_w") = 12,
           py::arg("base") = 10000.0)
      .def_readwrite("d_t", &RopeLayout::d_t)
      .def_readwrite("d_h", &RopeLayout::d_h)
      .def_readwrite("d_w", &RopeLayout::d_w)
      .def_readwrite("base", &RopeLayout::base)
      .def_property_readonly("dim", &RopeLayout::dim)
      .def("__eq__", [](const RopeLayout& a, const RopeLayout& b) { return a == b; });

  py::class_<VolumeDims>(m, "VolumeDims")
      .def(py::init<>())
      .def_readwrite("layers", &VolumeDims::layers)
      .def_readwrite("heads", &VolumeDims::heads)
      .def_readwrite("frames", &VolumeDims::frames)
      .def_readwrite("grid_h", &VolumeDims::grid_h)
      .def_readwrite("grid_w", &VolumeDims::grid_w)
      .def_readwrite("head_dim", &VolumeDims::head_dim)
      .def_readwrite("patch_size", &VolumeDims::patch_size)
      .def_readwrite("video_h", &VolumeDims::video_h)
      .def_readwrite("video_w", &VolumeDims::video_w);

  py::class_<FeatureVolume>(m, "FeatureVolume")
      .def(py::init<VolumeDims, RopeLayout>())
      .def_property_readonly("dims", &FeatureVolume::dims)
      .def_property_readonly("rope", &FeatureVolume::rope)
      .def("has", &FeatureVolume::has)
      .def("array", &kind_array, "Copy of one descriptor tensor")
      .def("set", &set_kind, "Install a tensor of the expected size (any shape, C order)")
      .def("validate", [](const FeatureVolume& fv) {
        const auto r = validate_feature_volume(fv);
        if (!r.ok) throw DomainError(r.message);
      });

  // rope
  py::class_<KeepFractions>(m, "KeepFractions")
      .def(py::init<double, double, double>(), py::arg("t") = 1.0, py::arg("h") = 1.0, py::arg("w") = 1.0)
      .def_static("uniform", &KeepFractions::uniform)
      .def_readwrite("t", &KeepFractions::t)
      .def_readwrite("h", &KeepFractions::h)
      .def_readwrite("w", &KeepFractions::w);
  m.def("band_frequencies", &band_frequencies);
  m.def("apply_rope", [](std::vector<float> v, const RopeLayout& l, std::int64_t t, std::int64_t y, std::int64_t x) {
    return apply_rope(v, l, {t, y, x});
  });
  m.def("lowpass_mask", [](const RopeLayout& l, KeepFractions k) { return lowpass_mask(l, k).keep; });
  m.def("highpass_mask", [](const RopeLayout& l, KeepFractions k) { return highpass_mask(l, k).keep; });
  m.def("band_norms", &band_norms, py::arg("volume"), py::arg("kind"), py::arg("layer"), py::arg("head"), py::arg("axis"),
        py::arg("n_bands"));

  // calibration videos
  py::enum_<MotionPreset>(m, "MotionPreset")
      .value("translate", MotionPreset::translate)
      .value("circular", MotionPreset::circular)
      .value("mixed", MotionPreset::mixed);
  py::enum_<OccluderPreset>(m, "OccluderPreset")
      .value("none", OccluderPreset::none)
      .value("moving_bar", OccluderPreset::moving_bar);
  py::class_<CalibrationSpec>(m, "CalibrationSpec")
      .def(py::init<>())
      .def_readwrite("n_videos", &CalibrationSpec::n_videos)
      .def_readwrite("frames", &CalibrationSpec::frames)
      .def_readwrite("video_h", &CalibrationSpec::video_h)
      .def_readwrite("video_w", &CalibrationSpec::video_w)
      .def_readwrite("sprites", &CalibrationSpec::sprites)
      .def_readwrite("motion", &CalibrationSpec::motion)
      .def_readwrite("max_speed", &CalibrationSpec::max_speed)
      .def_readwrite("occluder", &CalibrationSpec::occluder)
      .def_readwrite("texture_seed", &CalibrationSpec::texture_seed)
      .def_readwrite("sprite_size", &CalibrationSpec::sprite_size)
      .def_property(
          "velocity",
          [](const CalibrationSpec& s) -> std::optional<std::pair<double, double>> {
            if (!s.velocity) return std::nullopt;
            return std::pair{s.velocity->x, s.velocity->y};
          },
          [](CalibrationSpec& s, std::optional<std::pair<double, double>> v) {
            s.velocity = v ? std::optional<Velocity>(Velocity{v->first, v->second}) : std::nullopt;
          })
      .def_readwrite("texture_wavelength", &CalibrationSpec::texture_wavelength)
      .def_readwrite("queries_per_video", &CalibrationSpec::queries_per_video)
      .def_readwrite("sprite_query_fraction", &CalibrationSpec::sprite_query_fraction)
      .def_readwrite("query_frame", &CalibrationSpec::query_frame)
      .def_readwrite("query_grid", &CalibrationSpec::query_grid)
      .def_readwrite("query_margin", &CalibrationSpec::query_margin)
      .def_readwrite("bar_width", &CalibrationSpec::bar_width)
      .def_readwrite("bar_speed", &CalibrationSpec::bar_speed);

  py::class_<QueryPoint>(m, "QueryPoint")
      .def(py::init<int, int, double, double>(), py::arg("id"), py::arg("t0"), py::arg("x"), py::arg("y"))
      .def_readwrite("id", &QueryPoint::id)
      .def_readwrite("t0", &QueryPoint::t0)
      .def_readwrite("x", &QueryPoint::x)
      .def_readwrite("y", &QueryPoint::y)
      .def("__repr__", [](const QueryPoint& q) {
        return "QueryPoint(id=" + std::to_string(q.id) + ", t0=" + std::to_string(q.t0) + ", x=" + std::to_string(q.x) +
               ", y=" + std::to_string(q.y) + ")";
      });
  py::class_<TrackPoint>(m, "TrackPoint")
      .def_readonly("t", &TrackPoint::t)
      .def_readonly("x", &TrackPoint::x)
      .def_readonly("y", &TrackPoint::y)
      .def_readonly("visible", &TrackPoint::visible)
      .def_readonly("fb_deviation", &TrackPoint::fb_deviation);
  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("query", &Trajectory::query)
      .def_readonly("points", &Trajectory::points)
      .def_readonly("warnings", &Trajectory::warnings)
      .def_readonly("error", &Trajectory::error)
      .def("xy", [](const Trajectory& t) {
        py::array_t<double> out({static_cast<py::ssize_t>(t.points.size()), py::ssize_t{2}});
        auto r = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < t.points.size(); ++i) {
          r(i, 0) = t.points[i].x;
          r(i, 1) = t.points[i].y;
        }
        return out;
      })
      .def("visible", [](const Trajectory& t) {
        std::vector<bool> v;
        for (const auto& p : t.points) v.push_back(p.visible);
        return v;
      });
  py::class_<GroundTruthPoint>(m, "GroundTruthPoint")
      .def_readonly("x", &GroundTruthPoint::x)
      .def_readonly("y", &GroundTruthPoint::y)
      .def_readonly("visible", &GroundTruthPoint::visible);
  py::class_<GroundTruthTrack>(m, "GroundTruthTrack")
      .def_readonly("query", &GroundTruthTrack::query)
      .def_readonly("points", &GroundTruthTrack::points);
  py::class_<GroundTruthSet>(m, "GroundTruthSet")
      .def_readonly("video_h", &GroundTruthSet::video_h)
      .def_readonly("video_w", &GroundTruthSet::video_w)
      .def_readonly("frames", &GroundTruthSet::frames)
      .def_readonly("tracks", &GroundTruthSet::tracks)
      .def("queries", &GroundTruthSet::queries);

  m.def("generate_calibration", [](const CalibrationSpec& spec) {
    py::list out;
    for (auto& s : generate_calibration(spec)) out.append(py::make_tuple(video_array(s.video), s.gt));
    return out;
  }, "List of (video uint8 array (F, H, W, 3), GroundTruthSet)");

  // toy model
  py::class_<PlantedHead>(m, "PlantedHead")
      .def(py::init<int, int>(), py::arg("layer"), py::arg("head"))
      .def_readwrite("layer", &PlantedHead::layer)
      .def_readwrite("head", &PlantedHead::head);
  py::class_<ToyModelSpec>(m, "ToyModelSpec")
      .def(py::init<>())
      .def_readwrite("layers", &ToyModelSpec::layers)
      .def_readwrite("heads", &ToyModelSpec::heads)
      .def_readwrite("head_dim", &ToyModelSpec::head_dim)
      .def_readwrite("patch_size", &ToyModelSpec::patch_size)
      .def_readwrite("rope", &ToyModelSpec::rope)
      .def_readwrite("noise_level", &ToyModelSpec::noise_level)
      .def_readwrite("seed", &ToyModelSpec::seed)
      .def_readwrite("planted", &ToyModelSpec::planted)
      .def_readwrite("planted_keep_low", &ToyModelSpec::planted_keep_low)
      .def_readwrite("planted_gain", &ToyModelSpec::planted_gain);
  py::class_<ToyWeights>(m, "ToyWeights");
  m.def("init_toy_model", &init_toy_model);
  m.def(
      "extract_features",
      [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& video, const ToyWeights& w,
         std::vector<int> layers) { return extract_features(to_video(video), w, layers).volume; },
      py::arg("video"), py::arg("model"), py::arg("layers") = std::vector<int>{});

  // tracking
  py::enum_<DescriptorMode>(m, "DescriptorMode")
      .value("query_query", DescriptorMode::query_query)
      .value("key_key", DescriptorMode::key_key)
      .value("query_key", DescriptorMode::query_key)
      .value("key_query", DescriptorMode::key_query)
      .value("hidden_hidden", DescriptorMode::hidden_hidden);
  py::enum_<UpsampleMode>(m, "UpsampleMode").value("feature", UpsampleMode::feature).value("map", UpsampleMode::map);
  py::class_<TrackerToggles>(m, "TrackerToggles")
      .def(py::init<>())
      .def_readwrite("refinement", &TrackerToggles::refinement)
      .def_readwrite("frequency_filter", &TrackerToggles::frequency_filter)
      .def_readwrite("soft_argmax", &TrackerToggles::soft_argmax)
      .def_readwrite("fb_check", &TrackerToggles::fb_check)
      .def_readwrite("upsampling", &TrackerToggles::upsampling);
  py::class_<TrackerConfig>(m, "TrackerConfig")
      .def(py::init<>())
      .def_readwrite("layer", &TrackerConfig::layer)
      .def_readwrite("head", &TrackerConfig::head)
      .def_readwrite("aggregate_layer", &TrackerConfig::aggregate_layer)
      .def_readwrite("descriptor", &TrackerConfig::descriptor)
      .def_readwrite("keep_low", &TrackerConfig::keep_low)
      .def_readwrite("pooled_filter", &TrackerConfig::pooled_filter)
      .def_readwrite("temperature", &TrackerConfig::temperature)
      .def_readwrite("window_radius", &TrackerConfig::window_radius)
      .def_readwrite("upsample_factor", &TrackerConfig::upsample_factor)
      .def_readwrite("upsample_mode", &TrackerConfig::upsample_mode)
      .def_readwrite("refine_alpha", &TrackerConfig::refine_alpha)
      .def_readwrite("fb_threshold", &TrackerConfig::fb_threshold)
      .def_readwrite("toggles", &TrackerConfig::toggles);
  m.def("track_video", [](const FeatureVolume& fv, const TrackerConfig& cfg, std::vector<QueryPoint> queries) {
    py::gil_scoped_release release;
    return track_video(fv, cfg, queries);
  });
  m.def(
      "track_long",
      [](const FeatureVolume& fv, const TrackerConfig& cfg, std::vector<QueryPoint> queries, int chunk_len,
         bool handoff_descriptor) {
        py::gil_scoped_release release;
        return track_long(InMemoryProvider(fv, chunk_len), cfg, queries, {.handoff_descriptor = handoff_descriptor});
      },
      py::arg("volume"), py::arg("config"), py::arg("queries"), py::arg("chunk_len") = kDefaultChunkLen,
      py::arg("handoff_descriptor") = true);
  m.def("split_plan", [](int frames, int chunk_len) {
    std::vector<std::pair<int, int>> out;
    for (const auto& s : split_plan(frames, chunk_len).spans) out.emplace_back(s.begin, s.end);
    return out;
  });

  // metrics and head analysis
  py::class_<MetricReport>(m, "MetricReport")
      .def_readonly("aj", &MetricReport::aj)
      .def_readonly("delta_avg", &MetricReport::delta_avg)
      .def_readonly("oa", &MetricReport::oa)
      .def_readonly("within", &MetricReport::within)
      .def_readonly("jaccard", &MetricReport::jaccard);
  m.def(
      "evaluate",
      [](const std::vector<Trajectory>& pred, const GroundTruthSet& gt, bool native_pixels) {
        return evaluate(pred, gt, {.native_pixels = native_pixels});
      },
      py::arg("predictions"), py::arg("gt"), py::arg("native_pixels") = false);
  py::class_<HeadScore>(m, "HeadScore")
      .def_readonly("layer", &HeadScore::layer)
      .def_readonly("head", &HeadScore::head)
      .def_readonly("delta_avg", &HeadScore::delta_avg)
      .def_readonly("aj", &HeadScore::aj)
      .def_readonly("oa", &HeadScore::oa)
      .def_readonly("error", &HeadScore::error);
  m.def(
      "score_heads",
      [](const std::vector<FeatureVolume>& volumes, const std::vector<GroundTruthSet>& gts, const TrackerConfig& base) {
        if (volumes.size() != gts.size()) throw DomainError("score_heads: one ground truth per volume");
        std::vector<EvalCase> cases;
        for (std::size_t i = 0; i < volumes.size(); ++i) cases.push_back({&volumes[i], &gts[i]});
        py::gil_scoped_release release;
        return score_heads(cases, base);
      },
      py::arg("volumes"), py::arg("gts"), py::arg("config") = TrackerConfig{});
  m.def("select_head", [](const std::vector<HeadScore>& s) { return select_head(s); });

  // files
  m.def("read_htf1", &read_htf1);
  m.def("write_htf1", &write_htf1);
  m.def("read_hvid", [](const std::filesystem::path& p) { return video_array(read_hvid(p)); });
  m.def("write_hvid", [](const std::filesystem::path& p, const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& v) {
    write_hvid(p, to_video(v));
  });
  m.def("read_ground_truth", py::overload_cast<const std::filesystem::path&>(&read_ground_truth));
  m.def("write_ground_truth", py::overload_cast<const std::filesystem::path&, const GroundTruthSet&>(&write_ground_truth));
}
