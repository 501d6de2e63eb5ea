// headtrack: command-line front end. Every subcommand prints its resolved
// configuration as one JSON object on stderr before doing any work.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "headtrack/chunks.hpp"
#include "headtrack/errors.hpp"
#include "headtrack/formats.hpp"
#include "headtrack/headlab.hpp"
#include "headtrack/metrics.hpp"
#include "headtrack/rope.hpp"
#include "headtrack/toyvdit.hpp"
#include "headtrack/tracker.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace headtrack;

namespace {

// ---------------------------------------------------------------------------
// Option groups shared by several subcommands

struct CalibrationFlags {
  CalibrationSpec spec;
  std::string motion = "translate";
  std::string occluder = "none";
  std::vector<double> velocity;

  void add(CLI::App& app) {
    app.add_option("--frames", spec.frames, "Frames per video")->check(CLI::PositiveNumber);
    app.add_option("--height", spec.video_h, "Frame height in pixels")->check(CLI::PositiveNumber);
    app.add_option("--width", spec.video_w, "Frame width in pixels")->check(CLI::PositiveNumber);
    app.add_option("--sprites", spec.sprites, "Textured sprites per video")->check(CLI::NonNegativeNumber);
    app.add_option("--sprite-size", spec.sprite_size, "Sprite side in pixels");
    app.add_option("--motion", motion, "translate | circular | mixed");
    app.add_option("--max-speed", spec.max_speed, "Sprite speed bound, pixels per frame");
    app.add_option("--velocity", velocity, "Fixed sprite velocity VX VY (translate)")->expected(2);
    app.add_option("--occluder", occluder, "none | moving-bar");
    app.add_option("--bar-width", spec.bar_width, "Occluding bar width in pixels");
    app.add_option("--bar-speed", spec.bar_speed, "Occluding bar speed, pixels per frame");
    app.add_option("--wavelength", spec.texture_wavelength, "Texture wavelength in pixels");
    app.add_option("--queries", spec.queries_per_video, "Query points per video");
    app.add_option("--sprite-query-fraction", spec.sprite_query_fraction, "Share of queries placed on sprites");
    app.add_option("--query-frame", spec.query_frame, "Frame the queries are placed in");
    app.add_option("--query-grid", spec.query_grid, "Snap queries to this pixel grid's centres; 0 disables");
    app.add_option("--query-margin", spec.query_margin, "Keep sprite queries this far inside the sprite");
  }

  CalibrationSpec resolve(std::uint64_t seed) {
    const auto m = parse_motion(motion);
    if (!m) throw CLI::ValidationError("--motion", "unknown motion '" + motion + "'");
    const auto o = parse_occluder(occluder);
    if (!o) throw CLI::ValidationError("--occluder", "unknown occluder '" + occluder + "'");
    spec.motion = *m;
    spec.occluder = *o;
    if (!velocity.empty()) spec.velocity = Velocity{velocity[0], velocity[1]};
    spec.texture_seed = seed;
    return spec;
  }
};

json to_json(const CalibrationSpec& s) {
  json j{{"n_videos", s.n_videos},
         {"frames", s.frames},
         {"video_h", s.video_h},
         {"video_w", s.video_w},
         {"sprites", s.sprites},
         {"sprite_size", s.sprite_size},
         {"motion", to_string(s.motion)},
         {"max_speed", s.max_speed},
         {"velocity", nullptr},
         {"occluder", to_string(s.occluder)},
         {"bar_width", s.bar_width},
         {"bar_speed", s.bar_speed},
         {"texture_wavelength", s.texture_wavelength},
         {"texture_seed", s.texture_seed},
         {"queries_per_video", s.queries_per_video},
         {"sprite_query_fraction", s.sprite_query_fraction},
         {"query_frame", s.query_frame},
         {"query_grid", s.query_grid},
         {"query_margin", s.query_margin}};
  if (s.velocity) j["velocity"] = {s.velocity->x, s.velocity->y};
  return j;
}

struct ModelFlags {
  ToyModelSpec spec;
  std::vector<int> planted;
  std::vector<int> rope;

  void add(CLI::App& app) {
    app.add_option("--model-layers", spec.layers, "Transformer blocks")->check(CLI::PositiveNumber);
    app.add_option("--model-heads", spec.heads, "Heads per block")->check(CLI::PositiveNumber);
    app.add_option("--head-dim", spec.head_dim, "Channels per head");
    app.add_option("--patch", spec.patch_size, "Patch size in pixels");
    app.add_option("--rope", rope, "Per-head RoPE split D_T D_H D_W")->expected(3);
    app.add_option("--noise", spec.noise_level, "Noise sigma at the final diffusion step");
    app.add_option("--planted", planted, "Plant a correspondence head at LAYER HEAD")->expected(2);
    app.add_option("--planted-keep-low", spec.planted_keep_low, "Low-frequency share the planted head projects onto");
    app.add_option("--planted-gain", spec.planted_gain, "Scale of the planted projection");
  }

  ToyModelSpec resolve(std::uint64_t seed) {
    if (!rope.empty()) spec.rope = RopeLayout{rope[0], rope[1], rope[2], 10000.0};
    if (!planted.empty()) spec.planted = PlantedHead{planted[0], planted[1]};
    spec.seed = seed;
    validate(spec);
    return spec;
  }
};

json to_json(const ToyModelSpec& s) {
  json j{{"layers", s.layers},
         {"heads", s.heads},
         {"head_dim", s.head_dim},
         {"patch_size", s.patch_size},
         {"rope", {s.rope.d_t, s.rope.d_h, s.rope.d_w}},
         {"rope_base", s.rope.base},
         {"mlp_ratio", s.mlp_ratio},
         {"noise_level", s.noise_level},
         {"seed", s.seed},
         {"planted", nullptr},
         {"planted_keep_low", s.planted_keep_low},
         {"planted_gain", s.planted_gain}};
  if (s.planted) j["planted"] = {s.planted->layer, s.planted->head};
  return j;
}

struct TrackerFlags {
  TrackerConfig cfg;
  std::string descriptor = to_string(DescriptorMode::key_key);
  std::string similarity = "cosine";
  std::string band_order = "low-first";
  std::string backward = "direct";
  std::string upsample_mode = to_string(UpsampleMode::feature);
  std::vector<double> keep_low;
  bool no_refinement = false, no_filter = false, no_soft = false, no_fb = false, no_upsampling = false;

  void add(CLI::App& app) {
    app.add_option("--layer", cfg.layer, "Volume layer to track with");
    app.add_option("--head", cfg.head, "Head to track with");
    app.add_flag("--aggregate-layer", cfg.aggregate_layer, "Concatenate every head of the layer");
    app.add_option("--descriptor", descriptor,
                   "query-query | key-key | query-key | key-query | hidden-hidden");
    app.add_option("--similarity", similarity, "cosine | dot");
    app.add_option("--keep-low", keep_low, "Low-frequency keep fraction: one value, or T H W")->expected(1, 3);
    app.add_flag("--pooled-filter", cfg.pooled_filter, "Rank pairs of all axes together");
    app.add_option("--band-order", band_order, "low-first | high-first");
    app.add_option("--temperature", cfg.temperature, "Soft-argmax temperature");
    app.add_option("--window", cfg.window_radius, "Soft-argmax window radius in cells; 0 = whole map");
    app.add_option("--upsample", cfg.upsample_factor, "Upsampling factor U");
    app.add_option("--upsample-mode", upsample_mode, "feature | map");
    app.add_option("--refine-alpha", cfg.refine_alpha, "Query refinement blend weight");
    app.add_option("--fb-threshold", cfg.fb_threshold, "Forward-backward threshold, 256-normalised pixels");
    app.add_option("--backward", backward, "direct | hop-by-hop");
    app.add_flag("--no-refinement", no_refinement, "Disable query refinement");
    app.add_flag("--no-frequency-filter", no_filter, "Disable the RoPE band filter");
    app.add_flag("--no-soft-argmax", no_soft, "Use the hard argmax");
    app.add_flag("--no-fb-check", no_fb, "Disable forward-backward visibility");
    app.add_flag("--no-upsampling", no_upsampling, "Localise on the cell grid");
  }

  TrackerConfig resolve() {
    const auto d = parse_descriptor_mode(descriptor);
    if (!d) throw CLI::ValidationError("--descriptor", "unknown mode '" + descriptor + "'");
    cfg.descriptor = *d;
    if (similarity == "cosine") {
      cfg.similarity = Similarity::cosine;
    } else if (similarity == "dot") {
      cfg.similarity = Similarity::dot;
    } else {
      throw CLI::ValidationError("--similarity", "expected cosine or dot");
    }
    if (band_order == "low-first") {
      cfg.band_order = BandOrder::low_first;
    } else if (band_order == "high-first") {
      cfg.band_order = BandOrder::high_first;
    } else {
      throw CLI::ValidationError("--band-order", "expected low-first or high-first");
    }
    if (backward == "direct") {
      cfg.backward = BackwardMode::direct;
    } else if (backward == "hop-by-hop") {
      cfg.backward = BackwardMode::hop_by_hop;
    } else {
      throw CLI::ValidationError("--backward", "expected direct or hop-by-hop");
    }
    const auto u = parse_upsample_mode(upsample_mode);
    if (!u) throw CLI::ValidationError("--upsample-mode", "expected feature or map");
    cfg.upsample_mode = *u;
    if (keep_low.size() == 1) cfg.keep_low = KeepFractions::uniform(keep_low[0]);
    if (keep_low.size() == 2) throw CLI::ValidationError("--keep-low", "give one value or three");
    if (keep_low.size() == 3) cfg.keep_low = {keep_low[0], keep_low[1], keep_low[2]};
    cfg.toggles.refinement = !no_refinement;
    cfg.toggles.frequency_filter = !no_filter;
    cfg.toggles.soft_argmax = !no_soft;
    cfg.toggles.fb_check = !no_fb;
    cfg.toggles.upsampling = !no_upsampling;
    return cfg;
  }
};

json to_json(const TrackerConfig& c) {
  return {{"layer", c.layer},
          {"head", c.head},
          {"aggregate_layer", c.aggregate_layer},
          {"descriptor", to_string(c.descriptor)},
          {"similarity", c.similarity == Similarity::cosine ? "cosine" : "dot"},
          {"keep_low", {c.keep_low.t, c.keep_low.h, c.keep_low.w}},
          {"pooled_filter", c.pooled_filter},
          {"band_order", c.band_order == BandOrder::low_first ? "low-first" : "high-first"},
          {"temperature", c.temperature},
          {"window_radius", c.window_radius},
          {"upsample_factor", c.upsample_factor},
          {"upsample_mode", to_string(c.upsample_mode)},
          {"refine_alpha", c.refine_alpha},
          {"fb_threshold", c.fb_threshold},
          {"backward", c.backward == BackwardMode::direct ? "direct" : "hop-by-hop"},
          {"toggles",
           {{"refinement", c.toggles.refinement},
            {"frequency_filter", c.toggles.frequency_filter},
            {"soft_argmax", c.toggles.soft_argmax},
            {"fb_check", c.toggles.fb_check},
            {"upsampling", c.toggles.upsampling}}}};
}

json to_json(const HeadScore& s) {
  json j{{"layer", s.layer}, {"head", s.head}, {"delta_avg", s.delta_avg}, {"aj", s.aj}, {"oa", s.oa}};
  if (!s.error.empty()) j["error"] = s.error;
  return j;
}

json to_json(const MetricReport& r) {
  return {{"aj", r.aj},
          {"delta_avg", r.delta_avg},
          {"oa", r.oa},
          {"thresholds", kThresholds},
          {"within", r.within},
          {"jaccard", r.jaccard},
          {"points", r.points},
          {"visible_gt", r.visible_gt},
          {"predicted_visible", r.predicted_visible}};
}

void print_config(const std::string& command, json config) {
  json out{{"command", command}};
  out.update(config);
  std::cerr << out.dump() << "\n";
}

// Feature files paired with ground-truth files, kept alive for EvalCase.
struct Bench {
  std::vector<FeatureVolume> volumes;
  std::vector<GroundTruthSet> gts;

  Bench(const std::vector<std::string>& features, const std::vector<std::string>& gt) {
    if (features.size() != gt.size()) {
      throw CLI::ValidationError("--gt", "give one ground-truth file per feature file");
    }
    for (std::size_t i = 0; i < features.size(); ++i) {
      volumes.push_back(read_htf1(features[i]));
      gts.push_back(read_ground_truth(gt[i]));
    }
  }
  std::vector<EvalCase> cases() const {
    std::vector<EvalCase> out;
    for (std::size_t i = 0; i < volumes.size(); ++i) out.push_back({&volumes[i], &gts[i]});
    return out;
  }
};

std::vector<QueryPoint> load_queries(const std::string& queries, const std::string& gt) {
  if (!queries.empty()) return read_queries(queries);
  if (!gt.empty()) return read_ground_truth(gt).queries();
  throw CLI::ValidationError("--queries", "give --queries or --gt");
}

void write_or_print(const std::string& path, const TrajectoryFile& file) {
  if (path.empty() || path == "-") {
    write_trajectories(std::cout, file);
  } else {
    write_trajectories(fs::path(path), file);
  }
}

// CSV helpers: values are numbers or bare identifiers, never quoted.
template <typename... T>
void csv_row(std::ostream& os, const T&... v) {
  bool first = true;
  ((os << (first ? "" : ",") << v, first = false), ...);
  os << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot point tracking from transformer attention heads"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Render a calibration video with analytic ground truth");
  CalibrationFlags synth_cal;
  std::string synth_video, synth_gt, synth_queries;
  int synth_index = 0;
  synth_cal.add(*synth);
  synth->add_option("--seed", seed, "Texture and layout seed");
  synth->add_option("--index", synth_index, "Which video of the seeded set to render")->check(CLI::NonNegativeNumber);
  synth->add_option("--out-video", synth_video, "HVID output")->required();
  synth->add_option("--out-gt", synth_gt, "Ground-truth JSON output")->required();
  synth->add_option("--out-queries", synth_queries, "Optional queries JSON output");
  synth->callback([&] {
    auto spec = synth_cal.resolve(seed);
    spec.n_videos = synth_index + 1;
    print_config("synth", {{"seed", seed}, {"index", synth_index}, {"calibration", to_json(spec)}});
    const auto sample = generate_calibration(spec).back();
    write_hvid(synth_video, sample.video);
    write_ground_truth(fs::path(synth_gt), sample.gt);
    if (!synth_queries.empty()) {
      std::ofstream q(synth_queries);
      write_queries(q, sample.gt.queries());
    }
    std::printf("%d frames %dx%d, %zu queries\n", sample.video.frames, sample.video.width, sample.video.height,
                sample.gt.tracks.size());
  });

  // extract-toy ------------------------------------------------------------
  auto* extract = app.add_subcommand("extract-toy", "Run the toy video transformer and write HTF1 features");
  ModelFlags extract_model;
  std::string extract_video, extract_out;
  std::vector<int> extract_layers;
  int extract_chunk = 0;
  bool extract_hidden = true;
  extract_model.add(*extract);
  extract->add_option("--seed", seed, "Weight and noise seed");
  extract->add_option("--video", extract_video, "HVID input")->required()->check(CLI::ExistingFile);
  extract->add_option("--out", extract_out, "HTF1 output; with --chunk-len, the chunk file stem")->required();
  extract->add_option("--layers", extract_layers, "Model layers to harvest (default all)");
  extract->add_option("--chunk-len", extract_chunk, "Write STEM.chunkNNN.htf1 per chunk plus STEM.manifest");
  extract->add_flag("!--no-hidden", extract_hidden, "Drop hidden states from the output");
  extract->callback([&] {
    const auto spec = extract_model.resolve(seed);
    print_config("extract-toy", {{"seed", seed},
                                 {"model", to_json(spec)},
                                 {"layers", extract_layers},
                                 {"chunk_len", extract_chunk},
                                 {"hidden", extract_hidden}});
    const auto video = read_hvid(extract_video);
    const auto weights = init_toy_model(spec);
    auto finish = [&](FeatureVolume fv) {
      if (!extract_hidden) fv.erase(DescriptorKind::hidden);
      return fv;
    };
    if (extract_chunk <= 0) {
      write_htf1(extract_out, finish(extract_features(video, weights, extract_layers).volume));
      std::printf("wrote %s\n", extract_out.c_str());
      return;
    }
    const ToyVideoProvider provider(video, weights, extract_layers, extract_chunk);
    const auto plan = provider.plan();
    std::ofstream manifest(extract_out + ".manifest");
    for (std::size_t c = 0; c < plan.spans.size(); ++c) {
      const auto path = chunk_path(extract_out, c);
      write_htf1(path, finish(provider.load(c)));
      manifest << path.filename().string() << "\n";
      std::printf("wrote %s frames [%d, %d)\n", path.string().c_str(), plan.spans[c].begin, plan.spans[c].end);
    }
  });

  // select-head ------------------------------------------------------------
  auto* select = app.add_subcommand("select-head", "Score every head on labelled videos and pick the best");
  TrackerFlags select_tracker;
  std::vector<std::string> select_features, select_gt;
  bool select_layers = false;
  select_tracker.add(*select);
  select->add_option("--seed", seed, "Recorded for reproducibility; scoring is deterministic");
  select->add_option("--features", select_features, "HTF1 files")->required()->check(CLI::ExistingFile);
  select->add_option("--gt", select_gt, "Ground-truth JSON, one per feature file")->required()->check(CLI::ExistingFile);
  select->add_flag("--layer-summary", select_layers, "Also score each layer's head aggregate");
  select->callback([&] {
    const auto cfg = select_tracker.resolve();
    print_config("select-head", {{"seed", seed}, {"features", select_features}, {"gt", select_gt}, {"tracker", to_json(cfg)}});
    const Bench bench(select_features, select_gt);
    const auto cases = bench.cases();
    const auto scores = score_heads(cases, cfg);
    const auto [layer, head] = select_head(scores);
    json report{{"selected", {{"layer", layer}, {"head", head}}}, {"scores", json::array()}};
    for (const auto& s : scores) report["scores"].push_back(to_json(s));
    if (select_layers) {
      report["layers"] = json::array();
      for (const auto& l : summarize_layers(cases, scores, cfg)) {
        report["layers"].push_back({{"layer", l.layer},
                                    {"aggregate", to_json(l.aggregate)},
                                    {"head_min", l.head_min},
                                    {"head_mean", l.head_mean},
                                    {"head_max", l.head_max}});
      }
    }
    std::cout << report.dump(2) << "\n";
  });

  // analyze ----------------------------------------------------------------
  auto* analyze = app.add_subcommand("analyze", "CSV tables: RoPE angles, band norms, frequency sweeps, head taxonomy");
  analyze->require_subcommand(1);

  auto* angles = analyze->add_subcommand("angles", "Rotation angle per pair and offset");
  std::vector<int> angles_rope{8, 12, 12};
  double angles_base = 10000.0;
  int angles_max = 16;
  angles->add_option("--rope", angles_rope, "D_T D_H D_W")->expected(3);
  angles->add_option("--base", angles_base, "RoPE base");
  angles->add_option("--max-offset", angles_max, "Largest position offset");
  angles->add_option("--seed", seed, "Unused; recorded");
  angles->callback([&] {
    const RopeLayout l{angles_rope[0], angles_rope[1], angles_rope[2], angles_base};
    print_config("analyze angles", {{"seed", seed}, {"rope", angles_rope}, {"base", angles_base}, {"max_offset", angles_max}});
    csv_row(std::cout, "axis", "pair", "omega", "offset", "angle");
    for (auto axis : {Axis::t, Axis::h, Axis::w}) {
      const auto w = band_frequencies(l, axis);
      const auto table = angle_table(l, axis, angles_max);
      for (std::size_t p = 0; p < table.size(); ++p) {
        for (std::size_t m = 0; m < table[p].size(); ++m) csv_row(std::cout, to_string(axis), p, w[p], m, table[p][m]);
      }
    }
  });

  auto* bands = analyze->add_subcommand("bands", "Mean band norms per head and axis");
  std::string bands_features, bands_kind = "key";
  int bands_n = 2;
  bands->add_option("--features", bands_features, "HTF1 file")->required()->check(CLI::ExistingFile);
  bands->add_option("--kind", bands_kind, "query | key");
  bands->add_option("--bands", bands_n, "Contiguous bands per axis (must divide each axis's pair count)");
  bands->add_option("--seed", seed, "Unused; recorded");
  bands->callback([&] {
    if (bands_kind != "query" && bands_kind != "key") throw CLI::ValidationError("--kind", "expected query or key");
    const auto kind = bands_kind == "query" ? DescriptorKind::query : DescriptorKind::key;
    print_config("analyze bands", {{"seed", seed}, {"features", bands_features}, {"kind", bands_kind}, {"bands", bands_n}});
    const auto fv = read_htf1(bands_features);
    csv_row(std::cout, "layer", "head", "axis", "band", "norm");
    for (int l = 0; l < fv.dims().layers; ++l) {
      for (int h = 0; h < fv.dims().heads; ++h) {
        for (auto axis : {Axis::t, Axis::h, Axis::w}) {
          const auto norms = band_norms(fv, kind, l, h, axis, bands_n);
          for (std::size_t b = 0; b < norms.size(); ++b) csv_row(std::cout, l, h, to_string(axis), b, norms[b]);
        }
      }
    }
  });

  auto* sweep = analyze->add_subcommand("sweep", "delta_avg against the kept share of RoPE pairs");
  TrackerFlags sweep_tracker;
  std::vector<std::string> sweep_features, sweep_gt;
  std::vector<double> sweep_fractions{0.25, 0.5, 0.75, 1.0};
  sweep_tracker.add(*sweep);
  sweep->add_option("--features", sweep_features, "HTF1 files")->required()->check(CLI::ExistingFile);
  sweep->add_option("--gt", sweep_gt, "Ground-truth JSON, one per feature file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--fractions", sweep_fractions, "Kept fractions");
  sweep->add_option("--seed", seed, "Unused; recorded");
  sweep->callback([&] {
    const auto cfg = sweep_tracker.resolve();
    print_config("analyze sweep",
                 {{"seed", seed}, {"features", sweep_features}, {"gt", sweep_gt}, {"fractions", sweep_fractions}, {"tracker", to_json(cfg)}});
    const Bench bench(sweep_features, sweep_gt);
    const auto cases = bench.cases();
    csv_row(std::cout, "order", "fraction", "delta_avg", "degenerate");
    for (auto order : {BandOrder::low_first, BandOrder::high_first}) {
      for (const auto& p : frequency_sweep(cases, cfg, sweep_fractions, order)) {
        csv_row(std::cout, order == BandOrder::low_first ? "low-first" : "high-first", p.fraction, p.delta_avg,
                p.degenerate ? 1 : 0);
      }
    }
  });

  auto* heads = analyze->add_subcommand("heads", "Attention taxonomy of every toy-model head on a video");
  ModelFlags heads_model;
  std::string heads_video;
  heads_model.add(*heads);
  heads->add_option("--video", heads_video, "HVID input")->required()->check(CLI::ExistingFile);
  heads->add_option("--seed", seed, "Weight and noise seed");
  heads->callback([&] {
    const auto spec = heads_model.resolve(seed);
    print_config("analyze heads", {{"seed", seed}, {"video", heads_video}, {"model", to_json(spec)}});
    const auto video = read_hvid(heads_video);
    const auto bank = extract_features(video, init_toy_model(spec), {}, true);
    const auto& d = bank.volume.dims();
    csv_row(std::cout, "layer", "head", "label", "p_self", "p_corr", "corr_baseline", "entropy");
    for (int l = 0; l < d.layers; ++l) {
      for (int h = 0; h < d.heads; ++h) {
        const auto c = classify_head(attention_map(bank, l, h), d.frames, d.grid_h, d.grid_w);
        csv_row(std::cout, bank.layer_ids[l], h, to_string(c.label), c.diagnostics.p_self, c.diagnostics.p_corr,
                c.diagnostics.corr_baseline, c.diagnostics.entropy);
      }
    }
  });

  // track ------------------------------------------------------------------
  auto* track = app.add_subcommand("track", "Track query points through one feature volume");
  TrackerFlags track_tracker;
  std::string track_features, track_queries, track_gt, track_out;
  track_tracker.add(*track);
  track->add_option("--seed", seed, "Recorded for reproducibility; tracking is deterministic");
  track->add_option("--features", track_features, "HTF1 input")->required()->check(CLI::ExistingFile);
  track->add_option("--queries", track_queries, "Queries JSON")->check(CLI::ExistingFile);
  track->add_option("--gt", track_gt, "Take the queries from a ground-truth file")->check(CLI::ExistingFile);
  track->add_option("--out", track_out, "Trajectory output (JSON lines); default stdout");
  track->callback([&] {
    const auto cfg = track_tracker.resolve();
    print_config("track", {{"seed", seed}, {"features", track_features}, {"tracker", to_json(cfg)}});
    const auto fv = read_htf1(track_features);
    const auto queries = load_queries(track_queries, track_gt);
    const auto& d = fv.dims();
    write_or_print(track_out, {d.video_h, d.video_w, d.frames, track_video(fv, cfg, queries)});
  });

  // track-long -------------------------------------------------------------
  auto* track_long_cmd = app.add_subcommand("track-long", "Track through chunked features with position handoff");
  TrackerFlags long_tracker;
  ModelFlags long_model;
  std::string long_stem, long_manifest, long_video, long_queries, long_gt, long_out;
  int long_chunk = kDefaultChunkLen;
  bool long_resample = false;
  long_tracker.add(*track_long_cmd);
  long_model.add(*track_long_cmd);
  track_long_cmd->add_option("--seed", seed, "Toy model seed (with --video)");
  auto* stem_opt = track_long_cmd->add_option("--stem", long_stem, "Read STEM.chunk000.htf1, STEM.chunk001.htf1, ...");
  auto* manifest_opt = track_long_cmd->add_option("--manifest", long_manifest, "Text file listing chunk files in order")
                           ->check(CLI::ExistingFile);
  auto* video_opt = track_long_cmd->add_option("--video", long_video, "Extract chunks from an HVID with the toy model")
                        ->check(CLI::ExistingFile);
  stem_opt->excludes(manifest_opt)->excludes(video_opt);
  manifest_opt->excludes(video_opt);
  track_long_cmd->add_option("--chunk-len", long_chunk, "Frames per chunk (with --video)");
  track_long_cmd->add_flag("--no-handoff-descriptor", long_resample, "Re-sample the descriptor at each handoff");
  track_long_cmd->add_option("--queries", long_queries, "Queries JSON")->check(CLI::ExistingFile);
  track_long_cmd->add_option("--gt", long_gt, "Take the queries from a ground-truth file")->check(CLI::ExistingFile);
  track_long_cmd->add_option("--out", long_out, "Trajectory output (JSON lines); default stdout");
  track_long_cmd->callback([&] {
    const auto cfg = long_tracker.resolve();
    json config{{"seed", seed}, {"tracker", to_json(cfg)}, {"handoff_descriptor", !long_resample}};
    std::unique_ptr<ChunkProvider> provider;
    Video video;
    ToyWeights weights;
    if (!long_stem.empty()) {
      config["stem"] = long_stem;
      provider = std::make_unique<FileProvider>(FileProvider::from_stem(long_stem));
    } else if (!long_manifest.empty()) {
      config["manifest"] = long_manifest;
      provider = std::make_unique<FileProvider>(FileProvider::from_manifest(long_manifest));
    } else if (!long_video.empty()) {
      const auto spec = long_model.resolve(seed);
      config["video"] = long_video;
      config["chunk_len"] = long_chunk;
      config["model"] = to_json(spec);
      video = read_hvid(long_video);
      weights = init_toy_model(spec);
      provider = std::make_unique<ToyVideoProvider>(video, weights, std::vector<int>{}, long_chunk);
    } else {
      throw CLI::ValidationError("track-long", "give --stem, --manifest or --video");
    }
    print_config("track-long", config);
    const auto queries = load_queries(long_queries, long_gt);
    const auto trajs = track_long(*provider, cfg, queries, {.handoff_descriptor = !long_resample});
    const auto first = provider->load(0).dims();
    write_or_print(long_out, {first.video_h, first.video_w, provider->plan().frames(), trajs});
  });

  // eval -------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "TAP-Vid metrics of trajectories against ground truth");
  std::string eval_pred, eval_gt;
  bool eval_native = false;
  eval->add_option("--seed", seed, "Unused; recorded");
  eval->add_option("--pred", eval_pred, "Trajectory file")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", eval_gt, "Ground-truth JSON")->required()->check(CLI::ExistingFile);
  eval->add_flag("--native-pixels", eval_native, "Measure distances in native pixels instead of 256x256");
  eval->callback([&] {
    print_config("eval", {{"seed", seed}, {"pred", eval_pred}, {"gt", eval_gt}, {"native_pixels", eval_native}});
    const auto pred = read_trajectories(fs::path(eval_pred));
    const auto gt = read_ground_truth(fs::path(eval_gt));
    std::cout << to_json(evaluate(pred.trajectories, gt, {.native_pixels = eval_native})).dump(2) << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
