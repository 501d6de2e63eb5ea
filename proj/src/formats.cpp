#include "headtrack/formats.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>

#include <json.hpp>

#include "headtrack/errors.hpp"

namespace headtrack {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

using json = nlohmann::json;
constexpr std::uint32_t kVersion = 1;
constexpr DescriptorKind kKinds[] = {DescriptorKind::query, DescriptorKind::key, DescriptorKind::hidden};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  std::vector<std::uint8_t>& data() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::size_t n, const char* what) const {
    if (pos_ + n > b_.size()) {
      throw ParseError(ParseErrorKind::truncated_payload, std::string(what) + ": expected " +
                                                              std::to_string(pos_ + n) + " bytes, got " +
                                                              std::to_string(b_.size()));
    }
  }
  std::uint32_t u32() {
    need(4, "header");
    std::uint32_t v;
    std::memcpy(&v, b_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1, "header");
    return b_[pos_++];
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void check_magic(Reader& r, const char* magic) {
  r.need(4, "magic");
  const auto m = r.take(4);
  if (std::memcmp(m.data(), magic, 4) != 0) throw ParseError(ParseErrorKind::bad_magic, std::string("expected ") + magic);
}

void check_sizes(std::uint64_t expected_total, std::size_t actual) {
  if (actual < expected_total) {
    throw ParseError(ParseErrorKind::truncated_payload, "expected " + std::to_string(expected_total) +
                                                            " bytes, got " + std::to_string(actual));
  }
  if (actual > expected_total) {
    throw ParseError(ParseErrorKind::trailing_bytes, "expected " + std::to_string(expected_total) + " bytes, got " +
                                                         std::to_string(actual));
  }
}

int to_int(std::uint32_t v, const char* field) {
  if (v > static_cast<std::uint32_t>(std::numeric_limits<int>::max())) {
    throw ParseError(ParseErrorKind::bad_dimensions, std::string(field) + " too large");
  }
  return static_cast<int>(v);
}

// Shortest decimal that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt_fb(double v) { return std::isfinite(v) ? fmt(v) : "null"; }

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(path, mode);
  if (!f) throw ParseError(ParseErrorKind::io, "cannot open " + path.string() + " for writing");
  return f;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream f(path, mode);
  if (!f) throw ParseError(ParseErrorKind::io, "cannot open " + path.string());
  return f;
}

template <typename T>
T field(const json& j, const char* name, const std::string& where) {
  if (!j.is_object() || !j.contains(name)) throw ParseError(ParseErrorKind::schema, where + ": missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ParseError(ParseErrorKind::schema, where + ": field '" + name + "' has the wrong type");
  }
}

double number(const json& j, const char* name, const std::string& where) {
  const auto& v = j.contains(name) ? j.at(name) : json();
  if (!v.is_number()) throw ParseError(ParseErrorKind::schema, where + ": field '" + name + "' must be a number");
  return v.get<double>();
}

json parse_json(std::string_view text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(ParseErrorKind::schema, where + ": " + e.what());
  }
}

}  // namespace

std::uint64_t Htf1Header::payload_bytes() const {
  const std::uint64_t per_kind = static_cast<std::uint64_t>(dims.layers) * dims.heads * dims.frames * dims.grid_h *
                                 dims.grid_w * dims.head_dim * sizeof(float);
  return per_kind * std::popcount(kinds & 7u);
}

std::vector<std::uint8_t> encode_htf1(const FeatureVolume& fv) {
  const auto report = validate_feature_volume(fv);
  if (!report.ok) throw DomainError("encode_htf1: " + report.message);
  const auto& d = fv.dims();
  const auto& r = fv.rope();
  Writer w;
  w.bytes("HTF1", 4);
  for (int v : {static_cast<int>(kVersion), d.layers, d.heads, d.frames, d.grid_h, d.grid_w, d.head_dim, r.d_t, r.d_h,
                r.d_w, d.patch_size, d.video_h, d.video_w}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.u32(fv.kinds_mask());
  for (auto kind : kKinds) {
    if (!fv.has(kind)) continue;
    const auto data = fv.data(kind);
    w.bytes(data.data(), data.size_bytes());
  }
  return std::move(w.data());
}

Htf1Header decode_htf1_header(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  check_magic(r, "HTF1");
  const auto version = r.u32();
  if (version != kVersion) throw ParseError(ParseErrorKind::bad_version, "HTF1 version " + std::to_string(version));
  Htf1Header h;
  h.dims.layers = to_int(r.u32(), "layers");
  h.dims.heads = to_int(r.u32(), "heads");
  h.dims.frames = to_int(r.u32(), "F");
  h.dims.grid_h = to_int(r.u32(), "H");
  h.dims.grid_w = to_int(r.u32(), "W");
  h.dims.head_dim = to_int(r.u32(), "D");
  h.rope.d_t = to_int(r.u32(), "d_t");
  h.rope.d_h = to_int(r.u32(), "d_h");
  h.rope.d_w = to_int(r.u32(), "d_w");
  h.dims.patch_size = to_int(r.u32(), "patch_size");
  h.dims.video_h = to_int(r.u32(), "video_h");
  h.dims.video_w = to_int(r.u32(), "video_w");
  h.kinds = r.u32();
  if (h.kinds == 0 || (h.kinds & ~7u) != 0) {
    throw ParseError(ParseErrorKind::bad_dimensions, "kinds bitmask " + std::to_string(h.kinds));
  }
  const auto& d = h.dims;
  if (d.layers < 1 || d.heads < 1 || d.frames < 1 || d.grid_h < 1 || d.grid_w < 1 || d.head_dim < 1 ||
      d.patch_size < 1 || d.video_h < 1 || d.video_w < 1) {
    throw ParseError(ParseErrorKind::bad_dimensions, "dimension counts must be >= 1");
  }
  if (h.rope.dim() != d.head_dim) {
    throw ParseError(ParseErrorKind::bad_dimensions, "d_t + d_h + d_w = " + std::to_string(h.rope.dim()) +
                                                         " != D = " + std::to_string(d.head_dim));
  }
  return h;
}

FeatureVolume decode_htf1(std::span<const std::uint8_t> bytes) {
  const Htf1Header h = decode_htf1_header(bytes);
  check_sizes(kHtf1HeaderBytes + h.payload_bytes(), bytes.size());
  FeatureVolume fv(h.dims, h.rope);
  std::size_t pos = kHtf1HeaderBytes;
  const std::size_t n = fv.expected_size(DescriptorKind::key);
  for (auto kind : kKinds) {
    if (!(h.kinds & (1u << static_cast<int>(kind)))) continue;
    std::vector<float> values(n);
    std::memcpy(values.data(), bytes.data() + pos, n * sizeof(float));
    pos += n * sizeof(float);
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(values[i])) {
        throw ParseError(ParseErrorKind::non_finite,
                         std::string(to_string(kind)) + " value at flat index " + std::to_string(i));
      }
    }
    fv.set(kind, std::move(values));
  }
  const auto report = validate_feature_volume(fv);
  if (!report.ok) throw ParseError(ParseErrorKind::bad_dimensions, report.message);
  return fv;
}

void write_htf1(const std::filesystem::path& path, const FeatureVolume& fv) { write_file_bytes(path, encode_htf1(fv)); }

FeatureVolume read_htf1(const std::filesystem::path& path) { return decode_htf1(read_file_bytes(path)); }

Htf1Header read_htf1_header(const std::filesystem::path& path) {
  auto f = open_in(path, std::ios::binary);
  std::vector<std::uint8_t> head(kHtf1HeaderBytes);
  f.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(f.gcount()));
  const auto h = decode_htf1_header(head);
  check_sizes(kHtf1HeaderBytes + h.payload_bytes(), std::filesystem::file_size(path));
  return h;
}

std::vector<std::uint8_t> encode_hvid(const Video& video) {
  if (video.frames < 1 || video.height < 1 || video.width < 1 ||
      video.rgb.size() != static_cast<std::size_t>(video.frames) * video.height * video.width * 3) {
    throw DomainError("encode_hvid: video dimensions do not match its pixel buffer");
  }
  Writer w;
  w.bytes("HVID", 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(video.frames));
  w.u32(static_cast<std::uint32_t>(video.height));
  w.u32(static_cast<std::uint32_t>(video.width));
  w.u8(3);
  w.bytes(video.rgb.data(), video.rgb.size());
  return std::move(w.data());
}

Video decode_hvid(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  check_magic(r, "HVID");
  const auto version = r.u32();
  if (version != kVersion) throw ParseError(ParseErrorKind::bad_version, "HVID version " + std::to_string(version));
  const int f = to_int(r.u32(), "F");
  const int h = to_int(r.u32(), "H");
  const int w = to_int(r.u32(), "W");
  const auto channels = r.u8();
  if (channels != 3) throw ParseError(ParseErrorKind::bad_dimensions, "channels " + std::to_string(channels));
  if (f < 1 || h < 1 || w < 1) throw ParseError(ParseErrorKind::bad_dimensions, "F, H and W must be >= 1");
  check_sizes(kHvidHeaderBytes + static_cast<std::uint64_t>(f) * h * w * 3, bytes.size());
  Video v(f, h, w);
  std::memcpy(v.rgb.data(), bytes.data() + kHvidHeaderBytes, v.rgb.size());
  return v;
}

void write_hvid(const std::filesystem::path& path, const Video& video) { write_file_bytes(path, encode_hvid(video)); }

Video read_hvid(const std::filesystem::path& path) { return decode_hvid(read_file_bytes(path)); }

void write_trajectories(std::ostream& out, const TrajectoryFile& file) {
  out << "{\"type\":\"header\",\"video_h\":" << file.video_h << ",\"video_w\":" << file.video_w
      << ",\"frames\":" << file.frames << "}\n";
  for (const auto& t : file.trajectories) {
    out << "{\"id\":" << t.query.id << ",\"query\":{\"t\":" << t.query.t0 << ",\"x\":" << fmt(t.query.x)
        << ",\"y\":" << fmt(t.query.y) << "},\"warnings\":" << t.warnings << ",\"error\":" << json(t.error).dump()
        << ",\"points\":[";
    for (std::size_t i = 0; i < t.points.size(); ++i) {
      const auto& p = t.points[i];
      if (i) out << ',';
      out << "{\"t\":" << p.t << ",\"x\":" << fmt(p.x) << ",\"y\":" << fmt(p.y)
          << ",\"visible\":" << (p.visible ? "true" : "false") << ",\"fb_deviation\":" << fmt_fb(p.fb_deviation) << '}';
    }
    out << "]}\n";
  }
}

TrajectoryFile read_trajectories(std::istream& in) {
  TrajectoryFile file;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "trajectories line " + std::to_string(line_no);
    const json j = parse_json(line, where);
    if (!have_header) {
      if (field<std::string>(j, "type", where) != "header") throw ParseError(ParseErrorKind::schema, where + ": header record expected first");
      file.video_h = field<int>(j, "video_h", where);
      file.video_w = field<int>(j, "video_w", where);
      file.frames = field<int>(j, "frames", where);
      have_header = true;
      continue;
    }
    Trajectory t;
    t.query.id = field<int>(j, "id", where);
    const json q = field<json>(j, "query", where);
    t.query.t0 = field<int>(q, "t", where + " query");
    t.query.x = number(q, "x", where + " query");
    t.query.y = number(q, "y", where + " query");
    if (j.contains("warnings")) t.warnings = field<int>(j, "warnings", where);
    if (j.contains("error")) t.error = field<std::string>(j, "error", where);
    const json pts = field<json>(j, "points", where);
    if (!pts.is_array()) throw ParseError(ParseErrorKind::schema, where + ": field 'points' must be an array");
    for (const auto& pj : pts) {
      TrackPoint p;
      p.t = field<int>(pj, "t", where + " point");
      p.x = number(pj, "x", where + " point");
      p.y = number(pj, "y", where + " point");
      p.visible = field<bool>(pj, "visible", where + " point");
      if (!pj.contains("fb_deviation")) throw ParseError(ParseErrorKind::schema, where + " point: missing field 'fb_deviation'");
      const auto& fb = pj.at("fb_deviation");
      if (fb.is_null()) {
        p.fb_deviation = std::numeric_limits<double>::infinity();
      } else if (fb.is_number()) {
        p.fb_deviation = fb.get<double>();
      } else {
        throw ParseError(ParseErrorKind::schema, where + " point: field 'fb_deviation' must be a number or null");
      }
      t.points.push_back(p);
    }
    file.trajectories.push_back(std::move(t));
  }
  if (!have_header) throw ParseError(ParseErrorKind::schema, "trajectories: missing header record");
  return file;
}

void write_trajectories(const std::filesystem::path& path, const TrajectoryFile& file) {
  auto f = open_out(path);
  write_trajectories(f, file);
}

TrajectoryFile read_trajectories(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_trajectories(f);
}

void write_ground_truth(std::ostream& out, const GroundTruthSet& gt) {
  out << "{\"video_h\":" << gt.video_h << ",\"video_w\":" << gt.video_w << ",\"frames\":" << gt.frames
      << ",\"tracks\":[\n";
  for (std::size_t i = 0; i < gt.tracks.size(); ++i) {
    const auto& t = gt.tracks[i];
    out << "{\"id\":" << t.query.id << ",\"query\":{\"t\":" << t.query.t0 << ",\"x\":" << fmt(t.query.x)
        << ",\"y\":" << fmt(t.query.y) << "},\"x\":[";
    for (std::size_t k = 0; k < t.points.size(); ++k) out << (k ? "," : "") << fmt(t.points[k].x);
    out << "],\"y\":[";
    for (std::size_t k = 0; k < t.points.size(); ++k) out << (k ? "," : "") << fmt(t.points[k].y);
    out << "],\"visible\":[";
    for (std::size_t k = 0; k < t.points.size(); ++k) out << (k ? "," : "") << (t.points[k].visible ? "true" : "false");
    out << "]}" << (i + 1 < gt.tracks.size() ? ",\n" : "\n");
  }
  out << "]}\n";
}

GroundTruthSet read_ground_truth(std::istream& in) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const json j = parse_json(text, "ground truth");
  GroundTruthSet gt;
  gt.video_h = field<int>(j, "video_h", "ground truth");
  gt.video_w = field<int>(j, "video_w", "ground truth");
  gt.frames = field<int>(j, "frames", "ground truth");
  const json tracks = field<json>(j, "tracks", "ground truth");
  if (!tracks.is_array()) throw ParseError(ParseErrorKind::schema, "ground truth: field 'tracks' must be an array");
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const std::string where = "ground truth track " + std::to_string(i);
    const auto& tj = tracks[i];
    GroundTruthTrack t;
    t.query.id = field<int>(tj, "id", where);
    const json q = field<json>(tj, "query", where);
    t.query.t0 = field<int>(q, "t", where + " query");
    t.query.x = number(q, "x", where + " query");
    t.query.y = number(q, "y", where + " query");
    const auto xs = field<std::vector<double>>(tj, "x", where);
    const auto ys = field<std::vector<double>>(tj, "y", where);
    const auto vis = field<std::vector<bool>>(tj, "visible", where);
    if (xs.size() != static_cast<std::size_t>(gt.frames) || ys.size() != xs.size() || vis.size() != xs.size()) {
      throw ParseError(ParseErrorKind::schema, where + ": x, y and visible must each hold 'frames' entries");
    }
    for (std::size_t k = 0; k < xs.size(); ++k) t.points.push_back({xs[k], ys[k], vis[k]});
    gt.tracks.push_back(std::move(t));
  }
  return gt;
}

void write_ground_truth(const std::filesystem::path& path, const GroundTruthSet& gt) {
  auto f = open_out(path);
  write_ground_truth(f, gt);
}

GroundTruthSet read_ground_truth(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_ground_truth(f);
}

void write_queries(std::ostream& out, std::span<const QueryPoint> queries) {
  out << "[";
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    out << (i ? ",\n " : "") << "{\"id\":" << q.id << ",\"t\":" << q.t0 << ",\"x\":" << fmt(q.x) << ",\"y\":" << fmt(q.y)
        << '}';
  }
  out << "]\n";
}

std::vector<QueryPoint> read_queries(std::istream& in) {
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const json j = parse_json(text, "queries");
  if (!j.is_array()) throw ParseError(ParseErrorKind::schema, "queries: document must be an array");
  std::vector<QueryPoint> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = "query " + std::to_string(i);
    out.push_back({field<int>(j[i], "id", where), field<int>(j[i], "t", where), number(j[i], "x", where),
                   number(j[i], "y", where)});
  }
  return out;
}

std::vector<QueryPoint> read_queries(const std::filesystem::path& path) {
  auto f = open_in(path);
  return read_queries(f);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  auto f = open_in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto f = open_out(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ParseError(ParseErrorKind::io, "write failed for " + path.string());
}

}  // namespace headtrack
