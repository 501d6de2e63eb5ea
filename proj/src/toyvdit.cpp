#include "headtrack/toyvdit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "headtrack/errors.hpp"
#include "headtrack/philox.hpp"
#include "headtrack/rope.hpp"

namespace headtrack {

namespace {

// Stream ids: every weight tensor draws from its own Philox stream.
enum StreamTag : std::uint64_t {
  kEmbed = 1,
  kWq = 2,
  kWk = 3,
  kWv = 4,
  kWo = 5,
  kMlp1 = 6,
  kMlp2 = 7,
  kPlanted = 8,
};
constexpr std::uint64_t kNoiseStream = 0xF00D'0000'0000'0001ull;

std::uint64_t stream_id(int layer, StreamTag tag, int head = 0) {
  return (static_cast<std::uint64_t>(layer + 1) << 32) | (static_cast<std::uint64_t>(tag) << 16) |
         static_cast<std::uint64_t>(head);
}

Matrix gaussian_matrix(int rows, int cols, std::uint64_t seed, std::uint64_t stream) {
  Matrix m(rows, cols);
  PhiloxStream rng(seed, stream);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (auto& v : m.values) v = static_cast<float>(rng.normal() * scale);
  return m;
}

// Low-order separable cosine patch functions (per colour channel), ordered by
// total frequency, in patchify's (y, x, c) layout.
std::vector<std::vector<double>> patch_basis(int patch, std::size_t count) {
  std::vector<std::pair<int, int>> orders;
  for (int total = 0; total <= 2 * (patch - 1); ++total) {
    for (int ky = 0; ky <= total; ++ky) {
      if (ky < patch && total - ky < patch) orders.emplace_back(ky, total - ky);
    }
  }
  const double pi = 3.141592653589793;
  std::vector<std::vector<double>> out;
  for (const auto& [ky, kx] : orders) {
    for (int c = 0; c < 3 && out.size() < count; ++c) {
      std::vector<double> b(static_cast<std::size_t>(3 * patch * patch), 0.0);
      for (int y = 0; y < patch; ++y) {
        for (int x = 0; x < patch; ++x) {
          b[(static_cast<std::size_t>(y) * patch + x) * 3 + c] =
              std::cos(pi * ky * (y + 0.5) / patch) * std::cos(pi * kx * (x + 0.5) / patch);
        }
      }
      out.push_back(std::move(b));
    }
    if (out.size() >= count) break;
  }
  return out;
}

// Orthonormal width-space vectors spanning the embedding's image of the
// lowest-order patch functions: the appearance subspace the planted head reads.
std::vector<std::vector<double>> appearance_basis(const ToyModelSpec& spec, const Matrix& embed, std::size_t count) {
  const int width = embed.rows;
  const auto patches = patch_basis(spec.patch_size, count);
  PhiloxStream rng(spec.seed, stream_id(spec.planted->layer, kPlanted, spec.planted->head));
  std::vector<std::vector<double>> basis;
  for (std::size_t r = 0; r < count; ++r) {
    std::vector<double> v(static_cast<std::size_t>(width), 0.0);
    if (r < patches.size()) {
      for (int i = 0; i < width; ++i) {
        for (int j = 0; j < embed.cols; ++j) v[i] += static_cast<double>(embed(i, j)) * patches[r][j];
      }
    }
    // Jitter breaks exact degeneracy when the basis outnumbers the patch functions.
    for (auto& x : v) x += 1e-3 * rng.normal();
    // Modified Gram-Schmidt against the rows already accepted.
    for (const auto& b : basis) {
      double dot = 0.0;
      for (int i = 0; i < width; ++i) dot += v[i] * b[i];
      for (int i = 0; i < width; ++i) v[i] -= dot * b[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  return basis;
}

std::vector<int> kept_channels(const ToyModelSpec& spec) {
  const auto mask = lowpass_mask(spec.rope, KeepFractions::uniform(spec.planted_keep_low));
  std::vector<int> rows;
  for (int c = 0; c < spec.head_dim; ++c) {
    if (mask.keep[c]) rows.push_back(c);
  }
  return rows;
}

// Rows of the returned head_dim x width matrix are the appearance basis on the
// kept (low-frequency) channels and zero elsewhere.
Matrix planted_projection(const ToyModelSpec& spec, const std::vector<std::vector<double>>& basis) {
  const auto rows = kept_channels(spec);
  const int width = static_cast<int>(basis.front().size());
  Matrix m(spec.head_dim, width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int i = 0; i < width; ++i) m(rows[r], i) = static_cast<float>(spec.planted_gain * basis[r][i]);
  }
  return m;
}

// Removes every row's component along the appearance basis, leaving the head
// to read noise and high-order patch detail.
void project_out(Matrix& m, const std::vector<std::vector<double>>& basis) {
  for (int r = 0; r < m.rows; ++r) {
    float* row = &m.values[static_cast<std::size_t>(r) * m.cols];
    for (const auto& b : basis) {
      double dot = 0.0;
      for (int i = 0; i < m.cols; ++i) dot += row[i] * b[i];
      for (int i = 0; i < m.cols; ++i) row[i] = static_cast<float>(row[i] - dot * b[i]);
    }
  }
}

void matvec(const Matrix& m, std::span<const float> x, std::span<float> out) {
  for (int r = 0; r < m.rows; ++r) {
    const float* row = &m.values[static_cast<std::size_t>(r) * m.cols];
    float acc = 0.0f;
    for (int c = 0; c < m.cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

void layer_norm(std::span<const float> x, std::span<float> out) {
  double mean = 0.0;
  for (float v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (float v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<float>((x[i] - mean) * inv);
}

float gelu(float x) {
  const double k = std::sqrt(2.0 / 3.141592653589793);
  return static_cast<float>(0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x))));
}

void fnv_mix(std::uint64_t& h, const Matrix& m) {
  for (float v : m.values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 4; ++b) {
      h ^= (bits >> (8 * b)) & 0xFFu;
      h *= 0x100000001B3ull;
    }
  }
}

}  // namespace

std::uint64_t ToyWeights::checksum() const {
  std::uint64_t h = 0xCBF29CE484222325ull;
  fnv_mix(h, embed);
  for (const auto& l : layers) {
    for (const auto& m : l.wq) fnv_mix(h, m);
    for (const auto& m : l.wk) fnv_mix(h, m);
    for (const auto& m : l.wv) fnv_mix(h, m);
    fnv_mix(h, l.wo);
    fnv_mix(h, l.mlp1);
    fnv_mix(h, l.mlp2);
  }
  return h;
}

TokenGrid patchify(const Video& video, int patch_size) {
  if (video.frames < 1 || video.height < 1 || video.width < 1) throw DomainError("patchify: empty video");
  if (patch_size < 1) throw DomainError("patchify: patch_size must be >= 1");
  TokenGrid g;
  g.frames = video.frames;
  g.grid_h = (video.height + patch_size - 1) / patch_size;
  g.grid_w = (video.width + patch_size - 1) / patch_size;
  g.dim = 3 * patch_size * patch_size;
  g.values.resize(static_cast<std::size_t>(g.frames) * g.grid_h * g.grid_w * g.dim);
  std::size_t i = 0;
  for (int t = 0; t < g.frames; ++t) {
    for (int gy = 0; gy < g.grid_h; ++gy) {
      for (int gx = 0; gx < g.grid_w; ++gx) {
        for (int py = 0; py < patch_size; ++py) {
          const int y = std::min(gy * patch_size + py, video.height - 1);
          for (int px = 0; px < patch_size; ++px) {
            const int x = std::min(gx * patch_size + px, video.width - 1);
            for (int c = 0; c < 3; ++c) {
              g.values[i++] = static_cast<float>(video.at(t, y, x, c) / 127.5 - 1.0);
            }
          }
        }
      }
    }
  }
  return g;
}

Video unpatchify(const TokenGrid& grid, int patch_size, int video_h, int video_w) {
  if (grid.dim != 3 * patch_size * patch_size) throw DomainError("unpatchify: token size does not match patch");
  Video v(grid.frames, video_h, video_w);
  for (int t = 0; t < grid.frames; ++t) {
    for (int y = 0; y < video_h; ++y) {
      for (int x = 0; x < video_w; ++x) {
        const auto tok = grid.token(t, y / patch_size, x / patch_size);
        const int base = ((y % patch_size) * patch_size + (x % patch_size)) * 3;
        for (int c = 0; c < 3; ++c) {
          const double u = std::round((static_cast<double>(tok[base + c]) + 1.0) * 127.5);
          v.at(t, y, x, c) = static_cast<std::uint8_t>(std::clamp(u, 0.0, 255.0));
        }
      }
    }
  }
  return v;
}

void validate(const ToyModelSpec& spec) {
  if (spec.layers < 1 || spec.heads < 1 || spec.head_dim < 2 || spec.patch_size < 1) {
    throw DomainError("toy model: layers, heads, head_dim and patch_size must be positive");
  }
  if (spec.head_dim % 2 != 0) throw DomainError("toy model: head_dim must be even");
  if (spec.rope.dim() != spec.head_dim || spec.rope.d_t % 2 || spec.rope.d_h % 2 || spec.rope.d_w % 2 ||
      spec.rope.d_t < 2 || spec.rope.d_h < 2 || spec.rope.d_w < 2) {
    throw DomainError("toy model: rope groups must be even, non-empty and sum to head_dim");
  }
  if (!(spec.mlp_ratio > 0.0)) throw DomainError("toy model: mlp_ratio must be positive");
  if (!(spec.noise_level >= 0.0 && spec.noise_level <= 1.0)) throw DomainError("toy model: noise_level outside [0, 1]");
  if (spec.planted) {
    if (spec.planted->layer < 0 || spec.planted->layer >= spec.layers || spec.planted->head < 0 ||
        spec.planted->head >= spec.heads) {
      throw DomainError("toy model: planted head index out of range");
    }
    if (!(spec.planted_keep_low > 0.0 && spec.planted_keep_low <= 1.0)) {
      throw DomainError("toy model: planted_keep_low must lie in (0, 1]");
    }
  }
}

ToyWeights init_toy_model(const ToyModelSpec& spec) {
  validate(spec);
  ToyWeights w;
  w.spec = spec;
  const int width = spec.heads * spec.head_dim;
  const int in_dim = 3 * spec.patch_size * spec.patch_size;
  const int hidden = std::max(1, static_cast<int>(std::lround(spec.mlp_ratio * width)));
  w.embed = gaussian_matrix(width, in_dim, spec.seed, stream_id(-1, kEmbed));
  std::vector<std::vector<double>> appearance;
  if (spec.planted) appearance = appearance_basis(spec, w.embed, kept_channels(spec).size());
  for (int l = 0; l < spec.layers; ++l) {
    ToyLayerWeights lw;
    for (int h = 0; h < spec.heads; ++h) {
      if (spec.planted && spec.planted->layer == l && spec.planted->head == h) {
        Matrix p = planted_projection(spec, appearance);
        lw.wq.push_back(p);
        lw.wk.push_back(std::move(p));
      } else {
        Matrix q = gaussian_matrix(spec.head_dim, width, spec.seed, stream_id(l, kWq, h));
        Matrix k = gaussian_matrix(spec.head_dim, width, spec.seed, stream_id(l, kWk, h));
        if (!appearance.empty()) {
          project_out(q, appearance);
          project_out(k, appearance);
        }
        lw.wq.push_back(std::move(q));
        lw.wk.push_back(std::move(k));
      }
      lw.wv.push_back(gaussian_matrix(spec.head_dim, width, spec.seed, stream_id(l, kWv, h)));
    }
    lw.wo = gaussian_matrix(width, width, spec.seed, stream_id(l, kWo));
    lw.mlp1 = gaussian_matrix(hidden, width, spec.seed, stream_id(l, kMlp1));
    lw.mlp2 = gaussian_matrix(width, hidden, spec.seed, stream_id(l, kMlp2));
    w.layers.push_back(std::move(lw));
  }
  return w;
}

FeatureBank extract_features(const Video& video, const ToyWeights& model, std::span<const int> layers,
                             bool diagnostics) {
  const auto& spec = model.spec;
  std::vector<int> harvest(layers.begin(), layers.end());
  if (harvest.empty()) {
    for (int l = 0; l < spec.layers; ++l) harvest.push_back(l);
  }
  for (int l : harvest) {
    if (l < 0 || l >= spec.layers) throw DomainError("extract_features: harvest layer " + std::to_string(l) + " out of range");
  }
  std::sort(harvest.begin(), harvest.end());
  harvest.erase(std::unique(harvest.begin(), harvest.end()), harvest.end());

  const TokenGrid tokens = patchify(video, spec.patch_size);
  const int F = tokens.frames, H = tokens.grid_h, W = tokens.grid_w;
  const int N = F * H * W;
  const int C = model.width();
  const int D = spec.head_dim;
  const int heads = spec.heads;
  const int in_dim = tokens.dim;
  if (in_dim != model.embed.cols) throw DomainError("extract_features: patch size does not match model");

  // Final-step noising: x~ = (1 - sigma) x + sigma eps.
  std::vector<float> noised(tokens.values.size());
  {
    PhiloxStream rng(spec.seed, kNoiseStream);
    const double s = spec.noise_level;
    for (std::size_t i = 0; i < noised.size(); ++i) {
      const double eps = rng.normal();
      noised[i] = static_cast<float>((1.0 - s) * tokens.values[i] + s * eps);
    }
  }

  std::vector<float> h(static_cast<std::size_t>(N) * C);
  for (int n = 0; n < N; ++n) {
    matvec(model.embed, std::span<const float>(noised).subspan(static_cast<std::size_t>(n) * in_dim, in_dim),
           std::span<float>(h).subspan(static_cast<std::size_t>(n) * C, C));
  }

  VolumeDims dims{static_cast<int>(harvest.size()), heads, F, H, W, D, spec.patch_size, video.height, video.width};
  FeatureBank bank;
  bank.volume = FeatureVolume(dims, spec.rope);
  bank.layer_ids = harvest;
  std::vector<float> qv(bank.volume.expected_size(DescriptorKind::query));
  std::vector<float> kv(qv.size());
  std::vector<float> hv(qv.size());
  if (diagnostics) bank.attention.resize(harvest.size() * heads);

  const int last_layer = harvest.back();
  std::vector<float> xn(static_cast<std::size_t>(N) * C);
  std::vector<float> q(static_cast<std::size_t>(N) * D), k(q.size()), v(q.size());
  std::vector<float> concat(static_cast<std::size_t>(N) * C);
  std::vector<double> logits(static_cast<std::size_t>(N));
  std::vector<double> acc(static_cast<std::size_t>(D));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(D));

  for (int l = 0; l <= last_layer; ++l) {
    const auto& lw = model.layers[l];
    const auto slot = std::find(harvest.begin(), harvest.end(), l);
    const bool harvested = slot != harvest.end();
    const int vl = harvested ? static_cast<int>(slot - harvest.begin()) : -1;
    const bool need_output = l < last_layer;
    const bool need_attention = need_output || (harvested && diagnostics);

    for (int n = 0; n < N; ++n) {
      layer_norm(std::span<const float>(h).subspan(static_cast<std::size_t>(n) * C, C),
                 std::span<float>(xn).subspan(static_cast<std::size_t>(n) * C, C));
    }
    if (harvested) {
      for (int n = 0; n < N; ++n) {
        const int t = n / (H * W), y = (n / W) % H, x = n % W;
        std::copy_n(&h[static_cast<std::size_t>(n) * C], C,
                    &hv[bank.volume.offset(DescriptorKind::hidden, vl, 0, t, y, x)]);
      }
    }

    for (int hd = 0; hd < heads; ++hd) {
      for (int n = 0; n < N; ++n) {
        const int t = n / (H * W), y = (n / W) % H, x = n % W;
        const auto xs = std::span<const float>(xn).subspan(static_cast<std::size_t>(n) * C, C);
        auto qs = std::span<float>(q).subspan(static_cast<std::size_t>(n) * D, D);
        auto ks = std::span<float>(k).subspan(static_cast<std::size_t>(n) * D, D);
        matvec(lw.wq[hd], xs, qs);
        matvec(lw.wk[hd], xs, ks);
        const Position3 pos{t, y, x};
        apply_rope_inplace(qs, spec.rope, pos);
        apply_rope_inplace(ks, spec.rope, pos);
        if (need_output) matvec(lw.wv[hd], xs, std::span<float>(v).subspan(static_cast<std::size_t>(n) * D, D));
        if (harvested) {
          std::copy(qs.begin(), qs.end(), &qv[bank.volume.offset(DescriptorKind::query, vl, hd, t, y, x)]);
          std::copy(ks.begin(), ks.end(), &kv[bank.volume.offset(DescriptorKind::key, vl, hd, t, y, x)]);
        }
      }
      if (!need_attention) continue;

      std::vector<float>* record = nullptr;
      if (harvested && diagnostics) {
        record = &bank.attention[static_cast<std::size_t>(vl) * heads + hd];
        record->assign(static_cast<std::size_t>(N) * N, 0.0f);
      }
      for (int i = 0; i < N; ++i) {
        const float* qi = &q[static_cast<std::size_t>(i) * D];
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < N; ++j) {
          const float* kj = &k[static_cast<std::size_t>(j) * D];
          float dot = 0.0f;
          for (int c = 0; c < D; ++c) dot += qi[c] * kj[c];
          logits[j] = dot * inv_sqrt_d;
          mx = std::max(mx, logits[j]);
        }
        double z = 0.0;
        for (int j = 0; j < N; ++j) {
          logits[j] = std::exp(logits[j] - mx);
          z += logits[j];
        }
        for (int j = 0; j < N; ++j) logits[j] /= z;
        if (record) {
          for (int j = 0; j < N; ++j) (*record)[static_cast<std::size_t>(i) * N + j] = static_cast<float>(logits[j]);
        }
        if (need_output) {
          std::fill(acc.begin(), acc.end(), 0.0);
          for (int j = 0; j < N; ++j) {
            const double p = logits[j];
            const float* vj = &v[static_cast<std::size_t>(j) * D];
            for (int c = 0; c < D; ++c) acc[c] += p * vj[c];
          }
          float* out = &concat[static_cast<std::size_t>(i) * C + static_cast<std::size_t>(hd) * D];
          for (int c = 0; c < D; ++c) out[c] = static_cast<float>(acc[c]);
        }
      }
    }

    if (!need_output) continue;
    // Residual attention and MLP branches.
    std::vector<float> tmp(static_cast<std::size_t>(C));
    std::vector<float> mid(static_cast<std::size_t>(lw.mlp1.rows));
    for (int n = 0; n < N; ++n) {
      auto hs = std::span<float>(h).subspan(static_cast<std::size_t>(n) * C, C);
      matvec(lw.wo, std::span<const float>(concat).subspan(static_cast<std::size_t>(n) * C, C), tmp);
      for (int c = 0; c < C; ++c) hs[c] += tmp[c];
      layer_norm(hs, tmp);
      matvec(lw.mlp1, tmp, mid);
      for (auto& m : mid) m = gelu(m);
      matvec(lw.mlp2, mid, tmp);
      for (int c = 0; c < C; ++c) hs[c] += tmp[c];
    }
  }

  bank.volume.set(DescriptorKind::query, std::move(qv));
  bank.volume.set(DescriptorKind::key, std::move(kv));
  bank.volume.set(DescriptorKind::hidden, std::move(hv));
  return bank;
}

std::span<const float> attention_map(const FeatureBank& bank, int layer, int head) {
  if (!bank.has_attention()) throw Unavailable("attention diagnostics were not recorded at extraction");
  const auto& d = bank.volume.dims();
  if (layer < 0 || layer >= d.layers || head < 0 || head >= d.heads) {
    throw DomainError("attention_map: layer/head out of range");
  }
  return bank.attention[static_cast<std::size_t>(layer) * d.heads + head];
}

}  // namespace headtrack
