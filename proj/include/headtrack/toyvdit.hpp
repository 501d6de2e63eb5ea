#pragma once

// Desk-scale, untrained video diffusion transformer used as a deterministic
// feature source. Pixels are patchified (no VAE, temporal scale 1), noised to
// the final diffusion step, and pushed once through pre-LN transformer blocks
// with 3D rotary attention. Post-rotation queries/keys and the pre-attention
// hidden state of the requested layers are harvested into a FeatureVolume.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "headtrack/model.hpp"

namespace headtrack {

struct PlantedHead {
  int layer = 0;
  int head = 0;
  bool operator==(const PlantedHead&) const = default;
};

struct ToyModelSpec {
  int layers = 4;
  int heads = 8;
  int head_dim = 32;
  int patch_size = 8;
  RopeLayout rope{8, 12, 12, 10000.0};
  double mlp_ratio = 2.0;
  double noise_level = 0.02;  // sigma at the final diffusion step
  std::uint64_t seed = 0;
  std::optional<PlantedHead> planted;
  /// Per-axis fraction of low-frequency pairs the planted head projects onto.
  double planted_keep_low = 0.5;
  /// Scale of the planted projection; sharpens its attention logits.
  double planted_gain = 2.0;
};

/// Row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<float> values;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0.0f) {}
  float& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  float operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  bool operator==(const Matrix&) const = default;
};

struct ToyLayerWeights {
  std::vector<Matrix> wq;  // per head, head_dim x width
  std::vector<Matrix> wk;
  std::vector<Matrix> wv;
  Matrix wo;    // width x width
  Matrix mlp1;  // hidden x width
  Matrix mlp2;  // width x hidden
  bool operator==(const ToyLayerWeights&) const = default;
};

struct ToyWeights {
  ToyModelSpec spec;
  Matrix embed;  // width x (3 * patch^2)
  std::vector<ToyLayerWeights> layers;

  int width() const { return spec.heads * spec.head_dim; }
  /// FNV-1a over every weight's bit pattern.
  std::uint64_t checksum() const;
};

/// Per-cell token vectors of a patchified video, [frame][y][x][dim].
struct TokenGrid {
  int frames = 0;
  int grid_h = 0;
  int grid_w = 0;
  int dim = 0;
  std::vector<float> values;

  std::span<const float> token(int t, int y, int x) const {
    return std::span<const float>(values).subspan(
        ((static_cast<std::size_t>(t) * grid_h + y) * grid_w + x) * dim, static_cast<std::size_t>(dim));
  }
};

/// Rearranges each patch into a (y, x, c)-ordered vector scaled by u/127.5 - 1.
/// Sizes not divisible by the patch are padded by edge replication.
TokenGrid patchify(const Video& video, int patch_size);
/// Inverse of patchify for divisible sizes (crops padding otherwise).
Video unpatchify(const TokenGrid& grid, int patch_size, int video_h, int video_w);

void validate(const ToyModelSpec& spec);
ToyWeights init_toy_model(const ToyModelSpec& spec);

struct FeatureBank {
  FeatureVolume volume;
  std::vector<int> layer_ids;  // model layer of each volume layer
  /// Row-stochastic attention per (volume layer, head), [layer * heads + head],
  /// each (F*H*W)^2 row-major. Empty unless diagnostics were requested.
  std::vector<std::vector<float>> attention;

  bool has_attention() const { return !attention.empty(); }
};

/// Runs one noised forward pass. An empty `layers` span harvests every layer.
FeatureBank extract_features(const Video& video, const ToyWeights& model, std::span<const int> layers = {},
                             bool diagnostics = false);

/// Attention rows of a harvested (layer, head); `layer` is the volume index.
std::span<const float> attention_map(const FeatureBank& bank, int layer, int head);

}  // namespace headtrack
