#pragma once

#include <cstdint>
#include <vector>

#include "headtrack/model.hpp"
#include "headtrack/philox.hpp"

namespace fixtures {

// Small volume with Gaussian query/key (and optionally hidden) arrays.
inline headtrack::FeatureVolume random_volume(headtrack::VolumeDims d, headtrack::RopeLayout rope, std::uint64_t seed,
                                              bool hidden = false) {
  headtrack::FeatureVolume fv(d, rope);
  headtrack::PhiloxStream rng(seed, 0);
  for (auto kind : {headtrack::DescriptorKind::query, headtrack::DescriptorKind::key, headtrack::DescriptorKind::hidden}) {
    if (kind == headtrack::DescriptorKind::hidden && !hidden) continue;
    std::vector<float> v(fv.expected_size(kind));
    for (auto& x : v) x = static_cast<float>(rng.normal());
    fv.set(kind, std::move(v));
  }
  return fv;
}

inline headtrack::VolumeDims dims(int layers, int heads, int frames, int gh, int gw, int d, int patch = 8) {
  return {layers, heads, frames, gh, gw, d, patch, gh * patch, gw * patch};
}

}  // namespace fixtures
