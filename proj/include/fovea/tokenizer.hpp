#pragma once

// ViT-style patch layouts and their token counts.
//
// A foveated layout starts from a uniform grid of `base_patch` squares and
// merges aligned 2x2 blocks level by level: a block at doubling level k+1 is
// merged when its four children are whole patches and every corner of the
// merged square lies farther than ring_radii[k] from the gaze point. Blocks
// that would cross the frame edge are never merged, so the result is always an
// exact partition of the frame.

#include <cstdint>
#include <string_view>
#include <vector>

#include "fovea/gaze.hpp"

namespace fovea {

struct Patch {
  int x0 = 0;
  int y0 = 0;
  int size = 0;
  bool operator==(const Patch&) const = default;
};

struct PatchLayout {
  int frame_w = 0;
  int frame_h = 0;
  int base_patch = 0;
  std::vector<Patch> patches;
};

struct FoveationSpec {
  int base_patch = 16;
  std::vector<double> ring_radii = {224.0, 448.0};  // px; +inf disables a level

  void validate() const;
};

// Parses "base=16,r=224,448" (radii may be "inf").
FoveationSpec parse_foveation_spec(std::string_view text);

PatchLayout uniform_grid(int frame_w, int frame_h, int patch);
PatchLayout foveated_grid(int frame_w, int frame_h, const GazeSample& gaze,
                          const FoveationSpec& spec);

struct TokenBudget {
  std::int64_t tokens = 0;
  double vs_uniform_base = 0.0;
};

TokenBudget token_budget(const PatchLayout& layout);

}  // namespace fovea
