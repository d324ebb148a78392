#include "fovea/tokenizer.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "fovea/error.hpp"
#include "text_util.hpp"

namespace fovea {

void FoveationSpec::validate() const {
  if (base_patch <= 0) throw Error(ErrorCode::kInvalidArgument, "base_patch must be > 0");
  for (std::size_t i = 0; i < ring_radii.size(); ++i) {
    if (std::isnan(ring_radii[i]) || ring_radii[i] < 0)
      throw Error(ErrorCode::kInvalidArgument, "ring radii must be >= 0");
    if (i > 0 && !(ring_radii[i] > ring_radii[i - 1]) && !std::isinf(ring_radii[i]))
      throw Error(ErrorCode::kInvalidArgument, "ring radii must be strictly increasing");
  }
  if (ring_radii.size() > 20) throw Error(ErrorCode::kInvalidArgument, "too many levels");
}

FoveationSpec parse_foveation_spec(std::string_view text) {
  FoveationSpec spec;
  spec.ring_radii.clear();
  bool in_radii = false;
  for (auto item : split(text, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::string_view value = item;
    if (item.substr(0, 5) == "base=") {
      double b = 0;
      if (!parse_double(item.substr(5), b) || b != std::floor(b) || b <= 0)
        throw Error(ErrorCode::kInvalidArgument, "bad base patch in '" + std::string(text) + "'");
      spec.base_patch = static_cast<int>(b);
      in_radii = false;
      continue;
    }
    if (item.substr(0, 2) == "r=") {
      in_radii = true;
      value = item.substr(2);
    } else if (!in_radii) {
      throw Error(ErrorCode::kInvalidArgument, "unrecognised spec item '" + std::string(item) + "'");
    }
    double r = 0;
    if (value == "inf") {
      r = std::numeric_limits<double>::infinity();
    } else if (!parse_double(value, r)) {
      throw Error(ErrorCode::kInvalidArgument, "bad radius '" + std::string(value) + "'");
    }
    spec.ring_radii.push_back(r);
  }
  spec.validate();
  return spec;
}

PatchLayout uniform_grid(int frame_w, int frame_h, int patch) {
  if (patch <= 0 || frame_w <= 0 || frame_h <= 0)
    throw Error(ErrorCode::kInvalidArgument, "dimensions must be positive");
  if (frame_w % patch != 0 || frame_h % patch != 0)
    throw Error(ErrorCode::kNonDivisiblePatch,
                std::to_string(patch) + " does not divide " + std::to_string(frame_w) + "x" +
                    std::to_string(frame_h));
  PatchLayout layout{frame_w, frame_h, patch, {}};
  layout.patches.reserve(static_cast<std::size_t>(frame_w / patch) * (frame_h / patch));
  for (int y = 0; y < frame_h; y += patch)
    for (int x = 0; x < frame_w; x += patch) layout.patches.push_back({x, y, patch});
  return layout;
}

namespace {

bool corners_beyond(int x0, int y0, int size, const GazeSample& g, double radius) {
  if (std::isinf(radius)) return false;
  const double xs[2] = {static_cast<double>(x0), static_cast<double>(x0 + size)};
  const double ys[2] = {static_cast<double>(y0), static_cast<double>(y0 + size)};
  for (double x : xs)
    for (double y : ys)
      if (!(std::hypot(x - g.x_px, y - g.y_px) > radius)) return false;
  return true;
}

}  // namespace

PatchLayout foveated_grid(int frame_w, int frame_h, const GazeSample& gaze,
                          const FoveationSpec& spec) {
  spec.validate();
  const int base = spec.base_patch;
  if (frame_w <= 0 || frame_h <= 0)
    throw Error(ErrorCode::kInvalidArgument, "dimensions must be positive");
  if (frame_w % base != 0 || frame_h % base != 0)
    throw Error(ErrorCode::kSpecMisaligned,
                "base patch " + std::to_string(base) + " does not divide " +
                    std::to_string(frame_w) + "x" + std::to_string(frame_h));

  const std::size_t levels = spec.ring_radii.size() + 1;
  // whole[k][j * nx[k] + i]: aligned block (i, j) at level k is a single patch.
  std::vector<int> nx(levels), ny(levels);
  std::vector<std::vector<char>> whole(levels);
  nx[0] = frame_w / base;
  ny[0] = frame_h / base;
  whole[0].assign(static_cast<std::size_t>(nx[0]) * ny[0], 1);
  for (std::size_t k = 1; k < levels; ++k) {
    nx[k] = nx[k - 1] / 2;
    ny[k] = ny[k - 1] / 2;
    whole[k].assign(static_cast<std::size_t>(nx[k]) * ny[k], 0);
    const int size = base << k;
    const auto& child = whole[k - 1];
    const int cw = nx[k - 1];
    for (int j = 0; j < ny[k]; ++j) {
      for (int i = 0; i < nx[k]; ++i) {
        const std::size_t c = static_cast<std::size_t>(2 * j) * cw + 2 * i;
        if (child[c] && child[c + 1] && child[c + cw] && child[c + cw + 1] &&
            corners_beyond(i * size, j * size, size, gaze, spec.ring_radii[k - 1]))
          whole[k][static_cast<std::size_t>(j) * nx[k] + i] = 1;
      }
    }
  }

  PatchLayout layout{frame_w, frame_h, base, {}};
  for (std::size_t k = levels; k-- > 0;) {
    const int size = base << k;
    for (int j = 0; j < ny[k]; ++j) {
      for (int i = 0; i < nx[k]; ++i) {
        if (!whole[k][static_cast<std::size_t>(j) * nx[k] + i]) continue;
        const bool parent_whole = k + 1 < levels && i / 2 < nx[k + 1] && j / 2 < ny[k + 1] &&
                                  whole[k + 1][static_cast<std::size_t>(j / 2) * nx[k + 1] + i / 2];
        if (!parent_whole) layout.patches.push_back({i * size, j * size, size});
      }
    }
  }
  return layout;
}

TokenBudget token_budget(const PatchLayout& layout) {
  if (layout.base_patch <= 0 || layout.frame_w % layout.base_patch != 0 ||
      layout.frame_h % layout.base_patch != 0)
    throw Error(ErrorCode::kInvalidArgument, "layout has no valid base patch");
  const std::int64_t base_tokens =
      static_cast<std::int64_t>(layout.frame_w / layout.base_patch) *
      (layout.frame_h / layout.base_patch);
  TokenBudget b;
  b.tokens = static_cast<std::int64_t>(layout.patches.size());
  b.vs_uniform_base = static_cast<double>(b.tokens) / static_cast<double>(base_tokens);
  return b;
}

}  // namespace fovea
