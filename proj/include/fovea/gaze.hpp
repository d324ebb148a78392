#pragma once

// Gaze stream ingestion, time synchronisation and crop geometry.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace fovea {

struct GazeSample {
  std::int64_t t_ns = 0;
  double x_px = 0.0;
  double y_px = 0.0;
  double confidence = 1.0;
};

struct GazeTrack {
  std::vector<GazeSample> samples;  // strictly increasing t_ns
  int frame_w = 0;
  int frame_h = 0;
  // Rows dropped during parsing (unparsable numbers, conflicting duplicates).
  int warning_count = 0;
};

enum class GazeFallback { kCenter, kLastValid };

struct SyncPolicy {
  std::int64_t max_gap_ns = 500'000'000;
  std::int64_t smooth_window_ns = 0;  // half-width; 0 disables the median filter
  double min_confidence = 0.2;
  GazeFallback fallback = GazeFallback::kLastValid;

  // Policy used when rendering the Gaze condition: median filter of +-100 ms.
  static SyncPolicy for_gaze_condition();
  void validate() const;
};

struct CropRegion {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;
  bool clamped = false;  // gaze point lay outside the frame and was pulled in

  bool operator==(const CropRegion& o) const {
    return x0 == o.x0 && y0 == o.y0 && w == o.w && h == o.h;
  }
  bool intersects(int bx, int by, int bw, int bh) const {
    return bx < x0 + w && x0 < bx + bw && by < y0 + h && y0 < by + bh;
  }
};

// Parses `timestamp_ns,x_px,y_px[,confidence]` CSV. Bad rows are skipped and
// counted in GazeTrack::warning_count; a missing or wrong header throws.
GazeTrack parse_gaze_csv(std::string_view csv, int frame_w, int frame_h);

GazeSample gaze_at(const GazeTrack& track, std::int64_t t_ns, const SyncPolicy& policy);

CropRegion crop_region(const GazeSample& gaze, int frame_w, int frame_h, int crop_w, int crop_h);

// Fixed central region used by the Center condition.
CropRegion center_region(int frame_w, int frame_h, int crop_w, int crop_h);

// Round half up, the rounding used for every pixel-valued result.
inline long long round_half_up(double v) {
  const double f = v + 0.5;
  long long r = static_cast<long long>(f);
  if (static_cast<double>(r) > f) --r;  // floor for negatives
  return r;
}

}  // namespace fovea
