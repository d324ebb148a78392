#include "fovea/gaze.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "fovea/error.hpp"
#include "text_util.hpp"

namespace fovea {

namespace {

bool parse_timestamp(std::string_view s, std::int64_t& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec == std::errc() && p == s.data() + s.size()) return out >= 0;
  // Decimal notation is accepted when it denotes an integral value.
  double d = 0;
  if (!parse_double(s, d) || d < 0 || d > 9.2e18 || std::floor(d) != d) return false;
  out = static_cast<std::int64_t>(d);
  return true;
}

double clamp_coord(double v, int extent) {
  return std::clamp(v, 0.0, static_cast<double>(extent - 1));
}

GazeSample frame_center(const GazeTrack& track) {
  return GazeSample{0, static_cast<double>(track.frame_w / 2),
                    static_cast<double>(track.frame_h / 2), 0.0};
}

double median(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

SyncPolicy SyncPolicy::for_gaze_condition() {
  SyncPolicy p;
  p.smooth_window_ns = 100'000'000;
  return p;
}

void SyncPolicy::validate() const {
  if (max_gap_ns <= 0) throw Error(ErrorCode::kInvalidArgument, "max_gap_ns must be > 0");
  if (smooth_window_ns < 0)
    throw Error(ErrorCode::kInvalidArgument, "smooth_window_ns must be >= 0");
}

GazeTrack parse_gaze_csv(std::string_view csv, int frame_w, int frame_h) {
  if (frame_w <= 0 || frame_h <= 0)
    throw Error(ErrorCode::kInvalidArgument, "frame dimensions must be positive");
  if (csv.substr(0, 3) == "\xEF\xBB\xBF") csv.remove_prefix(3);

  const auto lines = split_lines(csv);
  std::size_t first = 0;
  while (first < lines.size() && trim(lines[first]).empty()) ++first;
  if (first == lines.size()) throw Error(ErrorCode::kMissingHeader, "empty gaze CSV");

  const auto header = split(trim(lines[first]), ',');
  bool has_conf = false;
  if (header.size() == 4 && trim(header[3]) == "confidence") has_conf = true;
  if (!(header.size() == 3 || has_conf) || trim(header[0]) != "timestamp_ns" ||
      trim(header[1]) != "x_px" || trim(header[2]) != "y_px") {
    throw Error(ErrorCode::kMissingHeader,
                "expected header timestamp_ns,x_px,y_px[,confidence], got '" +
                    std::string(trim(lines[first])) + "'");
  }

  GazeTrack track;
  track.frame_w = frame_w;
  track.frame_h = frame_h;
  std::vector<GazeSample> rows;
  for (std::size_t i = first + 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    GazeSample s;
    bool ok = cells.size() == header.size() && parse_timestamp(cells[0], s.t_ns) &&
              parse_double(cells[1], s.x_px) && parse_double(cells[2], s.y_px);
    if (ok && has_conf) {
      ok = parse_double(cells[3], s.confidence) && s.confidence >= 0.0 && s.confidence <= 1.0;
    }
    if (!ok) {
      ++track.warning_count;
      continue;
    }
    rows.push_back(s);
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const GazeSample& a, const GazeSample& b) { return a.t_ns < b.t_ns; });
  for (const auto& s : rows) {
    if (!track.samples.empty() && track.samples.back().t_ns == s.t_ns) {
      const auto& prev = track.samples.back();
      // Exact repeats collapse silently; conflicting repeats keep the first row.
      if (prev.x_px != s.x_px || prev.y_px != s.y_px || prev.confidence != s.confidence)
        ++track.warning_count;
      continue;
    }
    track.samples.push_back(s);
  }
  return track;
}

GazeSample gaze_at(const GazeTrack& track, std::int64_t t_ns, const SyncPolicy& policy) {
  policy.validate();
  std::vector<const GazeSample*> usable;
  usable.reserve(track.samples.size());
  for (const auto& s : track.samples)
    if (s.confidence >= policy.min_confidence) usable.push_back(&s);

  auto finish = [&](GazeSample s) {
    s.t_ns = t_ns;
    s.x_px = clamp_coord(s.x_px, track.frame_w);
    s.y_px = clamp_coord(s.y_px, track.frame_h);
    return s;
  };

  if (policy.smooth_window_ns > 0) {
    std::vector<double> xs, ys;
    double conf = 1.0;
    for (const auto* s : usable) {
      if (s->t_ns < t_ns - policy.smooth_window_ns) continue;
      if (s->t_ns > t_ns + policy.smooth_window_ns) break;
      xs.push_back(s->x_px);
      ys.push_back(s->y_px);
      conf = std::min(conf, s->confidence);
    }
    if (!xs.empty()) return finish(GazeSample{t_ns, median(xs), median(ys), conf});
  }

  auto it = std::lower_bound(usable.begin(), usable.end(), t_ns,
                             [](const GazeSample* s, std::int64_t t) { return s->t_ns < t; });
  const GazeSample* nearest = nullptr;
  if (it != usable.end()) nearest = *it;
  if (it != usable.begin()) {
    const GazeSample* before = *(it - 1);
    // Ties go to the earlier sample.
    if (nearest == nullptr || t_ns - before->t_ns <= nearest->t_ns - t_ns) nearest = before;
  }
  if (nearest != nullptr) {
    const auto gap = nearest->t_ns > t_ns ? nearest->t_ns - t_ns : t_ns - nearest->t_ns;
    if (gap <= policy.max_gap_ns) return finish(*nearest);
  }

  if (policy.fallback == GazeFallback::kCenter) return finish(frame_center(track));
  if (usable.empty())
    throw Error(ErrorCode::kEmptyTrack, "no usable gaze sample and fallback is last_valid");
  if (it != usable.begin()) return finish(**(it - 1));
  // Query precedes the first usable sample: no prior sample to carry.
  return finish(frame_center(track));
}

CropRegion crop_region(const GazeSample& gaze, int frame_w, int frame_h, int crop_w, int crop_h) {
  if (crop_w <= 0 || crop_h <= 0 || frame_w <= 0 || frame_h <= 0)
    throw Error(ErrorCode::kInvalidArgument, "crop and frame dimensions must be positive");
  if (crop_w > frame_w || crop_h > frame_h)
    throw Error(ErrorCode::kCropLargerThanFrame,
                "crop " + std::to_string(crop_w) + "x" + std::to_string(crop_h) +
                    " exceeds frame " + std::to_string(frame_w) + "x" + std::to_string(frame_h));
  CropRegion r;
  r.w = crop_w;
  r.h = crop_h;
  const double gx = clamp_coord(gaze.x_px, frame_w);
  const double gy = clamp_coord(gaze.y_px, frame_h);
  r.clamped = gx != gaze.x_px || gy != gaze.y_px;
  r.x0 = static_cast<int>(
      std::clamp<long long>(round_half_up(gx) - crop_w / 2, 0, frame_w - crop_w));
  r.y0 = static_cast<int>(
      std::clamp<long long>(round_half_up(gy) - crop_h / 2, 0, frame_h - crop_h));
  return r;
}

CropRegion center_region(int frame_w, int frame_h, int crop_w, int crop_h) {
  if (crop_w > frame_w || crop_h > frame_h)
    throw Error(ErrorCode::kCropLargerThanFrame, "center crop exceeds frame");
  return CropRegion{(frame_w - crop_w) / 2, (frame_h - crop_h) / 2, crop_w, crop_h, false};
}

}  // namespace fovea
