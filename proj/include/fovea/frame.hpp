#pragma once

// Frame ingestion and rendering of the Full / Gaze / Center / Dual inputs.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fovea/gaze.hpp"

namespace fovea {

// Row-major RGB, 8 bits per channel.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Frame() = default;
  Frame(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  bool empty() const { return width == 0 || height == 0; }
  std::uint8_t* px(int x, int y) { return &pixels[(static_cast<std::size_t>(y) * width + x) * 3]; }
  const std::uint8_t* px(int x, int y) const {
    return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
  }
  bool operator==(const Frame&) const = default;
};

Frame read_ppm(const std::filesystem::path& path);
std::string encode_ppm(const Frame& frame);
void write_ppm(const Frame& frame, const std::filesystem::path& path);

Frame crop(const Frame& frame, const CropRegion& region);

// Area average: every output pixel is the rounded mean of its source box, with
// edge pixels weighted by the fraction the box covers. Throws UpscaleRequested.
Frame area_downsample(const Frame& frame, int out_w, int out_h);

struct FrameRef {
  int index = 0;
  std::int64_t t_ns = 0;
  std::string path;
};

struct VideoMeta {
  std::string video_id;
  int width = 0;
  int height = 0;
  double native_fps = 0.0;
  std::int64_t duration_ns = 0;
  std::vector<FrameRef> frames;
  // Optional annotation file consumed by the mock description backend.
  std::optional<std::string> sidecar_path;
};

// Reads the manifest JSON; relative frame paths resolve against its directory.
VideoMeta load_manifest(const std::filesystem::path& path);
void save_manifest(const VideoMeta& meta, const std::filesystem::path& path);

std::vector<FrameRef> select_frames(const VideoMeta& meta, double target_fps);

// Raw "FVP1" stream: magic, u32 width, u32 height, u32 fps*1000 (all LE),
// then width*height*3 bytes per frame.
struct RawVideo {
  VideoMeta meta;
  std::vector<Frame> frames;
};
RawVideo read_raw_stream(std::istream& in, std::string video_id = "stdin");
void write_raw_stream(std::ostream& out, const std::vector<Frame>& frames, double fps);

using FrameLoader = std::function<Frame(const FrameRef&)>;
FrameLoader file_loader();
FrameLoader memory_loader(const RawVideo& video);  // borrows `video`

enum class ConditionKind { kFull, kGaze, kCenter, kDual };

std::string_view condition_name(ConditionKind kind);
ConditionKind parse_condition(std::string_view name);

struct Condition {
  ConditionKind kind = ConditionKind::kFull;
  int crop_w = 448;
  int crop_h = 448;
  int peripheral_w = 448;
  int peripheral_h = 448;
};

struct RenderedFrame {
  std::int64_t t_ns = 0;
  int source_index = 0;
  Frame image;                            // Full frame, or the focus crop
  std::optional<Frame> peripheral;        // Dual only
  std::optional<CropRegion> region;       // absent for Full
  std::string image_path;                 // set when the clip lives on disk
  std::string peripheral_path;
};

struct RenderedClip {
  std::string video_id;
  Condition condition;
  double fps = 1.0;
  int frame_w = 0;  // source frame size
  int frame_h = 0;
  std::vector<RenderedFrame> frames;
  std::optional<std::string> sidecar_path;
};

struct RenderOptions {
  double fps = 1.0;
  SyncPolicy policy = SyncPolicy::for_gaze_condition();
  // When false only geometry is produced; pixel buffers stay empty.
  bool with_pixels = true;
};

RenderedClip render_condition(const VideoMeta& meta, const GazeTrack* track,
                              const Condition& cond, const RenderOptions& opts,
                              const FrameLoader& loader = file_loader());

// Writes frame_NNNN.ppm (and frame_NNNN_peripheral.ppm) plus clip.json.
void write_clip(RenderedClip& clip, const std::filesystem::path& dir);
// Reads clip.json; frames are referenced by path and not decoded.
RenderedClip read_clip(const std::filesystem::path& dir);

struct BudgetReport {
  std::int64_t pixels_per_frame = 0;
  std::int64_t full_pixels = 0;
  double ratio_vs_full = 0.0;
  double reduction_factor = 0.0;
};

BudgetReport pixel_budget(const Condition& cond, int frame_w, int frame_h);

}  // namespace fovea
