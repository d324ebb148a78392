#include "fovea/frame.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "fovea/error.hpp"
#include "io_util.hpp"

namespace fovea {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Images

namespace {

// Reads the next whitespace-separated header token of a PNM file, skipping
// '#' comments.
std::string next_pnm_token(const std::string& data, std::size_t& pos) {
  for (;;) {
    while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    if (pos < data.size() && data[pos] == '#') {
      while (pos < data.size() && data[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  const std::size_t start = pos;
  while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
  return data.substr(start, pos - start);
}

}  // namespace

Frame read_ppm(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::kMissingFrameFile, path.string());
  const std::string data = read_file(path);
  std::size_t pos = 0;
  const auto bad = [&](const std::string& why) {
    return Error(ErrorCode::kSchemaViolation, path.string() + ": " + why);
  };
  if (next_pnm_token(data, pos) != "P6") throw bad("not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_pnm_token(data, pos));
    h = std::stoi(next_pnm_token(data, pos));
    maxval = std::stoi(next_pnm_token(data, pos));
  } catch (const std::exception&) {
    throw bad("malformed header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw bad("unsupported dimensions or maxval");
  ++pos;  // single whitespace byte before the raster
  Frame f(w, h);
  if (data.size() < pos + f.pixels.size()) throw bad("truncated raster");
  std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(pos), f.pixels.size(), f.pixels.begin());
  return f;
}

std::string encode_ppm(const Frame& frame) {
  std::string out = "P6\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(frame.pixels.data()), frame.pixels.size());
  return out;
}

void write_ppm(const Frame& frame, const fs::path& path) { write_file(path, encode_ppm(frame)); }

Frame crop(const Frame& frame, const CropRegion& r) {
  if (r.x0 < 0 || r.y0 < 0 || r.x0 + r.w > frame.width || r.y0 + r.h > frame.height)
    throw Error(ErrorCode::kCropLargerThanFrame, "crop region outside frame");
  Frame out(r.w, r.h);
  const std::size_t row_bytes = static_cast<std::size_t>(r.w) * 3;
  for (int y = 0; y < r.h; ++y)
    std::copy_n(frame.px(r.x0, r.y0 + y), row_bytes, out.px(0, y));
  return out;
}

Frame area_downsample(const Frame& frame, int out_w, int out_h) {
  if (out_w <= 0 || out_h <= 0)
    throw Error(ErrorCode::kInvalidArgument, "output dimensions must be positive");
  if (out_w > frame.width || out_h > frame.height)
    throw Error(ErrorCode::kUpscaleRequested,
                std::to_string(frame.width) + "x" + std::to_string(frame.height) + " -> " +
                    std::to_string(out_w) + "x" + std::to_string(out_h));
  if (out_w == frame.width && out_h == frame.height) return frame;

  // Output pixel i covers the source interval [i*in/out, (i+1)*in/out), so
  // boxes straddle source pixels when sizes do not divide. Working in units of
  // 1/out source pixels keeps every overlap an integer and the result exact.
  struct Tap {
    int src;
    std::uint32_t weight;
  };
  auto taps = [](int in, int out) {
    std::vector<std::vector<Tap>> t(static_cast<std::size_t>(out));
    for (int i = 0; i < out; ++i) {
      const long long lo = static_cast<long long>(i) * in, hi = lo + in;
      for (long long x = lo / out; x * out < hi; ++x) {
        const long long a = std::max(lo, x * out), b = std::min(hi, (x + 1) * out);
        if (b > a) t[static_cast<std::size_t>(i)].push_back({static_cast<int>(x), static_cast<std::uint32_t>(b - a)});
      }
    }
    return t;
  };
  const auto tx = taps(frame.width, out_w);
  const auto ty = taps(frame.height, out_h);

  // Horizontal pass keeps weighted sums; each output column totals `in_w`.
  std::vector<std::uint64_t> rows(static_cast<std::size_t>(out_w) * frame.height * 3, 0);
  for (int y = 0; y < frame.height; ++y)
    for (int ox = 0; ox < out_w; ++ox) {
      std::uint64_t* r = &rows[(static_cast<std::size_t>(y) * out_w + ox) * 3];
      for (const auto& t : tx[static_cast<std::size_t>(ox)]) {
        const std::uint8_t* p = frame.px(t.src, y);
        for (int c = 0; c < 3; ++c) r[c] += static_cast<std::uint64_t>(p[c]) * t.weight;
      }
    }

  const std::uint64_t n = static_cast<std::uint64_t>(frame.width) * frame.height;
  Frame out(out_w, out_h);
  for (int oy = 0; oy < out_h; ++oy)
    for (int ox = 0; ox < out_w; ++ox) {
      std::uint64_t sum[3] = {0, 0, 0};
      for (const auto& t : ty[static_cast<std::size_t>(oy)]) {
        const std::uint64_t* r = &rows[(static_cast<std::size_t>(t.src) * out_w + ox) * 3];
        for (int c = 0; c < 3; ++c) sum[c] += r[c] * t.weight;
      }
      std::uint8_t* q = out.px(ox, oy);
      for (int c = 0; c < 3; ++c) q[c] = static_cast<std::uint8_t>((2 * sum[c] + n) / (2 * n));
    }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest and frame selection

namespace {

template <typename T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw Error(ErrorCode::kSchemaViolation, where + ": missing '" + key + "'");
  const json& v = j.at(key);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw Error(ErrorCode::kSchemaViolation, where + ": '" + key + "' must be a string");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer())
      throw Error(ErrorCode::kSchemaViolation, where + ": '" + key + "' must be an integer");
  } else {
    if (!v.is_number()) throw Error(ErrorCode::kSchemaViolation, where + ": '" + key + "' must be a number");
  }
  return v.get<T>();
}

}  // namespace

VideoMeta load_manifest(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, path.string() + ": " + e.what());
  }
  const std::string where = path.string();
  VideoMeta meta;
  meta.video_id = require<std::string>(j, "video_id", where);
  meta.width = require<int>(j, "width", where);
  meta.height = require<int>(j, "height", where);
  meta.native_fps = require<double>(j, "native_fps", where);
  if (meta.width <= 0 || meta.height <= 0 || !(meta.native_fps > 0))
    throw Error(ErrorCode::kSchemaViolation, where + ": width, height and native_fps must be > 0");
  if (!j.contains("frames") || !j["frames"].is_array() || j["frames"].empty())
    throw Error(ErrorCode::kSchemaViolation, where + ": 'frames' must be a non-empty array");

  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path fp(p);
    return (fp.is_absolute() || base.empty() ? fp : base / fp).lexically_normal().string();
  };
  for (const auto& jf : j["frames"]) {
    FrameRef f;
    f.index = require<int>(jf, "index", where + " frame");
    f.t_ns = require<std::int64_t>(jf, "t_ns", where + " frame");
    f.path = resolve(require<std::string>(jf, "path", where + " frame"));
    if (f.t_ns < 0) throw Error(ErrorCode::kSchemaViolation, where + ": negative t_ns");
    if (!meta.frames.empty() &&
        (f.index <= meta.frames.back().index || f.t_ns < meta.frames.back().t_ns))
      throw Error(ErrorCode::kSchemaViolation, where + ": frames must be ordered by index and t_ns");
    if (!fs::exists(f.path)) throw Error(ErrorCode::kMissingFrameFile, f.path);
    meta.frames.push_back(std::move(f));
  }
  if (j.contains("sidecar")) meta.sidecar_path = resolve(require<std::string>(j, "sidecar", where));
  meta.duration_ns = meta.frames.back().t_ns;
  return meta;
}

void save_manifest(const VideoMeta& meta, const fs::path& path) {
  json j = {{"video_id", meta.video_id},
            {"width", meta.width},
            {"height", meta.height},
            {"native_fps", meta.native_fps},
            {"frames", json::array()}};
  const fs::path base = path.parent_path();
  auto rel = [&](const std::string& p) {
    return base.empty() ? p : fs::path(p).lexically_relative(base).generic_string();
  };
  for (const auto& f : meta.frames)
    j["frames"].push_back({{"index", f.index}, {"t_ns", f.t_ns}, {"path", rel(f.path)}});
  if (meta.sidecar_path) j["sidecar"] = rel(*meta.sidecar_path);
  write_file(path, j.dump(2) + "\n");
}

std::vector<FrameRef> select_frames(const VideoMeta& meta, double target_fps) {
  if (!(target_fps > 0)) throw Error(ErrorCode::kInvalidArgument, "target_fps must be > 0");
  if (meta.frames.empty()) throw Error(ErrorCode::kSchemaViolation, "video has no frames");

  std::vector<FrameRef> out;
  const auto& frames = meta.frames;
  for (long long k = 0;; ++k) {
    const auto tick = static_cast<std::int64_t>(std::llround(static_cast<double>(k) * 1e9 / target_fps));
    if (tick > meta.duration_ns) break;
    auto it = std::lower_bound(frames.begin(), frames.end(), tick,
                               [](const FrameRef& f, std::int64_t t) { return f.t_ns < t; });
    std::size_t best;
    if (it == frames.end()) {
      best = frames.size() - 1;
    } else {
      best = static_cast<std::size_t>(it - frames.begin());
      if (it != frames.begin()) {
        const auto& prev = *(it - 1);
        // The earliest frame sharing prev's timestamp wins ties.
        if (tick - prev.t_ns <= it->t_ns - tick) {
          auto first = std::lower_bound(frames.begin(), frames.end(), prev.t_ns,
                                        [](const FrameRef& f, std::int64_t t) { return f.t_ns < t; });
          best = static_cast<std::size_t>(first - frames.begin());
        }
      }
    }
    if (out.empty() || out.back().index != frames[best].index) {
      if (!out.empty() && frames[best].t_ns <= out.back().t_ns) continue;
      out.push_back(frames[best]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Raw stream

namespace {

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw Error(ErrorCode::kSchemaViolation, "raw stream: truncated header");
  return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
         static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

}  // namespace

RawVideo read_raw_stream(std::istream& in, std::string video_id) {
  char magic[4];
  if (!in.read(magic, 4) || std::string_view(magic, 4) != "FVP1")
    throw Error(ErrorCode::kSchemaViolation, "raw stream: bad magic");
  const std::uint32_t w = read_u32(in), h = read_u32(in), fps_milli = read_u32(in);
  if (w == 0 || h == 0 || fps_milli == 0 || w > 65535 || h > 65535)
    throw Error(ErrorCode::kSchemaViolation, "raw stream: invalid dimensions or fps");

  RawVideo v;
  v.meta.video_id = std::move(video_id);
  v.meta.width = static_cast<int>(w);
  v.meta.height = static_cast<int>(h);
  v.meta.native_fps = fps_milli / 1000.0;
  const std::size_t frame_bytes = static_cast<std::size_t>(w) * h * 3;
  for (int i = 0;; ++i) {
    Frame f(static_cast<int>(w), static_cast<int>(h));
    in.read(reinterpret_cast<char*>(f.pixels.data()), static_cast<std::streamsize>(frame_bytes));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    if (got != frame_bytes) throw Error(ErrorCode::kSchemaViolation, "raw stream: truncated frame");
    FrameRef ref;
    ref.index = i;
    ref.t_ns = static_cast<std::int64_t>(std::llround(i * 1e12 / fps_milli));
    v.meta.frames.push_back(ref);
    v.frames.push_back(std::move(f));
  }
  if (v.frames.empty()) throw Error(ErrorCode::kSchemaViolation, "raw stream: no frames");
  v.meta.duration_ns = v.meta.frames.back().t_ns;
  return v;
}

void write_raw_stream(std::ostream& out, const std::vector<Frame>& frames, double fps) {
  if (frames.empty()) throw Error(ErrorCode::kInvalidArgument, "no frames");
  out.write("FVP1", 4);
  write_u32(out, static_cast<std::uint32_t>(frames.front().width));
  write_u32(out, static_cast<std::uint32_t>(frames.front().height));
  write_u32(out, static_cast<std::uint32_t>(std::llround(fps * 1000)));
  for (const auto& f : frames) {
    if (f.width != frames.front().width || f.height != frames.front().height)
      throw Error(ErrorCode::kInvalidArgument, "frames differ in size");
    out.write(reinterpret_cast<const char*>(f.pixels.data()),
              static_cast<std::streamsize>(f.pixels.size()));
  }
}

FrameLoader file_loader() {
  return [](const FrameRef& ref) { return read_ppm(ref.path); };
}

FrameLoader memory_loader(const RawVideo& video) {
  return [&video](const FrameRef& ref) {
    return video.frames.at(static_cast<std::size_t>(ref.index));
  };
}

// ---------------------------------------------------------------------------
// Conditions

std::string_view condition_name(ConditionKind kind) {
  switch (kind) {
    case ConditionKind::kFull: return "full";
    case ConditionKind::kGaze: return "gaze";
    case ConditionKind::kCenter: return "center";
    case ConditionKind::kDual: return "dual";
  }
  return "full";
}

ConditionKind parse_condition(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "full") return ConditionKind::kFull;
  if (lower == "gaze") return ConditionKind::kGaze;
  if (lower == "center") return ConditionKind::kCenter;
  if (lower == "dual") return ConditionKind::kDual;
  throw Error(ErrorCode::kInvalidArgument, "unknown condition '" + std::string(name) + "'");
}

RenderedClip render_condition(const VideoMeta& meta, const GazeTrack* track,
                              const Condition& cond, const RenderOptions& opts,
                              const FrameLoader& loader) {
  const bool needs_gaze = cond.kind == ConditionKind::kGaze || cond.kind == ConditionKind::kDual;
  if (needs_gaze && track == nullptr)
    throw Error(ErrorCode::kInvalidArgument,
                std::string(condition_name(cond.kind)) + " condition requires a gaze track");
  if (cond.kind != ConditionKind::kFull &&
      (cond.crop_w > meta.width || cond.crop_h > meta.height))
    throw Error(ErrorCode::kCropLargerThanFrame, "crop exceeds frame of " + meta.video_id);
  if (cond.kind == ConditionKind::kDual &&
      (cond.peripheral_w > meta.width || cond.peripheral_h > meta.height))
    throw Error(ErrorCode::kUpscaleRequested, "peripheral view larger than frame");

  RenderedClip clip;
  clip.video_id = meta.video_id;
  clip.condition = cond;
  clip.fps = opts.fps;
  clip.frame_w = meta.width;
  clip.frame_h = meta.height;
  clip.sidecar_path = meta.sidecar_path;

  // A gaze track recorded at another resolution is rescaled to the video's.
  GazeTrack scaled;
  if (needs_gaze) {
    scaled = *track;
    if (scaled.frame_w != meta.width || scaled.frame_h != meta.height) {
      const double sx = static_cast<double>(meta.width) / scaled.frame_w;
      const double sy = static_cast<double>(meta.height) / scaled.frame_h;
      for (auto& s : scaled.samples) {
        s.x_px *= sx;
        s.y_px *= sy;
      }
      scaled.frame_w = meta.width;
      scaled.frame_h = meta.height;
    }
  }

  for (const auto& ref : select_frames(meta, opts.fps)) {
    RenderedFrame rf;
    rf.t_ns = ref.t_ns;
    rf.source_index = ref.index;
    switch (cond.kind) {
      case ConditionKind::kFull: break;
      case ConditionKind::kCenter:
        rf.region = center_region(meta.width, meta.height, cond.crop_w, cond.crop_h);
        break;
      case ConditionKind::kGaze:
      case ConditionKind::kDual:
        rf.region = crop_region(gaze_at(scaled, ref.t_ns, opts.policy), meta.width, meta.height,
                                cond.crop_w, cond.crop_h);
        break;
    }
    if (opts.with_pixels) {
      Frame full = loader(ref);
      if (full.width != meta.width || full.height != meta.height)
        throw Error(ErrorCode::kSchemaViolation,
                    "frame " + std::to_string(ref.index) + " of " + meta.video_id +
                        " does not match manifest dimensions");
      if (cond.kind == ConditionKind::kDual)
        rf.peripheral = area_downsample(full, cond.peripheral_w, cond.peripheral_h);
      rf.image = rf.region ? crop(full, *rf.region) : std::move(full);
    }
    clip.frames.push_back(std::move(rf));
  }
  return clip;
}

// ---------------------------------------------------------------------------
// Clip directories

void write_clip(RenderedClip& clip, const fs::path& dir) {
  fs::create_directories(dir);
  json frames = json::array();
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    auto& f = clip.frames[i];
    char name[64];
    std::snprintf(name, sizeof name, "frame_%04zu.ppm", i);
    json jf = {{"t_ns", f.t_ns}, {"source_index", f.source_index}, {"file", name}};
    if (!f.image.empty()) {
      write_ppm(f.image, dir / name);
      f.image_path = (dir / name).string();
    }
    if (f.peripheral) {
      std::snprintf(name, sizeof name, "frame_%04zu_peripheral.ppm", i);
      write_ppm(*f.peripheral, dir / name);
      f.peripheral_path = (dir / name).string();
      jf["peripheral_file"] = name;
    }
    if (f.region)
      jf["region"] = {{"x0", f.region->x0}, {"y0", f.region->y0}, {"w", f.region->w},
                      {"h", f.region->h}, {"clamped", f.region->clamped}};
    frames.push_back(std::move(jf));
  }
  json j = {{"video_id", clip.video_id},
            {"condition", condition_name(clip.condition.kind)},
            {"crop_w", clip.condition.crop_w},
            {"crop_h", clip.condition.crop_h},
            {"peripheral_w", clip.condition.peripheral_w},
            {"peripheral_h", clip.condition.peripheral_h},
            {"fps", clip.fps},
            {"frame_w", clip.frame_w},
            {"frame_h", clip.frame_h},
            {"frames", std::move(frames)}};
  if (clip.sidecar_path) j["sidecar"] = fs::absolute(*clip.sidecar_path).lexically_normal().string();
  write_file(dir / "clip.json", j.dump(2) + "\n");
}

RenderedClip read_clip(const fs::path& dir) {
  json j;
  try {
    j = json::parse(read_file(dir / "clip.json"));
    RenderedClip clip;
    clip.video_id = j.at("video_id").get<std::string>();
    clip.condition.kind = parse_condition(j.at("condition").get<std::string>());
    clip.condition.crop_w = j.at("crop_w").get<int>();
    clip.condition.crop_h = j.at("crop_h").get<int>();
    clip.condition.peripheral_w = j.value("peripheral_w", 448);
    clip.condition.peripheral_h = j.value("peripheral_h", 448);
    clip.fps = j.at("fps").get<double>();
    clip.frame_w = j.at("frame_w").get<int>();
    clip.frame_h = j.at("frame_h").get<int>();
    if (j.contains("sidecar")) clip.sidecar_path = j["sidecar"].get<std::string>();
    for (const auto& jf : j.at("frames")) {
      RenderedFrame f;
      f.t_ns = jf.at("t_ns").get<std::int64_t>();
      f.source_index = jf.value("source_index", 0);
      f.image_path = (dir / jf.at("file").get<std::string>()).string();
      if (jf.contains("peripheral_file"))
        f.peripheral_path = (dir / jf["peripheral_file"].get<std::string>()).string();
      if (jf.contains("region")) {
        const auto& r = jf["region"];
        f.region = CropRegion{r.at("x0").get<int>(), r.at("y0").get<int>(), r.at("w").get<int>(),
                              r.at("h").get<int>(), r.value("clamped", false)};
      }
      clip.frames.push_back(std::move(f));
    }
    return clip;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, (dir / "clip.json").string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

BudgetReport pixel_budget(const Condition& cond, int frame_w, int frame_h) {
  if (frame_w <= 0 || frame_h <= 0)
    throw Error(ErrorCode::kInvalidArgument, "frame dimensions must be positive");
  BudgetReport r;
  r.full_pixels = static_cast<std::int64_t>(frame_w) * frame_h;
  switch (cond.kind) {
    case ConditionKind::kFull: r.pixels_per_frame = r.full_pixels; break;
    case ConditionKind::kGaze:
    case ConditionKind::kCenter:
      r.pixels_per_frame = static_cast<std::int64_t>(cond.crop_w) * cond.crop_h;
      break;
    case ConditionKind::kDual:
      r.pixels_per_frame = static_cast<std::int64_t>(cond.crop_w) * cond.crop_h +
                           static_cast<std::int64_t>(cond.peripheral_w) * cond.peripheral_h;
      break;
  }
  r.ratio_vs_full = static_cast<double>(r.pixels_per_frame) / static_cast<double>(r.full_pixels);
  r.reduction_factor = static_cast<double>(r.full_pixels) / static_cast<double>(r.pixels_per_frame);
  return r;
}

}  // namespace fovea
