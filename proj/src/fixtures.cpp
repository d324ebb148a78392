#include "fovea/fixtures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "fovea/error.hpp"
#include "fovea/frame.hpp"
#include "fovea/mllm.hpp"
#include "fovea/rating.hpp"
#include "io_util.hpp"

namespace fovea {

namespace fs = std::filesystem;

namespace {

struct Vocab {
  const char* name;
  const char* action;
};

constexpr std::array<Vocab, 16> kTools = {{
    {"whisk", "stir the batter"},
    {"knife", "cut the onion"},
    {"spatula", "flip the pancake"},
    {"measuring cup", "measure the flour"},
    {"wrench", "tighten the bolt"},
    {"screwdriver", "loosen the screw"},
    {"ladle", "pour the soup"},
    {"grater", "grate the cheese"},
    {"peeler", "peel the carrot"},
    {"sandpaper", "sand the plank"},
    {"pencil", "mark the cut line"},
    {"drill", "drill the pilot hole"},
    {"rolling pin", "roll out the dough"},
    {"kitchen scale", "weigh the sugar"},
    {"sponge", "wipe the counter"},
    {"spirit level", "check the shelf"},
}};

constexpr std::array<Vocab, 4> kMiddle = {{
    {"cutting board", "lay out the ingredients"},
    {"tray", "arrange the parts"},
    {"notebook", "read the instructions"},
    {"work mat", "clear the workspace"},
}};

constexpr std::array<Vocab, 5> kDistractors = {{
    {"coffee mug", "set aside the drink"},
    {"phone", "silence the notifications"},
    {"potted plant", "move the decoration"},
    {"radio", "turn down the music"},
    {"wall calendar", "note the date"},
}};

constexpr std::int64_t kSecond = 1'000'000'000LL;
constexpr std::int64_t kWindow = 2 * kSecond;

void fill_box(Frame& f, int x0, int y0, int w, int h, std::uint64_t colour) {
  for (int y = std::max(0, y0); y < std::min(f.height, y0 + h); ++y)
    for (int x = std::max(0, x0); x < std::min(f.width, x0 + w); ++x) {
      std::uint8_t* p = f.px(x, y);
      p[0] = static_cast<std::uint8_t>(colour);
      p[1] = static_cast<std::uint8_t>(colour >> 8);
      p[2] = static_cast<std::uint8_t>(colour >> 16);
    }
}

}  // namespace

FixtureSet generate_fixtures(const fs::path& root, const FixtureOptions& opts) {
  const int S = opts.frame_size;
  const int C = opts.crop;
  if (opts.videos < 1 || S < 64 || C < 16 || C * 2 > S)
    throw Error(ErrorCode::kInvalidArgument, "unsupported fixture geometry");
  const int obj = std::max(8, S / 16);
  const int lo = (S - C) / 2;  // central crop is [lo, lo + C)

  FixtureSet set;
  set.root = root;
  fs::create_directories(root);
  std::string yaml = "# Synthetic fixture study; regenerate with `fovea fixtures`.\n";
  yaml += "seed: " + std::to_string(opts.seed) + "\n";
  yaml += "conditions: [full, gaze, center, dual]\n";
  yaml += "metrics: [bleu, rouge, embed, judge]\n";
  yaml += "crop: " + std::to_string(C) + "\nperipheral: " + std::to_string(C) + "\n";
  yaml += "fps: 1\nworkers: 4\nbackend: {kind: mock}\njudge: {kind: mock}\nembedding: {kind: mock}\n";
  yaml += "tasks:\n";

  const char* task_labels[] = {"cooking", "repair"};
  for (int v = 0; v < opts.videos; ++v) {
    SplitMix64 rng(stable_hash({"fixture", std::to_string(opts.seed), std::to_string(v)}));
    char id[16];
    std::snprintf(id, sizeof id, "fx%02d", v + 1);
    const std::string video_id = id;
    set.video_ids.push_back(video_id);
    const fs::path dir = root / video_id;
    fs::create_directories(dir);

    Annotation ann;
    ann.video_id = video_id;
    struct Fixation {
      double gx, gy;
    };
    std::vector<Fixation> fixations;

    // Fixated tools in the side bands, one per 2 s window.
    const int n_tools = 3 + v % 2;
    std::array<int, 4> bands = {0, 1, 2, 3};
    for (int i = 3; i > 0; --i) std::swap(bands[i], bands[rng.below(i + 1)]);
    std::vector<int> tool_ids(kTools.size());
    for (std::size_t i = 0; i < tool_ids.size(); ++i) tool_ids[i] = static_cast<int>(i);
    for (std::size_t i = tool_ids.size() - 1; i > 0; --i)
      std::swap(tool_ids[i], tool_ids[rng.below(i + 1)]);
    for (int k = 0; k < n_tools; ++k) {
      const int near = S / 8 + static_cast<int>(rng.below(static_cast<std::uint64_t>(S / 8)));
      const int along = S / 2 - C / 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(C / 2)));
      int cx = 0, cy = 0;
      switch (bands[k]) {
        case 0: cx = near; cy = along; break;
        case 1: cx = S - near; cy = along; break;
        case 2: cx = along; cy = near; break;
        default: cx = along; cy = S - near; break;
      }
      const auto& t = kTools[tool_ids[k]];
      AnnotatedObject o{t.name, t.action, cx - obj / 2, cy - obj / 2, obj, obj,
                        k * kWindow, (k + 1) * kWindow - 1};
      ann.objects.push_back(o);
      ann.steps.push_back({k * kWindow, std::string(t.action) + " with the " + t.name});
      fixations.push_back({static_cast<double>(cx), static_cast<double>(cy)});
    }
    int windows = n_tools;
    // Even videos end with a look at the middle of the bench.
    if (v % 2 == 0) {
      fixations.push_back({S / 2.0, S / 2.0});
      ++windows;
    }
    const std::int64_t end_ns = windows * kWindow;

    const int n_middle = 1 + (v % 3 == 0 ? 1 : 0);
    for (int k = 0; k < n_middle; ++k) {
      const auto& m = kMiddle[(v + k) % kMiddle.size()];
      const int cx = lo + C / 4 + k * (C / 2);
      const int cy = S / 2;
      ann.objects.push_back({m.name, m.action, cx - obj / 2, cy - obj / 2, obj, obj, 0, end_ns});
    }
    const int n_distract = 1 + v % 2;
    for (int k = 0; k < n_distract; ++k) {
      const auto& d = kDistractors[(v + 2 * k) % kDistractors.size()];
      const int x0 = k == 0 ? 2 : S - obj - 2;
      const int y0 = k == 0 ? 2 : S - obj - 2;
      ann.objects.push_back({d.name, d.action, x0, y0, obj, obj, 0, end_ns});
    }
    save_annotation(ann, dir / "annotation.json");

    // One image per window; frames within a window share it.
    std::vector<std::string> window_files;
    for (int w = 0; w < windows; ++w) {
      Frame f(S, S);
      for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
          std::uint8_t* p = f.px(x, y);
          p[0] = static_cast<std::uint8_t>(60 + (x * 80) / S);
          p[1] = static_cast<std::uint8_t>(60 + (y * 80) / S);
          p[2] = 90;
        }
      for (const auto& o : ann.objects) {
        if (o.t_start_ns > w * kWindow || o.t_end_ns < w * kWindow) continue;
        fill_box(f, o.x0, o.y0, o.w, o.h, stable_hash({o.name}));
      }
      char name[32];
      std::snprintf(name, sizeof name, "window_%02d.ppm", w);
      write_ppm(f, dir / name);
      window_files.push_back((dir / name).string());
    }

    VideoMeta meta;
    meta.video_id = video_id;
    meta.width = S;
    meta.height = S;
    meta.native_fps = opts.native_fps;
    meta.sidecar_path = (dir / "annotation.json").string();
    const auto frame_step = static_cast<std::int64_t>(std::llround(1e9 / opts.native_fps));
    for (int i = 0; static_cast<std::int64_t>(i) * frame_step < end_ns; ++i) {
      const std::int64_t t = i * frame_step;
      meta.frames.push_back({i, t, window_files[static_cast<std::size_t>(t / kWindow)]});
    }
    meta.duration_ns = meta.frames.back().t_ns;
    save_manifest(meta, dir / "manifest.json");

    // 50 Hz gaze with +-2 px jitter and periodic low-confidence blink samples.
    std::string csv = "timestamp_ns,x_px,y_px,confidence\n";
    for (std::int64_t t = 0; t <= end_ns; t += 20'000'000) {
      const auto w = static_cast<std::size_t>(std::min<std::int64_t>(t / kWindow, windows - 1));
      const double jx = static_cast<double>(rng.below(5)) - 2.0;
      const double jy = static_cast<double>(rng.below(5)) - 2.0;
      const bool blink = (t / 20'000'000) % 37 == 36;
      char row[96];
      if (blink) {
        std::snprintf(row, sizeof row, "%lld,0.0,0.0,0.05\n", static_cast<long long>(t));
      } else {
        std::snprintf(row, sizeof row, "%lld,%.1f,%.1f,0.95\n", static_cast<long long>(t),
                      fixations[w].gx + jx, fixations[w].gy + jy);
      }
      csv += row;
    }
    write_file(dir / "gaze.csv", csv);

  }

  // Group videos by task label in the config.
  for (int t = 0; t < std::min(2, opts.videos); ++t) {
    const std::string label = task_labels[t];
    yaml += "  - label: " + label + "\n    videos:\n";
    for (int v = 0; v < opts.videos; ++v) {
      if (std::string(task_labels[v % 2]) != label) continue;
      const auto& id = set.video_ids[static_cast<std::size_t>(v)];
      yaml += "      - {manifest: " + id + "/manifest.json, gaze: " + id + "/gaze.csv}\n";
    }
  }
  set.study_config = root / "study.yaml";
  write_file(set.study_config, yaml);
  return set;
}

}  // namespace fovea
