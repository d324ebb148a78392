#pragma once

// Synthetic annotated videos for end-to-end runs with the mock backend.
//
// Each video is a sequence of 2 s fixation windows. In every window one task
// object sits in a band beside the frame centre, outside the central crop,
// and the wearer looks at it. Some objects sit inside the central crop and are
// present throughout, and distractors sit in the corners where the gaze never
// goes. Full sees everything, Gaze sees the fixated objects and Center sees
// only the central ones, so Gaze > Center on every similarity metric.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fovea {

struct FixtureOptions {
  int videos = 12;
  int frame_size = 480;
  int crop = 160;
  double native_fps = 2.0;
  std::uint64_t seed = 7;
};

struct FixtureSet {
  std::filesystem::path root;
  std::filesystem::path study_config;  // study.yaml referencing every video
  std::vector<std::string> video_ids;
};

// Writes <root>/<video_id>/{manifest.json,gaze.csv,annotation.json,*.ppm}
// and <root>/study.yaml. Output is a pure function of the options.
FixtureSet generate_fixtures(const std::filesystem::path& root, const FixtureOptions& opts = {});

}  // namespace fovea
