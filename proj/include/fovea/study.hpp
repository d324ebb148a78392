#pragma once

// End-to-end experiment: render every condition of every video, describe,
// score against the Full description, aggregate and test.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fovea/frame.hpp"
#include "fovea/metrics.hpp"
#include "fovea/mllm.hpp"
#include "fovea/rating.hpp"
#include "fovea/stats.hpp"

namespace fovea {

struct VideoInput {
  std::string manifest;
  std::string gaze_csv;  // may be empty when no gaze-driven condition is requested
};

struct TaskInput {
  std::string label;
  std::vector<VideoInput> videos;
};

enum class EmbeddingKind { kMock, kHttp };

struct StudyConfig {
  std::vector<TaskInput> tasks;
  std::vector<ConditionKind> conditions = {ConditionKind::kFull, ConditionKind::kGaze,
                                           ConditionKind::kCenter};
  std::vector<MetricKind> metrics = {MetricKind::kBleu, MetricKind::kRougeL, MetricKind::kEmbedCos,
                                     MetricKind::kLlmJudge};
  BackendConfig backend;
  BackendConfig judge;  // kMock selects MockJudge
  EmbeddingKind embedding = EmbeddingKind::kMock;
  std::string embedding_endpoint;
  std::optional<std::uint64_t> seed;
  int crop_w = 448;
  int crop_h = 448;
  int peripheral_w = 448;
  int peripheral_h = 448;
  double fps = 1.0;
  std::string prompt_preset = "paper_procedure";
  int workers = 4;
  std::optional<std::string> ratings_log;

  void validate() const;
  Condition condition(ConditionKind kind) const {
    return Condition{kind, crop_w, crop_h, peripheral_w, peripheral_h};
  }
};

// YAML (or JSON) config; relative paths resolve against the file's directory.
StudyConfig load_study_config(const std::filesystem::path& path);

struct DescriptionCell {
  ConditionKind condition = ConditionKind::kFull;
  std::optional<Description> description;
  std::string error;  // set when description is absent
};

struct VideoResult {
  std::string task;
  std::string video_id;
  std::string manifest;
  std::string gaze_csv;
  std::int64_t duration_ns = 0;
  std::vector<DescriptionCell> descriptions;  // in config condition order
  std::string error;                          // set when the video could not be loaded
};

struct ConditionScore {
  std::string task;
  std::string video_id;
  ConditionKind condition = ConditionKind::kFull;
  MetricKind metric = MetricKind::kBleu;
  std::optional<double> value;
};

struct MetricSummary {
  std::string task;
  ConditionKind condition = ConditionKind::kFull;
  MetricKind metric = MetricKind::kBleu;
  Aggregate stats;  // n == 0 when every cell is missing
  std::size_t missing = 0;
};

struct TTestRow {
  std::string task;  // kAllTasks for the pooled test
  MetricKind metric = MetricKind::kBleu;
  ConditionKind cond_a = ConditionKind::kGaze;
  ConditionKind cond_b = ConditionKind::kCenter;
  TTestResult result;
};

struct LengthRow {
  std::string task;
  ConditionKind condition = ConditionKind::kFull;
  Aggregate stats;
};

inline constexpr std::string_view kAllTasks = "ALL";

struct StudyReport {
  std::uint64_t seed = 0;
  std::vector<ConditionKind> conditions;
  std::vector<MetricKind> metrics;
  std::vector<VideoResult> videos;
  std::vector<ConditionScore> scores;
  std::vector<MetricSummary> summaries;
  std::vector<TTestRow> ttests;
  std::vector<LengthRow> lengths;
  std::optional<double> duration_length_corr;
  std::size_t duration_length_n = 0;
  std::vector<RatingRow> ratings;
};

StudyReport run_study(const StudyConfig& cfg);

// Recomputes summaries, t-tests, length statistics and the correlation from
// report.videos and report.scores.
void summarize(StudyReport& report);

// Rating sources (one per video with >= 2 descriptions) for the blinded study.
std::vector<RatingSource> rating_sources(const StudyReport& report);

nlohmann::json report_to_json(const StudyReport& report);
StudyReport report_from_json(const nlohmann::json& j);

// Writes report.json, scores.csv, lengths.csv and ttests.csv.
std::vector<std::filesystem::path> export_report(const StudyReport& report,
                                                 const std::filesystem::path& dir);

}  // namespace fovea
