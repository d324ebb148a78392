#pragma once

// Blinded human-rating protocol: per-participant candidate permutations,
// opaque candidate ids, and the append-only ratings log.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "fovea/frame.hpp"
#include "fovea/stats.hpp"

namespace fovea {

inline constexpr int kRatingMin = 1;
inline constexpr int kRatingMax = 10;

// SplitMix64 finaliser over an FNV-1a hash of the parts, separated by 0x1f.
std::uint64_t stable_hash(std::initializer_list<std::string_view> parts);

// Deterministic uniform generator (SplitMix64) with an unbiased bounded draw;
// independent of the standard library's distribution implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  std::uint64_t below(std::uint64_t bound);  // uniform in [0, bound)

 private:
  std::uint64_t state_;
};

// Opaque id: "c" followed by 16 hex digits derived from (seed, task, condition).
std::string candidate_id(std::uint64_t seed, std::string_view task_id, ConditionKind condition);

struct RatingSource {
  std::string task_id;
  std::string full_video_ref;
  std::vector<std::pair<ConditionKind, std::string>> descriptions;  // condition, text
};

struct RatingCandidate {
  std::string candidate_id;
  std::string text;
};

struct RatingTask {
  std::string task_id;
  std::string full_video_ref;
  std::vector<RatingCandidate> candidates;
  int scale_min = kRatingMin;
  int scale_max = kRatingMax;
};

std::vector<RatingTask> blinded_rating_sequence(const std::vector<RatingSource>& sources,
                                                std::string_view participant_id,
                                                std::uint64_t seed);

struct CandidateKey {
  std::string task_id;
  ConditionKind condition;
};

// Server-side map candidate_id -> (task, condition).
std::map<std::string, CandidateKey> candidate_index(const std::vector<RatingSource>& sources,
                                                    std::uint64_t seed);

struct RatingRecord {
  std::string participant_id;
  std::string task_id;
  std::string candidate_id;
  int score = 0;
  std::string free_text;
  std::int64_t t_submitted = 0;  // ms since epoch
};

struct RatingRow {
  std::string task_id;
  ConditionKind condition = ConditionKind::kFull;
  Aggregate stats;
};

// Per task x condition score aggregates, ordered by (task_id, condition).
std::vector<RatingRow> aggregate_ratings(const std::vector<RatingRecord>& records,
                                         const std::map<std::string, CandidateKey>& index);

// Append-only JSON-lines log with an in-memory index of the latest record per
// (participant, task, candidate). Opening replays the file.
class RatingLog {
 public:
  explicit RatingLog(std::filesystem::path path);

  // Returns true when the record superseded an earlier one.
  bool append(const RatingRecord& record);
  std::vector<RatingRecord> latest() const;  // ordered by key
  std::size_t lines() const;
  bool has_rating(std::string_view participant, std::string_view task,
                  std::string_view candidate) const;
  const std::filesystem::path& path() const { return path_; }

 private:
  using Key = std::tuple<std::string, std::string, std::string>;
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::ofstream out_;
  std::map<Key, RatingRecord> latest_;
  std::size_t lines_ = 0;
};

}  // namespace fovea
