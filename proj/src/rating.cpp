#include "fovea/rating.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "fovea/error.hpp"
#include "io_util.hpp"
#include "text_util.hpp"

namespace fovea {

using json = nlohmann::json;

namespace {

std::uint64_t splitmix_finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t stable_hash(std::initializer_list<std::string_view> parts) {
  std::uint64_t h = 1469598103934665603ULL;
  for (auto part : parts) {
    for (unsigned char c : part) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0x1f;
    h *= 1099511628211ULL;
  }
  return splitmix_finalize(h);
}

std::uint64_t SplitMix64::next() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return splitmix_finalize(state_);
}

std::uint64_t SplitMix64::below(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorCode::kInvalidArgument, "bound must be > 0");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  for (;;) {
    const std::uint64_t v = next();
    if (v < limit) return v % bound;
  }
}

std::string candidate_id(std::uint64_t seed, std::string_view task_id, ConditionKind condition) {
  const std::string seed_s = std::to_string(seed);
  const std::uint64_t h = stable_hash({"candidate", seed_s, task_id, condition_name(condition)});
  char buf[24];
  std::snprintf(buf, sizeof buf, "c%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<RatingTask> blinded_rating_sequence(const std::vector<RatingSource>& sources,
                                                std::string_view participant_id,
                                                std::uint64_t seed) {
  const std::string seed_s = std::to_string(seed);
  std::vector<RatingTask> out;
  out.reserve(sources.size());
  for (const auto& src : sources) {
    if (src.descriptions.size() < 2)
      throw Error(ErrorCode::kInsufficientConditions,
                  "task " + src.task_id + " has fewer than two descriptions");
    RatingTask task;
    task.task_id = src.task_id;
    task.full_video_ref = src.full_video_ref;
    for (const auto& [cond, text] : src.descriptions)
      task.candidates.push_back({candidate_id(seed, src.task_id, cond), text});
    // Canonical order before shuffling, so the permutation does not depend on
    // how the caller listed the conditions.
    std::sort(task.candidates.begin(), task.candidates.end(),
              [](const RatingCandidate& a, const RatingCandidate& b) {
                return a.candidate_id < b.candidate_id;
              });
    SplitMix64 rng(stable_hash({"order", seed_s, participant_id, src.task_id}));
    for (std::size_t i = task.candidates.size(); i > 1; --i)
      std::swap(task.candidates[i - 1], task.candidates[rng.below(i)]);
    out.push_back(std::move(task));
  }
  return out;
}

std::map<std::string, CandidateKey> candidate_index(const std::vector<RatingSource>& sources,
                                                    std::uint64_t seed) {
  std::map<std::string, CandidateKey> index;
  for (const auto& src : sources)
    for (const auto& [cond, text] : src.descriptions)
      index.emplace(candidate_id(seed, src.task_id, cond), CandidateKey{src.task_id, cond});
  return index;
}

std::vector<RatingRow> aggregate_ratings(const std::vector<RatingRecord>& records,
                                         const std::map<std::string, CandidateKey>& index) {
  std::map<std::pair<std::string, int>, std::vector<double>> groups;
  for (const auto& r : records) {
    const auto it = index.find(r.candidate_id);
    if (it == index.end() || it->second.task_id != r.task_id) continue;
    groups[{r.task_id, static_cast<int>(it->second.condition)}].push_back(r.score);
  }
  std::vector<RatingRow> rows;
  for (const auto& [key, scores] : groups)
    rows.push_back({key.first, static_cast<ConditionKind>(key.second), aggregate(scores)});
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

json record_to_json(const RatingRecord& r) {
  return {{"participant_id", r.participant_id}, {"task_id", r.task_id},
          {"candidate_id", r.candidate_id},     {"score", r.score},
          {"free_text", r.free_text},           {"t_submitted", r.t_submitted}};
}

RatingRecord record_from_json(const json& j) {
  RatingRecord r;
  r.participant_id = j.at("participant_id").get<std::string>();
  r.task_id = j.at("task_id").get<std::string>();
  r.candidate_id = j.at("candidate_id").get<std::string>();
  r.score = j.at("score").get<int>();
  r.free_text = j.value("free_text", std::string());
  r.t_submitted = j.value("t_submitted", std::int64_t{0});
  return r;
}

}  // namespace

RatingLog::RatingLog(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    const std::string data = read_file(path_);
    std::size_t lineno = 0;
    for (auto line : split_lines(data)) {
      ++lineno;
      line = trim(line);
      if (line.empty()) continue;
      try {
        const auto j = json::parse(line);
        RatingRecord r = record_from_json(j);
        latest_[{r.participant_id, r.task_id, r.candidate_id}] = std::move(r);
        ++lines_;
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kSchemaViolation,
                    path_.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  } else if (path_.has_parent_path()) {
    std::filesystem::create_directories(path_.parent_path());
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorCode::kIoFailure, "cannot open ratings log " + path_.string());
}

bool RatingLog::append(const RatingRecord& record) {
  if (record.score < kRatingMin || record.score > kRatingMax)
    throw Error(ErrorCode::kScoreOutOfRange, std::to_string(record.score));
  std::lock_guard lock(mu_);
  Key key{record.participant_id, record.task_id, record.candidate_id};
  json line = record_to_json(record);
  const auto it = latest_.find(key);
  const bool superseded = it != latest_.end();
  if (superseded) line["supersedes_score"] = it->second.score;
  out_ << line.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::kIoFailure, "write to ratings log failed");
  latest_[key] = record;
  ++lines_;
  return superseded;
}

std::vector<RatingRecord> RatingLog::latest() const {
  std::lock_guard lock(mu_);
  std::vector<RatingRecord> out;
  out.reserve(latest_.size());
  for (const auto& [k, r] : latest_) out.push_back(r);
  return out;
}

std::size_t RatingLog::lines() const {
  std::lock_guard lock(mu_);
  return lines_;
}

bool RatingLog::has_rating(std::string_view participant, std::string_view task,
                           std::string_view candidate) const {
  std::lock_guard lock(mu_);
  return latest_.count({std::string(participant), std::string(task), std::string(candidate)}) > 0;
}

}  // namespace fovea
