#pragma once

// JSON-over-HTTP service for stop-and-ask sessions and the blinded rating
// study. Endpoints:
//
//   POST /sessions                      {video_id, sidecar?, instructor_text?}
//   POST /sessions/{id}/frames          {t_ns, path?}
//   POST /sessions/{id}/ask             {question}
//   GET  /ratings/next?participant=P
//   POST /ratings                       {participant_id, task_id, candidate_id, score, free_text?}
//   POST /ratings/play                  {participant_id, task_id}
//   GET  /report
//   GET  /videos/{id}                   manifest summary
//   GET  /videos/{id}/overlay?t_ns=T    gaze point and crop rectangle at T
//   GET  /videos/{id}/frames/{index}    PPM bytes of one source frame
//
// Handlers are also callable directly, which is how most tests drive them.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "fovea/mllm.hpp"
#include "fovea/rating.hpp"
#include "fovea/study.hpp"

namespace httplib {
class Server;
}

namespace fovea {

struct ServiceConfig {
  std::filesystem::path study_dir;  // holds report.json; ratings.jsonl is written here
  BackendConfig backend;
  std::optional<std::uint64_t> seed;  // defaults to the report's seed
  std::chrono::seconds session_ttl{3600};
  int crop = 448;
  std::filesystem::path static_dir;  // optional console assets served at /
};

struct Session {
  std::string session_id;
  std::string video_id;
  std::vector<std::int64_t> frame_times;
  std::vector<std::string> frame_paths;
  std::optional<std::string> sidecar_path;
  std::optional<Description> instructor;
  std::chrono::steady_clock::time_point last_used;
  std::mutex mu;
};

class AskService {
 public:
  explicit AskService(ServiceConfig cfg);
  ~AskService();

  nlohmann::json create_session(const nlohmann::json& body);
  nlohmann::json add_frame(const std::string& session_id, const nlohmann::json& body);
  nlohmann::json handle_ask(const std::string& session_id, const nlohmann::json& body);
  nlohmann::json next_rating(const std::string& participant_id);
  nlohmann::json submit_rating(const nlohmann::json& body);
  nlohmann::json record_play(const nlohmann::json& body);
  nlohmann::json report() const;
  nlohmann::json video_info(const std::string& video_id) const;
  nlohmann::json overlay(const std::string& video_id, std::int64_t t_ns) const;

  // Drops sessions idle for longer than the TTL; returns how many were removed.
  std::size_t expire_sessions(std::chrono::steady_clock::time_point now);
  std::size_t session_count() const;

  const std::vector<RatingSource>& rating_sources() const { return sources_; }
  std::uint64_t seed() const { return seed_; }
  const RatingLog& ratings() const { return *log_; }

  void mount(httplib::Server& server);
  // Binds and serves until stop(); returns false when the port cannot be bound.
  bool listen(const std::string& host, int port);
  int bind_any_port(const std::string& host);  // for tests: bind, then listen_after_bind()
  bool listen_after_bind();
  void stop();

 private:
  std::shared_ptr<Session> find_session(const std::string& id);
  const VideoResult* find_video(const std::string& video_id) const;

  ServiceConfig cfg_;
  std::uint64_t seed_ = 0;
  StudyReport report_;
  std::vector<RatingSource> sources_;
  std::map<std::string, CandidateKey> index_;
  std::unique_ptr<RatingLog> log_;
  std::unique_ptr<DescriptionBackend> backend_;

  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;

  mutable std::mutex plays_mu_;
  std::map<std::pair<std::string, std::string>, int> plays_;  // (participant, task) -> count

  std::unique_ptr<httplib::Server> server_;
};

}  // namespace fovea
