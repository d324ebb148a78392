#include "fovea/service.hpp"

#include <algorithm>
#include <random>

#include <httplib.h>

#include "fovea/error.hpp"
#include "io_util.hpp"

namespace fovea {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string random_id() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  char buf[40];
  std::snprintf(buf, sizeof buf, "s%016llx%016llx", static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buf;
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

template <typename T>
T field(const json& body, const char* key) {
  if (!body.is_object() || !body.contains(key))
    throw Error(ErrorCode::kInvalidArgument, std::string("missing field '") + key + "'");
  try {
    return body.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::kInvalidArgument, std::string("field '") + key + "' has the wrong type");
  }
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSession:
    case ErrorCode::kUnknownTask:
    case ErrorCode::kUnknownCandidate:
    case ErrorCode::kMissingFrameFile: return 404;
    case ErrorCode::kBackendUnavailable: return 502;
    case ErrorCode::kTimeout: return 504;
    case ErrorCode::kIoFailure: return 500;
    default: return 400;
  }
}

}  // namespace

AskService::AskService(ServiceConfig cfg) : cfg_(std::move(cfg)) {
  const fs::path report_path = cfg_.study_dir / "report.json";
  if (fs::exists(report_path)) {
    try {
      report_ = report_from_json(json::parse(read_file(report_path)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kSchemaViolation, report_path.string() + ": " + e.what());
    }
  }
  seed_ = cfg_.seed ? *cfg_.seed : report_.seed;
  sources_ = fovea::rating_sources(report_);
  index_ = candidate_index(sources_, seed_);
  log_ = std::make_unique<RatingLog>(cfg_.study_dir / "ratings.jsonl");
  backend_ = make_backend(cfg_.backend);

  const fs::path plays = cfg_.study_dir / "plays.jsonl";
  if (fs::exists(plays)) {
    const std::string data = read_file(plays);
    std::size_t start = 0;
    while (start < data.size()) {
      auto nl = data.find('\n', start);
      if (nl == std::string::npos) nl = data.size();
      const auto line = data.substr(start, nl - start);
      start = nl + 1;
      if (line.empty()) continue;
      const auto j = json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;
      ++plays_[{j.value("participant_id", ""), j.value("task_id", "")}];
    }
  }
}

AskService::~AskService() { stop(); }

// ---------------------------------------------------------------------------
// Sessions

std::shared_ptr<Session> AskService::find_session(const std::string& id) {
  std::lock_guard lock(sessions_mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::kUnknownSession, id);
  return it->second;
}

const VideoResult* AskService::find_video(const std::string& video_id) const {
  for (const auto& v : report_.videos)
    if (v.video_id == video_id) return &v;
  return nullptr;
}

json AskService::create_session(const json& body) {
  expire_sessions(std::chrono::steady_clock::now());
  auto s = std::make_shared<Session>();
  s->session_id = random_id();
  s->video_id = field<std::string>(body, "video_id");
  if (body.contains("sidecar")) {
    s->sidecar_path = field<std::string>(body, "sidecar");
  } else if (const auto* v = find_video(s->video_id); v != nullptr && !v->manifest.empty()) {
    try {
      s->sidecar_path = load_manifest(v->manifest).sidecar_path;
    } catch (const Error&) {
      // Sessions without ground truth still work with a real backend.
    }
  }
  if (body.contains("instructor_text")) {
    Description d;
    d.raw_text = field<std::string>(body, "instructor_text");
    d.char_len = utf8_length(d.raw_text);
    d.steps = parse_timed_steps(d.raw_text);
    s->instructor = std::move(d);
  } else if (body.contains("instructor_video_id")) {
    const auto id = field<std::string>(body, "instructor_video_id");
    const auto* v = find_video(id);
    if (v == nullptr) throw Error(ErrorCode::kUnknownTask, "no video " + id);
    for (const auto& d : v->descriptions)
      if (d.condition == ConditionKind::kFull && d.description) s->instructor = d.description;
  }
  s->last_used = std::chrono::steady_clock::now();
  json out = {{"session_id", s->session_id}, {"video_id", s->video_id}, {"frames_so_far", 0},
              {"has_instructor", s->instructor.has_value()}};
  std::lock_guard lock(sessions_mu_);
  sessions_[s->session_id] = std::move(s);
  return out;
}

json AskService::add_frame(const std::string& session_id, const json& body) {
  auto s = find_session(session_id);
  const auto t = field<std::int64_t>(body, "t_ns");
  if (t < 0) throw Error(ErrorCode::kInvalidArgument, "t_ns must be >= 0");
  std::lock_guard lock(s->mu);
  if (!s->frame_times.empty() && t < s->frame_times.back())
    throw Error(ErrorCode::kInvalidArgument, "frames must arrive in time order");
  s->frame_times.push_back(t);
  s->frame_paths.push_back(body.value("path", std::string()));
  s->last_used = std::chrono::steady_clock::now();
  return {{"session_id", session_id}, {"frames_so_far", s->frame_times.size()}};
}

json AskService::handle_ask(const std::string& session_id, const json& body) {
  auto s = find_session(session_id);
  const auto question = field<std::string>(body, "question");
  RenderedClip context;
  std::optional<Description> instructor;
  {
    std::lock_guard lock(s->mu);
    if (s->frame_times.empty())
      throw Error(ErrorCode::kInvalidArgument, "session has no frames yet");
    context.video_id = s->video_id;
    context.sidecar_path = s->sidecar_path;
    for (std::size_t i = 0; i < s->frame_times.size(); ++i) {
      RenderedFrame f;
      f.t_ns = s->frame_times[i];
      f.source_index = static_cast<int>(i);
      f.image_path = s->frame_paths[i];
      context.frames.push_back(std::move(f));
    }
    instructor = s->instructor;
    s->last_used = std::chrono::steady_clock::now();
  }
  const std::string answer =
      fovea::ask(context, question, *backend_, instructor ? &*instructor : nullptr);
  json cited = json::array(), cited_ns = json::array();
  for (const auto& step : parse_timed_steps(answer)) {
    cited.push_back(static_cast<double>(step.t_ns) / 1e9);
    cited_ns.push_back(step.t_ns);
  }
  return {{"answer", answer}, {"cited_timestamps", cited}, {"cited_timestamps_ns", cited_ns}};
}

std::size_t AskService::expire_sessions(std::chrono::steady_clock::time_point now) {
  std::lock_guard lock(sessions_mu_);
  std::size_t removed = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    bool stale;
    {
      std::lock_guard slock(it->second->mu);
      stale = now - it->second->last_used > cfg_.session_ttl;
    }
    if (stale) {
      it = sessions_.erase(it);
      ++removed;
    } else {
      ++it;
    }
  }
  return removed;
}

std::size_t AskService::session_count() const {
  std::lock_guard lock(sessions_mu_);
  return sessions_.size();
}

// ---------------------------------------------------------------------------
// Ratings

json AskService::next_rating(const std::string& participant_id) {
  if (participant_id.empty()) throw Error(ErrorCode::kInvalidArgument, "participant is required");
  const auto sequence = blinded_rating_sequence(sources_, participant_id, seed_);
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    const auto& task = sequence[i];
    const bool complete = std::all_of(
        task.candidates.begin(), task.candidates.end(), [&](const RatingCandidate& c) {
          return log_->has_rating(participant_id, task.task_id, c.candidate_id);
        });
    if (complete) continue;
    json candidates = json::array();
    for (const auto& c : task.candidates)
      candidates.push_back({{"candidate_id", c.candidate_id}, {"text", c.text}});
    return {{"done", false},
            {"position", i},
            {"total", sequence.size()},
            {"task",
             {{"task_id", task.task_id},
              {"full_video_ref", task.full_video_ref},
              {"scale", {{"min", task.scale_min}, {"max", task.scale_max}}},
              {"candidates", std::move(candidates)}}}};
  }
  return {{"done", true}, {"total", sequence.size()}};
}

json AskService::submit_rating(const json& body) {
  RatingRecord r;
  r.participant_id = field<std::string>(body, "participant_id");
  r.task_id = field<std::string>(body, "task_id");
  r.candidate_id = field<std::string>(body, "candidate_id");
  r.score = field<int>(body, "score");
  r.free_text = body.value("free_text", std::string());
  if (r.participant_id.empty()) throw Error(ErrorCode::kInvalidArgument, "participant_id is empty");
  const bool known_task = std::any_of(sources_.begin(), sources_.end(),
                                      [&](const RatingSource& s) { return s.task_id == r.task_id; });
  if (!known_task) throw Error(ErrorCode::kUnknownTask, r.task_id);
  const auto it = index_.find(r.candidate_id);
  if (it == index_.end() || it->second.task_id != r.task_id)
    throw Error(ErrorCode::kUnknownCandidate, r.candidate_id);
  if (r.score < kRatingMin || r.score > kRatingMax)
    throw Error(ErrorCode::kScoreOutOfRange, std::to_string(r.score));
  r.t_submitted = now_ms();
  const bool superseded = log_->append(r);
  return {{"status", "ok"}, {"superseded", superseded}};
}

json AskService::record_play(const json& body) {
  const auto participant = field<std::string>(body, "participant_id");
  const auto task = field<std::string>(body, "task_id");
  if (std::none_of(sources_.begin(), sources_.end(),
                   [&](const RatingSource& s) { return s.task_id == task; }))
    throw Error(ErrorCode::kUnknownTask, task);
  std::lock_guard lock(plays_mu_);
  const json line = {{"participant_id", participant}, {"task_id", task}, {"t", now_ms()}};
  std::ofstream out(cfg_.study_dir / "plays.jsonl", std::ios::app);
  out << line.dump() << '\n';
  return {{"status", "ok"}, {"plays", ++plays_[{participant, task}]}};
}

json AskService::report() const {
  json ratings = json::array();
  for (const auto& row : aggregate_ratings(log_->latest(), index_))
    ratings.push_back({{"task_id", row.task_id},
                       {"condition", condition_name(row.condition)},
                       {"mean", row.stats.mean},
                       {"std", row.stats.std},
                       {"n", row.stats.n}});
  json plays = json::array();
  {
    std::lock_guard lock(plays_mu_);
    for (const auto& [key, count] : plays_)
      plays.push_back({{"participant_id", key.first}, {"task_id", key.second}, {"plays", count}});
  }
  return {{"ratings", ratings},
          {"records", log_->latest().size()},
          {"log_lines", log_->lines()},
          {"plays", plays}};
}

// ---------------------------------------------------------------------------
// Videos

json AskService::video_info(const std::string& video_id) const {
  const auto* v = find_video(video_id);
  if (v == nullptr) throw Error(ErrorCode::kUnknownTask, "no video " + video_id);
  const VideoMeta meta = load_manifest(v->manifest);
  return {{"video_id", meta.video_id},     {"width", meta.width},
          {"height", meta.height},         {"native_fps", meta.native_fps},
          {"duration_ns", meta.duration_ns}, {"frame_count", meta.frames.size()},
          {"crop", cfg_.crop}};
}

json AskService::overlay(const std::string& video_id, std::int64_t t_ns) const {
  const auto* v = find_video(video_id);
  if (v == nullptr) throw Error(ErrorCode::kUnknownTask, "no video " + video_id);
  const VideoMeta meta = load_manifest(v->manifest);
  json out = {{"video_id", video_id}, {"t_ns", t_ns}, {"point", nullptr}, {"region", nullptr}};
  if (v->gaze_csv.empty()) return out;
  const GazeTrack track = parse_gaze_csv(read_file(v->gaze_csv), meta.width, meta.height);
  const SyncPolicy policy = SyncPolicy::for_gaze_condition();
  // No usable sample near t: the console hides marker and rectangle.
  const bool near = std::any_of(track.samples.begin(), track.samples.end(), [&](const GazeSample& s) {
    const auto dt = s.t_ns > t_ns ? s.t_ns - t_ns : t_ns - s.t_ns;
    return s.confidence >= policy.min_confidence &&
           dt <= std::max(policy.max_gap_ns, policy.smooth_window_ns);
  });
  if (!near) return out;
  const GazeSample g = gaze_at(track, t_ns, policy);
  const CropRegion r = crop_region(g, meta.width, meta.height, std::min(cfg_.crop, meta.width),
                                   std::min(cfg_.crop, meta.height));
  out["point"] = {{"x", g.x_px}, {"y", g.y_px}};
  out["region"] = {{"x0", r.x0}, {"y0", r.y0}, {"w", r.w}, {"h", r.h}};
  return out;
}

// ---------------------------------------------------------------------------
// HTTP

void AskService::mount(httplib::Server& server) {
  using httplib::Request;
  using httplib::Response;
  auto wrap = [](auto fn) {
    return [fn](const Request& req, Response& res) {
      try {
        json body;
        if (!req.body.empty()) {
          body = json::parse(req.body, nullptr, false);
          if (body.is_discarded()) throw Error(ErrorCode::kInvalidArgument, "body is not JSON");
        }
        res.set_content(fn(req, body).dump(), "application/json");
      } catch (const Error& e) {
        res.status = http_status(e.code());
        res.set_content(json{{"error", error_code_name(e.code())}, {"message", e.what()}}.dump(),
                        "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(json{{"error", "Internal"}, {"message", e.what()}}.dump(),
                        "application/json");
      }
    };
  };

  server.Post("/sessions", wrap([this](const Request&, const json& b) { return create_session(b); }));
  server.Post(R"(/sessions/([^/]+)/frames)", wrap([this](const Request& r, const json& b) {
                return add_frame(r.matches[1], b);
              }));
  server.Post(R"(/sessions/([^/]+)/ask)", wrap([this](const Request& r, const json& b) {
                return handle_ask(r.matches[1], b);
              }));
  server.Get("/ratings/next", wrap([this](const Request& r, const json&) {
               return next_rating(r.get_param_value("participant"));
             }));
  server.Post("/ratings", wrap([this](const Request&, const json& b) { return submit_rating(b); }));
  server.Post("/ratings/play", wrap([this](const Request&, const json& b) { return record_play(b); }));
  server.Get("/report", wrap([this](const Request&, const json&) { return report(); }));
  server.Get(R"(/videos/([^/]+))", wrap([this](const Request& r, const json&) {
               return video_info(r.matches[1]);
             }));
  server.Get(R"(/videos/([^/]+)/overlay)", wrap([this](const Request& r, const json&) {
               const std::string t = r.get_param_value("t_ns");
               std::int64_t t_ns = 0;
               try {
                 t_ns = std::stoll(t);
               } catch (const std::exception&) {
                 throw Error(ErrorCode::kInvalidArgument, "t_ns query parameter is required");
               }
               return overlay(r.matches[1], t_ns);
             }));
  server.Get(R"(/videos/([^/]+)/frames/(\d+))", [this](const Request& r, Response& res) {
    try {
      const auto* v = find_video(r.matches[1]);
      if (v == nullptr) throw Error(ErrorCode::kUnknownTask, "no video " + std::string(r.matches[1]));
      const VideoMeta meta = load_manifest(v->manifest);
      const int index = std::stoi(r.matches[2]);
      const auto it = std::find_if(meta.frames.begin(), meta.frames.end(),
                                   [&](const FrameRef& f) { return f.index == index; });
      if (it == meta.frames.end()) throw Error(ErrorCode::kMissingFrameFile, "frame index");
      res.set_content(read_file(it->path), "image/x-portable-pixmap");
    } catch (const Error& e) {
      res.status = http_status(e.code());
      res.set_content(json{{"error", error_code_name(e.code())}, {"message", e.what()}}.dump(),
                      "application/json");
    }
  });
  if (!cfg_.static_dir.empty() && fs::exists(cfg_.static_dir))
    server.set_mount_point("/console", cfg_.static_dir.string());
}

bool AskService::listen(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  mount(*server_);
  return server_->listen(host, port);
}

int AskService::bind_any_port(const std::string& host) {
  server_ = std::make_unique<httplib::Server>();
  mount(*server_);
  return server_->bind_to_any_port(host);
}

bool AskService::listen_after_bind() { return server_ && server_->listen_after_bind(); }

void AskService::stop() {
  if (server_) server_->stop();
}

}  // namespace fovea
