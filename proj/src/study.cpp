#include "fovea/study.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <map>
#include <memory>
#include <set>
#include <thread>

#include <yaml-cpp/yaml.h>

#include "fovea/error.hpp"
#include "fovea/prompts.hpp"
#include "io_util.hpp"

namespace fovea {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Config

void StudyConfig::validate() const {
  auto invalid = [](const std::string& why) { return Error(ErrorCode::kConfigInvalid, why); };
  if (tasks.empty()) throw invalid("no tasks");
  for (const auto& t : tasks)
    if (t.videos.empty()) throw invalid("task '" + t.label + "' has no videos");
  if (conditions.empty()) throw invalid("no conditions");
  std::set<ConditionKind> uniq(conditions.begin(), conditions.end());
  if (uniq.size() != conditions.size()) throw invalid("duplicate condition");
  if (metrics.empty()) throw invalid("no metrics");
  // Every metric compares a candidate against the Full description.
  if (!uniq.count(ConditionKind::kFull))
    throw invalid("similarity metrics need the full condition as reference");
  if (uniq.size() < 2) throw invalid("no candidate condition besides full");
  const bool needs_gaze = uniq.count(ConditionKind::kGaze) || uniq.count(ConditionKind::kDual);
  if (needs_gaze)
    for (const auto& t : tasks)
      for (const auto& v : t.videos)
        if (v.gaze_csv.empty()) throw invalid("video " + v.manifest + " has no gaze CSV");
  if (!seed) throw invalid("seed is required");
  if (crop_w <= 0 || crop_h <= 0 || peripheral_w <= 0 || peripheral_h <= 0)
    throw invalid("crop and peripheral sizes must be > 0");
  if (!(fps > 0)) throw invalid("fps must be > 0");
  if (workers < 1) throw invalid("workers must be >= 1");
  if (embedding == EmbeddingKind::kHttp && embedding_endpoint.empty())
    throw invalid("http embedding requires an endpoint");
  try {
    (void)fovea::prompt_preset(prompt_preset);
  } catch (const Error& e) {
    throw invalid(e.what());
  }
  backend.validate();
  judge.validate();
}

namespace {

BackendConfig backend_from_yaml(const YAML::Node& n) {
  BackendConfig b;
  if (!n) return b;
  const auto kind = n["kind"].as<std::string>("mock");
  if (kind == "mock") {
    b.kind = BackendKind::kMock;
  } else if (kind == "http") {
    b.kind = BackendKind::kHttp;
  } else {
    throw Error(ErrorCode::kConfigInvalid, "unknown backend kind '" + kind + "'");
  }
  b.endpoint = n["endpoint"].as<std::string>("");
  b.auth_env = n["auth_env"].as<std::string>(b.auth_env);
  b.timeout_s = n["timeout_s"].as<int>(b.timeout_s);
  b.max_retries = n["max_retries"].as<int>(b.max_retries);
  return b;
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path fp(p);
  return (fp.is_absolute() ? fp : base / fp).lexically_normal().string();
}

}  // namespace

StudyConfig load_study_config(const fs::path& path) {
  YAML::Node root;
  try {
    root = YAML::Load(read_file(path));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kConfigInvalid, path.string() + ": " + e.what());
  }
  const fs::path base = path.parent_path();
  StudyConfig cfg;
  try {
    if (root["seed"]) cfg.seed = root["seed"].as<std::uint64_t>();
    if (root["conditions"]) {
      cfg.conditions.clear();
      for (const auto& c : root["conditions"]) cfg.conditions.push_back(parse_condition(c.as<std::string>()));
    }
    if (root["metrics"]) {
      cfg.metrics.clear();
      for (const auto& m : root["metrics"]) cfg.metrics.push_back(parse_metric(m.as<std::string>()));
    }
    if (root["crop"]) cfg.crop_w = cfg.crop_h = root["crop"].as<int>();
    cfg.crop_w = root["crop_w"].as<int>(cfg.crop_w);
    cfg.crop_h = root["crop_h"].as<int>(cfg.crop_h);
    if (root["peripheral"]) cfg.peripheral_w = cfg.peripheral_h = root["peripheral"].as<int>();
    cfg.peripheral_w = root["peripheral_w"].as<int>(cfg.peripheral_w);
    cfg.peripheral_h = root["peripheral_h"].as<int>(cfg.peripheral_h);
    cfg.fps = root["fps"].as<double>(cfg.fps);
    cfg.workers = root["workers"].as<int>(cfg.workers);
    cfg.prompt_preset = root["prompt_preset"].as<std::string>(cfg.prompt_preset);
    cfg.backend = backend_from_yaml(root["backend"]);
    cfg.judge = backend_from_yaml(root["judge"]);
    if (const auto e = root["embedding"]) {
      const auto kind = e["kind"].as<std::string>("mock");
      if (kind == "http") {
        cfg.embedding = EmbeddingKind::kHttp;
        cfg.embedding_endpoint = e["endpoint"].as<std::string>("");
      } else if (kind != "mock") {
        throw Error(ErrorCode::kConfigInvalid, "unknown embedding kind '" + kind + "'");
      }
    }
    if (root["ratings_log"]) cfg.ratings_log = resolve(base, root["ratings_log"].as<std::string>());
    for (const auto& t : root["tasks"]) {
      TaskInput task;
      task.label = t["label"].as<std::string>();
      for (const auto& v : t["videos"])
        task.videos.push_back({resolve(base, v["manifest"].as<std::string>()),
                               resolve(base, v["gaze"].as<std::string>(""))});
      cfg.tasks.push_back(std::move(task));
    }
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::kConfigInvalid, path.string() + ": " + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Running

namespace {

struct Job {
  std::string task;
  VideoInput input;
};

std::unique_ptr<JudgeClient> make_judge(const StudyConfig& cfg) {
  if (cfg.judge.kind == BackendKind::kHttp) return std::make_unique<HttpJudgeClient>(cfg.judge);
  return std::make_unique<MockJudge>();
}

std::unique_ptr<EmbeddingProvider> make_embedding(const StudyConfig& cfg) {
  if (cfg.embedding == EmbeddingKind::kHttp)
    return std::make_unique<HttpEmbeddingProvider>(cfg.embedding_endpoint);
  return std::make_unique<HashedBowEmbedding>();
}

std::optional<double> score_one(MetricKind metric, const std::string& reference,
                                const std::string& candidate, JudgeClient& judge,
                                EmbeddingProvider& embedder) {
  try {
    switch (metric) {
      case MetricKind::kBleu:
        return bleu(tokenize_text(candidate), tokenize_text(reference)).value;
      case MetricKind::kRougeL:
        return rouge_l(tokenize_text(candidate), tokenize_text(reference)).f1;
      case MetricKind::kEmbedCos:
        return embed_similarity(reference, candidate, embedder).raw;
      case MetricKind::kLlmJudge: {
        const auto s = llm_judge(reference, candidate, judge);
        if (s) return s->value;
        return std::nullopt;
      }
    }
  } catch (const Error&) {
    // Backend or provider failure: the cell is reported as missing.
  }
  return std::nullopt;
}

VideoResult run_video(const StudyConfig& cfg, const Job& job, std::vector<ConditionScore>& scores) {
  VideoResult vr;
  vr.task = job.task;
  vr.manifest = job.input.manifest;
  vr.gaze_csv = job.input.gaze_csv;
  VideoMeta meta;
  try {
    meta = load_manifest(job.input.manifest);
  } catch (const Error& e) {
    vr.video_id = fs::path(job.input.manifest).stem().string();
    vr.error = e.what();
    for (auto c : cfg.conditions) {
      vr.descriptions.push_back({c, std::nullopt, vr.error});
      for (auto m : cfg.metrics) scores.push_back({vr.task, vr.video_id, c, m, std::nullopt});
    }
    return vr;
  }
  vr.video_id = meta.video_id;
  vr.duration_ns = meta.duration_ns;

  std::optional<GazeTrack> track;
  std::string gaze_error;
  if (!job.input.gaze_csv.empty()) {
    try {
      track = parse_gaze_csv(read_file(job.input.gaze_csv), meta.width, meta.height);
    } catch (const Error& e) {
      gaze_error = e.what();
    }
  }

  auto backend = make_backend(cfg.backend);
  RenderOptions opts;
  opts.fps = cfg.fps;
  opts.with_pixels = cfg.backend.kind == BackendKind::kHttp;
  const std::string prompt(prompt_preset(cfg.prompt_preset));

  for (auto c : cfg.conditions) {
    DescriptionCell cell;
    cell.condition = c;
    try {
      const bool gaze_driven = c == ConditionKind::kGaze || c == ConditionKind::kDual;
      if (gaze_driven && !track)
        throw Error(ErrorCode::kInvalidArgument, "gaze unavailable: " + gaze_error);
      DescriptionRequest req;
      req.clip = render_condition(meta, gaze_driven ? &*track : nullptr, cfg.condition(c), opts);
      req.prompt = prompt;
      cell.description = describe(req, *backend);
    } catch (const Error& e) {
      cell.error = e.what();
    }
    vr.descriptions.push_back(std::move(cell));
  }

  const auto full = std::find_if(vr.descriptions.begin(), vr.descriptions.end(),
                                 [](const DescriptionCell& d) { return d.condition == ConditionKind::kFull; });
  auto judge = make_judge(cfg);
  auto embedder = make_embedding(cfg);
  for (const auto& cell : vr.descriptions) {
    for (auto m : cfg.metrics) {
      ConditionScore s{vr.task, vr.video_id, cell.condition, m, std::nullopt};
      if (full->description && cell.description)
        s.value = score_one(m, full->description->raw_text, cell.description->raw_text, *judge,
                            *embedder);
      scores.push_back(std::move(s));
    }
  }
  return vr;
}

}  // namespace

StudyReport run_study(const StudyConfig& cfg) {
  cfg.validate();
  std::vector<Job> jobs;
  for (const auto& t : cfg.tasks)
    for (const auto& v : t.videos) jobs.push_back({t.label, v});

  std::vector<VideoResult> results(jobs.size());
  std::vector<std::vector<ConditionScore>> per_video(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++)
      results[i] = run_video(cfg, jobs[i], per_video[i]);
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers), jobs.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
  }

  StudyReport report;
  report.seed = *cfg.seed;
  report.conditions = cfg.conditions;
  report.metrics = cfg.metrics;
  bool any_description = false;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    for (const auto& d : results[i].descriptions) any_description |= d.description.has_value();
    report.videos.push_back(std::move(results[i]));
    for (auto& s : per_video[i]) report.scores.push_back(std::move(s));
  }
  if (!any_description) {
    std::string first_error;
    for (const auto& v : report.videos)
      for (const auto& d : v.descriptions)
        if (first_error.empty()) first_error = d.error;
    throw Error(ErrorCode::kAllBackendsFailed, "no description was produced: " + first_error);
  }
  summarize(report);
  if (cfg.ratings_log && fs::exists(*cfg.ratings_log)) {
    const RatingLog log(*cfg.ratings_log);
    report.ratings = aggregate_ratings(log.latest(), candidate_index(rating_sources(report), report.seed));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Aggregation

void summarize(StudyReport& report) {
  report.summaries.clear();
  report.ttests.clear();
  report.lengths.clear();
  report.duration_length_corr.reset();
  report.duration_length_n = 0;

  std::vector<std::string> tasks;
  for (const auto& v : report.videos)
    if (std::find(tasks.begin(), tasks.end(), v.task) == tasks.end()) tasks.push_back(v.task);
  std::vector<std::string> groups = tasks;
  groups.emplace_back(kAllTasks);
  auto in_group = [](const std::string& group, const std::string& task) {
    return group == kAllTasks || group == task;
  };

  // Value lookup keyed by (video index, condition, metric).
  std::map<std::tuple<std::string, std::string, int, int>, std::optional<double>> cells;
  for (const auto& s : report.scores)
    cells[{s.task, s.video_id, static_cast<int>(s.condition), static_cast<int>(s.metric)}] = s.value;
  auto cell = [&](const VideoResult& v, ConditionKind c, MetricKind m) -> std::optional<double> {
    const auto it = cells.find({v.task, v.video_id, static_cast<int>(c), static_cast<int>(m)});
    return it == cells.end() ? std::nullopt : it->second;
  };

  for (const auto& g : groups) {
    for (auto c : report.conditions) {
      for (auto m : report.metrics) {
        MetricSummary ms{g, c, m, {}, 0};
        std::vector<double> vals;
        for (const auto& v : report.videos) {
          if (!in_group(g, v.task)) continue;
          if (const auto x = cell(v, c, m)) vals.push_back(*x);
          else ++ms.missing;
        }
        if (!vals.empty()) ms.stats = aggregate(vals);
        report.summaries.push_back(ms);
      }
    }
  }

  std::vector<ConditionKind> candidates;
  for (auto c : report.conditions)
    if (c != ConditionKind::kFull) candidates.push_back(c);
  for (const auto& g : groups) {
    for (auto m : report.metrics) {
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        for (std::size_t j = i + 1; j < candidates.size(); ++j) {
          std::vector<double> a, b;
          for (const auto& v : report.videos) {
            if (!in_group(g, v.task)) continue;
            const auto x = cell(v, candidates[i], m);
            const auto y = cell(v, candidates[j], m);
            if (x && y) {  // pairwise exclusion of missing cells
              a.push_back(*x);
              b.push_back(*y);
            }
          }
          if (a.size() < 2) continue;
          report.ttests.push_back({g, m, candidates[i], candidates[j], paired_t_test(a, b)});
        }
      }
    }
  }

  std::vector<double> durations, lengths_all;
  for (const auto& g : groups) {
    for (auto c : report.conditions) {
      std::vector<double> lens;
      for (const auto& v : report.videos) {
        if (!in_group(g, v.task)) continue;
        for (const auto& d : v.descriptions) {
          if (d.condition != c || !d.description) continue;
          lens.push_back(static_cast<double>(d.description->char_len));
          if (g == kAllTasks) {
            durations.push_back(static_cast<double>(v.duration_ns) / 1e9);
            lengths_all.push_back(static_cast<double>(d.description->char_len));
          }
        }
      }
      if (!lens.empty()) report.lengths.push_back({g, c, aggregate(lens)});
    }
  }
  report.duration_length_n = durations.size();
  if (durations.size() >= 2) {
    try {
      report.duration_length_corr = pearson_r(durations, lengths_all);
    } catch (const Error&) {
      // Constant durations or lengths: correlation undefined.
    }
  }
}

std::vector<RatingSource> rating_sources(const StudyReport& report) {
  std::vector<RatingSource> out;
  for (const auto& v : report.videos) {
    RatingSource src;
    src.task_id = v.video_id;
    src.full_video_ref = "/videos/" + v.video_id;
    for (const auto& d : v.descriptions)
      if (d.description) src.descriptions.emplace_back(d.condition, d.description->raw_text);
    if (src.descriptions.size() >= 2) out.push_back(std::move(src));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialisation

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json aggregate_json(const Aggregate& a) { return {{"mean", a.mean}, {"std", a.std}, {"n", a.n}}; }
Aggregate aggregate_from(const json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("n").get<std::size_t>()};
}

}  // namespace

json report_to_json(const StudyReport& r) {
  json j;
  j["seed"] = r.seed;
  j["conditions"] = json::array();
  for (auto c : r.conditions) j["conditions"].push_back(condition_name(c));
  j["metrics"] = json::array();
  for (auto m : r.metrics) j["metrics"].push_back(metric_name(m));

  j["videos"] = json::array();
  for (const auto& v : r.videos) {
    json jv = {{"task", v.task},         {"video_id", v.video_id}, {"manifest", v.manifest},
               {"gaze", v.gaze_csv},     {"duration_ns", v.duration_ns},
               {"error", v.error.empty() ? json(nullptr) : json(v.error)},
               {"descriptions", json::array()}};
    for (const auto& d : v.descriptions) {
      json jd = {{"condition", condition_name(d.condition)}};
      if (d.description) {
        jd["raw_text"] = d.description->raw_text;
        jd["char_len"] = d.description->char_len;
        jd["steps"] = json::array();
        for (const auto& s : d.description->steps)
          jd["steps"].push_back({{"t_ns", s.t_ns}, {"text", s.text}, {"out_of_range", s.out_of_range}});
        jd["error"] = nullptr;
      } else {
        jd["raw_text"] = nullptr;
        jd["error"] = d.error;
      }
      jv["descriptions"].push_back(std::move(jd));
    }
    j["videos"].push_back(std::move(jv));
  }

  j["scores"] = json::array();
  for (const auto& s : r.scores)
    j["scores"].push_back({{"task", s.task}, {"video_id", s.video_id},
                           {"condition", condition_name(s.condition)},
                           {"metric", metric_name(s.metric)}, {"value", opt(s.value)}});
  j["summaries"] = json::array();
  for (const auto& s : r.summaries)
    j["summaries"].push_back({{"task", s.task}, {"condition", condition_name(s.condition)},
                              {"metric", metric_name(s.metric)}, {"stats", aggregate_json(s.stats)},
                              {"missing", s.missing}});
  j["ttests"] = json::array();
  for (const auto& t : r.ttests) {
    const auto& res = t.result;
    j["ttests"].push_back({{"task", t.task}, {"metric", metric_name(t.metric)},
                           {"condition_a", condition_name(t.cond_a)},
                           {"condition_b", condition_name(t.cond_b)}, {"n", res.n},
                           {"df", res.df}, {"mean_diff", res.mean_diff}, {"t", opt(res.t)},
                           {"p", opt(res.p_two_tailed)}, {"degenerate", res.degenerate}});
  }
  j["lengths"] = json::array();
  for (const auto& l : r.lengths)
    j["lengths"].push_back({{"task", l.task}, {"condition", condition_name(l.condition)},
                            {"stats", aggregate_json(l.stats)}});
  j["duration_length_corr"] = {{"r", opt(r.duration_length_corr)}, {"n", r.duration_length_n}};
  j["ratings"] = json::array();
  for (const auto& row : r.ratings)
    j["ratings"].push_back({{"task_id", row.task_id}, {"condition", condition_name(row.condition)},
                            {"stats", aggregate_json(row.stats)}});
  return j;
}

StudyReport report_from_json(const json& j) {
  try {
    StudyReport r;
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& c : j.at("conditions")) r.conditions.push_back(parse_condition(c.get<std::string>()));
    for (const auto& m : j.at("metrics")) r.metrics.push_back(parse_metric(m.get<std::string>()));
    for (const auto& jv : j.at("videos")) {
      VideoResult v;
      v.task = jv.at("task").get<std::string>();
      v.video_id = jv.at("video_id").get<std::string>();
      v.manifest = jv.value("manifest", std::string());
      v.gaze_csv = jv.value("gaze", std::string());
      v.duration_ns = jv.at("duration_ns").get<std::int64_t>();
      if (jv.contains("error") && !jv["error"].is_null()) v.error = jv["error"].get<std::string>();
      for (const auto& jd : jv.at("descriptions")) {
        DescriptionCell d;
        d.condition = parse_condition(jd.at("condition").get<std::string>());
        if (!jd.at("raw_text").is_null()) {
          Description desc;
          desc.raw_text = jd["raw_text"].get<std::string>();
          desc.char_len = jd.at("char_len").get<std::size_t>();
          for (const auto& s : jd.at("steps"))
            desc.steps.push_back({s.at("t_ns").get<std::int64_t>(), s.at("text").get<std::string>(),
                                  s.value("out_of_range", false)});
          d.description = std::move(desc);
        } else {
          d.error = jd.value("error", std::string());
        }
        v.descriptions.push_back(std::move(d));
      }
      r.videos.push_back(std::move(v));
    }
    for (const auto& s : j.at("scores"))
      r.scores.push_back({s.at("task").get<std::string>(), s.at("video_id").get<std::string>(),
                          parse_condition(s.at("condition").get<std::string>()),
                          parse_metric(s.at("metric").get<std::string>()), opt_from(s.at("value"))});
    summarize(r);
    for (const auto& row : j.value("ratings", json::array()))
      r.ratings.push_back({row.at("task_id").get<std::string>(),
                           parse_condition(row.at("condition").get<std::string>()),
                           aggregate_from(row.at("stats"))});
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, std::string("report.json: ") + e.what());
  }
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<fs::path> export_report(const StudyReport& report, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());

  std::vector<fs::path> files = {dir / "report.json", dir / "scores.csv", dir / "lengths.csv",
                                 dir / "ttests.csv"};
  write_file(files[0], report_to_json(report).dump(2) + "\n");

  std::string scores = "task,video_id,condition,metric,value\n";
  for (const auto& s : report.scores)
    scores += csv_field(s.task) + "," + csv_field(s.video_id) + "," +
              std::string(condition_name(s.condition)) + "," + std::string(metric_name(s.metric)) +
              "," + num(s.value) + "\n";
  write_file(files[1], scores);

  std::string lengths = "task,condition,n,mean_chars,std_chars\n";
  for (const auto& l : report.lengths)
    lengths += csv_field(l.task) + "," + std::string(condition_name(l.condition)) + "," +
               std::to_string(l.stats.n) + "," + num(l.stats.mean) + "," + num(l.stats.std) + "\n";
  write_file(files[2], lengths);

  std::string ttests = "task,metric,condition_a,condition_b,n,df,mean_diff,t,p,significant\n";
  for (const auto& t : report.ttests) {
    const auto& r = t.result;
    const bool sig = r.p_two_tailed && *r.p_two_tailed < 0.05;
    ttests += csv_field(t.task) + "," + std::string(metric_name(t.metric)) + "," +
              std::string(condition_name(t.cond_a)) + "," + std::string(condition_name(t.cond_b)) +
              "," + std::to_string(r.n) + "," + std::to_string(r.df) + "," + num(r.mean_diff) + "," +
              num(r.t) + "," + num(r.p_two_tailed) + "," + (sig ? "1" : "0") + "\n";
  }
  write_file(files[3], ttests);
  return files;
}

}  // namespace fovea
