#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

#include "fovea/error.hpp"
#include "fovea/fixtures.hpp"
#include "fovea/metrics.hpp"
#include "fovea/study.hpp"
#include "../test_util.hpp"

using namespace fovea;
using fovea::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Plain DP, written independently of the library's LCS.
double rouge_oracle(const std::string& cand, const std::string& ref) {
  const auto a = tokenize_text(cand).tokens, b = tokenize_text(ref).tokens;
  if (a.empty() || b.empty()) return 0;
  std::vector<std::vector<int>> t(a.size() + 1, std::vector<int>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
  const double l = t[a.size()][b.size()];
  if (l == 0) return 0;
  const double p = l / a.size(), r = l / b.size();
  return 2 * p * r / (p + r);
}

int refused_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

struct Fixture {
  TempDir dir{"study"};
  FixtureSet set;
  explicit Fixture(int videos = 2) {
    FixtureOptions o;
    o.videos = videos;
    set = generate_fixtures(dir / "fx", o);
  }
  StudyConfig config() const { return load_study_config(set.study_config); }
};

std::optional<double> score_of(const StudyReport& r, const std::string& video, ConditionKind c, MetricKind m) {
  for (const auto& s : r.scores)
    if (s.video_id == video && s.condition == c && s.metric == m) return s.value;
  FAIL("missing score row");
  return std::nullopt;
}

const Description& desc_of(const StudyReport& r, const std::string& video, ConditionKind c) {
  for (const auto& v : r.videos)
    if (v.video_id == video)
      for (const auto& d : v.descriptions)
        if (d.condition == c && d.description) return *d.description;
  throw std::runtime_error("no description");
}

}  // namespace

TEST_SUITE("study") {

TEST_CASE("config validation") {
  Fixture fx;
  auto cfg = fx.config();
  CHECK_NOTHROW(cfg.validate());
  auto expect_invalid = [](const StudyConfig& c) {
    try {
      c.validate();
      FAIL("expected ConfigInvalid");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfigInvalid);
    }
  };
  auto c = cfg;
  c.conditions = {ConditionKind::kFull};
  expect_invalid(c);
  c = cfg;
  c.conditions = {ConditionKind::kGaze, ConditionKind::kCenter};
  expect_invalid(c);
  c = cfg;
  c.conditions.push_back(ConditionKind::kGaze);
  expect_invalid(c);
  c = cfg;
  c.seed.reset();
  expect_invalid(c);
  c = cfg;
  c.tasks.clear();
  expect_invalid(c);
  c = cfg;
  c.tasks[0].videos[0].gaze_csv.clear();
  expect_invalid(c);
  c.conditions = {ConditionKind::kFull, ConditionKind::kCenter};
  CHECK_NOTHROW(c.validate());
  c = cfg;
  c.prompt_preset = "nope";
  expect_invalid(c);
  c = cfg;
  c.fps = 0;
  expect_invalid(c);
  c = cfg;
  c.metrics.clear();
  expect_invalid(c);
  c = cfg;
  c.backend.kind = BackendKind::kHttp;
  expect_invalid(c);
  try {
    run_study(c);
    FAIL("expected ConfigInvalid");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfigInvalid);
  }
}

TEST_CASE("yaml loading resolves paths and rejects junk") {
  Fixture fx;
  const auto cfg = fx.config();
  CHECK(cfg.seed == 7u);
  REQUIRE(cfg.tasks.size() == 2);
  CHECK(fs::path(cfg.tasks[0].videos[0].manifest).is_absolute());
  CHECK(fs::exists(cfg.tasks[0].videos[0].gaze_csv));
  CHECK(cfg.crop_w == 160);
  CHECK(cfg.conditions.size() == 4);

  const auto bad = fx.dir / "bad.yaml";
  std::ofstream(bad) << "seed: [1, 2\n";
  CHECK_THROWS_AS(load_study_config(bad), Error);
  std::ofstream(bad) << "seed: 1\nbackend: {kind: carrier-pigeon}\n";
  CHECK_THROWS_AS(load_study_config(bad), Error);
  std::ofstream(bad) << "seed: 1\nconditions: [full, peripheral]\n";
  CHECK_THROWS_AS(load_study_config(bad), Error);
}

TEST_CASE("two videos, rouge only: cells and means") {
  Fixture fx;
  auto cfg = fx.config();
  cfg.conditions = {ConditionKind::kFull, ConditionKind::kGaze, ConditionKind::kCenter};
  cfg.metrics = {MetricKind::kRougeL};
  const auto r = run_study(cfg);
  REQUIRE(r.videos.size() == 2);
  CHECK(r.scores.size() == 2 * 3);
  for (auto c : cfg.conditions) {
    std::vector<double> vals;
    for (const auto& v : r.videos) {
      const auto s = score_of(r, v.video_id, c, MetricKind::kRougeL);
      REQUIRE(s);
      const double want = rouge_oracle(desc_of(r, v.video_id, c).raw_text,
                                       desc_of(r, v.video_id, ConditionKind::kFull).raw_text);
      CHECK(*s == doctest::Approx(want).epsilon(1e-12));
      vals.push_back(*s);
    }
    bool found = false;
    for (const auto& m : r.summaries)
      if (m.task == kAllTasks && m.condition == c && m.metric == MetricKind::kRougeL) {
        found = true;
        CHECK(m.stats.n == 2);
        CHECK(m.stats.mean == doctest::Approx((vals[0] + vals[1]) / 2).epsilon(1e-12));
      }
    CHECK(found);
  }
  for (const auto& t : r.ttests) CHECK(t.result.df == t.result.n - 1);
}

TEST_CASE("full-vs-full cells are the metric maxima") {
  Fixture fx;
  const auto r = run_study(fx.config());
  int seen = 0;
  for (const auto& s : r.scores) {
    if (s.condition != ConditionKind::kFull) continue;
    ++seen;
    REQUIRE(s.value);
    CHECK(*s.value == (s.metric == MetricKind::kLlmJudge ? 100.0 : 1.0));
  }
  CHECK(seen == 2 * 4);
}

TEST_CASE("fixed seed gives byte-identical exports") {
  Fixture fx(4);
  auto cfg = fx.config();
  const auto a = export_report(run_study(cfg), fx.dir / "a");
  cfg.workers = 1;
  const auto b = export_report(run_study(cfg), fx.dir / "b");
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].filename() == b[i].filename());
    CHECK(slurp(a[i]) == slurp(b[i]));
  }
  // Re-export of a round-tripped report is also identical.
  const auto back = report_from_json(nlohmann::json::parse(slurp(a[0])));
  const auto c = export_report(back, fx.dir / "c");
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(slurp(a[i]) == slurp(c[i]));
}

TEST_CASE("export layout: one score row per cell, missing cells stay empty") {
  Fixture fx(1);
  auto cfg = fx.config();
  cfg.judge.kind = BackendKind::kHttp;
  cfg.judge.endpoint = "http://127.0.0.1:" + std::to_string(refused_port()) + "/judge";
  cfg.judge.max_retries = 0;
  cfg.judge.timeout_s = 1;
  const auto r = run_study(cfg);
  const auto files = export_report(r, fx.dir / "out");
  const auto rows = lines_of(slurp(fx.dir / "out" / "scores.csv"));
  REQUIRE(rows.size() == 1 + cfg.conditions.size() * cfg.metrics.size());
  CHECK(rows[0] == "task,video_id,condition,metric,value");
  int judge_rows = 0;
  for (const auto& row : rows)
    if (row.find(",llm_judge,") != std::string::npos) {
      ++judge_rows;
      CHECK(row.back() == ',');
    }
  CHECK(judge_rows == static_cast<int>(cfg.conditions.size()));
  CHECK(lines_of(slurp(fx.dir / "out" / "ttests.csv"))[0] ==
        "task,metric,condition_a,condition_b,n,df,mean_diff,t,p,significant");
  CHECK(lines_of(slurp(fx.dir / "out" / "lengths.csv"))[0] == "task,condition,n,mean_chars,std_chars");
  for (const auto& m : r.summaries)
    if (m.metric == MetricKind::kLlmJudge) {
      CHECK(m.stats.n == 0);
      CHECK(m.missing == 1);
    }
}

TEST_CASE("unreachable description backend fails the whole run") {
  Fixture fx(1);
  auto cfg = fx.config();
  cfg.backend.kind = BackendKind::kHttp;
  cfg.backend.endpoint = "http://127.0.0.1:" + std::to_string(refused_port()) + "/d";
  cfg.backend.max_retries = 0;
  cfg.backend.timeout_s = 1;
  try {
    run_study(cfg);
    FAIL("expected AllBackendsFailed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kAllBackendsFailed);
  }
}

TEST_CASE("an unreadable video is recorded, not fatal") {
  Fixture fx(2);
  auto cfg = fx.config();
  cfg.tasks[0].videos.push_back({(fx.dir / "nope" / "manifest.json").string(), (fx.dir / "nope.csv").string()});
  const auto r = run_study(cfg);
  REQUIRE(r.videos.size() == 3);
  int broken = 0;
  for (const auto& v : r.videos)
    if (!v.error.empty()) ++broken;
  CHECK(broken == 1);
}

TEST_CASE("fixture separation: gaze beats center on rouge") {
  Fixture fx(12);
  const auto r = run_study(fx.config());
  double gaze = 0, center = 0;
  for (const auto& m : r.summaries)
    if (m.task == kAllTasks && m.metric == MetricKind::kRougeL) {
      if (m.condition == ConditionKind::kGaze) gaze = m.stats.mean;
      if (m.condition == ConditionKind::kCenter) center = m.stats.mean;
    }
  CHECK(gaze > center);
  bool tested = false;
  for (const auto& t : r.ttests)
    if (t.task == kAllTasks && t.metric == MetricKind::kRougeL && t.cond_a == ConditionKind::kGaze &&
        t.cond_b == ConditionKind::kCenter) {
      tested = true;
      REQUIRE(t.result.p_two_tailed);
      CHECK(*t.result.p_two_tailed < 0.05);
      CHECK(t.result.df == 11);
    }
  CHECK(tested);
  CHECK(r.duration_length_n == 12 * 4);
}

TEST_CASE("rating sources skip videos without two descriptions") {
  Fixture fx(2);
  const auto r = run_study(fx.config());
  const auto src = rating_sources(r);
  REQUIRE(src.size() == 2);
  CHECK(src[0].full_video_ref == "/videos/" + src[0].task_id);
  CHECK(src[0].descriptions.size() == 4);
}

}  // TEST_SUITE
