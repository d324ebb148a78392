#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fovea/error.hpp"
#include "fovea/fixtures.hpp"
#include "fovea/frame.hpp"
#include "fovea/gaze.hpp"
#include "fovea/metrics.hpp"
#include "fovea/mllm.hpp"
#include "fovea/prompts.hpp"
#include "fovea/service.hpp"
#include "fovea/study.hpp"
#include "fovea/tokenizer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw fovea::Error(fovea::ErrorCode::kIoFailure, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void dump(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw fovea::Error(fovea::ErrorCode::kIoFailure, "cannot write " + p.string());
}

std::pair<int, int> parse_size(const std::string& s) {
  int w = 0, h = 0;
  char x = 0;
  std::istringstream in(s);
  if (!(in >> w >> x >> h) || (x != 'x' && x != 'X') || w <= 0 || h <= 0)
    throw fovea::Error(fovea::ErrorCode::kInvalidArgument, "expected WxH, got '" + s + "'");
  return {w, h};
}

fovea::BackendConfig backend_config(const std::string& kind, const std::string& endpoint,
                                    const std::string& auth_env) {
  fovea::BackendConfig cfg;
  cfg.kind = kind == "http" ? fovea::BackendKind::kHttp : fovea::BackendKind::kMock;
  cfg.endpoint = endpoint;
  cfg.auth_env = auth_env;
  cfg.validate();
  return cfg;
}

fovea::AskService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fovea: gaze-conditioned inputs, token budgets and description evaluation"};
  app.require_subcommand(1);

  // render
  auto* render = app.add_subcommand("render", "Render one input condition of a video");
  std::string manifest, gaze_csv, condition = "full", out_dir;
  int crop = 448, peripheral = 448;
  double fps = 1.0;
  bool from_stdin = false;
  render->add_option("--manifest", manifest, "Frame manifest JSON");
  render->add_flag("--stdin", from_stdin, "Read a raw FVP1 frame stream from stdin");
  render->add_option("--gaze", gaze_csv, "Gaze CSV");
  render->add_option("--condition", condition)->check(CLI::IsMember({"full", "gaze", "center", "dual"}));
  render->add_option("--crop", crop);
  render->add_option("--peripheral", peripheral);
  render->add_option("--fps", fps);
  render->add_option("--out", out_dir)->required();

  // budget
  auto* budget = app.add_subcommand("budget", "Pixel budget of a condition");
  std::string frame_size = "1440x1440";
  budget->add_option("--condition", condition)->check(CLI::IsMember({"full", "gaze", "center", "dual"}));
  budget->add_option("--frame", frame_size);
  budget->add_option("--crop", crop);
  budget->add_option("--peripheral", peripheral);

  // tokens
  auto* tokens = app.add_subcommand("tokens", "Per-frame token counts of the foveated grid");
  std::string spec_text = "base=16,r=224,448", tokens_out;
  tokens->add_option("--frame", frame_size);
  tokens->add_option("--gaze-csv", gaze_csv)->required();
  tokens->add_option("--spec", spec_text);
  tokens->add_option("--fps", fps);
  tokens->add_option("--out", tokens_out)->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Score a candidate description against a reference");
  std::string reference, candidate, metrics = "bleu,rouge,embed,judge", eval_out;
  std::string judge_kind = "mock", judge_endpoint, embed_endpoint;
  eval->add_option("--reference", reference)->required();
  eval->add_option("--candidate", candidate)->required();
  eval->add_option("--metrics", metrics);
  eval->add_option("--judge", judge_kind)->check(CLI::IsMember({"mock", "http"}));
  eval->add_option("--judge-endpoint", judge_endpoint);
  eval->add_option("--embed-endpoint", embed_endpoint, "Embedding service; hashed bag of words if unset");
  eval->add_option("--out", eval_out)->required();

  // describe
  auto* describe = app.add_subcommand("describe", "Describe a rendered clip");
  std::string clip_dir, backend_kind = "mock", endpoint, auth_env = "FOVEA_API_KEY";
  std::string preset = std::string(fovea::kProcedurePresetName);
  describe->add_option("--clip", clip_dir)->required();
  describe->add_option("--backend", backend_kind)->check(CLI::IsMember({"mock", "http"}));
  describe->add_option("--endpoint", endpoint);
  describe->add_option("--auth-env", auth_env);
  describe->add_option("--prompt-preset", preset);

  // study run
  auto* study = app.add_subcommand("study", "Experiment runs");
  study->require_subcommand(1);
  auto* study_run = study->add_subcommand("run", "Run a study config end to end");
  std::string config_path, study_out;
  std::optional<std::uint64_t> seed;
  study_run->add_option("--config", config_path)->required();
  study_run->add_option("--out", study_out)->required();
  study_run->add_option("--seed", seed);

  // serve
  auto* serve = app.add_subcommand("serve", "Serve stop-and-ask sessions and the rating study");
  int port = 8080;
  std::string study_dir, host = "127.0.0.1", static_dir;
  serve->add_option("--port", port);
  serve->add_option("--host", host);
  serve->add_option("--study", study_dir)->required();
  serve->add_option("--backend", backend_kind)->check(CLI::IsMember({"mock", "http"}));
  serve->add_option("--endpoint", endpoint);
  serve->add_option("--auth-env", auth_env);
  serve->add_option("--seed", seed);
  serve->add_option("--crop", crop);
  serve->add_option("--static", static_dir, "Console build to serve under /console");

  // fixtures
  auto* fixtures = app.add_subcommand("fixtures", "Write the synthetic annotated videos");
  fovea::FixtureOptions fx;
  std::string fixtures_out;
  fixtures->add_option("--out", fixtures_out)->required();
  fixtures->add_option("--videos", fx.videos);
  fixtures->add_option("--seed", fx.seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*render) {
      fovea::Condition cond{fovea::parse_condition(condition), crop, crop, peripheral, peripheral};
      fovea::RenderOptions opts;
      opts.fps = fps;
      fovea::RawVideo raw;
      fovea::VideoMeta meta;
      fovea::FrameLoader loader = fovea::file_loader();
      if (from_stdin) {
        raw = fovea::read_raw_stream(std::cin);
        meta = raw.meta;
        loader = fovea::memory_loader(raw);
      } else if (!manifest.empty()) {
        meta = fovea::load_manifest(manifest);
      } else {
        throw fovea::Error(fovea::ErrorCode::kInvalidArgument, "--manifest or --stdin is required");
      }
      std::optional<fovea::GazeTrack> track;
      if (!gaze_csv.empty()) track = fovea::parse_gaze_csv(slurp(gaze_csv), meta.width, meta.height);
      auto clip = fovea::render_condition(meta, track ? &*track : nullptr, cond, opts, loader);
      fovea::write_clip(clip, out_dir);
      std::printf("%zu frames -> %s\n", clip.frames.size(), out_dir.c_str());
    } else if (*budget) {
      const auto [w, h] = parse_size(frame_size);
      fovea::Condition cond{fovea::parse_condition(condition), crop, crop, peripheral, peripheral};
      const auto b = fovea::pixel_budget(cond, w, h);
      json j = {{"condition", condition},
                {"pixels_per_frame", b.pixels_per_frame},
                {"full_pixels", b.full_pixels},
                {"ratio_vs_full", b.ratio_vs_full},
                {"reduction_factor", b.reduction_factor}};
      std::cout << j.dump(2) << '\n';
    } else if (*tokens) {
      const auto [w, h] = parse_size(frame_size);
      const auto spec = fovea::parse_foveation_spec(spec_text);
      const auto track = fovea::parse_gaze_csv(slurp(gaze_csv), w, h);
      if (track.samples.empty()) throw fovea::Error(fovea::ErrorCode::kEmptyTrack, gaze_csv);
      const auto policy = fovea::SyncPolicy::for_gaze_condition();
      const std::int64_t t0 = track.samples.front().t_ns;
      const std::int64_t t1 = track.samples.back().t_ns;
      std::string csv = "t_ns,tokens,ratio\n";
      for (std::int64_t k = 0;; ++k) {
        const auto t = t0 + static_cast<std::int64_t>(std::llround(static_cast<double>(k) * 1e9 / fps));
        if (t > t1) break;
        const auto g = fovea::gaze_at(track, t, policy);
        const auto tb = fovea::token_budget(fovea::foveated_grid(w, h, g, spec));
        char row[96];
        std::snprintf(row, sizeof row, "%lld,%lld,%.6f\n", static_cast<long long>(t),
                      static_cast<long long>(tb.tokens), tb.vs_uniform_base);
        csv += row;
      }
      dump(tokens_out, csv);
    } else if (*eval) {
      const std::string ref = slurp(reference), cand = slurp(candidate);
      const auto ref_t = fovea::tokenize_text(ref), cand_t = fovea::tokenize_text(cand);
      json out = {{"bleu", nullptr}, {"rouge_l", nullptr}, {"embed_cos", nullptr}, {"llm_judge", nullptr}};
      std::stringstream ms(metrics);
      for (std::string m; std::getline(ms, m, ',');) {
        switch (fovea::parse_metric(m)) {
          case fovea::MetricKind::kBleu:
            out["bleu"] = fovea::bleu(cand_t, ref_t).value;
            break;
          case fovea::MetricKind::kRougeL: {
            const auto r = fovea::rouge_l(cand_t, ref_t);
            out["rouge_l"] = {{"p", r.precision}, {"r", r.recall}, {"f1", r.f1}};
            break;
          }
          case fovea::MetricKind::kEmbedCos: {
            std::unique_ptr<fovea::EmbeddingProvider> provider;
            if (embed_endpoint.empty())
              provider = std::make_unique<fovea::HashedBowEmbedding>();
            else
              provider = std::make_unique<fovea::HttpEmbeddingProvider>(embed_endpoint);
            out["embed_cos"] = fovea::embed_similarity(ref, cand, *provider).raw;
            break;
          }
          case fovea::MetricKind::kLlmJudge: {
            std::unique_ptr<fovea::JudgeClient> judge;
            if (judge_kind == "http")
              judge = std::make_unique<fovea::HttpJudgeClient>(
                  backend_config("http", judge_endpoint, auth_env));
            else
              judge = std::make_unique<fovea::MockJudge>();
            if (const auto s = fovea::llm_judge(ref, cand, *judge))
              out["llm_judge"] = static_cast<int>(s->value);
            break;
          }
        }
      }
      dump(eval_out, out.dump(2) + "\n");
    } else if (*describe) {
      fovea::DescriptionRequest req;
      req.clip = fovea::read_clip(clip_dir);
      req.prompt = std::string(fovea::prompt_preset(preset));
      const auto d = fovea::describe(req, backend_config(backend_kind, endpoint, auth_env));
      std::cout << d.raw_text;
      if (d.raw_text.empty() || d.raw_text.back() != '\n') std::cout << '\n';
      for (const auto& s : d.steps)
        if (s.out_of_range)
          std::fprintf(stderr, "warning: step at %s is past the end of the clip\n",
                       fovea::format_timestamp(s.t_ns).c_str());
    } else if (*study_run) {
      auto cfg = fovea::load_study_config(config_path);
      if (seed) cfg.seed = seed;
      cfg.validate();
      const auto report = fovea::run_study(cfg);
      for (const auto& p : fovea::export_report(report, study_out)) std::printf("%s\n", p.c_str());
      for (const auto& row : report.ttests) {
        if (row.task != fovea::kAllTasks || !row.result.p_two_tailed) continue;
        std::printf("%s %s vs %s: mean diff %.4f, t %.3f, p %.4g\n",
                    std::string(fovea::metric_name(row.metric)).c_str(),
                    std::string(fovea::condition_name(row.cond_a)).c_str(),
                    std::string(fovea::condition_name(row.cond_b)).c_str(), row.result.mean_diff,
                    *row.result.t, *row.result.p_two_tailed);
      }
    } else if (*serve) {
      fovea::ServiceConfig cfg;
      cfg.study_dir = study_dir;
      cfg.backend = backend_config(backend_kind, endpoint, auth_env);
      cfg.seed = seed;
      cfg.crop = crop;
      cfg.static_dir = static_dir;
      fovea::AskService service(cfg);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::fprintf(stderr, "listening on %s:%d\n", host.c_str(), port);
      if (!service.listen(host, port)) {
        std::fprintf(stderr, "error: cannot bind %s:%d\n", host.c_str(), port);
        return 1;
      }
      g_service = nullptr;
    } else if (*fixtures) {
      const auto set = fovea::generate_fixtures(fixtures_out, fx);
      std::printf("%zu videos, config %s\n", set.video_ids.size(), set.study_config.c_str());
    }
  } catch (const fovea::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
