#include "fovea/mllm.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <limits>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fovea/error.hpp"
#include "fovea/prompts.hpp"
#include "http_util.hpp"
#include "io_util.hpp"
#include "text_util.hpp"

namespace fovea {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Timestamps

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

struct TimestampMatch {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::int64_t seconds = 0;
};

// First M:SS / MM:SS / <n>s occurrence in `line`.
std::optional<TimestampMatch> find_timestamp(std::string_view line) {
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (!is_digit(line[i])) continue;
    if (i > 0 && (is_alnum(line[i - 1]) || line[i - 1] == ':' || line[i - 1] == '.')) continue;
    std::size_t j = i;
    while (j < line.size() && is_digit(line[j])) ++j;
    const std::size_t ndigits = j - i;

    // M:SS or MM:SS with seconds 00-59, not followed by another digit.
    if (ndigits <= 2 && j + 2 < line.size() && line[j] == ':') {
      const std::size_t s0 = j + 1;
      if (is_digit(line[s0]) && is_digit(line[s0 + 1]) && line[s0] <= '5' &&
          (s0 + 2 == line.size() || !is_digit(line[s0 + 2]))) {
        const std::int64_t minutes = std::stoll(std::string(line.substr(i, ndigits)));
        const std::int64_t secs = (line[s0] - '0') * 10 + (line[s0 + 1] - '0');
        return TimestampMatch{i, s0 + 2, minutes * 60 + secs};
      }
    }
    if (ndigits <= 9 && j < line.size() && line[j] == 's' &&
        (j + 1 == line.size() || !is_alnum(line[j + 1]))) {
      return TimestampMatch{i, j + 1, std::stoll(std::string(line.substr(i, ndigits)))};
    }
    i = j;
  }
  return std::nullopt;
}

std::string_view strip_step_text(std::string_view s) {
  const std::string_view junk = " \t)]}:;,.-*>";
  while (!s.empty() && junk.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
  return trim(s);
}

}  // namespace

std::vector<TimedStep> parse_timed_steps(std::string_view raw_text) {
  std::vector<TimedStep> steps;
  for (auto line : split_lines(raw_text)) {
    line = trim(line);
    const auto m = find_timestamp(line);
    if (!m) continue;
    std::string_view text = strip_step_text(line.substr(m->end));
    if (text.empty()) {
      // Timestamp at the end of the line: the text before it is the step.
      text = line.substr(0, m->begin);
      while (!text.empty() && (is_digit(text.front()) || text.front() == '.' || text.front() == ' '))
        text.remove_prefix(1);
      const std::string_view tail = " \t([{-:,@";
      while (!text.empty() && tail.find(text.back()) != std::string_view::npos) text.remove_suffix(1);
      if (text.size() >= 3 && text.substr(text.size() - 3) == " at") text.remove_suffix(3);
      text = trim(text);
    }
    steps.push_back(TimedStep{m->seconds * 1'000'000'000LL, std::string(text), false});
  }
  return steps;
}

std::string format_timestamp(std::int64_t t_ns) {
  const std::int64_t secs = std::max<std::int64_t>(t_ns, 0) / 1'000'000'000LL;
  const std::int64_t s = secs % 60;
  return std::to_string(secs / 60) + ":" + (s < 10 ? "0" : "") + std::to_string(s);
}

// ---------------------------------------------------------------------------
// Annotations

Annotation load_annotation(const fs::path& path) {
  try {
    const auto j = json::parse(read_file(path));
    Annotation a;
    a.video_id = j.value("video_id", std::string());
    for (const auto& o : j.value("objects", json::array())) {
      AnnotatedObject obj;
      obj.name = o.at("name").get<std::string>();
      obj.action = o.value("action", "use the " + obj.name);
      const auto box = o.at("box").get<std::vector<int>>();
      if (box.size() != 4 || box[2] <= 0 || box[3] <= 0)
        throw Error(ErrorCode::kSchemaViolation, path.string() + ": box must be [x0,y0,w,h]");
      obj.x0 = box[0];
      obj.y0 = box[1];
      obj.w = box[2];
      obj.h = box[3];
      obj.t_start_ns = o.value("t_start_ns", std::int64_t{0});
      obj.t_end_ns = o.value("t_end_ns", std::numeric_limits<std::int64_t>::max());
      a.objects.push_back(std::move(obj));
    }
    for (const auto& s : j.value("steps", json::array()))
      a.steps.push_back({s.at("t_ns").get<std::int64_t>(), s.at("text").get<std::string>()});
    std::stable_sort(a.steps.begin(), a.steps.end(),
                     [](const AnnotatedStep& x, const AnnotatedStep& y) { return x.t_ns < y.t_ns; });
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, path.string() + ": " + e.what());
  }
}

void save_annotation(const Annotation& ann, const fs::path& path) {
  json objects = json::array();
  for (const auto& o : ann.objects)
    objects.push_back({{"name", o.name},
                       {"action", o.action},
                       {"box", {o.x0, o.y0, o.w, o.h}},
                       {"t_start_ns", o.t_start_ns},
                       {"t_end_ns", o.t_end_ns}});
  json steps = json::array();
  for (const auto& s : ann.steps) steps.push_back({{"t_ns", s.t_ns}, {"text", s.text}});
  const json j = {{"video_id", ann.video_id}, {"objects", objects}, {"steps", steps}};
  write_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Backends

void BackendConfig::validate() const {
  if (kind == BackendKind::kHttp && endpoint.empty())
    throw Error(ErrorCode::kConfigInvalid, "http backend requires an endpoint");
  if (timeout_s <= 0) throw Error(ErrorCode::kConfigInvalid, "timeout_s must be > 0");
  if (max_retries < 0) throw Error(ErrorCode::kConfigInvalid, "max_retries must be >= 0");
}

namespace {

Annotation require_annotation(const RenderedClip& clip) {
  if (!clip.sidecar_path)
    throw Error(ErrorCode::kInvalidArgument,
                "mock backend needs an annotation sidecar for " + clip.video_id);
  return load_annotation(*clip.sidecar_path);
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace

std::vector<std::pair<const AnnotatedObject*, std::int64_t>> MockBackend::visible_objects(
    const RenderedClip& clip, const Annotation& ann) const {
  std::vector<std::pair<const AnnotatedObject*, std::int64_t>> out;
  const auto& cond = clip.condition;
  for (const auto& obj : ann.objects) {
    const bool peripheral_ok =
        cond.kind == ConditionKind::kDual && clip.frame_w > 0 && clip.frame_h > 0 &&
        static_cast<long long>(obj.w) * cond.peripheral_w >=
            static_cast<long long>(min_peripheral_px_) * clip.frame_w &&
        static_cast<long long>(obj.h) * cond.peripheral_h >=
            static_cast<long long>(min_peripheral_px_) * clip.frame_h;
    for (const auto& f : clip.frames) {
      if (f.t_ns < obj.t_start_ns || f.t_ns > obj.t_end_ns) continue;
      const bool in_view = !f.region || f.region->intersects(obj.x0, obj.y0, obj.w, obj.h);
      if (in_view || peripheral_ok) {
        out.emplace_back(&obj, f.t_ns);
        break;
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  return out;
}

std::string MockBackend::describe(const RenderedClip& clip, std::string_view /*prompt*/) {
  if (clip.frames.empty()) return {};
  const Annotation ann = require_annotation(clip);
  const auto seen = visible_objects(clip, ann);
  if (seen.empty()) return "The video shows a work area, but no tools or ingredients are identifiable.\n";
  std::string text = "Procedure:\n";
  int k = 1;
  for (const auto& [obj, t] : seen) {
    text += std::to_string(k++) + ". (" + format_timestamp(t) + ") " + capitalize(obj->action) +
            " with the " + obj->name + ".\n";
  }
  return text;
}

std::string MockBackend::ask(const RenderedClip& context, std::string_view question,
                             const Description* instructor) {
  if (context.frames.empty() || trim(question).empty()) return {};
  std::vector<AnnotatedStep> steps;
  if (context.sidecar_path) {
    steps = load_annotation(*context.sidecar_path).steps;
  } else if (instructor != nullptr) {
    for (const auto& s : instructor->steps) steps.push_back({s.t_ns, s.text});
  } else {
    throw Error(ErrorCode::kInvalidArgument,
                "mock backend needs an annotation sidecar or instructor description");
  }
  const std::int64_t now = context.frames.back().t_ns;
  for (const auto& s : steps)
    if (s.t_ns > now) return "Next step (" + format_timestamp(s.t_ns) + "): " + s.text;
  return std::string(kProcedureComplete);
}

HttpBackend::HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  parse_http_url(cfg_.endpoint);
}

namespace {

std::string post_multipart(const BackendConfig& cfg, const httplib::MultipartFormDataItems& items) {
  const auto url = parse_http_url(cfg.endpoint);
  httplib::Headers headers;
  if (!cfg.auth_env.empty()) {
    if (const char* secret = std::getenv(cfg.auth_env.c_str()); secret != nullptr && *secret)
      headers.emplace("Authorization", std::string("Bearer ") + secret);
  }
  ErrorCode last = ErrorCode::kBackendUnavailable;
  std::string detail;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    httplib::Client cli(url.origin);
    cli.set_connection_timeout(cfg.timeout_s);
    cli.set_read_timeout(cfg.timeout_s);
    cli.set_write_timeout(cfg.timeout_s);
    auto res = cli.Post(url.path, headers, items);
    if (!res) {
      last = res.error() == httplib::Error::Read || res.error() == httplib::Error::Write
                 ? ErrorCode::kTimeout
                 : ErrorCode::kBackendUnavailable;
      detail = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last = ErrorCode::kBackendUnavailable;
      detail = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw Error(ErrorCode::kBackendUnavailable, cfg.endpoint + " returned HTTP " +
                                                      std::to_string(res->status));
    return res->body;
  }
  throw Error(last, cfg.endpoint + ": " + detail);
}

std::string frame_bytes(const Frame& image, const std::string& path) {
  if (!image.empty()) return encode_ppm(image);
  if (!path.empty()) return read_file(path);
  return {};
}

}  // namespace

std::string HttpBackend::post(const RenderedClip& clip, const std::string& prompt) {
  httplib::MultipartFormDataItems items;
  items.push_back({"prompt", prompt, "", "text/plain; charset=utf-8"});
  // The condition is deliberately not sent: the model sees only pixels.
  json meta = {{"video_id", clip.video_id},
               {"fps", clip.fps},
               {"frames", json::array()}};
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    const auto& f = clip.frames[i];
    const std::string name = "frame_" + std::to_string(i);
    meta["frames"].push_back({{"t_ns", f.t_ns}, {"part", name}});
    items.push_back({name, frame_bytes(f.image, f.image_path), name + ".ppm",
                     "image/x-portable-pixmap"});
    if (f.peripheral || !f.peripheral_path.empty()) {
      const std::string pname = name + "_peripheral";
      items.push_back({pname, frame_bytes(f.peripheral ? *f.peripheral : Frame{}, f.peripheral_path),
                       pname + ".ppm", "image/x-portable-pixmap"});
    }
  }
  items.push_back({"meta", meta.dump(), "", "application/json"});
  return post_multipart(cfg_, items);
}

std::string HttpBackend::describe(const RenderedClip& clip, std::string_view prompt) {
  return post(clip, std::string(prompt));
}

std::string HttpBackend::ask(const RenderedClip& context, std::string_view question,
                             const Description* instructor) {
  return post(context, build_ask_prompt(question, instructor));
}

HttpJudgeClient::HttpJudgeClient(BackendConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  parse_http_url(cfg_.endpoint);
}

std::string HttpJudgeClient::complete(const std::string& prompt) {
  httplib::MultipartFormDataItems items;
  items.push_back({"prompt", prompt, "", "text/plain; charset=utf-8"});
  return post_multipart(cfg_, items);
}

std::unique_ptr<DescriptionBackend> make_backend(const BackendConfig& cfg) {
  cfg.validate();
  if (cfg.kind == BackendKind::kHttp) return std::make_unique<HttpBackend>(cfg);
  return std::make_unique<MockBackend>();
}

std::string build_ask_prompt(std::string_view question, const Description* instructor) {
  std::string prompt;
  if (instructor != nullptr && !instructor->raw_text.empty()) {
    prompt += "Reference procedure recorded by an instructor (timestamps refer to the "
              "instructor's video):\n";
    prompt += instructor->raw_text;
    if (prompt.back() != '\n') prompt += '\n';
    prompt += "\n";
  }
  prompt += "Based on the first-person video recorded up to this point, answer the question. "
            "When referring to the reference procedure, cite its timestamp.\n\nQuestion: ";
  prompt += question;
  return prompt;
}

Description describe(const DescriptionRequest& req, DescriptionBackend& backend) {
  if (!req.fresh_session)
    throw Error(ErrorCode::kInvalidArgument, "backends are stateless; only fresh sessions exist");
  if (req.clip.frames.empty()) throw Error(ErrorCode::kEmptyReply, "clip has no frames");
  const std::string_view prompt =
      req.prompt.empty() ? paper_procedure_prompt() : std::string_view(req.prompt);
  Description d;
  d.raw_text = backend.describe(req.clip, prompt);
  if (trim(d.raw_text).empty())
    throw Error(ErrorCode::kEmptyReply, "backend returned no text for " + req.clip.video_id);
  d.char_len = utf8_length(d.raw_text);
  d.steps = parse_timed_steps(d.raw_text);
  const std::int64_t end = req.clip.frames.back().t_ns;
  for (auto& s : d.steps) s.out_of_range = s.t_ns > end;
  return d;
}

Description describe(const DescriptionRequest& req, const BackendConfig& cfg) {
  auto backend = make_backend(cfg);
  return describe(req, *backend);
}

std::string ask(const RenderedClip& context, std::string_view question, DescriptionBackend& backend,
                const Description* instructor) {
  if (trim(question).empty()) throw Error(ErrorCode::kInvalidArgument, "question is empty");
  if (context.frames.empty()) throw Error(ErrorCode::kInvalidArgument, "context has no frames");
  std::string answer = backend.ask(context, question, instructor);
  if (trim(answer).empty()) throw Error(ErrorCode::kEmptyReply, "backend returned no answer");
  return answer;
}

}  // namespace fovea
