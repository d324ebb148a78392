#pragma once

// Description-generating backends: a deterministic mock driven by annotation
// sidecars and an HTTP client for real models. Every call is a new
// conversation; no backend keeps state between calls.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fovea/frame.hpp"
#include "fovea/metrics.hpp"

namespace fovea {

struct TimedStep {
  std::int64_t t_ns = 0;
  std::string text;
  bool out_of_range = false;  // references a time past the clip's end
};

struct Description {
  std::string raw_text;
  std::vector<TimedStep> steps;
  std::size_t char_len = 0;
};

// Extracts M:SS, MM:SS and <n>s timestamps, one per line, with the rest of the
// line as step text. Never throws.
std::vector<TimedStep> parse_timed_steps(std::string_view raw_text);

std::string format_timestamp(std::int64_t t_ns);  // "M:SS", seconds rounded down

// Ground truth for synthetic videos.
struct AnnotatedObject {
  std::string name;
  std::string action;  // imperative phrase, e.g. "whisk the batter"
  int x0 = 0, y0 = 0, w = 0, h = 0;  // full-frame pixels
  std::int64_t t_start_ns = 0;
  std::int64_t t_end_ns = 0;
};

struct AnnotatedStep {
  std::int64_t t_ns = 0;
  std::string text;
};

struct Annotation {
  std::string video_id;
  std::vector<AnnotatedObject> objects;
  std::vector<AnnotatedStep> steps;  // ordered by t_ns
};

Annotation load_annotation(const std::filesystem::path& path);
void save_annotation(const Annotation& ann, const std::filesystem::path& path);

enum class BackendKind { kMock, kHttp };

struct BackendConfig {
  BackendKind kind = BackendKind::kMock;
  std::string endpoint;                  // http only
  std::string auth_env = "FOVEA_API_KEY";  // name of the env var holding the secret
  int timeout_s = 120;
  int max_retries = 1;

  void validate() const;
};

struct DescriptionRequest {
  RenderedClip clip;
  std::string prompt;  // defaults to the paper_procedure preset when empty
  bool fresh_session = true;
};

class DescriptionBackend {
 public:
  virtual ~DescriptionBackend() = default;
  virtual std::string describe(const RenderedClip& clip, std::string_view prompt) = 0;
  // `instructor` is an optional reference description of the whole procedure.
  virtual std::string ask(const RenderedClip& context, std::string_view question,
                          const Description* instructor) = 0;
};

// Mock rule: an annotated object is described iff its box intersects the view
// of at least one frame taken while the object is present. The view is the
// whole frame for Full, the crop region for Gaze/Center and, for Dual, the
// focus crop plus any object still at least `min_peripheral_px` wide and tall
// after downscaling into the peripheral stream.
class MockBackend : public DescriptionBackend {
 public:
  explicit MockBackend(int min_peripheral_px = 24) : min_peripheral_px_(min_peripheral_px) {}
  std::string describe(const RenderedClip& clip, std::string_view prompt) override;
  std::string ask(const RenderedClip& context, std::string_view question,
                  const Description* instructor) override;

  // Objects visible in the clip, ordered by first visible time.
  std::vector<std::pair<const AnnotatedObject*, std::int64_t>> visible_objects(
      const RenderedClip& clip, const Annotation& ann) const;

 private:
  int min_peripheral_px_;
};

inline constexpr std::string_view kProcedureComplete = "procedure complete";

// Multipart POST of the frames (PPM) plus a "prompt" field; the reply body is
// the description text.
class HttpBackend : public DescriptionBackend {
 public:
  explicit HttpBackend(BackendConfig cfg);
  std::string describe(const RenderedClip& clip, std::string_view prompt) override;
  std::string ask(const RenderedClip& context, std::string_view question,
                  const Description* instructor) override;

 private:
  std::string post(const RenderedClip& clip, const std::string& prompt);
  BackendConfig cfg_;
};

// Text-only judge over the same multipart protocol (no frame parts).
class HttpJudgeClient : public JudgeClient {
 public:
  explicit HttpJudgeClient(BackendConfig cfg);
  std::string complete(const std::string& prompt) override;

 private:
  BackendConfig cfg_;
};

std::unique_ptr<DescriptionBackend> make_backend(const BackendConfig& cfg);

Description describe(const DescriptionRequest& req, DescriptionBackend& backend);
Description describe(const DescriptionRequest& req, const BackendConfig& cfg);

std::string ask(const RenderedClip& context, std::string_view question, DescriptionBackend& backend,
                const Description* instructor = nullptr);

// Prompt sent for a stop-and-ask question, with the instructor's description
// prepended as reference context when present.
std::string build_ask_prompt(std::string_view question, const Description* instructor);

}  // namespace fovea
