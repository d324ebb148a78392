#include "fovea/prompts.hpp"

#include "fovea/error.hpp"

namespace fovea {

namespace detail {
extern const std::string_view kPaperProcedurePrompt;
extern const std::string_view kPaperJudgePrompt;
}  // namespace detail

std::string_view paper_procedure_prompt() { return detail::kPaperProcedurePrompt; }
std::string_view paper_judge_prompt() { return detail::kPaperJudgePrompt; }

std::string_view prompt_preset(std::string_view name) {
  if (name == kProcedurePresetName) return paper_procedure_prompt();
  if (name == kJudgePresetName) return paper_judge_prompt();
  throw Error(ErrorCode::kInvalidArgument, "unknown prompt preset '" + std::string(name) + "'");
}

std::string fill_judge_prompt(std::string_view text_a, std::string_view text_b) {
  // Placeholders are located in the template only, so texts that happen to
  // contain "{text_2}" are inserted untouched.
  const std::string_view tmpl = paper_judge_prompt();
  const auto a = tmpl.find("{text_1}");
  const auto b = tmpl.find("{text_2}");
  std::string out;
  out.reserve(tmpl.size() + text_a.size() + text_b.size());
  out.append(tmpl.substr(0, a));
  out.append(text_a);
  out.append(tmpl.substr(a + 8, b - a - 8));
  out.append(text_b);
  out.append(tmpl.substr(b + 8));
  return out;
}

}  // namespace fovea
