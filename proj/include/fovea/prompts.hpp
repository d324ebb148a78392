#pragma once

// Prompt presets. The canonical texts live in prompts/*.txt and are compiled
// into the library verbatim.

#include <string>
#include <string_view>

namespace fovea {

inline constexpr std::string_view kProcedurePresetName = "paper_procedure";
inline constexpr std::string_view kJudgePresetName = "paper_judge";
inline constexpr std::string_view kJudgeRetrySuffix = "Answer with the score line only.";

std::string_view paper_procedure_prompt();
// Contains the placeholders {text_1} (reference) and {text_2} (candidate).
std::string_view paper_judge_prompt();

// Looks up a preset by name; throws Error(kInvalidArgument) for unknown names.
std::string_view prompt_preset(std::string_view name);

std::string fill_judge_prompt(std::string_view text_a, std::string_view text_b);

}  // namespace fovea
