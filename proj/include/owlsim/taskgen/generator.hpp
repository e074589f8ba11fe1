#pragma once

#include <optional>
#include <string>
#include <vector>

#include "owlsim/core/rng.hpp"
#include "owlsim/taskgen/task.hpp"

namespace owlsim::taskgen {

struct SlotBinding {
    std::string slot_key;
    std::string value;
    sim::WidgetKind editor = sim::WidgetKind::TextField;
    std::size_t screen_index = 0;
    bool operator==(const SlotBinding&) const = default;
};

/// A walk from the home screen along navigation edges plus the slot values chosen on it.
struct SampledPath {
    std::string app_name;
    std::string intent_verb;
    std::vector<std::string> screens;
    std::vector<std::string> descriptions;
    std::vector<SlotBinding> slot_bindings;
    bool operator==(const SampledPath&) const = default;
};

inline constexpr std::size_t kMaxBindingsPerPath = 3;

SampledPath sample_path(const sim::AppGraph& graph, Rng& rng, int max_len);

enum class InstructionStyle { Explicit, Natural };

std::optional<InstructionStyle> parse_style(std::string_view s);

std::string synthesize_instruction(const SampledPath& path, InstructionStyle style);

/// Inverse of the explicit template.
struct ExplicitInstruction {
    std::string app;
    std::vector<std::string> visited_screens;
    std::map<std::string, std::string> slot_constraints;
};
std::optional<ExplicitInstruction> parse_explicit_instruction(std::string_view instruction);

struct ValidationReport {
    bool success = false;
    std::vector<std::size_t> invalid_steps;
    std::string error;
};

/// Replays the task's oracle actions from reset. Never throws for task defects.
ValidationReport validate_task(const TaskQuery& task, sim::Environment& env);

/// Builds a task whose oracle actions are planned from the path.
TaskQuery task_from_path(const sim::Environment& env, const SampledPath& path, std::string task_id,
                         InstructionStyle style);

/// `n` validated tasks. Throws ExhaustionError after 10*n consecutive rejected syntheses.
std::vector<TaskQuery> generate_pool(const sim::AppRegistry& apps, std::size_t n, Rng& rng, int max_len,
                                     InstructionStyle style = InstructionStyle::Explicit);

}  // namespace owlsim::taskgen
