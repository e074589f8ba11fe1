#include "owlsim/taskgen/generator.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>

#include "owlsim/core/errors.hpp"
#include "owlsim/core/text.hpp"
#include "owlsim/taskgen/planner.hpp"

namespace owlsim::taskgen {

using sim::WidgetKind;

SampledPath sample_path(const sim::AppGraph& graph, Rng& rng, int max_len) {
    if (max_len < 1) throw Error("max_len must be >= 1");
    SampledPath path;
    path.app_name = graph.app_name;
    path.intent_verb = graph.intent_verb;
    const auto target_len = static_cast<std::size_t>(rng.between(1, max_len));
    path.screens.push_back(graph.home_screen);
    while (path.screens.size() < target_len) {
        auto next = graph.successors(path.screens.back());
        if (next.empty()) break;
        path.screens.push_back(next[rng.index(next.size())]);
    }
    for (const auto& id : path.screens) path.descriptions.push_back(graph.screen(id).description);

    // Candidate slots in path order; a slot is bound where its first editor appears.
    std::vector<SlotBinding> candidates;
    for (std::size_t i = 0; i < path.screens.size(); ++i) {
        for (const auto& w : graph.screen(path.screens[i]).widgets) {
            if (!w.slot_key) continue;
            bool seen = std::any_of(candidates.begin(), candidates.end(),
                                    [&](const SlotBinding& b) { return b.slot_key == *w.slot_key; });
            if (seen || graph.slot_values(*w.slot_key).empty()) continue;
            candidates.push_back({*w.slot_key, {}, w.kind, i});
        }
    }
    const auto count = static_cast<std::size_t>(
        rng.between(0, static_cast<long>(std::min(kMaxBindingsPerPath, candidates.size()))));
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    order.resize(count);
    std::sort(order.begin(), order.end());
    for (auto idx : order) {
        SlotBinding b = candidates[idx];
        auto pool = graph.slot_values(b.slot_key);
        b.value = pool[rng.index(pool.size())];
        path.slot_bindings.push_back(std::move(b));
    }
    return path;
}

std::optional<InstructionStyle> parse_style(std::string_view s) {
    if (s == "explicit") return InstructionStyle::Explicit;
    if (s == "natural") return InstructionStyle::Natural;
    return std::nullopt;
}

namespace {

std::string binding_clause(const SlotBinding& b) {
    switch (b.editor) {
        case WidgetKind::TextField:
            return "enter '" + b.value + "' in " + b.slot_key;
        case WidgetKind::Checkbox:
            return "turn " + b.value + " " + b.slot_key;
        default:
            return "select '" + b.value + "' for " + b.slot_key;
    }
}

// Splits on ", " outside single quotes.
std::vector<std::string> split_clauses(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\'') quoted = !quoted;
        if (!quoted && s[i] == ',' && i + 1 < s.size() && s[i + 1] == ' ') {
            out.push_back(cur);
            cur.clear();
            ++i;
            continue;
        }
        cur += s[i];
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string synthesize_instruction(const SampledPath& path, InstructionStyle style) {
    if (style == InstructionStyle::Explicit) {
        std::vector<std::string> clauses{"Open " + path.app_name};
        for (std::size_t i = 0; i < path.screens.size(); ++i) {
            if (i > 0) clauses.push_back((i == 1 ? "go to " : "proceed to ") + path.screens[i]);
            for (const auto& b : path.slot_bindings)
                if (b.screen_index == i) clauses.push_back(binding_clause(b));
        }
        return text::join(clauses, ", ");
    }
    // Natural style keeps the constraints and drops the navigation.
    std::vector<std::string> items;
    for (const auto& b : path.slot_bindings)
        items.push_back(b.editor == WidgetKind::Checkbox ? b.slot_key + " " + b.value : b.value);
    if (!items.empty()) return path.intent_verb + " " + text::join_list(items) + " for me in " + path.app_name;
    if (path.screens.size() == 1) return "Open " + path.app_name;
    return "Take me to " + path.screens.back() + " in " + path.app_name;
}

std::optional<ExplicitInstruction> parse_explicit_instruction(std::string_view instruction) {
    static const std::regex open_re(R"(^Open (\S+)$)");
    static const std::regex nav_re(R"(^(?:go|proceed) to (\S+)$)");
    static const std::regex enter_re(R"(^enter '([^']*)' in (\S+)$)");
    static const std::regex select_re(R"(^select '([^']*)' for (\S+)$)");
    static const std::regex toggle_re(R"(^turn (on|off) (\S+)$)");

    auto clauses = split_clauses(instruction);
    std::smatch m;
    ExplicitInstruction out;
    if (!std::regex_match(clauses[0], m, open_re)) return std::nullopt;
    out.app = m[1];
    for (std::size_t i = 1; i < clauses.size(); ++i) {
        const std::string& c = clauses[i];
        if (std::regex_match(c, m, nav_re))
            out.visited_screens.push_back(m[1]);
        else if (std::regex_match(c, m, enter_re) || std::regex_match(c, m, select_re))
            out.slot_constraints[m[2]] = m[1];
        else if (std::regex_match(c, m, toggle_re))
            out.slot_constraints[m[2]] = m[1];
        else
            return std::nullopt;
    }
    return out;
}

ValidationReport validate_task(const TaskQuery& task, sim::Environment& env) {
    ValidationReport report;
    try {
        reset(env, task);
    } catch (const Error& e) {
        report.error = e.what();
        return report;
    }
    for (std::size_t i = 0; i < task.oracle_actions.size(); ++i) {
        if (env.state().terminated()) {
            report.invalid_steps.push_back(i);
            report.error = "action after Terminate";
            break;
        }
        auto [obs, tr] = env.step(task.oracle_actions[i]);
        if (tr.invalid_target) report.invalid_steps.push_back(i);
    }
    report.success = goal_satisfied(env, task);
    return report;
}

TaskQuery task_from_path(const sim::Environment& env, const SampledPath& path, std::string task_id,
                         InstructionStyle style) {
    TaskQuery task;
    task.task_id = std::move(task_id);
    task.instruction = synthesize_instruction(path, style);
    task.app_names = {path.app_name};
    for (const auto& b : path.slot_bindings) task.goal.slot_constraints[b.slot_key] = b.value;
    task.goal.goal_screen = path.screens.back();
    task.difficulty = static_cast<int>(path.screens.size());

    Route route;
    route.app = path.app_name;
    route.screens = path.screens;
    for (const auto& b : path.slot_bindings) route.bindings.push_back({b.slot_key, b.value, b.screen_index});
    auto plan = oracle_plan(env, sim::EnvState{}, route);
    if (plan) task.oracle_actions = std::move(*plan);
    return task;
}

std::vector<TaskQuery> generate_pool(const sim::AppRegistry& apps, std::size_t n, Rng& rng, int max_len,
                                     InstructionStyle style) {
    if (n < 1) throw Error("pool size must be >= 1");
    if (apps.empty()) throw Error("no apps installed");
    std::vector<const sim::AppGraph*> graphs;
    for (const auto& [name, g] : apps) graphs.push_back(g.get());

    sim::Environment env(apps);
    std::vector<TaskQuery> pool;
    std::size_t consecutive_failures = 0;
    while (pool.size() < n) {
        const auto& graph = *graphs[rng.index(graphs.size())];
        auto path = sample_path(graph, rng, max_len);
        char id[32];
        std::snprintf(id, sizeof id, "t%04zu", pool.size());
        auto task = task_from_path(env, path, id, style);
        auto report = validate_task(task, env);
        if (!task.oracle_actions.empty() && report.success && report.invalid_steps.empty()) {
            pool.push_back(std::move(task));
            consecutive_failures = 0;
        } else if (++consecutive_failures >= 10 * n) {
            throw ExhaustionError("no valid task after " + std::to_string(consecutive_failures) + " attempts");
        }
    }
    return pool;
}

}  // namespace owlsim::taskgen
