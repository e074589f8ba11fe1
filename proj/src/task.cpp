#include <algorithm>
#include <set>

#include "owlsim/core/errors.hpp"
#include "owlsim/taskgen/planner.hpp"
#include "owlsim/taskgen/task.hpp"

namespace owlsim::taskgen {

using sim::Action;
using sim::EnvState;

Json to_json(const TaskQuery& t) {
    Json j;
    j["task_id"] = t.task_id;
    j["instruction"] = t.instruction;
    j["app_names"] = t.app_names;
    Json goal;
    goal["slot_constraints"] = Json::object();
    for (const auto& [k, v] : t.goal.slot_constraints) goal["slot_constraints"][k] = v;
    goal["goal_screen"] = t.goal.goal_screen ? Json(*t.goal.goal_screen) : Json(nullptr);
    j["goal"] = std::move(goal);
    j["oracle_actions"] = Json::array();
    for (const auto& a : t.oracle_actions) j["oracle_actions"].push_back(sim::to_json(a));
    j["difficulty"] = t.difficulty;
    j["guidance"] = t.guidance ? Json(*t.guidance) : Json(nullptr);
    return j;
}

TaskQuery task_from_json(const Json& j) {
    try {
        TaskQuery t;
        t.task_id = j.at("task_id").get<std::string>();
        t.instruction = j.at("instruction").get<std::string>();
        t.app_names = j.at("app_names").get<std::vector<std::string>>();
        const auto& goal = j.at("goal");
        for (const auto& [k, v] : goal.at("slot_constraints").items()) t.goal.slot_constraints[k] = v.get<std::string>();
        if (goal.contains("goal_screen") && !goal["goal_screen"].is_null())
            t.goal.goal_screen = goal["goal_screen"].get<std::string>();
        for (const auto& a : j.at("oracle_actions")) t.oracle_actions.push_back(sim::action_from_json(a));
        t.difficulty = j.at("difficulty").get<int>();
        if (j.contains("guidance") && !j["guidance"].is_null()) t.guidance = j["guidance"].get<std::string>();
        if (t.task_id.empty() || t.instruction.empty() || t.app_names.empty() || t.difficulty < 1)
            throw SchemaError("task " + t.task_id + ": empty id/instruction/apps or difficulty < 1");
        return t;
    } catch (const Json::exception& e) {
        throw SchemaError(std::string("task: ") + e.what());
    }
}

std::vector<TaskQuery> read_pool(const std::string& path) {
    std::vector<TaskQuery> pool;
    std::set<std::string> ids;
    for (const auto& row : read_jsonl(path)) {
        pool.push_back(task_from_json(row));
        if (!ids.insert(pool.back().task_id).second) throw SchemaError("duplicate task_id " + pool.back().task_id);
    }
    return pool;
}

void write_pool(const std::string& path, const std::vector<TaskQuery>& pool) {
    std::vector<Json> rows;
    for (const auto& t : pool) rows.push_back(to_json(t));
    write_jsonl(path, rows);
}

sim::Observation reset(sim::Environment& env, const TaskQuery& task) { return env.reset(task.app_names); }

bool goal_satisfied(const EnvState& s, const TaskQuery& task) {
    return sim::goal_satisfied(s, task.goal.slot_constraints, task.goal.goal_screen,
                               task.app_names.empty() ? std::nullopt : std::optional(task.primary_app()));
}

// ---------------------------------------------------------------------------
// Planner

std::optional<std::size_t> Route::index_of(std::string_view screen) const {
    for (std::size_t i = 0; i < screens.size(); ++i)
        if (screens[i] == screen) return i;
    return std::nullopt;
}

Route route_of(const TaskQuery& task, const sim::AppRegistry& apps) {
    Route route;
    route.app = task.primary_app();
    sim::Environment env(apps);
    env.reset(task.app_names);
    for (const auto& a : task.oracle_actions) {
        if (env.state().terminated()) break;
        env.step(a);
        const auto& s = env.state();
        if (s.current_app != route.app) continue;
        if (auto idx = route.index_of(s.current_screen))
            route.screens.resize(*idx + 1);
        else
            route.screens.push_back(s.current_screen);
    }
    const auto& graph = env.app(route.app);
    for (const auto& [slot, value] : task.goal.slot_constraints) {
        RouteBinding b{slot, value, route.screens.size()};
        for (std::size_t i = 0; i < route.screens.size(); ++i)
            if (graph.editor_for(route.screens[i], slot)) {
                b.screen_index = i;
                break;
            }
        route.bindings.push_back(std::move(b));
    }
    return route;
}

std::optional<Action> scroll_toward(const sim::Screen& screen, const sim::Widget& widget, int offset) {
    if (screen.visible_at(widget, offset)) return std::nullopt;
    return Action::scroll(widget.visible_from_scroll < offset ? sim::ScrollDirection::Up : sim::ScrollDirection::Down);
}

namespace {

bool binding_satisfied(const EnvState& s, const RouteBinding& b) {
    auto it = s.slot_values.find(b.slot_key);
    return it != s.slot_values.end() && it->second == b.value;
}

// The widget that, when acted on, makes `b` hold.
const sim::Widget* editor_for_value(const sim::Screen& screen, const RouteBinding& b) {
    for (const auto& w : screen.widgets) {
        if (w.slot_key != b.slot_key) continue;
        if (w.kind == sim::WidgetKind::ListItem && w.label != b.value) continue;
        return &w;
    }
    return nullptr;
}

Action reach_or(const sim::Screen& screen, const sim::Widget& w, int offset, Action act) {
    if (auto s = scroll_toward(screen, w, offset)) return *s;
    return act;
}

}  // namespace

std::optional<Action> next_oracle_action(const sim::Environment& env, const EnvState& s, const Route& route) {
    if (s.terminated()) return std::nullopt;

    bool all_bound = std::all_of(route.bindings.begin(), route.bindings.end(),
                                 [&](const RouteBinding& b) { return binding_satisfied(s, b); });
    if (route.screens.empty()) {
        if (all_bound) return Action::terminate(sim::TerminateStatus::Success);
        return std::nullopt;
    }
    if (s.current_app != route.app) return Action::open_app(route.app);

    const auto& graph = env.app(route.app);
    auto here = route.index_of(s.current_screen);
    if (!here) {
        if (!s.nav_stack.empty()) {
            const auto& top = s.nav_stack.back();
            if (top.app == route.app && route.index_of(top.screen)) return Action::back();
        }
        return Action::open_app(route.app);
    }
    const std::size_t i = *here;

    std::size_t j = route.screens.size() - 1;
    for (const auto& b : route.bindings)
        if (!binding_satisfied(s, b)) j = std::min(j, b.screen_index);
    if (j >= route.screens.size()) return std::nullopt;  // binding with no editor on the route

    if (j < i) {
        if (!s.nav_stack.empty()) {
            const auto& top = s.nav_stack.back();
            if (top.app == route.app && top.screen == route.screens[i - 1]) return Action::back();
        }
        return Action::open_app(route.app);
    }

    const auto& screen = graph.screen(s.current_screen);
    if (j == i) {
        // Edit this screen's unsatisfied slots in widget order.
        for (const auto& w : screen.widgets) {
            for (const auto& b : route.bindings) {
                if (b.screen_index != i || binding_satisfied(s, b) || w.slot_key != b.slot_key) continue;
                const sim::Widget* target = editor_for_value(screen, b);
                if (!target || target != &w) continue;
                switch (target->kind) {
                    case sim::WidgetKind::TextField:
                        return reach_or(screen, *target, s.scroll_offset, Action::type(target->widget_id, b.value));
                    case sim::WidgetKind::Checkbox:
                    case sim::WidgetKind::ListItem:
                        return reach_or(screen, *target, s.scroll_offset, Action::click(target->widget_id));
                    default:
                        return std::nullopt;
                }
            }
        }
    }
    if (i + 1 < route.screens.size()) {
        for (const auto& w : screen.widgets)
            if (w.target_screen == route.screens[i + 1])
                return reach_or(screen, w, s.scroll_offset, Action::click(w.widget_id));
        return std::nullopt;
    }
    if (all_bound) return Action::terminate(sim::TerminateStatus::Success);
    return std::nullopt;
}

std::optional<std::vector<Action>> oracle_plan(const sim::Environment& env, const EnvState& state,
                                               const Route& route, std::size_t limit) {
    std::vector<Action> plan;
    EnvState s = state;
    while (plan.size() < limit) {
        auto next = next_oracle_action(env, s, route);
        if (!next) return std::nullopt;
        plan.push_back(*next);
        if (next->kind() == sim::ActionKind::Terminate) return plan;
        EnvState after = env.transition(s, *next);
        if (after.same_observable(s) && after.nav_stack == s.nav_stack) return std::nullopt;  // no progress
        s = std::move(after);
    }
    return std::nullopt;
}

std::size_t oracle_distance(const sim::Environment& env, const EnvState& state, const Route& route,
                            const TaskQuery& task) {
    if (state.terminated())
        return (state.termination == sim::TerminateStatus::Success && goal_satisfied(state, task)) ? 0 : kUnreachable;
    auto plan = oracle_plan(env, state, route);
    return plan ? plan->size() : kUnreachable;
}

}  // namespace owlsim::taskgen
