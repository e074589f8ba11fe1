#include <regex>

#include "owlsim/agents/reasoning.hpp"
#include "owlsim/agents/subgoal.hpp"
#include "owlsim/core/text.hpp"

namespace owlsim::agents {

using sim::Action;
using sim::ActionKind;
using sim::WidgetKind;

std::string format_subgoal(const Subgoal& g) {
    switch (g.kind) {
        case SubgoalKind::Open: return "open " + g.target;
        case SubgoalKind::Navigate: return "navigate to " + g.target;
        case SubgoalKind::Enter: return "enter '" + g.value + "' in " + g.slot;
        case SubgoalKind::Select: return "select '" + g.value + "' for " + g.slot;
        case SubgoalKind::Turn: return "turn " + g.value + " " + g.slot;
        case SubgoalKind::GoBack: return "go back to " + g.target;
        case SubgoalKind::Finish: return "finish";
    }
    return "finish";
}

std::optional<Subgoal> parse_subgoal(std::string_view text) {
    static const std::regex repeat_re(R"( \(\d+\)$)");
    static const std::regex open_re(R"(^open (\S+)$)");
    static const std::regex nav_re(R"(^navigate to (\S+)$)");
    static const std::regex back_re(R"(^go back to (\S+)$)");
    static const std::regex enter_re(R"(^enter '(.*)' in (\S+)$)");
    static const std::regex select_re(R"(^select '(.*)' for (\S+)$)");
    static const std::regex turn_re(R"(^turn (on|off) (\S+)$)");

    const std::string s = std::regex_replace(std::string(text), repeat_re, "");
    std::smatch m;
    if (s == "finish") return Subgoal{};
    if (std::regex_match(s, m, open_re)) return Subgoal{SubgoalKind::Open, m[1], {}, {}};
    if (std::regex_match(s, m, nav_re)) return Subgoal{SubgoalKind::Navigate, m[1], {}, {}};
    if (std::regex_match(s, m, back_re)) return Subgoal{SubgoalKind::GoBack, m[1], {}, {}};
    if (std::regex_match(s, m, enter_re)) return Subgoal{SubgoalKind::Enter, {}, m[2], m[1]};
    if (std::regex_match(s, m, select_re)) return Subgoal{SubgoalKind::Select, {}, m[2], m[1]};
    if (std::regex_match(s, m, turn_re)) return Subgoal{SubgoalKind::Turn, {}, m[2], m[1]};
    return std::nullopt;
}

std::optional<Subgoal> subgoal_for(const sim::Environment& env, const sim::EnvState& before, const Action& action) {
    switch (action.kind()) {
        case ActionKind::OpenApp:
            return Subgoal{SubgoalKind::Open, action.as<sim::act::OpenApp>()->app_name, {}, {}};
        case ActionKind::Terminate:
            if (action.is_terminate(sim::TerminateStatus::Success)) return Subgoal{};
            return std::nullopt;
        case ActionKind::Back:
            if (before.nav_stack.empty()) return std::nullopt;
            return Subgoal{SubgoalKind::GoBack, before.nav_stack.back().screen, {}, {}};
        case ActionKind::Click:
        case ActionKind::Type: {
            if (!before.current_app) return std::nullopt;
            const auto* screen = env.app(*before.current_app).find_screen(before.current_screen);
            const auto* w = screen ? screen->find(std::string(action.widget())) : nullptr;
            if (!w) return std::nullopt;
            if (action.kind() == ActionKind::Type) {
                if (!w->slot_key || w->kind != WidgetKind::TextField) return std::nullopt;
                return Subgoal{SubgoalKind::Enter, {}, *w->slot_key, action.as<sim::act::Type>()->text};
            }
            if (w->target_screen) return Subgoal{SubgoalKind::Navigate, *w->target_screen, {}, {}};
            if (!w->slot_key) return std::nullopt;
            if (w->kind == WidgetKind::Checkbox) {
                auto it = before.slot_values.find(*w->slot_key);
                const bool on = it != before.slot_values.end() && it->second == "on";
                return Subgoal{SubgoalKind::Turn, {}, *w->slot_key, on ? "off" : "on"};
            }
            if (w->kind == WidgetKind::ListItem) return Subgoal{SubgoalKind::Select, {}, *w->slot_key, w->label};
            return std::nullopt;
        }
        default:
            return std::nullopt;
    }
}

std::vector<std::string> phase_subgoals(const sim::Environment& env, sim::EnvState start,
                                        const std::vector<Action>& actions) {
    std::vector<std::string> out;
    for (const auto& a : actions) {
        if (start.terminated()) break;
        if (auto g = subgoal_for(env, start, a)) out.push_back(fresh_subgoal(format_subgoal(*g), out, {}));
        start = env.transition(start, a);
    }
    return out;
}

bool subgoal_complete(const Subgoal& g, const sim::EnvState& s) {
    auto slot_is = [&](const std::string& v) {
        auto it = s.slot_values.find(g.slot);
        return it != s.slot_values.end() && it->second == v;
    };
    switch (g.kind) {
        case SubgoalKind::Open: return s.current_app == g.target;
        case SubgoalKind::Navigate:
        case SubgoalKind::GoBack: return s.current_app.has_value() && s.current_screen == g.target;
        case SubgoalKind::Enter:
        case SubgoalKind::Select:
        case SubgoalKind::Turn: return slot_is(g.value);
        case SubgoalKind::Finish: return s.termination == sim::TerminateStatus::Success;
    }
    return false;
}

std::string fresh_subgoal(const std::string& text, const std::vector<std::string>& pending,
                          const std::vector<std::string>& completed) {
    auto taken = [&](const std::string& s) {
        return std::find(pending.begin(), pending.end(), s) != pending.end() ||
               std::find(completed.begin(), completed.end(), s) != completed.end();
    };
    if (!taken(text)) return text;
    for (int n = 2;; ++n) {
        auto candidate = text + " (" + std::to_string(n) + ")";
        if (!taken(candidate)) return candidate;
    }
}

std::string intent_clause(const Action& action, const sim::Observation& obs) {
    auto widget_phrase = [&](const std::string& id) {
        const auto* w = obs.find(id);
        if (!w) return "the " + id + " widget (" + id + ")";
        return "the " + w->label + " " + std::string(sim::to_string(w->kind)) + " (" + id + ")";
    };
    switch (action.kind()) {
        case ActionKind::Click: return "so I click " + widget_phrase(std::string(action.widget()));
        case ActionKind::Type:
            return "so I type '" + action.as<sim::act::Type>()->text + "' into " + widget_phrase(std::string(action.widget()));
        case ActionKind::Scroll:
            return "so I scroll " + std::string(sim::to_string(action.as<sim::act::Scroll>()->direction));
        case ActionKind::Back: return "so I go back";
        case ActionKind::OpenApp: return "so I open " + action.as<sim::act::OpenApp>()->app_name;
        case ActionKind::Wait: return "so I wait";
        case ActionKind::Terminate:
            return "so I end the task with " + std::string(sim::to_string(action.as<sim::act::Terminate>()->status));
    }
    return "so I wait";
}

std::optional<Intent> parse_intent(std::string_view reasoning) {
    static const std::regex click_re(R"(^click the .* \((\S+)\)\.?$)");
    static const std::regex type_re(R"(^type '(.*)' into the .* \((\S+)\)\.?$)");
    static const std::regex scroll_re(R"(^scroll (up|down)\.?$)");
    static const std::regex open_re(R"(^open (\S+?)\.?$)");
    static const std::regex end_re(R"(^end the task with (success|failure)\.?$)");

    auto pos = reasoning.rfind("so I ");
    if (pos == std::string_view::npos) return std::nullopt;
    const std::string clause(reasoning.substr(pos + 5));
    std::smatch m;
    Intent in;
    if (std::regex_match(clause, m, click_re)) {
        in.kind = ActionKind::Click;
        in.widget_id = m[1];
    } else if (std::regex_match(clause, m, type_re)) {
        in.kind = ActionKind::Type;
        in.text = m[1];
        in.widget_id = m[2];
    } else if (std::regex_match(clause, m, scroll_re)) {
        in.kind = ActionKind::Scroll;
        in.direction = m[1] == "up" ? sim::ScrollDirection::Up : sim::ScrollDirection::Down;
    } else if (clause == "go back" || clause == "go back.") {
        in.kind = ActionKind::Back;
    } else if (std::regex_match(clause, m, open_re)) {
        in.kind = ActionKind::OpenApp;
        in.app = m[1];
    } else if (clause == "wait" || clause == "wait.") {
        in.kind = ActionKind::Wait;
    } else if (std::regex_match(clause, m, end_re)) {
        in.kind = ActionKind::Terminate;
        in.status = m[1] == "success" ? sim::TerminateStatus::Success : sim::TerminateStatus::Failure;
    } else {
        return std::nullopt;
    }
    return in;
}

std::optional<Action> intent_action(const Intent& in) {
    switch (in.kind) {
        case ActionKind::Click:
            if (in.widget_id) return Action::click(*in.widget_id);
            break;
        case ActionKind::Type:
            if (in.widget_id && in.text) return Action::type(*in.widget_id, *in.text);
            break;
        case ActionKind::Scroll:
            if (in.direction) return Action::scroll(*in.direction);
            break;
        case ActionKind::Back: return Action::back();
        case ActionKind::OpenApp:
            if (in.app) return Action::open_app(*in.app);
            break;
        case ActionKind::Wait: return Action::wait();
        case ActionKind::Terminate:
            if (in.status) return Action::terminate(*in.status);
            break;
    }
    return std::nullopt;
}

std::string conclusion_for(const Action& action, const sim::TransitionReport& report) {
    if (report.state_changed) return report.description;
    if (action.kind() == ActionKind::Wait) return "waited; nothing changed";
    return sim::to_string(action) + " had no effect";
}

std::map<std::string, std::string> extract_notes(const sim::Observation& obs) {
    std::map<std::string, std::string> notes;
    for (const auto& w : obs.visible_widgets) {
        const bool unset_box = w.kind == WidgetKind::Checkbox && w.current_value != "on";
        if (w.current_value && !w.current_value->empty() && !unset_box) notes[text::to_key(w.label)] = *w.current_value;
        auto colon = w.label.find(": ");
        if (colon != std::string::npos) {
            auto value = text::trim(w.label.substr(colon + 2));
            auto key = text::to_key(w.label.substr(0, colon));
            if (!value.empty() && !key.empty()) notes[key] = value;
        }
    }
    return notes;
}

}  // namespace owlsim::agents
