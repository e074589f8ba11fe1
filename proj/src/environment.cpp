#include "owlsim/sim/environment.hpp"

#include "owlsim/core/errors.hpp"
#include "owlsim/core/text.hpp"

namespace owlsim::sim {

namespace {

std::string slot_display(const Widget& w, const EnvState& s) {
    auto it = s.slot_values.find(*w.slot_key);
    return it == s.slot_values.end() ? std::string() : it->second;
}

std::optional<std::string> current_value(const Widget& w, const EnvState& s) {
    if (!w.slot_key) return std::nullopt;
    auto it = s.slot_values.find(*w.slot_key);
    switch (w.kind) {
        case WidgetKind::Checkbox:
            return (it != s.slot_values.end() && it->second == "on") ? "on" : "off";
        case WidgetKind::ListItem:
            if (it != s.slot_values.end() && it->second == w.label) return std::string("selected");
            return std::nullopt;
        default:
            if (it == s.slot_values.end()) return std::nullopt;
            return it->second;
    }
}

const Screen* current_screen(const AppRegistry& apps, const EnvState& s) {
    if (s.at_launcher()) return nullptr;
    auto it = apps.find(*s.current_app);
    if (it == apps.end()) return nullptr;
    return it->second->find_screen(s.current_screen);
}

std::string screen_name(const std::optional<std::string>& app, const std::string& screen) {
    return app ? screen : std::string(kLauncherScreen);
}

}  // namespace

bool EnvState::same_observable(const EnvState& o) const {
    return current_app == o.current_app && current_screen == o.current_screen && scroll_offset == o.scroll_offset &&
           slot_values == o.slot_values && termination == o.termination;
}

Json to_json(const EnvState& s) {
    Json j;
    j["current_app"] = s.current_app ? Json(*s.current_app) : Json(nullptr);
    j["current_screen"] = s.current_screen;
    j["scroll_offset"] = s.scroll_offset;
    j["slot_values"] = Json::object();
    for (const auto& [k, v] : s.slot_values) j["slot_values"][k] = v;
    j["nav_stack"] = Json::array();
    for (const auto& e : s.nav_stack)
        j["nav_stack"].push_back(
            Json{{"app", e.app ? Json(*e.app) : Json(nullptr)}, {"screen", e.screen}, {"scroll_offset", e.scroll_offset}});
    j["step_count"] = s.step_count;
    j["termination"] = s.termination ? Json(std::string(to_string(*s.termination))) : Json(nullptr);
    return j;
}

EnvState env_state_from_json(const Json& j) {
    try {
        EnvState s;
        if (!j.at("current_app").is_null()) s.current_app = j.at("current_app").get<std::string>();
        s.current_screen = j.at("current_screen").get<std::string>();
        s.scroll_offset = j.at("scroll_offset").get<int>();
        for (const auto& [k, v] : j.at("slot_values").items()) s.slot_values[k] = v.get<std::string>();
        for (const auto& e : j.at("nav_stack")) {
            NavEntry n;
            if (!e.at("app").is_null()) n.app = e.at("app").get<std::string>();
            n.screen = e.at("screen").get<std::string>();
            n.scroll_offset = e.at("scroll_offset").get<int>();
            s.nav_stack.push_back(std::move(n));
        }
        s.step_count = j.at("step_count").get<int>();
        if (!j.at("termination").is_null())
            s.termination = j.at("termination") == "success" ? TerminateStatus::Success : TerminateStatus::Failure;
        return s;
    } catch (const Json::exception& e) {
        throw SchemaError(std::string("env state: ") + e.what());
    }
}

const VisibleWidget* Observation::find(std::string_view widget_id) const {
    for (const auto& w : visible_widgets)
        if (w.widget_id == widget_id) return &w;
    return nullptr;
}

std::string serialize(const Observation& o) {
    std::string out;
    out += "app: " + (o.app.empty() ? std::string("(none)") : o.app) + "\n";
    out += "screen: " + o.screen_id + "\n";
    out += "description: " + o.screen_description + "\n";
    out += "scroll: " + std::to_string(o.scroll_offset) + "/" + std::to_string(o.max_offset) + "\n";
    out += "widgets:\n";
    for (const auto& w : o.visible_widgets) {
        out += "  [" + w.widget_id + "] " + std::string(to_string(w.kind)) + " " + Json(w.label).dump();
        if (w.current_value) out += " = " + Json(*w.current_value).dump();
        out += "\n";
    }
    return out;
}

Json to_json(const Observation& o) {
    Json j;
    j["app"] = o.app;
    j["screen_id"] = o.screen_id;
    j["screen_description"] = o.screen_description;
    j["visible_widgets"] = Json::array();
    for (const auto& w : o.visible_widgets) {
        Json wj{{"widget_id", w.widget_id}, {"kind", std::string(to_string(w.kind))}, {"label", w.label}};
        wj["current_value"] = w.current_value ? Json(*w.current_value) : Json(nullptr);
        j["visible_widgets"].push_back(std::move(wj));
    }
    j["scroll_position"] = Json{{"offset", o.scroll_offset}, {"max_offset", o.max_offset}};
    j["serialized"] = o.serialized;
    return j;
}

Observation observation_from_json(const Json& j) {
    static const std::map<std::string, WidgetKind> kinds = {
        {"button", WidgetKind::Button},     {"textfield", WidgetKind::TextField},
        {"checkbox", WidgetKind::Checkbox}, {"list_item", WidgetKind::ListItem},
        {"scroll_region", WidgetKind::ScrollRegion}};
    try {
        Observation o;
        o.app = j.at("app").get<std::string>();
        o.screen_id = j.at("screen_id").get<std::string>();
        o.screen_description = j.at("screen_description").get<std::string>();
        for (const auto& wj : j.at("visible_widgets")) {
            VisibleWidget w;
            w.widget_id = wj.at("widget_id").get<std::string>();
            auto k = kinds.find(wj.at("kind").get<std::string>());
            if (k == kinds.end()) throw SchemaError("unknown widget kind in observation");
            w.kind = k->second;
            w.label = wj.at("label").get<std::string>();
            if (wj.contains("current_value") && !wj["current_value"].is_null())
                w.current_value = wj["current_value"].get<std::string>();
            o.visible_widgets.push_back(std::move(w));
        }
        o.scroll_offset = j.at("scroll_position").at("offset").get<int>();
        o.max_offset = j.at("scroll_position").at("max_offset").get<int>();
        o.serialized = serialize(o);
        return o;
    } catch (const Json::exception& e) {
        throw SchemaError(std::string("observation: ") + e.what());
    }
}

Json to_json(const TransitionReport& r) {
    return Json{{"state_changed", r.state_changed}, {"description", r.description}, {"malformed", r.malformed}};
}

TransitionReport transition_from_json(const Json& j) {
    TransitionReport r;
    r.state_changed = j.value("state_changed", false);
    r.description = j.value("description", std::string());
    r.malformed = j.value("malformed", false);
    r.invalid_target = j.value("invalid_target", false);
    return r;
}

Observation make_observation(const AppRegistry& apps, const EnvState& s) {
    Observation o;
    const Screen* screen = current_screen(apps, s);
    if (!screen) {
        std::vector<std::string> names;
        for (const auto& [name, g] : apps) names.push_back(name);
        o.screen_id = std::string(kLauncherScreen);
        o.screen_description = "Device home screen with apps: " + text::join(names, ", ");
    } else {
        o.app = *s.current_app;
        o.screen_id = screen->screen_id;
        o.screen_description = screen->description;
        o.scroll_offset = s.scroll_offset;
        o.max_offset = screen->max_offset();
        for (const auto& w : screen->widgets)
            if (screen->visible_at(w, s.scroll_offset))
                o.visible_widgets.push_back({w.widget_id, w.kind, w.label, current_value(w, s)});
    }
    o.serialized = serialize(o);
    return o;
}

std::string describe_effect(const AppRegistry& apps, const EnvState& before, const Action& action,
                            const EnvState& after) {
    if (after.terminated() && !before.terminated())
        return "terminated the task with " + std::string(to_string(*after.termination));
    if (before.same_observable(after)) return "no state change";

    const Screen* screen = current_screen(apps, before);
    const std::string here = screen_name(before.current_app, before.current_screen);
    const Widget* w = screen ? screen->find(action.widget()) : nullptr;

    switch (action.kind()) {
        case ActionKind::Type:
            if (w && w->slot_key)
                return "entered '" + action.as<act::Type>()->text + "' into " + *w->slot_key + " field on " + here +
                       " screen";
            break;
        case ActionKind::Click:
            if (w && w->is_navigation()) return "navigated from " + here + " to " + after.current_screen;
            if (w && w->kind == WidgetKind::Checkbox)
                return "switched " + *w->slot_key + " " + slot_display(*w, after) + " on " + here + " screen";
            if (w && w->slot_key) return "selected '" + w->label + "' for " + *w->slot_key + " on " + here + " screen";
            break;
        case ActionKind::Scroll:
            return "scrolled " + std::string(to_string(action.as<act::Scroll>()->direction)) + " on " + here +
                   " screen";
        case ActionKind::Back:
            return "went back from " + here + " to " + screen_name(after.current_app, after.current_screen);
        case ActionKind::OpenApp:
            return "opened " + action.as<act::OpenApp>()->app_name + " on " + after.current_screen + " screen";
        default:
            break;
    }
    return "changed the state of " + here + " screen";
}

bool goal_satisfied(const EnvState& s, const std::map<std::string, std::string>& slot_constraints,
                    const std::optional<std::string>& goal_screen, const std::optional<std::string>& goal_app) {
    for (const auto& [slot, value] : slot_constraints) {
        auto it = s.slot_values.find(slot);
        if (it == s.slot_values.end() || it->second != value) return false;
    }
    if (goal_screen) {
        if (s.at_launcher() || s.current_screen != *goal_screen) return false;
        if (goal_app && *s.current_app != *goal_app) return false;
    }
    return true;
}

Environment::Environment(AppRegistry apps, EnvConfig config) : apps_(std::move(apps)), config_(config) {}

const AppGraph& Environment::app(std::string_view name) const {
    auto it = apps_.find(name);
    if (it == apps_.end()) throw UnknownAppError("app not installed: " + std::string(name));
    return *it->second;
}

Observation Environment::reset(const std::vector<std::string>& required_apps) {
    for (const auto& a : required_apps) app(a);
    state_ = EnvState{};
    return observe();
}

EnvState Environment::transition(const EnvState& s, const Action& action, bool* invalid_target) const {
    if (s.terminated()) throw EpisodeTerminatedError("step after Terminate");
    EnvState next = s;
    ++next.step_count;
    bool invalid = false;

    auto push_location = [&] {
        if (next.nav_stack.size() >= config_.max_nav_depth) next.nav_stack.erase(next.nav_stack.begin());
        next.nav_stack.push_back({s.current_app, s.current_screen, s.scroll_offset});
    };
    const Screen* screen = current_screen(apps_, s);
    auto visible_widget = [&](std::string_view id) -> const Widget* {
        if (!screen) return nullptr;
        const Widget* w = screen->find(id);
        return (w && screen->visible_at(*w, s.scroll_offset)) ? w : nullptr;
    };

    if (auto* c = action.as<act::Click>()) {
        const Widget* w = visible_widget(c->widget_id);
        if (!w) {
            invalid = true;
        } else if (w->is_navigation()) {
            push_location();
            next.current_screen = *w->target_screen;
            next.scroll_offset = 0;
        } else if (w->kind == WidgetKind::Checkbox) {
            auto& v = next.slot_values[*w->slot_key];
            v = (v == "on") ? "off" : "on";
        } else if (w->kind == WidgetKind::ListItem && w->slot_key) {
            next.slot_values[*w->slot_key] = w->label;
        }
    } else if (auto* t = action.as<act::Type>()) {
        const Widget* w = visible_widget(t->widget_id);
        if (!w || w->kind != WidgetKind::TextField)
            invalid = true;
        else
            next.slot_values[*w->slot_key] = t->text;
    } else if (auto* sc = action.as<act::Scroll>()) {
        if (screen) {
            if (sc->direction == ScrollDirection::Down)
                next.scroll_offset = std::min(s.scroll_offset + screen->viewport_size, screen->max_offset());
            else
                next.scroll_offset = std::max(0, s.scroll_offset - screen->viewport_size);
        }
    } else if (action.as<act::Back>()) {
        if (!next.nav_stack.empty()) {
            NavEntry top = next.nav_stack.back();
            next.nav_stack.pop_back();
            next.current_app = top.app;
            next.current_screen = top.screen;
            next.scroll_offset = top.scroll_offset;
        }
    } else if (auto* o = action.as<act::OpenApp>()) {
        auto it = apps_.find(o->app_name);
        if (it == apps_.end()) {
            invalid = true;
        } else {
            const auto& home = it->second->home_screen;
            bool already_there = s.current_app == o->app_name && s.current_screen == home && s.scroll_offset == 0;
            if (!already_there) {
                push_location();
                next.current_app = o->app_name;
                next.current_screen = home;
                next.scroll_offset = 0;
            }
        }
    } else if (auto* term = action.as<act::Terminate>()) {
        next.termination = term->status;
    }
    if (invalid_target) *invalid_target = invalid;
    return next;
}

std::pair<Observation, TransitionReport> Environment::step(const Action& action) {
    TransitionReport report;
    EnvState next = transition(state_, action, &report.invalid_target);
    report.state_changed = !state_.same_observable(next);
    report.description = describe_effect(apps_, state_, action, next);
    state_ = std::move(next);
    return {observe(), report};
}

}  // namespace owlsim::sim
