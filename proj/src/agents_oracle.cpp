#include "owlsim/agents/oracle.hpp"
#include "owlsim/agents/reasoning.hpp"
#include "owlsim/agents/subgoal.hpp"
#include "owlsim/core/errors.hpp"
#include "owlsim/core/rng.hpp"

namespace owlsim::agents {

using sim::Action;
using sim::ActionKind;
using sim::WidgetKind;

namespace {

const sim::EnvState& before_state(const RoleRequest& r) {
    if (!r.truth.env || !r.truth.before) throw BackendError("oracle backend needs simulator ground truth");
    return *r.truth.before;
}

const sim::EnvState& after_state(const RoleRequest& r) {
    if (!r.truth.env || !r.truth.after) throw BackendError("oracle backend needs the post-action state");
    return *r.truth.after;
}

const taskgen::TaskQuery& task_of(const RoleRequest& r) {
    if (!r.truth.task) throw BackendError("oracle backend needs the task");
    return *r.truth.task;
}

struct Candidate {
    Action action;
    std::string situation;
};

// Action that advances `g` from `s`, or nullopt when the subgoal cannot be worked on here.
std::optional<Candidate> advance(const sim::Environment& env, const sim::EnvState& s, const Subgoal& g,
                                 const Notes& notes, std::size_t pending_count) {
    const sim::Screen* screen = nullptr;
    if (s.current_app) screen = env.app(*s.current_app).find_screen(s.current_screen);

    auto reach = [&](const sim::Widget& w, Action act) -> Candidate {
        if (auto scroll = taskgen::scroll_toward(*screen, w, s.scroll_offset))
            return {*scroll, "the " + w.label + " " + std::string(sim::to_string(w.kind)) + " is outside the view"};
        return {std::move(act), "the " + w.label + " " + std::string(sim::to_string(w.kind)) + " is on screen"};
    };
    auto slot_is = [&](const std::string& slot, const std::string& v) {
        auto it = s.slot_values.find(slot);
        return it != s.slot_values.end() && it->second == v;
    };

    switch (g.kind) {
        case SubgoalKind::Open: {
            if (!env.apps().count(g.target)) return std::nullopt;
            const auto& home = env.app(g.target).home_screen;
            if (s.current_app == g.target && s.current_screen == home && s.scroll_offset == 0) return std::nullopt;
            return Candidate{Action::open_app(g.target), g.target + " is not in front"};
        }
        case SubgoalKind::Navigate:
            if (!screen || s.current_screen == g.target) return std::nullopt;
            for (const auto& w : screen->widgets)
                if (w.target_screen == g.target) return reach(w, Action::click(w.widget_id));
            return std::nullopt;
        case SubgoalKind::GoBack:
            if (s.nav_stack.empty() || s.nav_stack.back().screen != g.target) return std::nullopt;
            return Candidate{Action::back(), "the previous screen was " + g.target};
        case SubgoalKind::Enter: {
            if (!screen) return std::nullopt;
            std::string value = g.value;
            if (value.size() > 1 && value[0] == '$') {
                auto it = notes.find(value.substr(1));
                if (it == notes.end()) return std::nullopt;
                value = it->second;
            }
            if (slot_is(g.slot, value)) return std::nullopt;
            for (const auto& w : screen->widgets)
                if (w.kind == WidgetKind::TextField && w.slot_key == g.slot)
                    return reach(w, Action::type(w.widget_id, value));
            return std::nullopt;
        }
        case SubgoalKind::Select:
            if (!screen || slot_is(g.slot, g.value)) return std::nullopt;
            for (const auto& w : screen->widgets)
                if (w.kind == WidgetKind::ListItem && w.slot_key == g.slot && w.label == g.value)
                    return reach(w, Action::click(w.widget_id));
            return std::nullopt;
        case SubgoalKind::Turn: {
            if (!screen) return std::nullopt;
            const bool on = slot_is(g.slot, "on");
            if ((g.value == "on") == on) return std::nullopt;
            for (const auto& w : screen->widgets)
                if (w.kind == WidgetKind::Checkbox && w.slot_key == g.slot) return reach(w, Action::click(w.widget_id));
            return std::nullopt;
        }
        case SubgoalKind::Finish:
            if (pending_count != 1) return std::nullopt;
            return Candidate{Action::terminate(sim::TerminateStatus::Success), "every other subgoal is done"};
    }
    return std::nullopt;
}

std::string failure_prefix(const RoleRequest& r) {
    const auto& fb = r.state.last_feedback;
    if (fb && fb->judgment == Judgment::Failure) return "The last step failed (" + fb->feedback + "). ";
    return "";
}

RoleResponse worker_response(const WorkerDecision& d) {
    RoleResponse r;
    r.thought = d.record.thought;
    r.action = d.record.action;
    r.summary = d.record.summary;
    r.subgoal = d.record.subgoal;
    r.feasible = d.feasible;
    return r;
}

// First subgoal of the oracle plan from `s`, if any.
std::optional<Subgoal> first_planned_subgoal(const sim::Environment& env, const sim::EnvState& s,
                                             const taskgen::Route& route) {
    auto plan = taskgen::oracle_plan(env, s, route);
    if (!plan) return std::nullopt;
    sim::EnvState cur = s;
    for (const auto& a : *plan) {
        if (auto g = subgoal_for(env, cur, a)) return g;
        cur = env.transition(cur, a);
    }
    return std::nullopt;
}

void move_to_head(std::vector<std::string>& v, const std::string& item) {
    auto it = std::find(v.begin(), v.end(), item);
    if (it == v.end()) return;
    std::rotate(v.begin(), it, it + 1);
}

}  // namespace

WorkerDecision oracle_worker(const RoleRequest& request) {
    const auto& s = before_state(request);
    const auto& env = *request.truth.env;
    const auto& pending = request.state.pending;
    const std::size_t n = std::min<std::size_t>(std::max(request.n_inspect, 1), pending.size());
    for (std::size_t i = 0; i < n; ++i) {
        auto g = parse_subgoal(pending[i]);
        if (!g) continue;
        auto c = advance(env, s, *g, request.state.notes, pending.size());
        if (!c) continue;
        WorkerDecision d;
        d.feasible = true;
        d.record.action = c->action;
        d.record.subgoal = pending[i];
        d.record.thought = failure_prefix(request) + "Working on '" + pending[i] + "': " + c->situation + ", " +
                           intent_clause(c->action, request.observation) + ".";
        d.record.summary = sim::to_string(c->action) + " to " + pending[i];
        return d;
    }
    WorkerDecision d;
    d.feasible = false;
    d.record.action = Action::wait();
    d.record.thought = failure_prefix(request) + "None of the next subgoals can be worked on from this screen, " +
                       intent_clause(d.record.action, request.observation) + ".";
    d.record.summary = "no feasible subgoal";
    return d;
}

std::pair<std::vector<std::string>, std::vector<std::string>> oracle_manager_init(const RoleRequest& request) {
    const auto& s = before_state(request);
    return {phase_subgoals(*request.truth.env, s, task_of(request).oracle_actions), {}};
}

std::pair<std::vector<std::string>, std::vector<std::string>> oracle_manager_update(const RoleRequest& request) {
    const auto& after = after_state(request);
    auto pending = request.state.pending;
    auto completed = request.state.completed;
    if (pending.empty()) return {pending, completed};

    std::string pursued = pending.front();
    if (request.action && std::find(pending.begin(), pending.end(), request.action->subgoal) != pending.end())
        pursued = request.action->subgoal;
    const bool success = request.feedback && request.feedback->judgment == Judgment::Success;

    if (success) {
        auto g = parse_subgoal(pursued);
        if (g && subgoal_complete(*g, after)) {
            pending.erase(std::find(pending.begin(), pending.end(), pursued));
            completed.push_back(pursued);
        }
        return {pending, completed};
    }

    move_to_head(pending, pursued);
    if (!request.truth.route) return {pending, completed};
    auto next = first_planned_subgoal(*request.truth.env, after, *request.truth.route);
    if (!next || parse_subgoal(pursued) == next) return {pending, completed};
    for (const auto& p : pending) {
        if (parse_subgoal(p) == next) {
            move_to_head(pending, p);
            return {pending, completed};
        }
    }
    pending.insert(pending.begin(), fresh_subgoal(format_subgoal(*next), pending, completed));
    return {pending, completed};
}

ReflectionFeedback oracle_reflect(const RoleRequest& request) {
    const auto& before = before_state(request);
    const auto& after = after_state(request);
    const auto& task = task_of(request);
    if (!request.action) throw BackendError("reflector request without an action");
    const Action& a = request.action->action;
    const std::string act = sim::to_string(a);
    const bool changed = !before.same_observable(after);

    if (a.kind() == ActionKind::Wait) {
        if (changed) return {Judgment::Failure, "action wait() unexpectedly changed the " + after.current_screen + " screen"};
        return {Judgment::Success, "waiting left the screen unchanged as intended"};
    }
    if (!changed)
        return {Judgment::Failure, "action " + act + " did not proceed; " + before.current_screen + " screen unchanged"};

    for (const auto& [k, v] : after.slot_values) {
        auto old = before.slot_values.find(k);
        if (old != before.slot_values.end() && old->second == v) continue;
        auto want = task.goal.slot_constraints.find(k);
        if (want == task.goal.slot_constraints.end())
            return {Judgment::Failure, "action " + act + " set " + k + " to '" + v + "', which the task does not ask for"};
        if (want->second != v)
            return {Judgment::Failure,
                    "action " + act + " set " + k + " to '" + v + "' but the task needs '" + want->second + "'"};
    }
    if (a.is_terminate(sim::TerminateStatus::Success)) {
        if (!taskgen::goal_satisfied(after, task))
            return {Judgment::Failure, "action " + act + " ended the task before the goal was met"};
        return {Judgment::Success, "the task ended with the goal met"};
    }
    const auto* route = request.truth.route;
    if (route && !route->screens.empty()) {
        const bool on_route = after.current_app == route->app && route->index_of(after.current_screen).has_value();
        if (!on_route)
            return {Judgment::Failure, "action " + act + " left the task route; now on " + after.current_screen};
    }
    return {Judgment::Success, "action " + act + " had the intended effect"};
}

RoleResponse OracleBackend::call(const RoleRequest& request) const {
    RoleResponse r;
    switch (request.role) {
        case Role::ManagerInit:
        case Role::ManagerUpdate: {
            auto [ss, cs] = request.role == Role::ManagerInit ? oracle_manager_init(request)
                                                               : oracle_manager_update(request);
            r.subgoals = std::move(ss);
            r.completed = std::move(cs);
            return r;
        }
        case Role::Worker: return worker_response(oracle_worker(request));
        case Role::Reflector: {
            auto f = oracle_reflect(request);
            r.judgment = f.judgment;
            r.feedback = f.feedback;
            return r;
        }
        case Role::Notetaker: r.notes = extract_notes(request.observation); return r;
        case Role::Policy: {
            const auto& s = before_state(request);
            if (!request.truth.route) throw BackendError("oracle policy needs the task route");
            auto a = taskgen::next_oracle_action(*request.truth.env, s, *request.truth.route);
            Action act = a ? *a : Action::terminate(sim::TerminateStatus::Failure);
            r.action = act;
            r.thought = "Following the known solution, " + intent_clause(act, request.observation) + ".";
            r.summary = sim::to_string(act);
            return r;
        }
    }
    throw BackendError("unknown role");
}

NoisyOracleBackend::NoisyOracleBackend(double rho, std::uint64_t seed) : rho_(rho), seed_(seed) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("noise rate must lie in [0, 1]");
}

std::string NoisyOracleBackend::describe() const { return "noisy:" + std::to_string(rho_); }

RoleResponse NoisyOracleBackend::call(const RoleRequest& request) const {
    auto intended = oracle_.call(request);
    if (request.role != Role::Worker && request.role != Role::Policy) return intended;

    Rng rng(derive_seed(seed_, {request.episode_seed, static_cast<std::uint64_t>(request.t),
                                static_cast<std::uint64_t>(request.role)}));
    if (!rng.bernoulli(rho_)) return intended;

    enum { WrongWidget, Malformed, Premature };
    std::vector<int> modes{WrongWidget, Malformed};
    if (!intended.action || intended.action->kind() != ActionKind::Terminate) modes.push_back(Premature);
    switch (modes[rng.index(modes.size())]) {
        case Malformed: throw MalformedOutput("corrupted worker emission");
        case Premature: intended.action = Action::terminate(sim::TerminateStatus::Success); break;
        default: {
            const std::string target = intended.action ? std::string(intended.action->widget()) : std::string();
            std::vector<std::string> others;
            for (const auto& w : request.observation.visible_widgets)
                if (w.widget_id != target) others.push_back(w.widget_id);
            intended.action = others.empty() ? Action::back() : Action::click(others[rng.index(others.size())]);
        }
    }
    intended.thought = "I will act now, " + intent_clause(*intended.action, request.observation) + ".";
    return intended;
}

}  // namespace owlsim::agents
