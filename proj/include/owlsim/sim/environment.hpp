#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "owlsim/sim/action.hpp"
#include "owlsim/sim/app_graph.hpp"

namespace owlsim::sim {

inline constexpr std::string_view kLauncherScreen = "launcher";

struct NavEntry {
    std::optional<std::string> app;
    std::string screen;
    int scroll_offset = 0;
    bool operator==(const NavEntry&) const = default;
};

/// Full device state. `current_app` empty means the device home (launcher).
struct EnvState {
    std::optional<std::string> current_app;
    std::string current_screen{kLauncherScreen};
    int scroll_offset = 0;
    std::map<std::string, std::string> slot_values;
    std::vector<NavEntry> nav_stack;
    int step_count = 0;
    std::optional<TerminateStatus> termination;

    bool terminated() const { return termination.has_value(); }
    bool at_launcher() const { return !current_app.has_value(); }
    /// Equality over everything an observer can see (excludes step_count and nav_stack).
    bool same_observable(const EnvState& o) const;
    bool operator==(const EnvState&) const = default;
};

Json to_json(const EnvState& s);
EnvState env_state_from_json(const Json& j);

struct VisibleWidget {
    std::string widget_id;
    WidgetKind kind = WidgetKind::Button;
    std::string label;
    std::optional<std::string> current_value;
    bool operator==(const VisibleWidget&) const = default;
};

/// Structured stand-in for a screenshot.
struct Observation {
    std::string app;
    std::string screen_id;
    std::string screen_description;
    std::vector<VisibleWidget> visible_widgets;
    int scroll_offset = 0;
    int max_offset = 0;
    std::string serialized;

    const VisibleWidget* find(std::string_view widget_id) const;
    bool operator==(const Observation&) const = default;
};

Json to_json(const Observation& o);
Observation observation_from_json(const Json& j);
/// Canonical text rendering; a pure function of the structured fields.
std::string serialize(const Observation& o);

struct TransitionReport {
    bool state_changed = false;
    std::string description;
    bool malformed = false;       // set by the decoding layer, never by the simulator
    bool invalid_target = false;  // acted on a widget that is absent, hidden or of the wrong kind
};

Json to_json(const TransitionReport& r);
TransitionReport transition_from_json(const Json& j);

struct EnvConfig {
    std::size_t max_nav_depth = 64;
};

/// Template description of what an action did; pure in its arguments.
std::string describe_effect(const AppRegistry& apps, const EnvState& before, const Action& action,
                            const EnvState& after);

/// True iff every slot constraint holds and, when given, the device shows `goal_screen` of `goal_app`.
bool goal_satisfied(const EnvState& s, const std::map<std::string, std::string>& slot_constraints,
                    const std::optional<std::string>& goal_screen, const std::optional<std::string>& goal_app);

Observation make_observation(const AppRegistry& apps, const EnvState& s);

/// Deterministic simulated device. Single owner; the registry is shared read-only.
class Environment {
public:
    explicit Environment(AppRegistry apps, EnvConfig config = {});

    /// Returns to the device home with empty slots. Throws UnknownAppError for uninstalled apps.
    Observation reset(const std::vector<std::string>& required_apps = {});

    /// Applies one action. Throws EpisodeTerminatedError after Terminate.
    std::pair<Observation, TransitionReport> step(const Action& action);

    Observation observe() const { return make_observation(apps_, state_); }
    const EnvState& state() const { return state_; }
    /// Replaces the state wholesale; used by planners that simulate ahead.
    void restore(EnvState s) { state_ = std::move(s); }

    const AppRegistry& apps() const { return apps_; }
    const AppGraph& app(std::string_view name) const;

    /// Pure successor function; also used by planners.
    EnvState transition(const EnvState& s, const Action& action, bool* invalid_target = nullptr) const;

private:
    AppRegistry apps_;
    EnvConfig config_;
    EnvState state_;
};

}  // namespace owlsim::sim
