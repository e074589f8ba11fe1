#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "owlsim/core/json_io.hpp"
#include "owlsim/sim/environment.hpp"

namespace owlsim::agents {

/// A_t = (thought, action, summary). `subgoal` names the pending subgoal the action pursues.
struct ActionRecord {
    std::string thought;
    sim::Action action;
    std::string summary;
    std::string subgoal;
    bool operator==(const ActionRecord&) const = default;
};

enum class Judgment { Success, Failure };

std::string_view to_string(Judgment j);
std::optional<Judgment> parse_judgment(std::string_view s);

struct ReflectionFeedback {
    Judgment judgment = Judgment::Success;
    std::string feedback;
    bool operator==(const ReflectionFeedback&) const = default;
};

using Notes = std::map<std::string, std::string>;

struct OrchestratorState {
    std::vector<std::string> pending;    // SS_t, priority order
    std::vector<std::string> completed;  // CS_t, insertion order
    Notes notes;
    std::optional<ReflectionFeedback> last_feedback;
    int t = 0;
    std::string rag_knowledge;
};

struct HistoryEntry {
    std::string conclusion;
    sim::Action action;
    std::optional<std::string> observation;  // kept only inside the history window
    bool operator==(const HistoryEntry&) const = default;
};

enum class Mode { Role, E2E };
enum class Outcome { Succeeded, Failed };

std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);
std::string_view to_string(Outcome o);

/// One request/response exchange with a role backend.
struct RoleRecord {
    std::string role;
    Json request;
    Json response;
    bool operator==(const RoleRecord&) const = default;
};

struct StepRecord {
    int t = 0;
    sim::Observation obs_before;
    sim::Observation obs_after;
    ActionRecord action;
    sim::TransitionReport transition;
    std::optional<ReflectionFeedback> reflection;      // absent in end-to-end mode
    std::optional<ReflectionFeedback> prior_feedback;  // F_{t-1} as seen by the worker
    Notes notes_delta;
    std::vector<std::string> subgoals_pending;    // after the manager update
    std::vector<std::string> subgoals_completed;
    std::string conclusion;  // end-to-end mode
    std::optional<double> log_prob;  // behaviour-policy log-probability of the action
    std::vector<std::string> trace;  // phase tags in execution order
    sim::EnvState state_before;
    sim::EnvState state_after;
    std::vector<RoleRecord> roles;
};

struct Trajectory {
    std::string task_id;
    std::string traj_id;
    Mode mode = Mode::Role;
    std::string instruction;
    std::vector<std::string> initial_subgoals;
    std::vector<StepRecord> steps;
    Outcome outcome = Outcome::Failed;
    std::string error;
    Notes notes;
    sim::EnvState final_state;
    std::vector<RoleRecord> init_roles;

    bool any_malformed() const;
    std::size_t malformed_steps() const;
};

Json to_json(const ActionRecord& a);
ActionRecord action_record_from_json(const Json& j);
Json to_json(const ReflectionFeedback& f);
ReflectionFeedback feedback_from_json(const Json& j);
Json to_json(const HistoryEntry& h);
HistoryEntry history_entry_from_json(const Json& j);

/// Trace line for one step; carries the owning trajectory's ids.
Json step_to_json(const Trajectory& traj, const StepRecord& step);

/// Trajectory store layout: each trajectory is its step lines followed by one "end" line.
std::vector<Json> trajectory_to_jsonl(const Trajectory& traj);
std::vector<Trajectory> trajectories_from_jsonl(const std::vector<Json>& rows);
void write_trajectories(const std::string& path, const std::vector<Trajectory>& trajs);
std::vector<Trajectory> read_trajectories(const std::string& path);

}  // namespace owlsim::agents
