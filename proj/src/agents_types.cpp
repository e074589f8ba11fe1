#include <algorithm>
#include <map>

#include "owlsim/agents/types.hpp"
#include "owlsim/core/errors.hpp"

namespace owlsim::agents {

std::string_view to_string(Judgment j) { return j == Judgment::Success ? "SUCCESS" : "FAILURE"; }

std::optional<Judgment> parse_judgment(std::string_view s) {
    if (s == "SUCCESS") return Judgment::Success;
    if (s == "FAILURE") return Judgment::Failure;
    return std::nullopt;
}

std::string_view to_string(Mode m) { return m == Mode::Role ? "role" : "e2e"; }

std::optional<Mode> parse_mode(std::string_view s) {
    if (s == "role") return Mode::Role;
    if (s == "e2e") return Mode::E2E;
    return std::nullopt;
}

std::string_view to_string(Outcome o) { return o == Outcome::Succeeded ? "succeeded" : "failed"; }

bool Trajectory::any_malformed() const { return malformed_steps() > 0; }

std::size_t Trajectory::malformed_steps() const {
    return static_cast<std::size_t>(
        std::count_if(steps.begin(), steps.end(), [](const StepRecord& s) { return s.transition.malformed; }));
}

Json to_json(const ActionRecord& a) {
    return {{"thought", a.thought}, {"action", sim::to_json(a.action)}, {"summary", a.summary}, {"subgoal", a.subgoal}};
}

ActionRecord action_record_from_json(const Json& j) {
    ActionRecord a;
    a.thought = j.value("thought", "");
    a.action = sim::action_from_json(j.at("action"));
    a.summary = j.value("summary", "");
    a.subgoal = j.value("subgoal", "");
    return a;
}

Json to_json(const ReflectionFeedback& f) { return {{"judgment", to_string(f.judgment)}, {"feedback", f.feedback}}; }

ReflectionFeedback feedback_from_json(const Json& j) {
    auto judgment = parse_judgment(j.at("judgment").get<std::string>());
    if (!judgment) throw SchemaError("bad judgment: " + j.at("judgment").dump());
    return {*judgment, j.value("feedback", "")};
}

Json to_json(const HistoryEntry& h) {
    Json j{{"conclusion", h.conclusion}, {"action", sim::to_json(h.action)}};
    j["observation"] = h.observation ? Json(*h.observation) : Json(nullptr);
    return j;
}

HistoryEntry history_entry_from_json(const Json& j) {
    HistoryEntry h;
    h.conclusion = j.value("conclusion", "");
    h.action = sim::action_from_json(j.at("action"));
    if (j.contains("observation") && !j["observation"].is_null()) h.observation = j["observation"].get<std::string>();
    return h;
}

namespace {

Json optional_feedback(const std::optional<ReflectionFeedback>& f) { return f ? to_json(*f) : Json(nullptr); }

std::optional<ReflectionFeedback> optional_feedback_from(const Json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return feedback_from_json(j[key]);
}

Json roles_to_json(const std::vector<RoleRecord>& roles) {
    Json out = Json::array();
    for (const auto& r : roles) out.push_back({{"role", r.role}, {"request", r.request}, {"response", r.response}});
    return out;
}

std::vector<RoleRecord> roles_from_json(const Json& j) {
    std::vector<RoleRecord> out;
    for (const auto& r : j) out.push_back({r.at("role").get<std::string>(), r.at("request"), r.at("response")});
    return out;
}

StepRecord step_from_json(const Json& j) {
    StepRecord s;
    s.t = j.at("t").get<int>();
    s.obs_before = sim::observation_from_json(j.at("obs_before"));
    s.obs_after = sim::observation_from_json(j.at("obs_after"));
    s.action = action_record_from_json(j.at("action"));
    s.transition = sim::transition_from_json(j.at("transition"));
    s.reflection = optional_feedback_from(j, "reflection");
    s.prior_feedback = optional_feedback_from(j, "prior_feedback");
    s.notes_delta = j.at("notes_delta").get<Notes>();
    s.subgoals_pending = j.at("subgoals_pending").get<std::vector<std::string>>();
    s.subgoals_completed = j.at("subgoals_completed").get<std::vector<std::string>>();
    s.conclusion = j.value("conclusion", "");
    if (j.contains("log_prob") && !j["log_prob"].is_null()) s.log_prob = j["log_prob"].get<double>();
    s.trace = j.value("trace", std::vector<std::string>{});
    s.state_before = sim::env_state_from_json(j.at("state_before"));
    s.state_after = sim::env_state_from_json(j.at("state_after"));
    if (j.contains("roles")) s.roles = roles_from_json(j["roles"]);
    return s;
}

}  // namespace

Json step_to_json(const Trajectory& traj, const StepRecord& s) {
    Json j;
    j["record"] = "step";
    j["task_id"] = traj.task_id;
    j["traj_id"] = traj.traj_id;
    j["mode"] = to_string(traj.mode);
    j["t"] = s.t;
    j["obs_before"] = sim::to_json(s.obs_before);
    j["action"] = to_json(s.action);
    j["obs_after"] = sim::to_json(s.obs_after);
    j["transition"] = sim::to_json(s.transition);
    j["reflection"] = optional_feedback(s.reflection);
    j["notes_delta"] = s.notes_delta;
    j["subgoals_pending"] = s.subgoals_pending;
    j["subgoals_completed"] = s.subgoals_completed;
    j["prior_feedback"] = optional_feedback(s.prior_feedback);
    j["conclusion"] = s.conclusion;
    j["log_prob"] = s.log_prob ? Json(*s.log_prob) : Json(nullptr);
    j["trace"] = s.trace;
    j["state_before"] = sim::to_json(s.state_before);
    j["state_after"] = sim::to_json(s.state_after);
    if (!s.roles.empty()) j["roles"] = roles_to_json(s.roles);
    return j;
}

std::vector<Json> trajectory_to_jsonl(const Trajectory& traj) {
    std::vector<Json> rows;
    for (const auto& s : traj.steps) rows.push_back(step_to_json(traj, s));
    Json end;
    end["record"] = "end";
    end["task_id"] = traj.task_id;
    end["traj_id"] = traj.traj_id;
    end["mode"] = to_string(traj.mode);
    end["instruction"] = traj.instruction;
    end["initial_subgoals"] = traj.initial_subgoals;
    end["steps"] = traj.steps.size();
    end["outcome"] = to_string(traj.outcome);
    end["error"] = traj.error;
    end["notes"] = traj.notes;
    end["final_state"] = sim::to_json(traj.final_state);
    if (!traj.init_roles.empty()) end["init_roles"] = roles_to_json(traj.init_roles);
    rows.push_back(std::move(end));
    return rows;
}

std::vector<Trajectory> trajectories_from_jsonl(const std::vector<Json>& rows) {
    std::vector<Trajectory> out;
    std::map<std::string, std::vector<StepRecord>> open;  // keyed by traj_id
    for (const auto& row : rows) {
        const auto record = row.value("record", "");
        const auto traj_id = row.at("traj_id").get<std::string>();
        if (record == "step") {
            open[traj_id].push_back(step_from_json(row));
        } else if (record == "end") {
            Trajectory t;
            t.task_id = row.at("task_id").get<std::string>();
            t.traj_id = traj_id;
            auto mode = parse_mode(row.at("mode").get<std::string>());
            if (!mode) throw SchemaError("bad mode in trajectory " + traj_id);
            t.mode = *mode;
            t.instruction = row.value("instruction", "");
            t.initial_subgoals = row.value("initial_subgoals", std::vector<std::string>{});
            t.steps = std::move(open[traj_id]);
            open.erase(traj_id);
            if (t.steps.size() != row.at("steps").get<std::size_t>())
                throw SchemaError("trajectory " + traj_id + " has missing steps");
            t.outcome = row.at("outcome").get<std::string>() == "succeeded" ? Outcome::Succeeded : Outcome::Failed;
            t.error = row.value("error", "");
            t.notes = row.value("notes", Notes{});
            t.final_state = sim::env_state_from_json(row.at("final_state"));
            if (row.contains("init_roles")) t.init_roles = roles_from_json(row["init_roles"]);
            out.push_back(std::move(t));
        } else {
            throw SchemaError("unknown trajectory record kind '" + record + "'");
        }
    }
    if (!open.empty()) throw SchemaError("trajectory " + open.begin()->first + " has no end record");
    return out;
}

void write_trajectories(const std::string& path, const std::vector<Trajectory>& trajs) {
    std::vector<Json> rows;
    for (const auto& t : trajs) {
        auto part = trajectory_to_jsonl(t);
        rows.insert(rows.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    write_jsonl(path, rows);
}

std::vector<Trajectory> read_trajectories(const std::string& path) {
    try {
        return trajectories_from_jsonl(read_jsonl(path));
    } catch (const Json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
}

}  // namespace owlsim::agents
