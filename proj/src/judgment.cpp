#include "owlsim/judgment/judgment.hpp"

#include <functional>
#include <set>

#include "owlsim/core/errors.hpp"
#include "owlsim/core/text.hpp"

namespace owlsim::judgment {

using agents::StepRecord;
using agents::Trajectory;

namespace {

constexpr std::string_view kLabels[] = {"GOOD", "NEUTRAL", "HARMFUL"};

bool reachable(const sim::AppGraph& g, const std::string& from, const std::string& to) {
    std::set<std::string> seen;
    std::function<bool(const std::string&)> dfs = [&](const std::string& u) {
        if (u == to) return true;
        if (!seen.insert(u).second) return false;
        for (const auto& v : g.successors(u))
            if (dfs(v)) return true;
        return false;
    };
    return dfs(from);
}

std::size_t distance(const JudgeContext& ctx, const sim::EnvState& s) {
    return taskgen::oracle_distance(ctx.env, s, ctx.route, ctx.task);
}

std::string dist_text(std::size_t d) { return d == taskgen::kUnreachable ? "unreachable" : std::to_string(d); }

bool overwrote_correct_slot(const taskgen::TaskQuery& task, const sim::EnvState& before, const sim::EnvState& after) {
    for (const auto& [k, want] : task.goal.slot_constraints) {
        auto b = before.slot_values.find(k);
        auto a = after.slot_values.find(k);
        const bool was_right = b != before.slot_values.end() && b->second == want;
        const bool is_right = a != after.slot_values.end() && a->second == want;
        if (was_right && !is_right) return true;
    }
    return false;
}

// A harmful step counts as recovered once a later state is at least as close to the goal as before it.
bool unrecovered_harm(const JudgeContext& ctx, const Trajectory& traj, const std::vector<StepCriticOutput>& steps) {
    for (std::size_t i = 0; i < steps.size() && i < traj.steps.size(); ++i) {
        if (steps[i].label != StepLabel::Harmful) continue;
        const auto d0 = distance(ctx, traj.steps[i].state_before);
        bool recovered = false;
        for (std::size_t j = i + 1; j < traj.steps.size() && !recovered; ++j)
            recovered = distance(ctx, traj.steps[j].state_after) <= d0;
        if (!recovered) return true;
    }
    return false;
}

bool finished_correctly(const JudgeContext& ctx, const Trajectory& traj) {
    const auto& fin = traj.final_state;
    return fin.termination == sim::TerminateStatus::Success && taskgen::goal_satisfied(fin, ctx.task);
}

// The recorded effect of each step agrees with what its observations show.
bool observations_agree(const JudgeContext& ctx, const Trajectory& traj, const std::vector<StepCriticOutput>& steps) {
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        const auto& s = traj.steps[i];
        if (sim::make_observation(ctx.env.apps(), s.state_before) != s.obs_before) return false;
        if (sim::make_observation(ctx.env.apps(), s.state_after) != s.obs_after) return false;
        if (s.action.action.kind() == sim::ActionKind::Terminate) continue;  // termination is not on screen
        const bool screen_changed = s.obs_before.serialized != s.obs_after.serialized;
        if (screen_changed != s.transition.state_changed) return false;
        const bool says_nothing = i < steps.size() && text::contains_ci(steps[i].summary, "no state change");
        if (says_nothing && screen_changed) return false;
    }
    if (ctx.task.goal.goal_screen) {
        if (traj.steps.empty()) return false;
        const auto& last = traj.steps.back().obs_after;
        if (last.app != ctx.task.primary_app() || last.screen_id != *ctx.task.goal.goal_screen) return false;
    }
    return true;
}

}  // namespace

std::string_view to_string(StepLabel l) { return kLabels[static_cast<int>(l)]; }

std::optional<StepLabel> parse_label(std::string_view s) {
    for (int i = 0; i < 3; ++i)
        if (kLabels[i] == s) return static_cast<StepLabel>(i);
    return std::nullopt;
}

std::string_view to_string(Verdict v) { return v == Verdict::Correct ? "Correct" : "Incorrect"; }

std::optional<Verdict> parse_verdict(std::string_view s) {
    if (s == "Correct") return Verdict::Correct;
    if (s == "Incorrect") return Verdict::Incorrect;
    return std::nullopt;
}

Verdict consensus(Verdict text, Verdict multimodal) {
    return text == Verdict::Correct && multimodal == Verdict::Correct ? Verdict::Correct : Verdict::Incorrect;
}

double critic_score(StepLabel label) {
    switch (label) {
        case StepLabel::Good: return 1.0;
        case StepLabel::Neutral: return 0.5;
        case StepLabel::Harmful: return 0.0;
    }
    return 0.0;
}

bool on_goal_path(const sim::AppRegistry& apps, const taskgen::TaskQuery& task, const sim::EnvState& s) {
    if (!task.goal.goal_screen) return true;
    if (s.current_app != task.primary_app()) return false;
    auto it = apps.find(task.primary_app());
    if (it == apps.end()) return false;
    const auto& g = *it->second;
    const auto& goal = *task.goal.goal_screen;
    if (!reachable(g, s.current_screen, goal)) return false;
    for (const auto& [slot, want] : task.goal.slot_constraints) {
        auto cur = s.slot_values.find(slot);
        if (cur != s.slot_values.end() && cur->second == want) continue;
        bool editable = false;
        for (const auto& screen : g.screens) {
            if (!g.editor_for(screen.screen_id, slot)) continue;
            if (reachable(g, s.current_screen, screen.screen_id) && reachable(g, screen.screen_id, goal)) {
                editable = true;
                break;
            }
        }
        if (!editable) return false;
    }
    return true;
}

StepCriticOutput OracleCritic::judge_step(const JudgeContext& ctx, const StepRecord& step) const {
    const auto& before = step.state_before;
    const auto& after = step.state_after;
    const auto& a = step.action.action;
    const auto d0 = distance(ctx, before);
    const auto d1 = distance(ctx, after);
    const std::string effect = sim::describe_effect(ctx.env.apps(), before, a, after);

    StepLabel label = StepLabel::Neutral;
    std::string reason;
    if (a.kind() == sim::ActionKind::Terminate) {
        const bool met = taskgen::goal_satisfied(after, ctx.task);
        label = met ? StepLabel::Good : StepLabel::Harmful;
        reason = met ? "the goal was met when the task ended" : "the task ended before the goal was met";
    } else if (before.same_observable(after)) {
        reason = "nothing changed";
    } else if (overwrote_correct_slot(ctx.task, before, after)) {
        label = StepLabel::Harmful;
        reason = "a correct value was overwritten";
    } else if (!on_goal_path(ctx.env.apps(), ctx.task, after)) {
        label = StepLabel::Harmful;
        reason = "the device left every path to the goal";
    } else if (d1 < d0) {
        label = StepLabel::Good;
        reason = "the step moved toward the goal";
    } else {
        reason = "the change does not bring the goal closer";
    }

    StepCriticOutput out;
    out.label = label;
    out.analysis = "Action " + sim::to_string(a) + " " + effect + ". Remaining solution length went from " +
                   dist_text(d0) + " to " + dist_text(d1) + "; " + reason + ".";
    out.summary = text::truncate_words(effect + "; " + reason, kMaxSummaryWords);
    return out;
}

Verdict OracleCritic::judge_channel(Channel channel, const JudgeContext& ctx, const ChannelInput& input) const {
    bool ok = finished_correctly(ctx, input.traj) && !unrecovered_harm(ctx, input.traj, input.steps);
    if (channel == Channel::Multimodal) ok = ok && observations_agree(ctx, input.traj, input.steps);
    return ok ? Verdict::Correct : Verdict::Incorrect;
}

std::string OracleCritic::summarize(const JudgeContext&, const std::vector<std::string>& lines) const {
    std::vector<std::string> numbered;
    for (std::size_t i = 0; i < lines.size(); ++i) numbered.push_back(std::to_string(i + 1) + ". " + lines[i]);
    return text::join(numbered, "\n");
}

Json RemoteCritic::post(const Json& body) const {
    agents::HttpResult res;
    try {
        res = transport_->post("/v1/critic", body.dump());
    } catch (const BackendError&) {
        throw;
    }
    if (res.status < 200 || res.status >= 300) throw BackendError("critic returned HTTP " + std::to_string(res.status));
    Json j = Json::parse(res.body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw BackendError("critic response is not a JSON object");
    return j;
}

namespace {

Json goal_json(const taskgen::TaskQuery& task) {
    Json g;
    g["slot_constraints"] = task.goal.slot_constraints;
    g["goal_screen"] = task.goal.goal_screen ? Json(*task.goal.goal_screen) : Json(nullptr);
    return g;
}

std::string required_string(const Json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) throw BackendError(std::string("critic response lacks text '") + key + "'");
    return j[key].get<std::string>();
}

}  // namespace

StepCriticOutput RemoteCritic::judge_step(const JudgeContext& ctx, const StepRecord& step) const {
    Trajectory shell;
    shell.task_id = ctx.task.task_id;
    Json body;
    body["kind"] = "step";
    body["instruction"] = ctx.task.instruction;
    body["goal"] = goal_json(ctx.task);
    const auto widget = step.action.action.widget();
    body["target_widget"] = widget.empty() ? Json(nullptr) : Json(std::string(widget));
    body["step"] = agents::step_to_json(shell, step);
    auto j = post(body);
    StepCriticOutput out;
    out.analysis = required_string(j, "analysis");
    out.summary = required_string(j, "summary");
    auto label = parse_label(required_string(j, "label"));
    if (!label) throw BackendError("critic label must be GOOD, NEUTRAL or HARMFUL");
    if (text::word_count(out.summary) > kMaxSummaryWords) throw BackendError("critic summary exceeds 30 words");
    out.label = *label;
    return out;
}

Verdict RemoteCritic::judge_channel(Channel channel, const JudgeContext& ctx, const ChannelInput& input) const {
    Json body;
    body["kind"] = channel == Channel::Text ? "text" : "multimodal";
    body["instruction"] = ctx.task.instruction;
    Json steps = Json::array();
    for (std::size_t i = 0; i < input.steps.size(); ++i) {
        Json s{{"summary", input.steps[i].summary}, {"label", to_string(input.steps[i].label)}};
        if (i < input.traj.steps.size()) {
            s["description"] = input.traj.steps[i].transition.description;
            if (channel == Channel::Multimodal) {
                s["obs_before"] = input.traj.steps[i].obs_before.serialized;
                s["obs_after"] = input.traj.steps[i].obs_after.serialized;
            }
        }
        steps.push_back(std::move(s));
    }
    body["steps"] = std::move(steps);
    auto verdict = parse_verdict(required_string(post(body), "verdict"));
    if (!verdict) throw BackendError("critic verdict must be Correct or Incorrect");
    return *verdict;
}

std::string RemoteCritic::summarize(const JudgeContext& ctx, const std::vector<std::string>& lines) const {
    Json body{{"kind", "guidance"}, {"instruction", ctx.task.instruction}, {"lines", lines}};
    auto g = required_string(post(body), "guidance");
    if (text::trim(g).empty()) throw BackendError("critic returned empty guidance");
    return g;
}

CriticPtr make_critic(std::string_view spec, std::uint64_t seed) {
    if (spec == "oracle") return std::make_shared<OracleCritic>();
    if (spec.rfind("remote:", 0) == 0)
        return std::make_shared<RemoteCritic>(agents::make_http_transport(std::string(spec.substr(7))));
    if (spec == "adversarial" || spec.rfind("adversarial:", 0) == 0) {
        if (spec.size() > 12) seed = std::stoull(std::string(spec.substr(12)));
        return std::make_shared<RemoteCritic>(agents::make_adversarial_transport(seed));
    }
    throw ConfigError("unknown critic '" + std::string(spec) + "'");
}

StepCriticOutput step_critic(const JudgeContext& ctx, const StepRecord& step, const Critic& critic) {
    auto out = critic.judge_step(ctx, step);
    out.summary = text::truncate_words(out.summary, kMaxSummaryWords);
    return out;
}

TrajectoryVerdict judge_trajectory(const Trajectory& traj, const taskgen::TaskQuery& task, const sim::AppRegistry& apps,
                                   const Critic& text_critic, const Critic& mm_critic) {
    TrajectoryVerdict v;
    v.task_id = traj.task_id;
    v.traj_id = traj.traj_id;
    taskgen::Route route;
    try {
        route = taskgen::route_of(task, apps);
    } catch (const Error&) {
        route.app = task.app_names.empty() ? "" : task.primary_app();
    }
    sim::Environment env(apps);
    JudgeContext ctx{task, env, route};

    std::vector<StepCriticOutput> steps;
    try {
        for (const auto& s : traj.steps) steps.push_back(step_critic(ctx, s, text_critic));
    } catch (const BackendError& e) {
        v.error = std::string("step critic: ") + e.what();
        return v;
    }
    for (const auto& s : steps) v.step_labels.push_back(s.label);

    ChannelInput input{traj, steps};
    try {
        v.text_channel = text_critic.judge_channel(Channel::Text, ctx, input);
    } catch (const BackendError& e) {
        v.error = std::string("text channel: ") + e.what();
    }
    try {
        v.multimodal_channel = mm_critic.judge_channel(Channel::Multimodal, ctx, input);
    } catch (const BackendError& e) {
        v.error += (v.error.empty() ? "" : "; ") + std::string("multimodal channel: ") + e.what();
    }
    v.consensus = consensus(v.text_channel, v.multimodal_channel);
    return v;
}

std::vector<std::string> guidance_lines(const Trajectory& traj) {
    std::vector<std::string> lines;
    for (const auto& s : traj.steps) {
        if (s.reflection && s.reflection->judgment == agents::Judgment::Failure) continue;
        const auto kind = s.action.action.kind();
        if (kind == sim::ActionKind::Scroll || kind == sim::ActionKind::Wait) continue;
        if (!s.transition.state_changed || s.transition.invalid_target || s.transition.malformed) continue;
        lines.push_back(s.transition.description);
    }
    return lines;
}

std::string generate_guidance(const Trajectory& ref, const taskgen::TaskQuery& task, const sim::AppRegistry& apps,
                              const Critic& critic) {
    auto lines = guidance_lines(ref);
    if (lines.empty()) throw EmptyGuidanceError("every step of " + ref.traj_id + " was filtered out");
    taskgen::Route route;
    sim::Environment env(apps);
    JudgeContext ctx{task, env, route};
    return critic.summarize(ctx, lines);
}

Json to_json(const TrajectoryVerdict& v) {
    Json labels = Json::array();
    for (auto l : v.step_labels) labels.push_back(to_string(l));
    Json j{{"task_id", v.task_id},
           {"traj_id", v.traj_id},
           {"text_channel", to_string(v.text_channel)},
           {"multimodal_channel", to_string(v.multimodal_channel)},
           {"consensus", to_string(v.consensus)},
           {"step_labels", labels}};
    if (!v.error.empty()) j["error"] = v.error;
    return j;
}

TrajectoryVerdict verdict_from_json(const Json& j) {
    TrajectoryVerdict v;
    v.task_id = j.at("task_id").get<std::string>();
    v.traj_id = j.at("traj_id").get<std::string>();
    auto get = [&](const char* key) {
        auto r = parse_verdict(j.at(key).get<std::string>());
        if (!r) throw SchemaError(std::string("bad verdict in ") + key);
        return *r;
    };
    v.text_channel = get("text_channel");
    v.multimodal_channel = get("multimodal_channel");
    v.consensus = get("consensus");
    for (const auto& l : j.at("step_labels")) {
        auto label = parse_label(l.get<std::string>());
        if (!label) throw SchemaError("bad step label " + l.dump());
        v.step_labels.push_back(*label);
    }
    v.error = j.value("error", "");
    return v;
}

}  // namespace owlsim::judgment
