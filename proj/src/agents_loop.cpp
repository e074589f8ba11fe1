#include <algorithm>
#include <charconv>

#include "owlsim/agents/loop.hpp"
#include "owlsim/agents/oracle.hpp"
#include "owlsim/agents/reasoning.hpp"
#include "owlsim/core/errors.hpp"
#include "owlsim/core/text.hpp"

namespace owlsim::agents {

using sim::Action;

KnowledgeTable load_knowledge(const std::string& path) {
    Json j = read_json_file(path);
    KnowledgeTable table;
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) table.emplace_back(k, v.get<std::string>());
    } else if (j.is_array()) {
        for (const auto& row : j) table.emplace_back(row.at("key").get<std::string>(), row.at("snippet").get<std::string>());
    } else {
        throw SchemaError(path + ": knowledge table must be an object or a list");
    }
    return table;
}

std::string retrieve_knowledge(std::string_view instruction, const KnowledgeTable& table) {
    std::vector<std::string> hits;
    for (const auto& [key, snippet] : table)
        if (!key.empty() && text::contains_ci(instruction, key)) hits.push_back(snippet);
    return text::join(hits, "\n");
}

namespace {

template <class F>
auto with_retries(const char* what, int retries, F&& f) {
    std::string last;
    for (int attempt = 0; attempt <= retries; ++attempt) {
        try {
            return f();
        } catch (const MalformedOutput& e) {
            last = e.what();
        } catch (const BackendError& e) {
            last = e.what();
        }
    }
    throw BackendError(std::string(what) + " failed: " + last);
}

std::pair<std::vector<std::string>, std::vector<std::string>> plan_from(const RoleResponse& r) {
    if (!r.subgoals) throw MalformedOutput("manager response without subgoals");
    return {*r.subgoals, r.completed.value_or(std::vector<std::string>{})};
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

std::pair<std::vector<std::string>, std::vector<std::string>> manager_init(const RoleRequest& request,
                                                                           const RoleBackend& backend, int retries) {
    return with_retries("manager_init", retries, [&] { return plan_from(backend.call(request)); });
}

std::pair<std::vector<std::string>, std::vector<std::string>> manager_update(const RoleRequest& request,
                                                                             const RoleBackend& backend, int retries) {
    return with_retries("manager_update", retries, [&] { return plan_from(backend.call(request)); });
}

WorkerResult worker_act(const RoleRequest& request, const RoleBackend& backend) {
    WorkerResult out;
    try {
        auto r = backend.call(request);
        if (!r.action) throw MalformedOutput("worker response without an action");
        out.record.action = *r.action;
        out.record.thought = r.thought.value_or("");
        out.record.summary = r.summary.value_or("");
        if (out.record.summary.empty()) out.record.summary = sim::to_string(*r.action);
        out.record.subgoal = r.subgoal.value_or("");
        out.feasible = r.feasible.value_or(true);
    } catch (const MalformedOutput& e) {
        out.record = {"", Action::wait(), "malformed worker output: " + std::string(e.what()), ""};
        out.malformed = true;
    } catch (const BackendError& e) {
        out.record = {"", Action::wait(), "worker unavailable: " + std::string(e.what()), ""};
        out.malformed = true;
    }
    return out;
}

ReflectionFeedback reflect(const RoleRequest& request, const RoleBackend& backend, int retries) {
    return with_retries("reflector", retries, [&] {
        auto r = backend.call(request);
        if (!r.judgment) throw MalformedOutput("reflector response without a judgment");
        ReflectionFeedback f{*r.judgment, r.feedback.value_or("")};
        if (f.judgment == Judgment::Failure && f.feedback.empty())
            f.feedback = "reflector reported failure without a diagnostic";
        return f;
    });
}

Notes take_notes(const RoleRequest& request, const RoleBackend& backend) {
    try {
        return backend.call(request).notes.value_or(Notes{});
    } catch (const MalformedOutput&) {
    } catch (const BackendError&) {
    }
    return {};
}

void sanitize_plan(std::vector<std::string>& pending, std::vector<std::string>& completed,
                   const std::vector<std::string>& proposed_pending, const std::vector<std::string>& proposed_completed,
                   std::size_t max_pending) {
    for (const auto& c : proposed_completed)
        if (!c.empty() && !contains(completed, c)) completed.push_back(c);
    std::vector<std::string> next;
    for (const auto& p : proposed_pending) {
        if (next.size() >= max_pending) break;
        if (!p.empty() && !contains(completed, p) && !contains(next, p)) next.push_back(p);
    }
    pending = std::move(next);
}

void push_history(std::vector<HistoryEntry>& history, HistoryEntry entry, int k_history) {
    history.push_back(std::move(entry));
    const auto keep = static_cast<std::size_t>(std::max(k_history, 0));
    for (std::size_t i = 0; i + keep < history.size(); ++i) history[i].observation.reset();
}

Trajectory run_episode(const taskgen::TaskQuery& task, sim::Environment& env, const Backends& backends,
                       const LoopConfig& config) {
    Trajectory traj;
    traj.task_id = task.task_id;
    traj.traj_id = task.task_id;
    traj.mode = Mode::Role;
    traj.instruction = task.instruction;

    sim::Observation obs;
    try {
        obs = taskgen::reset(env, task);
    } catch (const Error& e) {
        traj.error = e.what();
        traj.final_state = env.state();
        return traj;
    }
    std::optional<taskgen::Route> route;
    try {
        route = taskgen::route_of(task, env.apps());
    } catch (const Error&) {
        // Tasks without a replayable solution leave oracle roles without a route.
    }

    const std::uint64_t episode_seed = derive_seed(config.seed, {fnv1a(task.task_id)});
    OrchestratorState st;
    if (config.knowledge) st.rag_knowledge = retrieve_knowledge(task.instruction, *config.knowledge);

    auto request = [&](Role role, const sim::EnvState* before, const sim::EnvState* after) {
        RoleRequest r;
        r.role = role;
        r.task_id = task.task_id;
        r.episode_seed = episode_seed;
        r.t = st.t;
        r.instruction = task.instruction;
        r.guidance = task.guidance;
        r.observation = obs;
        r.state = st;
        r.n_inspect = config.n_inspect;
        r.truth = {&task, route ? &*route : nullptr, &env, before, after};
        return r;
    };
    auto record = [&](std::vector<RoleRecord>& into, const RoleRequest& req, const Json& response) {
        if (config.record_roles) into.push_back({std::string(to_string(req.role)), to_json(req), response});
    };

    const sim::EnvState s0 = env.state();
    try {
        auto req = request(Role::ManagerInit, &s0, &s0);
        auto [ss, cs] = manager_init(req, *backends.manager, config.backend_retries);
        sanitize_plan(st.pending, st.completed, ss, {}, config.max_pending);
        record(traj.init_roles, req, Json{{"subgoals", st.pending}});
    } catch (const BackendError& e) {
        traj.error = e.what();
        traj.final_state = env.state();
        return traj;
    }
    traj.initial_subgoals = st.pending;

    int infeasible_streak = 0;
    while (st.t < config.t_max && !st.pending.empty()) {
        StepRecord step;
        step.t = st.t;
        step.obs_before = obs;
        step.state_before = env.state();
        step.prior_feedback = st.last_feedback;

        auto wreq = request(Role::Worker, &step.state_before, nullptr);
        auto wr = worker_act(wreq, *backends.worker);
        step.trace.push_back("worker");
        infeasible_streak = wr.feasible ? 0 : infeasible_streak + 1;
        if (infeasible_streak >= config.stalemate_limit) {
            traj.error = "stalemate";  // TERMINATE(failure) on the loop's behalf
            break;
        }
        if (wr.record.action.is_terminate(sim::TerminateStatus::Failure)) {
            traj.error = "worker terminated with failure";
            break;
        }
        record(step.roles, wreq, wr.malformed ? Json{{"malformed", true}} : to_json(wr.record));

        auto [obs_after, report] = env.step(wr.record.action);
        report.malformed = wr.malformed;
        step.trace.push_back("execute");
        step.action = wr.record;
        step.transition = report;
        step.obs_after = obs_after;
        step.state_after = env.state();

        auto finish_step = [&] {
            traj.steps.push_back(std::move(step));
            obs = obs_after;
        };

        auto rreq = request(Role::Reflector, &step.state_before, &step.state_after);
        rreq.observation_after = obs_after;
        rreq.action = wr.record;
        try {
            step.reflection = reflect(rreq, *backends.reflector, config.backend_retries);
        } catch (const BackendError& e) {
            traj.error = e.what();
            finish_step();
            break;
        }
        step.trace.push_back("reflector");
        record(step.roles, rreq, to_json(*step.reflection));

        if (step.reflection->judgment == Judgment::Success) {
            // The notetaker reads S_t, the observation the action was taken on.
            auto nreq = request(Role::Notetaker, &step.state_before, &step.state_after);
            step.notes_delta = take_notes(nreq, *backends.notetaker);
            for (const auto& [k, v] : step.notes_delta) st.notes[k] = v;
            step.trace.push_back("notetaker");
            record(step.roles, nreq, Json{{"notes", step.notes_delta}});
        }

        obs = obs_after;  // the manager sees the post-action screen
        auto mreq = request(Role::ManagerUpdate, &step.state_before, &step.state_after);
        mreq.action = wr.record;
        mreq.feedback = step.reflection;
        try {
            auto [ss, cs] = manager_update(mreq, *backends.manager, config.backend_retries);
            sanitize_plan(st.pending, st.completed, ss, cs, config.max_pending);
        } catch (const BackendError& e) {
            traj.error = e.what();
            finish_step();
            break;
        }
        step.trace.push_back("manager");
        step.subgoals_pending = st.pending;
        step.subgoals_completed = st.completed;
        record(step.roles, mreq, Json{{"subgoals", st.pending}, {"completed_subgoals", st.completed}});

        st.last_feedback = step.reflection;
        ++st.t;
        finish_step();
        if (env.state().terminated()) break;
    }

    traj.outcome = st.pending.empty() && traj.error.empty() ? Outcome::Succeeded : Outcome::Failed;
    if (traj.outcome == Outcome::Failed && traj.error.empty() && st.t >= config.t_max) traj.error = "timeout";
    traj.notes = st.notes;
    traj.final_state = env.state();
    return traj;
}

Trajectory run_episode_e2e(const taskgen::TaskQuery& task, sim::Environment& env, const Policy& policy,
                           int k_history, int t_max, std::uint64_t seed) {
    Trajectory traj;
    traj.task_id = task.task_id;
    traj.traj_id = task.task_id;
    traj.mode = Mode::E2E;
    traj.instruction = task.instruction;

    sim::Observation obs;
    try {
        obs = taskgen::reset(env, task);
    } catch (const Error& e) {
        traj.error = e.what();
        traj.final_state = env.state();
        return traj;
    }
    std::optional<taskgen::Route> route;
    try {
        route = taskgen::route_of(task, env.apps());
    } catch (const Error&) {
    }

    const std::uint64_t episode_seed = derive_seed(seed, {fnv1a(task.task_id)});
    Rng rng(episode_seed);
    std::vector<HistoryEntry> history;
    for (int t = 0; t < t_max; ++t) {
        StepRecord step;
        step.t = t;
        step.obs_before = obs;
        step.state_before = env.state();

        PolicyContext ctx;
        ctx.instruction = task.instruction;
        ctx.guidance = task.guidance;
        ctx.history = history;
        ctx.observation = obs;
        ctx.t = t;
        ctx.episode_seed = episode_seed;
        ctx.truth = {&task, route ? &*route : nullptr, &env, &step.state_before, nullptr};
        auto out = policy.act(ctx, rng);
        step.trace.push_back("policy");
        if (out.action.is_terminate(sim::TerminateStatus::Failure)) {
            traj.error = "policy terminated with failure";
            break;
        }

        auto [obs_after, report] = env.step(out.action);
        report.malformed = out.malformed;
        step.trace.push_back("execute");
        step.action = {out.thought, out.action, out.conclusion.empty() ? sim::to_string(out.action) : out.conclusion, ""};
        step.transition = report;
        step.conclusion = out.conclusion.empty() ? conclusion_for(out.action, report) : out.conclusion;
        step.log_prob = out.log_prob;
        step.obs_after = obs_after;
        step.state_after = env.state();
        push_history(history, {step.conclusion, out.action, obs.serialized}, k_history);
        traj.steps.push_back(std::move(step));
        obs = obs_after;
        if (env.state().terminated()) break;
    }
    const auto& fin = env.state();
    traj.outcome = fin.termination == sim::TerminateStatus::Success ? Outcome::Succeeded : Outcome::Failed;
    if (traj.outcome == Outcome::Failed && traj.error.empty()) traj.error = "timeout";
    traj.final_state = fin;
    return traj;
}

RoleResponse PolicyBackend::call(const RoleRequest& request) const {
    PolicyContext ctx;
    ctx.instruction = request.instruction;
    ctx.guidance = request.guidance;
    ctx.history = request.history;
    ctx.observation = request.observation;
    ctx.t = request.t;
    ctx.episode_seed = request.episode_seed;
    ctx.truth = request.truth;
    Rng rng(derive_seed(request.episode_seed, {static_cast<std::uint64_t>(request.t), 0x706f6cULL}));
    auto out = policy_->act(ctx, rng);
    if (out.malformed) throw MalformedOutput("policy emitted an unparsable action");
    RoleResponse r;
    r.thought = out.thought;
    r.action = out.action;
    r.summary = out.conclusion.empty() ? sim::to_string(out.action) : out.conclusion;
    r.conclusion = out.conclusion;
    if (!request.state.pending.empty()) r.subgoal = request.state.pending.front();
    r.feasible = true;
    return r;
}

PolicyOutput BackendPolicy::act(const PolicyContext& ctx, Rng&) const {
    RoleRequest req;
    req.role = Role::Policy;
    req.instruction = ctx.instruction;
    req.guidance = ctx.guidance;
    req.history = ctx.history;
    req.observation = ctx.observation;
    req.t = ctx.t;
    req.episode_seed = ctx.episode_seed;
    req.truth = ctx.truth;
    if (ctx.truth.task) req.task_id = ctx.truth.task->task_id;
    PolicyOutput out;
    try {
        auto r = backend_->call(req);
        if (!r.action) throw MalformedOutput("policy response without an action");
        out.action = *r.action;
        out.thought = r.thought.value_or("");
        out.conclusion = r.conclusion.value_or("");
    } catch (const MalformedOutput&) {
        out.action = Action::wait();
        out.malformed = true;
    } catch (const BackendError&) {
        out.action = Action::wait();
        out.malformed = true;
    }
    return out;
}

BackendPtr make_backend(std::string_view spec, std::uint64_t seed, PolicyPtr learned) {
    auto [head, arg] = [&] {
        auto colon = spec.find(':');
        if (colon == std::string_view::npos) return std::pair{spec, std::string_view{}};
        return std::pair{spec.substr(0, colon), spec.substr(colon + 1)};
    }();
    if (head == "oracle" && arg.empty()) return std::make_shared<OracleBackend>();
    if (head == "noisy") {
        double rho = -1;
        auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), rho);
        if (ec != std::errc() || p != arg.data() + arg.size()) throw ConfigError("bad noise rate in '" + std::string(spec) + "'");
        return std::make_shared<NoisyOracleBackend>(rho, seed);
    }
    if (head == "learned" && arg.empty()) {
        if (!learned) throw ConfigError("backend 'learned' needs a policy checkpoint");
        return std::make_shared<PolicyBackend>(std::move(learned));
    }
    if (head == "remote" && !arg.empty())
        return std::make_shared<RemoteBackend>(make_http_transport(std::string(arg)), "remote:" + std::string(arg));
    if (head == "adversarial") {
        std::uint64_t s = seed;
        if (!arg.empty()) {
            auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), s);
            if (ec != std::errc() || p != arg.data() + arg.size()) throw ConfigError("bad adversarial seed");
        }
        return std::make_shared<RemoteBackend>(make_adversarial_transport(s), "adversarial");
    }
    throw ConfigError("unknown backend '" + std::string(spec) + "'");
}

}  // namespace owlsim::agents
