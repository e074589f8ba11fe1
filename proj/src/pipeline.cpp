#include "owlsim/pipeline/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include "owlsim/agents/reasoning.hpp"
#include "owlsim/core/errors.hpp"
#include "owlsim/core/text.hpp"

namespace owlsim::pipeline {

using sim::Action;
using sim::ActionKind;

// ---- samples ------------------------------------------------------------------

Json to_json(const TrainingSample& s) {
    Json j{{"task_id", s.task_id},   {"traj_id", s.traj_id},       {"t", s.t},
           {"context", s.context},   {"reasoning", s.reasoning},   {"target_action", sim::to_string(s.target_action)},
           {"weight", s.weight},     {"source", s.source}};
    j["role"] = s.role ? Json(*s.role) : Json(nullptr);
    j["polarity"] = s.polarity ? Json(*s.polarity == Polarity::Positive ? "positive" : "negative") : Json(nullptr);
    if (s.hint_style) j["hint_style"] = *s.hint_style;
    return j;
}

TrainingSample sample_from_json(const Json& j) {
    TrainingSample s;
    s.task_id = j.at("task_id").get<std::string>();
    s.traj_id = j.at("traj_id").get<std::string>();
    s.t = j.at("t").get<int>();
    s.context = j.at("context");
    s.reasoning = j.at("reasoning").get<std::string>();
    auto a = sim::parse_action(j.at("target_action").get<std::string>());
    if (!a) throw SchemaError("bad target_action in sample of " + s.traj_id);
    s.target_action = *a;
    s.weight = j.at("weight").get<double>();
    if (!(s.weight > 0.0)) throw SchemaError("sample weight must be positive");
    if (s.reasoning.empty()) throw SchemaError("sample reasoning must be non-empty");
    s.source = j.value("source", "");
    if (j.contains("role") && !j["role"].is_null()) s.role = j["role"].get<std::string>();
    if (j.contains("polarity") && !j["polarity"].is_null())
        s.polarity = j["polarity"].get<std::string>() == "positive" ? Polarity::Positive : Polarity::Negative;
    if (j.contains("hint_style")) s.hint_style = j["hint_style"].get<std::string>();
    return s;
}

void write_dataset(const std::string& path, const std::vector<TrainingSample>& samples) {
    std::vector<Json> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) rows.push_back(to_json(s));
    write_jsonl(path, rows);
}

std::vector<TrainingSample> read_dataset(const std::string& path) {
    std::vector<TrainingSample> out;
    try {
        for (const auto& row : read_jsonl(path)) out.push_back(sample_from_json(row));
    } catch (const Json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    return out;
}

namespace {

std::vector<std::string> history_before(const agents::Trajectory& traj, std::size_t t) {
    std::vector<std::string> h;
    for (std::size_t i = 0; i < t && i < traj.steps.size(); ++i) {
        const auto& s = traj.steps[i];
        h.push_back(s.conclusion.empty() ? s.action.summary : s.conclusion);
    }
    return h;
}

std::string where(const sim::Observation& obs) {
    return obs.app.empty() ? "the launcher" : "the " + obs.screen_id + " screen of " + obs.app;
}

}  // namespace

Json step_context(const agents::Trajectory& traj, std::size_t t) {
    return Json{{"instruction", traj.instruction},
                {"history", history_before(traj, t)},
                {"history_len", t},
                {"observation", sim::to_json(traj.steps.at(t).obs_before)}};
}

// ---- reasoning synthesis -------------------------------------------------------

namespace {

std::string templated_reasoning(const ReasoningRequest& req, const Action& a) {
    std::string out;
    if (req.hint_style == "concise") {
        out = "Goal: " + req.instruction + ". I am on " + where(req.observation) + ", ";
    } else {
        out = "The task asks: " + req.instruction + ". ";
        out += req.history.empty() ? "Nothing has been done yet. " : "Last step: " + req.history.back() + ". ";
        out += "I see " + std::to_string(req.observation.visible_widgets.size()) + " widgets on " + where(req.observation) + ", ";
    }
    return out + agents::intent_clause(a, req.observation) + ".";
}

}  // namespace

std::string OracleGenerator::generate(const ReasoningRequest& req) const {
    if (req.hint_action) return templated_reasoning(req, *req.hint_action);
    if (req.truth) return templated_reasoning(req, *req.truth);
    return templated_reasoning(req, Action::wait());
}

NoisyGenerator::NoisyGenerator(double rho) : rho_(rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("noise rate must lie in [0, 1]");
}

std::string NoisyGenerator::generate(const ReasoningRequest& req) const {
    if (req.hint_action) return templated_reasoning(req, *req.hint_action);
    Rng rng(derive_seed(req.seed, {static_cast<std::uint64_t>(req.attempt), 0x6e6f6973ULL}));
    const Action truth = req.truth ? *req.truth : Action::wait();
    if (!rng.bernoulli(rho_)) return templated_reasoning(req, truth);
    std::vector<Action> wrong;
    for (const auto& w : req.observation.visible_widgets)
        if (Action::click(w.widget_id) != truth) wrong.push_back(Action::click(w.widget_id));
    for (auto a : {Action::back(), Action::wait(), Action::scroll(sim::ScrollDirection::Down)})
        if (a != truth) wrong.push_back(a);
    return templated_reasoning(req, wrong[rng.index(wrong.size())]);
}

std::optional<Action> IntentPredictor::predict(const std::string& reasoning) const {
    auto intent = agents::parse_intent(reasoning);
    if (!intent) return std::nullopt;
    return agents::intent_action(*intent);
}

std::shared_ptr<const ReasoningGenerator> make_generator(std::string_view spec) {
    if (spec == "oracle") return std::make_shared<OracleGenerator>();
    if (spec.rfind("noisy:", 0) == 0) {
        double rho = -1;
        auto arg = spec.substr(6);
        auto [p, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), rho);
        if (ec != std::errc() || p != arg.data() + arg.size()) throw ConfigError("bad noise rate in '" + std::string(spec) + "'");
        return std::make_shared<NoisyGenerator>(rho);
    }
    throw ConfigError("unknown reasoning generator '" + std::string(spec) + "'");
}

SamplingStats& SamplingStats::operator+=(const SamplingStats& o) {
    attempted += o.attempted;
    accepted += o.accepted;
    fallback += o.fallback;
    rejected += o.rejected;
    generations += o.generations;
    return *this;
}

std::vector<TrainingSample> hint_guided_rejection_sampling(const JudgedTrajectory& item,
                                                           const std::vector<std::string>& hint_styles,
                                                           const ReasoningGenerator& generator,
                                                           const ActionPredictor& predictor, int max_tries,
                                                           std::uint64_t seed, SamplingStats* stats) {
    std::vector<TrainingSample> out;
    if (!item.correct()) return out;
    SamplingStats local;
    const auto& traj = item.traj;
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const auto& step = traj.steps[t];
        const Action& truth = step.action.action;
        for (const auto& style : hint_styles) {
            ++local.attempted;
            ReasoningRequest req;
            req.instruction = traj.instruction;
            req.history = history_before(traj, t);
            req.observation = step.obs_before;
            req.hint_style = style;
            req.truth = &truth;
            req.seed = derive_seed(seed, {fnv1a(traj.traj_id), t, fnv1a(style)});

            std::optional<std::string> kept;
            std::string source = "hint";
            for (int k = 0; k < max_tries && !kept; ++k) {
                req.attempt = k;
                auto reasoning = generator.generate(req);
                ++local.generations;
                if (predictor.predict(reasoning) == std::optional<Action>(truth)) kept = std::move(reasoning);
            }
            if (kept) {
                ++local.accepted;
            } else {
                req.attempt = max_tries;
                req.hint_action = truth;
                auto reasoning = generator.generate(req);
                ++local.generations;
                auto predicted = predictor.predict(reasoning);
                if (predicted && predicted->kind() == truth.kind()) {
                    kept = std::move(reasoning);
                    source = "hint_fallback";
                    ++local.fallback;
                } else {
                    ++local.rejected;
                    continue;
                }
            }
            TrainingSample s;
            s.task_id = traj.task_id;
            s.traj_id = traj.traj_id;
            s.t = static_cast<int>(t);
            s.context = step_context(traj, t);
            s.reasoning = std::move(*kept);
            s.target_action = truth;
            s.source = source;
            s.hint_style = style;
            out.push_back(std::move(s));
        }
    }
    if (stats) *stats += local;
    return out;
}

// ---- role distillation ----------------------------------------------------------

std::string template_merge(const std::string& subgoal, const std::string& thought, const std::string& reflection) {
    std::string out;
    if (!subgoal.empty()) out += "Current subgoal: " + subgoal + ". ";
    if (!reflection.empty()) out += "Reflection on the previous step: " + reflection + ". ";
    return out + thought;
}

std::vector<TrainingSample> distill_roles(const JudgedTrajectory& item, const Merger& merger) {
    std::vector<TrainingSample> out;
    if (!item.correct()) return out;
    const auto& traj = item.traj;
    if (traj.mode != agents::Mode::Role) throw MissingRoleRecordError(traj.traj_id + " is not a role-mode trajectory");
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        const auto& step = traj.steps[t];
        std::set<std::string> roles;
        for (const auto& r : step.roles) roles.insert(r.role);
        for (const char* need : {"worker", "reflector", "manager_update"})
            if (!roles.count(need))
                throw MissingRoleRecordError(traj.traj_id + " step " + std::to_string(t) + " lacks its " + need + " record");
        std::string reflection;
        if (step.prior_feedback) {
            reflection = step.prior_feedback->feedback;
            if (reflection.empty())
                reflection = step.prior_feedback->judgment == agents::Judgment::Success ? "the previous action worked"
                                                                                       : "the previous action failed";
        }
        TrainingSample s;
        s.task_id = traj.task_id;
        s.traj_id = traj.traj_id;
        s.t = static_cast<int>(t);
        s.context = step_context(traj, t);
        s.reasoning = merger(step.action.subgoal, step.action.thought, reflection);
        s.target_action = step.action.action;
        s.source = "distill";
        if (s.reasoning.empty()) continue;
        out.push_back(std::move(s));
    }
    return out;
}

// ---- filters --------------------------------------------------------------------

namespace {

const std::map<ActionKind, std::vector<std::string>> kVerbs{
    {ActionKind::Click, {"click", "tap", "press", "select"}}, {ActionKind::Type, {"type", "enter"}},
    {ActionKind::Scroll, {"scroll"}},                        {ActionKind::Back, {"back"}},
    {ActionKind::OpenApp, {"open", "launch"}},               {ActionKind::Wait, {"wait"}},
    {ActionKind::Terminate, {"end", "finish", "terminate"}},
};

}  // namespace

bool thought_action_consistent(const TrainingSample& sample) {
    const auto& a = sample.target_action;
    const std::string widget(a.widget());
    if (auto intent = agents::parse_intent(sample.reasoning)) {
        if (intent->kind != a.kind()) return false;
        if (!widget.empty() && intent->widget_id != widget) return false;
        if (auto* o = a.as<sim::act::OpenApp>(); o && intent->app != o->app_name) return false;
        return true;
    }
    // Free text: the action's verb and its widget must both be mentioned.
    const auto& verbs = kVerbs.at(a.kind());
    if (std::none_of(verbs.begin(), verbs.end(), [&](const auto& v) { return text::contains_word_ci(sample.reasoning, v); }))
        return false;
    if (widget.empty()) return true;
    if (text::contains_ci(sample.reasoning, widget)) return true;
    if (sample.context.contains("observation")) {
        for (const auto& w : sample.context["observation"].value("visible_widgets", Json::array()))
            if (w.value("widget_id", "") == widget) {
                const auto label = w.value("label", "");
                return !label.empty() && text::contains_word_ci(sample.reasoning, label);
            }
    }
    return false;
}

std::vector<TrainingSample> critic_filter(const std::vector<TrainingSample>& samples,
                                          const std::vector<double>& step_scores, double tau_c) {
    if (samples.size() != step_scores.size()) throw ConfigError("every sample needs a step score");
    std::vector<TrainingSample> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (step_scores[i] >= tau_c) out.push_back(samples[i]);
    return out;
}

std::map<std::string, double> reweight_tasks(const std::vector<TaskStats>& stats, double delta) {
    if (!(delta > 0.0)) throw ConfigError("delta must be positive");
    std::map<std::string, double> w;
    if (stats.empty()) return w;
    double sum = 0.0;
    for (const auto& s : stats) {
        if (s.attempts < 1) throw ConfigError("task " + s.task_id + " has no attempts");
        const double raw = 1.0 - s.p_succ() + delta;
        w[s.task_id] = raw;
        sum += raw;
    }
    const double mean = sum / static_cast<double>(w.size());
    for (auto& [k, v] : w) v /= mean;
    return w;
}

std::vector<TrainingSample> balance_reflector(const std::vector<agents::Trajectory>& trajectories, std::uint64_t seed) {
    std::vector<TrainingSample> pos, neg;
    auto make = [](const agents::Trajectory& traj, std::size_t t, Polarity p) {
        const auto& step = traj.steps[t];
        TrainingSample s;
        s.task_id = traj.task_id;
        s.traj_id = traj.traj_id;
        s.t = static_cast<int>(t);
        s.context = step_context(traj, t);
        s.context["action"] = sim::to_string(step.action.action);
        s.context["observation_after"] = sim::to_json(step.obs_after);
        s.reasoning = step.reflection->feedback.empty() ? "The action had its intended effect." : step.reflection->feedback;
        s.target_action = step.action.action;
        s.role = "reflector";
        s.polarity = p;
        s.source = "reflector";
        return s;
    };
    for (const auto& traj : trajectories) {
        const auto& st = traj.steps;
        if (st.empty() || std::any_of(st.begin(), st.end(), [](const auto& s) { return !s.reflection; })) continue;
        const bool clean = std::all_of(st.begin(), st.end(),
                                       [](const auto& s) { return s.reflection->judgment == agents::Judgment::Success; });
        for (std::size_t i = 0; i < st.size(); ++i) {
            if (clean) pos.push_back(make(traj, i, Polarity::Positive));
            else if (st[i].reflection->judgment == agents::Judgment::Failure && i + 1 < st.size() &&
                     st[i + 1].reflection->judgment == agents::Judgment::Success)
                neg.push_back(make(traj, i, Polarity::Negative));
        }
    }
    if (pos.empty() || neg.empty())
        throw EmptyClassError("reflector samples: " + std::to_string(pos.size()) + " positive, " +
                              std::to_string(neg.size()) + " negative");
    Rng rng(derive_seed(seed, {fnv1a("reflector-balance")}));
    auto shrink = [&](std::vector<TrainingSample>& v, std::size_t n) {
        if (v.size() <= n) return;
        std::vector<std::size_t> idx(v.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        rng.shuffle(idx);
        idx.resize(n);
        std::sort(idx.begin(), idx.end());
        std::vector<TrainingSample> kept;
        for (auto i : idx) kept.push_back(std::move(v[i]));
        v = std::move(kept);
    };
    const auto n = std::min(pos.size(), neg.size());
    shrink(pos, n);
    shrink(neg, n);
    std::vector<TrainingSample> out = std::move(pos);
    std::move(neg.begin(), neg.end(), std::back_inserter(out));
    return out;
}

// ---- iterate --------------------------------------------------------------------

std::optional<RolloutModes> parse_rollout_modes(std::string_view s) {
    if (s == "e2e") return RolloutModes::E2E;
    if (s == "role") return RolloutModes::Role;
    if (s == "both") return RolloutModes::Both;
    return std::nullopt;
}

IterationResult iterate(const std::vector<taskgen::TaskQuery>& pool, const sim::AppRegistry& apps,
                        std::shared_ptr<const trpo::FeatureMap> features, const trpo::PolicyParams& params,
                        int iteration, const IterateConfig& cfg) {
    if (iteration < 0) throw ConfigError("iteration must be non-negative");
    if (cfg.group_size < 1) throw ConfigError("group size must be at least 1");
    IterationResult res;
    res.iteration = iteration;
    res.params = params;
    auto policy = std::make_shared<trpo::LinearPolicy>(features, params);

    RolloutConfig rc;
    rc.group_size = cfg.group_size;
    rc.parallelism = cfg.parallelism;
    rc.iteration = iteration;
    rc.t_max = cfg.t_max;
    rc.k_history = cfg.k_history;
    rc.store_path = cfg.store_path;
    std::vector<JudgedTrajectory> items;
    if (cfg.modes != RolloutModes::Role) {
        rc.mode = agents::Mode::E2E;
        rc.seed = cfg.seed;
        rc.policy = policy;
        auto b = rollout(pool, apps, rc);
        std::move(b.items.begin(), b.items.end(), std::back_inserter(items));
    }
    if (cfg.modes != RolloutModes::E2E) {
        rc.mode = agents::Mode::Role;
        rc.seed = derive_seed(cfg.seed, {fnv1a("role")});
        rc.backends.manager = agents::make_backend(cfg.manager_backend, cfg.seed);
        rc.backends.worker = agents::make_backend("learned", cfg.seed, policy);
        rc.backends.reflector = agents::make_backend(cfg.reflector_backend, cfg.seed);
        rc.backends.notetaker = agents::make_backend(cfg.notetaker_backend, cfg.seed);
        auto b = rollout(pool, apps, rc);
        std::move(b.items.begin(), b.items.end(), std::back_inserter(items));
    }

    std::map<std::string, TaskStats> per_task;
    for (const auto& t : pool) per_task[t.task_id].task_id = t.task_id;
    std::size_t correct = 0;
    for (const auto& it : items) {
        auto& s = per_task[it.traj.task_id];
        ++s.attempts;
        s.successes += it.correct();
        correct += it.correct();
    }
    for (const auto& t : pool) res.task_stats.push_back(per_task[t.task_id]);
    res.weights = reweight_tasks(res.task_stats, cfg.delta);

    Json summary{{"iteration", iteration},       {"trajectories", items.size()}, {"correct", correct},
                 {"tau_c", cfg.tau_c},           {"delta", cfg.delta},
                 {"reflector_negative_rule", "failure followed by success"}};
    if (correct == 0) {
        res.warnings.push_back("iteration " + std::to_string(iteration) + ": no Correct trajectories; model unchanged");
        summary["dataset_size"] = 0;
        summary["warnings"] = res.warnings;
        res.summary = summary;
        return res;
    }

    const auto generator = make_generator(cfg.generator);
    const IntentPredictor predictor;
    SamplingStats sampling;
    std::vector<TrainingSample> raw;
    std::size_t distilled = 0;
    for (const auto& it : items) {
        if (!it.correct()) continue;
        auto hs = hint_guided_rejection_sampling(it, cfg.hint_styles, *generator, predictor, cfg.max_tries,
                                                 derive_seed(cfg.seed, {static_cast<std::uint64_t>(iteration)}), &sampling);
        std::move(hs.begin(), hs.end(), std::back_inserter(raw));
        if (it.traj.mode == agents::Mode::Role) {
            try {
                auto ds = distill_roles(it);
                distilled += ds.size();
                std::move(ds.begin(), ds.end(), std::back_inserter(raw));
            } catch (const MissingRoleRecordError& e) {
                res.warnings.push_back(e.what());
            }
        }
    }

    std::map<std::string, const JudgedTrajectory*> by_id;
    for (const auto& it : items) by_id[it.traj.traj_id] = &it;
    std::vector<TrainingSample> consistent;
    std::vector<double> scores;
    for (auto& s : raw) {
        if (!thought_action_consistent(s)) continue;
        const auto& labels = by_id.at(s.traj_id)->verdict.step_labels;
        scores.push_back(static_cast<std::size_t>(s.t) < labels.size() ? judgment::critic_score(labels[s.t]) : 0.0);
        consistent.push_back(std::move(s));
    }
    const auto inconsistent = raw.size() - consistent.size();
    auto kept = critic_filter(consistent, scores, cfg.tau_c);
    const auto critic_dropped = consistent.size() - kept.size();
    for (auto& s : kept) s.weight = res.weights.at(s.task_id);

    std::vector<agents::Trajectory> role_trajs;
    for (const auto& it : items)
        if (it.traj.mode == agents::Mode::Role) role_trajs.push_back(it.traj);
    std::size_t reflector_samples = 0;
    if (!role_trajs.empty()) {
        try {
            auto refl = balance_reflector(role_trajs, derive_seed(cfg.seed, {static_cast<std::uint64_t>(iteration)}));
            reflector_samples = refl.size();
            std::move(refl.begin(), refl.end(), std::back_inserter(kept));
        } catch (const EmptyClassError& e) {
            res.warnings.push_back(e.what());
        }
    }
    res.dataset = std::move(kept);

    // Reflector samples train a reflector, which the toy model does not have.
    std::vector<trpo::SupervisedExample> examples;
    for (const auto& s : res.dataset) {
        if (s.role) continue;
        examples.push_back({s.context.at("instruction").get<std::string>(),
                            sim::observation_from_json(s.context.at("observation")),
                            s.context.at("history_len").get<std::size_t>(), s.target_action, s.weight});
    }
    const auto used = trpo::fit_supervised(examples, *features, res.params, cfg.lr, cfg.epochs);

    summary["hint"] = {{"attempted", sampling.attempted}, {"accepted", sampling.accepted},
                       {"fallback", sampling.fallback},   {"rejected", sampling.rejected},
                       {"acceptance_rate", sampling.acceptance_rate()}};
    summary["distilled"] = distilled;
    summary["inconsistent_dropped"] = inconsistent;
    summary["critic_dropped"] = critic_dropped;
    summary["reflector_samples"] = reflector_samples;
    summary["dataset_size"] = res.dataset.size();
    summary["supervised_examples"] = used;
    summary["warnings"] = res.warnings;
    res.summary = summary;
    return res;
}

std::string task_stats_csv_header() { return "iteration,task_id,attempts,successes,p_succ,weight"; }

std::string task_stats_csv_rows(const IterationResult& r) {
    std::string out;
    char buf[64];
    for (const auto& s : r.task_stats) {
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f", s.p_succ(), r.weights.at(s.task_id));
        out += std::to_string(r.iteration) + "," + s.task_id + "," + std::to_string(s.attempts) + "," +
               std::to_string(s.successes) + buf + "\n";
    }
    return out;
}

}  // namespace owlsim::pipeline
