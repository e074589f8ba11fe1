#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "owlsim/core/errors.hpp"
#include "owlsim/core/rng.hpp"
#include "owlsim/core/text.hpp"
#include "owlsim/judgment/judgment.hpp"
#include "owlsim/pipeline/pipeline.hpp"
#include "owlsim/pipeline/rollout.hpp"
#include "owlsim/taskgen/generator.hpp"
#include "owlsim/trpo/train.hpp"

namespace fs = std::filesystem;

namespace owlsim::cli {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

template <class T>
void take(const Json& j, const char* key, T& field) {
    if (!j.contains(key)) return;
    try {
        field = j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

class OutputLock {
public:
    explicit OutputLock(const std::string& dir) : path_((fs::path(dir) / ".owlsim.lock").string()) {
        fs::create_directories(dir);
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f) throw Error("output directory is in use (lockfile " + path_ + ")");
        std::fclose(f);
    }
    ~OutputLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::string path_;
};

std::string out_path(const RunConfig& c, const std::string& name) { return (fs::path(c.out_dir) / name).string(); }

void write_json(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

bool backend_spec_ok(const std::string& s) {
    static const std::regex re(R"(oracle|learned|adversarial(:\d+)?|noisy:(0(\.\d+)?|1(\.0+)?)|remote:https?://\S+)");
    return std::regex_match(s, re);
}

bool generator_spec_ok(const std::string& s) {
    static const std::regex re(R"(oracle|noisy:(0(\.\d+)?|1(\.0+)?))");
    return std::regex_match(s, re);
}

std::uint64_t sub_seed(std::uint64_t seed, std::string_view what) { return derive_seed(seed, {fnv1a(what)}); }

struct World {
    sim::AppRegistry apps;
    std::shared_ptr<const trpo::FeatureMap> features;
    trpo::PolicyParams params;
    agents::PolicyPtr learned;
};

World load_world(const RunConfig& c) {
    World w;
    w.apps = sim::make_registry(sim::load_app_dir(c.apps_dir));
    w.features = std::make_shared<trpo::FeatureMap>(w.apps);
    w.params = c.checkpoint.empty() ? w.features->initial_params() : trpo::load_checkpoint(c.checkpoint);
    w.learned = std::make_shared<trpo::LinearPolicy>(w.features, w.params);
    return w;
}

std::vector<taskgen::TaskQuery> load_pool(const RunConfig& c, const sim::AppRegistry& apps) {
    auto pool = taskgen::read_pool(c.pool);
    if (pool.empty()) throw ConfigError("pool " + c.pool + " holds no tasks");
    sim::Environment env(apps);
    for (const auto& t : pool) {
        for (const auto& a : t.app_names)
            if (!apps.count(a)) throw ConfigError("task " + t.task_id + " needs unknown app '" + a + "'");
        auto report = taskgen::validate_task(t, env);
        if (!report.success) throw ConfigError("task " + t.task_id + " does not replay: " + report.error);
    }
    return pool;
}

agents::Backends role_backends(const RunConfig& c, const World& w) {
    return {agents::make_backend(c.manager, sub_seed(c.seed, "manager"), w.learned),
            agents::make_backend(c.worker, sub_seed(c.seed, "worker"), w.learned),
            agents::make_backend(c.reflector, sub_seed(c.seed, "reflector"), w.learned),
            agents::make_backend(c.notetaker, sub_seed(c.seed, "notetaker"), w.learned)};
}

agents::PolicyPtr e2e_policy(const RunConfig& c, const World& w) {
    if (c.policy == "learned") return w.learned;
    return std::make_shared<agents::BackendPolicy>(agents::make_backend(c.policy, sub_seed(c.seed, "policy"), w.learned));
}

pipeline::RolloutConfig rollout_config(const RunConfig& c, const World& w, agents::Mode mode, int group_size) {
    pipeline::RolloutConfig rc;
    rc.mode = mode;
    rc.group_size = group_size;
    rc.parallelism = c.parallelism;
    rc.seed = c.seed;
    rc.t_max = c.t_max;
    rc.k_history = c.k_history;
    if (mode == agents::Mode::E2E) rc.policy = e2e_policy(c, w);
    else rc.backends = role_backends(c, w);
    rc.critic = judgment::make_critic(c.critic, sub_seed(c.seed, "critic"));
    return rc;
}

agents::Mode single_mode(const std::string& m) {
    auto mode = agents::parse_mode(m);
    if (!mode) throw ConfigError("mode must be e2e or role here, got '" + m + "'");
    return *mode;
}

Json batch_summary(const pipeline::RolloutBatch& b) {
    std::size_t correct = 0, succeeded = 0, steps = 0;
    for (const auto& it : b.items) {
        correct += it.correct();
        succeeded += it.traj.outcome == agents::Outcome::Succeeded;
        steps += it.traj.steps.size();
    }
    const double n = b.items.empty() ? 1.0 : double(b.items.size());
    return {{"episodes", b.items.size()},
            {"correct", correct},
            {"self_reported_success", succeeded},
            {"success_rate", double(correct) / n},
            {"mean_steps", double(steps) / n}};
}

struct EvalCell {
    double success_rate = 0.0;
    double mean_steps = 0.0;
    Json per_difficulty = Json::object();
};

EvalCell eval_once(const RunConfig& c, const World& w, const std::vector<taskgen::TaskQuery>& pool) {
    auto rc = rollout_config(c, w, single_mode(c.mode), c.repeats);
    auto batch = pipeline::rollout(pool, w.apps, rc);
    std::map<int, std::pair<int, int>> by_diff;
    std::size_t correct = 0, steps = 0;
    for (const auto& it : batch.items) {
        auto& cell = by_diff[pool[it.task_index].difficulty];
        cell.first += 1;
        cell.second += it.correct();
        correct += it.correct();
        steps += it.traj.steps.size();
    }
    EvalCell out;
    out.success_rate = double(correct) / double(batch.items.size());
    out.mean_steps = double(steps) / double(batch.items.size());
    for (const auto& [d, cell] : by_diff)
        out.per_difficulty[std::to_string(d)] = {{"episodes", cell.first},
                                                 {"success_rate", double(cell.second) / double(cell.first)}};
    return out;
}

// --- subcommands -------------------------------------------------------------------------------

Json cmd_gen_queries(const RunConfig& c, const std::string& pool_out) {
    auto apps = sim::make_registry(sim::load_app_dir(c.apps_dir));
    auto style = taskgen::parse_style(c.style);
    if (!style) throw ConfigError("style must be explicit or natural");
    Rng rng(sub_seed(c.seed, "gen-queries"));
    auto pool = taskgen::generate_pool(apps, static_cast<std::size_t>(c.n_tasks), rng, c.max_len, *style);
    const fs::path dest = pool_out.empty() ? fs::path(out_path(c, "pool.jsonl")) : fs::path(pool_out);
    if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
    taskgen::write_pool(dest.string(), pool);
    std::map<std::string, int> per_app;
    std::map<std::string, int> per_diff;
    for (const auto& t : pool) {
        per_app[t.primary_app()] += 1;
        per_diff[std::to_string(t.difficulty)] += 1;
    }
    Json s = {{"tasks", pool.size()}, {"per_app", per_app}, {"per_difficulty", per_diff}};
    write_json(out_path(c, "gen_summary.json"), s);
    return s;
}

Json cmd_rollout(const RunConfig& c) {
    auto w = load_world(c);
    auto pool = load_pool(c, w.apps);
    auto rc = rollout_config(c, w, single_mode(c.mode), c.group_size);
    rc.store_path = out_path(c, "trajectories.jsonl");
    fs::remove(rc.store_path);
    auto s = batch_summary(pipeline::rollout(pool, w.apps, rc));
    write_json(out_path(c, "rollout_summary.json"), s);
    return s;
}

Json cmd_judge(const RunConfig& c, const std::string& input) {
    if (input.empty() || !fs::exists(input)) throw ConfigError("judge needs an existing --input trajectory file");
    auto apps = sim::make_registry(sim::load_app_dir(c.apps_dir));
    auto pool = load_pool(c, apps);
    std::map<std::string, const taskgen::TaskQuery*> by_id;
    for (const auto& t : pool) by_id[t.task_id] = &t;

    std::vector<Json> rows;
    for (auto& row : read_jsonl(input))
        if (row.value("record", "") != "verdict") rows.push_back(std::move(row));
    auto trajs = agents::trajectories_from_jsonl(rows);
    auto text = judgment::make_critic(c.critic, sub_seed(c.seed, "critic"));
    auto mm = judgment::make_critic(c.critic, sub_seed(c.seed, "critic-mm"));

    std::vector<Json> out;
    std::size_t correct = 0, text_ok = 0, mm_ok = 0;
    for (const auto& t : trajs) {
        auto it = by_id.find(t.task_id);
        if (it == by_id.end()) throw SchemaError("trajectory " + t.traj_id + " refers to unknown task " + t.task_id);
        auto v = judgment::judge_trajectory(t, *it->second, apps, *text, *mm);
        correct += v.consensus == judgment::Verdict::Correct;
        text_ok += v.text_channel == judgment::Verdict::Correct;
        mm_ok += v.multimodal_channel == judgment::Verdict::Correct;
        out.push_back(judgment::to_json(v));
    }
    write_jsonl(out_path(c, "verdicts.jsonl"), out);
    Json s = {{"trajectories", trajs.size()}, {"correct", correct}, {"text_correct", text_ok}, {"multimodal_correct", mm_ok}};
    write_json(out_path(c, "judge_summary.json"), s);
    return s;
}

Json cmd_pipeline_run(const RunConfig& c) {
    auto w = load_world(c);
    auto pool = load_pool(c, w.apps);
    auto modes = pipeline::parse_rollout_modes(c.mode);
    if (!modes) throw ConfigError("mode must be e2e, role or both");
    if (!generator_spec_ok(c.generator)) throw ConfigError("generator must be oracle or noisy:<rho>");

    pipeline::IterateConfig ic;
    ic.modes = *modes;
    ic.group_size = c.group_size;
    ic.parallelism = c.parallelism;
    ic.seed = c.seed;
    ic.t_max = c.t_max;
    ic.k_history = c.k_history;
    ic.tau_c = c.tau_c;
    ic.delta = c.delta;
    ic.generator = c.generator;
    ic.manager_backend = c.manager;
    ic.reflector_backend = c.reflector;
    ic.notetaker_backend = c.notetaker;
    if (c.lr) ic.lr = *c.lr;
    ic.store_path = out_path(c, "trajectories.jsonl");
    fs::remove(ic.store_path);

    auto params = w.params;
    std::string stats_csv = pipeline::task_stats_csv_header() + "\n";
    Json summaries = Json::array();
    for (int k = 0; k < c.iters; ++k) {
        auto r = pipeline::iterate(pool, w.apps, w.features, params, k, ic);
        pipeline::write_dataset(out_path(c, "dataset_k" + std::to_string(k) + ".jsonl"), r.dataset);
        stats_csv += pipeline::task_stats_csv_rows(r);
        summaries.push_back(r.summary);
        params = r.params;
    }
    write_text_file(out_path(c, "task_stats.csv"), stats_csv);
    trpo::save_checkpoint(out_path(c, "checkpoint.json"), params);
    Json s = {{"iterations", c.iters}, {"per_iteration", summaries}};
    write_json(out_path(c, "pipeline_summary.json"), s);
    return {{"iterations", c.iters}, {"final_dataset_size", summaries.empty() ? Json(0) : summaries.back()["dataset_size"]}};
}

Json cmd_train(const RunConfig& c) {
    auto w = load_world(c);
    auto pool = load_pool(c, w.apps);
    auto mode = trpo::parse_train_mode(c.train_mode);
    if (!mode) throw ConfigError("train_mode must be trpo_full, online_filter or offline_filter");
    trpo::TrainConfig tc;
    tc.mode = *mode;
    tc.group_size = c.group_size;
    tc.eps_clip = c.eps_clip;
    tc.eps_adv = c.eps_adv;
    tc.lr = c.lr.value_or(30.0);
    tc.iters = c.iters;
    tc.t_max = c.t_max;
    tc.k_history = c.k_history;
    tc.seed = c.seed;
    tc.parallelism = c.parallelism;
    auto r = trpo::train(pool, w.apps, w.features, w.params, tc);
    trpo::write_metrics_csv(out_path(c, "metrics.csv"), r.metrics);
    trpo::save_checkpoint(out_path(c, "checkpoint.json"), r.params);
    Json s = {{"mode", trpo::to_string(tc.mode)},
              {"iterations", r.metrics.size()},
              {"initial_success", r.metrics.empty() ? 0.0 : r.metrics.front().success_rate},
              {"final_success", r.metrics.empty() ? 0.0 : r.metrics.back().success_rate},
              {"pruned_tasks", r.pruned_tasks}};
    write_json(out_path(c, "train_summary.json"), s);
    return s;
}

// --- command line ------------------------------------------------------------------------------

std::string flag_name(std::string key) {
    for (auto& ch : key)
        if (ch == '_') ch = '-';
    return "--" + key;
}

// Every RunConfig field is exposed as a string-valued flag and converted using the field's JSON type,
// so precedence is applied uniformly through apply_json.
struct FlagSet {
    std::map<std::string, std::string> values;
    std::string config_path;

    void attach(CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        const auto defaults = to_json(RunConfig{});
        for (const auto& [key, def] : defaults.items()) {
            static const std::map<std::string, std::string> aliases{
                {"apps_dir", ",--apps"}, {"n_tasks", ",--n"}, {"t_max", ",--max-steps"}};
            auto alias = aliases.find(key);
            auto* opt = sub->add_option(flag_name(key) + (alias == aliases.end() ? "" : alias->second), values[key]);
            opt->description("default: " + (def.is_null() ? std::string("per command") : def.dump()));
        }
    }

    Json overlay(const CLI::App* sub) const {
        Json j = Json::object();
        const auto defaults = to_json(RunConfig{});
        for (const auto& [key, text] : values) {
            if (sub->count(flag_name(key)) == 0) continue;
            const auto& def = defaults.at(key);
            try {
                if (def.is_string()) j[key] = text;
                else if (def.is_number_unsigned()) j[key] = std::stoull(text);
                else if (def.is_number_integer()) j[key] = std::stoll(text);
                else j[key] = std::stod(text);
            } catch (const std::exception&) {
                throw ConfigError("flag " + flag_name(key) + ": cannot parse '" + text + "'");
            }
        }
        return j;
    }
};

RunConfig resolve(const FlagSet& flags, const CLI::App* sub) {
    RunConfig c;
    bool seeded = false;
    if (!flags.config_path.empty()) {
        if (!fs::exists(flags.config_path)) throw ConfigError("config file " + flags.config_path + " not found");
        Json file;
        try {
            file = read_json_file(flags.config_path);
        } catch (const std::exception& e) {
            throw ConfigError("config file: " + std::string(e.what()));
        }
        apply_json(c, file);
        seeded = file.contains("seed");
    }
    auto over = flags.overlay(sub);
    apply_json(c, over);
    seeded = seeded || over.contains("seed");
    if (!seeded) {
        if (const char* env = std::getenv("OWLSIM_SEED")) {
            try {
                std::size_t used = 0;
                c.seed = std::stoull(env, &used);
                if (used != std::string_view(env).size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ConfigError(std::string("OWLSIM_SEED is not an unsigned integer: ") + env);
            }
        }
    }
    return c;
}

}  // namespace

Json to_json(const RunConfig& c) {
    return {{"seed", c.seed},
            {"apps_dir", c.apps_dir},
            {"pool", c.pool},
            {"out_dir", c.out_dir},
            {"t_max", c.t_max},
            {"k_history", c.k_history},
            {"group_size", c.group_size},
            {"mode", c.mode},
            {"train_mode", c.train_mode},
            {"tau_c", c.tau_c},
            {"eps_clip", c.eps_clip},
            {"eps_adv", c.eps_adv},
            {"delta", c.delta},
            {"policy", c.policy},
            {"manager", c.manager},
            {"worker", c.worker},
            {"reflector", c.reflector},
            {"notetaker", c.notetaker},
            {"critic", c.critic},
            {"generator", c.generator},
            {"checkpoint", c.checkpoint},
            {"parallelism", c.parallelism},
            {"iters", c.iters},
            {"lr", c.lr ? Json(*c.lr) : Json(nullptr)},
            {"n_tasks", c.n_tasks},
            {"max_len", c.max_len},
            {"style", c.style},
            {"repeats", c.repeats}};
}

void apply_json(RunConfig& c, const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    const auto known = to_json(RunConfig{});
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw ConfigError("unknown config field '" + key + "'");
    take(j, "seed", c.seed);
    take(j, "apps_dir", c.apps_dir);
    take(j, "pool", c.pool);
    take(j, "out_dir", c.out_dir);
    take(j, "t_max", c.t_max);
    take(j, "k_history", c.k_history);
    take(j, "group_size", c.group_size);
    take(j, "mode", c.mode);
    take(j, "train_mode", c.train_mode);
    take(j, "tau_c", c.tau_c);
    take(j, "eps_clip", c.eps_clip);
    take(j, "eps_adv", c.eps_adv);
    take(j, "delta", c.delta);
    take(j, "policy", c.policy);
    take(j, "manager", c.manager);
    take(j, "worker", c.worker);
    take(j, "reflector", c.reflector);
    take(j, "notetaker", c.notetaker);
    take(j, "critic", c.critic);
    take(j, "generator", c.generator);
    take(j, "checkpoint", c.checkpoint);
    take(j, "parallelism", c.parallelism);
    take(j, "iters", c.iters);
    if (j.contains("lr") && !j.at("lr").is_null()) {
        double v = 0.0;
        take(j, "lr", v);
        c.lr = v;
    }
    take(j, "n_tasks", c.n_tasks);
    take(j, "max_len", c.max_len);
    take(j, "style", c.style);
    take(j, "repeats", c.repeats);
}

void validate(const RunConfig& c, bool needs_pool) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError(what);
    };
    require(c.t_max >= 1, "t_max must be >= 1");
    require(c.k_history >= 1, "k_history must be >= 1");
    require(c.group_size >= 1, "group_size must be >= 1");
    require(c.parallelism >= 1, "parallelism must be >= 1");
    require(c.iters >= 1, "iters must be >= 1");
    require(c.n_tasks >= 1, "n_tasks must be >= 1");
    require(c.max_len >= 1, "max_len must be >= 1");
    require(c.repeats >= 1, "repeats must be >= 1");
    require(c.tau_c >= 0.0 && c.tau_c <= 1.0, "tau_c must lie in [0, 1]");
    require(c.eps_clip > 0.0 && c.eps_clip < 1.0, "eps_clip must lie in (0, 1)");
    require(c.eps_adv > 0.0, "eps_adv must be > 0");
    require(c.delta > 0.0, "delta must be > 0");
    require(!c.lr || (std::isfinite(*c.lr) && *c.lr >= 0.0), "lr must be finite and >= 0");
    for (const auto* spec : {&c.policy, &c.manager, &c.worker, &c.reflector, &c.notetaker})
        require(backend_spec_ok(*spec), "bad backend spec '" + *spec + "'");
    require(std::regex_match(c.critic, std::regex(R"(oracle|adversarial(:\d+)?|remote:https?://\S+)")),
            "bad critic spec '" + c.critic + "'");
    require(fs::is_directory(c.apps_dir), "apps_dir " + c.apps_dir + " is not a directory");
    if (needs_pool) require(!c.pool.empty() && fs::exists(c.pool), "pool file '" + c.pool + "' not found");
    if (!c.checkpoint.empty()) require(fs::exists(c.checkpoint), "checkpoint " + c.checkpoint + " not found");
}

EvalReport cmd_eval(const RunConfig& c, const std::vector<taskgen::TaskQuery>& pool, bool sweep) {
    auto w = load_world(c);
    auto base = eval_once(c, w, pool);
    EvalReport r;
    r.json = {{"tasks", pool.size()},
              {"episodes", pool.size() * static_cast<std::size_t>(c.repeats)},
              {"mode", c.mode},
              {"success_rate", base.success_rate},
              {"mean_steps", base.mean_steps},
              {"per_difficulty", base.per_difficulty}};
    if (!sweep) return r;
    Json table = Json::array();
    r.scaling_csv = "k_history,budget,success_rate,mean_steps\n";
    for (int k : {1, 2, 3}) {
        for (int budget : {5, 10, 15}) {
            RunConfig cell = c;
            cell.k_history = k;
            cell.t_max = budget;
            auto e = eval_once(cell, w, pool);
            table.push_back({{"k_history", k}, {"budget", budget}, {"success_rate", e.success_rate}, {"mean_steps", e.mean_steps}});
            r.scaling_csv += std::to_string(k) + "," + std::to_string(budget) + "," + fmt(e.success_rate) + "," +
                             fmt(e.mean_steps) + "\n";
        }
    }
    r.json["scaling"] = table;
    return r;
}

Json cmd_report(const std::vector<std::string>& files, const std::string& out_dir) {
    if (files.empty()) throw SchemaError("report needs at least one metrics file");
    std::vector<std::string> header;
    struct Row {
        std::string mode;
        std::uint64_t seed;
        int iteration;
        double success;
        double reward;
    };
    std::map<std::tuple<std::string, std::uint64_t, int>, Row> rows;
    std::size_t duplicates = 0;
    for (const auto& f : files) {
        if (!fs::exists(f)) throw SchemaError("metrics file " + f + " not found");
        std::istringstream in(read_text_file(f));
        std::string line;
        if (!std::getline(in, line)) throw SchemaError(f + " is empty");
        auto cols = text::split(text::trim(line), ',');
        if (header.empty()) header = cols;
        else if (cols != header) throw SchemaError(f + ": columns differ from " + files.front());
        auto col = [&](const std::string& name) {
            auto it = std::find(cols.begin(), cols.end(), name);
            if (it == cols.end()) throw SchemaError(f + ": missing column " + name);
            return static_cast<std::size_t>(it - cols.begin());
        };
        const auto c_mode = col("mode"), c_seed = col("seed"), c_it = col("iteration"), c_succ = col("success_rate"),
                   c_rew = col("mean_reward");
        int lineno = 1;
        while (std::getline(in, line)) {
            ++lineno;
            if (text::trim(line).empty()) continue;
            auto v = text::split(text::trim(line), ',');
            if (v.size() != cols.size())
                throw SchemaError(f + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols.size()) + " fields");
            Row r;
            try {
                r = {v[c_mode], std::stoull(v[c_seed]), std::stoi(v[c_it]), std::stod(v[c_succ]), std::stod(v[c_rew])};
            } catch (const std::exception&) {
                throw SchemaError(f + ":" + std::to_string(lineno) + ": non-numeric field");
            }
            if (!rows.emplace(std::make_tuple(r.mode, r.seed, r.iteration), r).second) ++duplicates;
        }
    }

    auto mean_se = [](const std::vector<double>& xs) {
        double m = 0.0;
        for (double x : xs) m += x;
        m /= double(xs.size());
        double ss = 0.0;
        for (double x : xs) ss += (x - m) * (x - m);
        const double se = xs.size() > 1 ? std::sqrt(ss / double(xs.size() - 1)) / std::sqrt(double(xs.size())) : 0.0;
        return std::make_pair(m, se);
    };

    std::map<std::string, std::map<int, std::vector<const Row*>>> by_mode;
    std::map<std::string, std::map<std::uint64_t, const Row*>> last, first;
    for (const auto& [key, r] : rows) {
        by_mode[r.mode][r.iteration].push_back(&r);
        auto& l = last[r.mode][r.seed];
        if (!l || l->iteration < r.iteration) l = &r;
        auto& f0 = first[r.mode][r.seed];
        if (!f0 || f0->iteration > r.iteration) f0 = &r;
    }

    std::string curves = "mode,iteration,n_seeds,mean_success,se_success,mean_reward\n";
    Json series = Json::object();
    for (const auto& [mode, iters] : by_mode) {
        Json s = Json::array();
        for (const auto& [it, rs] : iters) {
            std::vector<double> succ, rew;
            for (const auto* r : rs) {
                succ.push_back(r->success);
                rew.push_back(r->reward);
            }
            auto [m, se] = mean_se(succ);
            const double mr = mean_se(rew).first;
            curves += mode + "," + std::to_string(it) + "," + std::to_string(rs.size()) + "," + fmt(m) + "," + fmt(se) +
                      "," + fmt(mr) + "\n";
            s.push_back({{"iteration", it}, {"n_seeds", rs.size()}, {"mean_success", m}, {"se_success", se}, {"mean_reward", mr}});
        }
        series[mode] = s;
    }

    std::string final_csv = "mode,n_seeds,initial_success,final_success,se_final\n";
    Json final_table = Json::array();
    for (const auto& [mode, seeds] : last) {
        std::vector<double> fin, ini;
        for (const auto& [seed, r] : seeds) fin.push_back(r->success);
        for (const auto& [seed, r] : first.at(mode)) ini.push_back(r->success);
        auto [m, se] = mean_se(fin);
        const double i0 = mean_se(ini).first;
        final_csv += mode + "," + std::to_string(seeds.size()) + "," + fmt(i0) + "," + fmt(m) + "," + fmt(se) + "\n";
        final_table.push_back({{"mode", mode}, {"n_seeds", seeds.size()}, {"initial_success", i0}, {"final_success", m}, {"se_final", se}});
    }

    Json report = {{"inputs", files.size()},
                   {"rows", rows.size()},
                   {"duplicates_dropped", duplicates},
                   {"series", series},
                   {"final", final_table}};
    fs::create_directories(out_dir);
    write_text_file((fs::path(out_dir) / "report_curves.csv").string(), curves);
    write_text_file((fs::path(out_dir) / "report_final.csv").string(), final_csv);
    write_json((fs::path(out_dir) / "report.json").string(), report);
    return report;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"owlsim: simulated GUI-agent rollouts, judgment, data pipeline and policy training"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    FlagSet flags;
    std::string judge_input;
    std::string pool_out;
    std::vector<std::string> report_inputs;
    bool sweep = false;

    auto* gen = app.add_subcommand("gen-queries", "sample tasks from the app graphs into pool.jsonl");
    auto* roll = app.add_subcommand("rollout", "run G judged episodes per task into trajectories.jsonl");
    auto* judge = app.add_subcommand("judge", "re-judge stored trajectories");
    auto* pipe = app.add_subcommand("pipeline", "self-evolving data pipeline");
    auto* pipe_run = pipe->add_subcommand("run", "run pipeline iterations");
    pipe->require_subcommand(1);
    auto* trn = app.add_subcommand("train", "train the toy policy");
    auto* eval = app.add_subcommand("eval", "success rate of a policy or role backends");
    auto* rep = app.add_subcommand("report", "merge metrics CSVs into plot-ready tables");

    for (auto* sub : {gen, roll, judge, pipe_run, trn, eval}) flags.attach(sub);
    gen->add_option("--out", pool_out, "pool file (default: <out-dir>/pool.jsonl)");
    judge->add_option("--input", judge_input, "trajectory JSONL (a rollout store works)");
    eval->add_flag("--sweep", sweep, "also sweep k_history x step budget");
    rep->add_option("--inputs", report_inputs, "metrics CSV files");
    std::string report_out = "out";
    rep->add_option("--out-dir", report_out, "output directory");

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        Json summary;
        if (rep->parsed()) {
            OutputLock lock(report_out);
            summary = cmd_report(report_inputs, report_out);
            summary = {{"rows", summary["rows"]}, {"duplicates_dropped", summary["duplicates_dropped"]}};
        } else {
            CLI::App* sub = nullptr;
            for (auto* s : {gen, roll, judge, pipe_run, trn, eval})
                if (s->parsed()) sub = s;
            auto cfg = resolve(flags, sub);
            validate(cfg, sub != gen);
            OutputLock lock(cfg.out_dir);
            write_json(out_path(cfg, "config.json"), to_json(cfg));
            if (sub == gen) summary = cmd_gen_queries(cfg, pool_out);
            else if (sub == roll) summary = cmd_rollout(cfg);
            else if (sub == judge) summary = cmd_judge(cfg, judge_input);
            else if (sub == pipe_run) summary = cmd_pipeline_run(cfg);
            else if (sub == trn) summary = cmd_train(cfg);
            else {
                auto apps = sim::make_registry(sim::load_app_dir(cfg.apps_dir));
                auto r = cmd_eval(cfg, load_pool(cfg, apps), sweep);
                write_json(out_path(cfg, "eval_report.json"), r.json);
                if (!r.scaling_csv.empty()) write_text_file(out_path(cfg, "scaling.csv"), r.scaling_csv);
                summary = {{"success_rate", r.json["success_rate"]}, {"mean_steps", r.json["mean_steps"]}};
            }
        }
        out << summary.dump() << "\n";
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace owlsim::cli
