#include "owlsim/pipeline/rollout.hpp"

#include <atomic>
#include <condition_variable>
#include <fstream>
#include <thread>

#include "owlsim/core/errors.hpp"

namespace owlsim::pipeline {

std::uint64_t episode_seed(std::uint64_t seed, int iteration, const std::string& task_id, int group_index) {
    return derive_seed(seed, {static_cast<std::uint64_t>(iteration), fnv1a(task_id), static_cast<std::uint64_t>(group_index)});
}

namespace {

JudgedTrajectory run_one(const taskgen::TaskQuery& task, sim::Environment& env, const RolloutConfig& cfg,
                         const judgment::Critic& critic, int g) {
    JudgedTrajectory out;
    out.group_index = g;
    const auto seed = episode_seed(cfg.seed, cfg.iteration, task.task_id, g);
    try {
        if (cfg.mode == agents::Mode::E2E) {
            if (!cfg.policy) throw ConfigError("end-to-end rollout needs a policy");
            out.traj = agents::run_episode_e2e(task, env, *cfg.policy, cfg.k_history, cfg.t_max, seed);
        } else {
            auto loop = cfg.loop;
            loop.t_max = cfg.t_max;
            loop.seed = seed;
            loop.record_roles = true;
            out.traj = agents::run_episode(task, env, cfg.backends, loop);
        }
    } catch (const std::exception& e) {
        out.traj = {};
        out.traj.task_id = task.task_id;
        out.traj.mode = cfg.mode;
        out.traj.instruction = task.instruction;
        out.traj.outcome = agents::Outcome::Failed;
        out.traj.error = std::string("worker: ") + e.what();
        out.traj.final_state = env.state();
    }
    out.traj.traj_id = task.task_id + "/k" + std::to_string(cfg.iteration) + "/g" + std::to_string(g);
    try {
        out.verdict = judgment::judge_trajectory(out.traj, task, env.apps(), critic, critic);
    } catch (const std::exception& e) {
        out.verdict.task_id = task.task_id;
        out.verdict.traj_id = out.traj.traj_id;
        out.verdict.error = std::string("judge: ") + e.what();
    }
    return out;
}

}  // namespace

RolloutBatch rollout(const std::vector<taskgen::TaskQuery>& tasks, const sim::AppRegistry& apps,
                     const RolloutConfig& cfg) {
    if (cfg.group_size < 1) throw ConfigError("group size must be at least 1");
    if (cfg.parallelism < 1) throw ConfigError("parallelism must be at least 1");
    const judgment::CriticPtr critic = cfg.critic ? cfg.critic : std::make_shared<judgment::OracleCritic>();
    const std::size_t G = static_cast<std::size_t>(cfg.group_size);
    const std::size_t total = tasks.size() * G;

    RolloutBatch batch;
    batch.iteration = cfg.iteration;
    batch.items.resize(total);
    std::vector<bool> done(total, false);
    std::unique_ptr<TrajectoryStore> store;
    if (!cfg.store_path.empty()) store = std::make_unique<TrajectoryStore>(cfg.store_path);

    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t flushed = 0;  // records are appended in index order as soon as their prefix is complete

    auto worker = [&] {
        sim::Environment env(apps);
        for (std::size_t i = next++; i < total; i = next++) {
            auto item = run_one(tasks[i / G], env, cfg, *critic, static_cast<int>(i % G));
            item.task_index = i / G;
            std::lock_guard lock(mu);
            batch.items[i] = std::move(item);
            done[i] = true;
            while (flushed < total && done[flushed]) {
                if (store) store->append(batch.items[flushed]);
                ++flushed;
            }
        }
    };
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.parallelism), std::max<std::size_t>(total, 1));
    std::vector<std::thread> pool;
    for (std::size_t k = 1; k < n_threads; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    for (std::size_t i = 0; i < total; ++i) batch.groups[tasks[i / G].task_id].push_back(i);
    return batch;
}

void TrajectoryStore::append(const JudgedTrajectory& item) {
    std::string chunk;
    for (const auto& row : agents::trajectory_to_jsonl(item.traj)) chunk += row.dump() + "\n";
    Json v = judgment::to_json(item.verdict);
    v["record"] = "verdict";
    chunk += v.dump() + "\n";
    std::lock_guard lock(mu_);
    std::ofstream f(path_, std::ios::app | std::ios::binary);
    if (!f) throw Error("cannot append to " + path_);
    f << chunk;  // one write per record keeps appends whole
    f.flush();
}

std::vector<JudgedTrajectory> read_store(const std::string& path) {
    std::vector<JudgedTrajectory> out;
    std::vector<Json> pending;
    try {
        for (auto& row : read_jsonl(path)) {
            if (row.value("record", "") == "verdict") {
                auto trajs = agents::trajectories_from_jsonl(pending);
                pending.clear();
                if (trajs.size() != 1) throw SchemaError("verdict line must follow exactly one trajectory");
                JudgedTrajectory item;
                item.traj = std::move(trajs.front());
                row.erase("record");
                item.verdict = judgment::verdict_from_json(row);
                out.push_back(std::move(item));
            } else {
                pending.push_back(std::move(row));
            }
        }
    } catch (const Json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    if (!pending.empty()) throw SchemaError(path + ": trailing trajectory without verdict");
    return out;
}

}  // namespace owlsim::pipeline
