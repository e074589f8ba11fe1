#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "owlsim/agents/loop.hpp"
#include "owlsim/judgment/judgment.hpp"

namespace owlsim::pipeline {

struct JudgedTrajectory {
    agents::Trajectory traj;
    judgment::TrajectoryVerdict verdict;
    std::size_t task_index = 0;
    int group_index = 0;

    bool correct() const { return verdict.consensus == judgment::Verdict::Correct; }
};

struct RolloutBatch {
    int iteration = 0;
    std::vector<JudgedTrajectory> items;
    std::map<std::string, std::vector<std::size_t>> groups;  // task_id -> indices into items
};

struct RolloutConfig {
    agents::Mode mode = agents::Mode::E2E;
    int group_size = 1;
    int parallelism = 1;
    std::uint64_t seed = 0;
    int iteration = 0;
    int t_max = 15;
    int k_history = 3;
    agents::PolicyPtr policy;      // end-to-end mode
    agents::Backends backends;     // role mode
    agents::LoopConfig loop;       // role mode; t_max and seed are overridden per episode
    judgment::CriticPtr critic;    // oracle when null
    std::string store_path;        // append-only JSONL store, skipped when empty
};

/// Seed of one episode; a pure function of the run seed, iteration, task and group slot.
std::uint64_t episode_seed(std::uint64_t seed, int iteration, const std::string& task_id, int group_index);

/// G judged episodes per task. Episodes run on a worker pool; results are ordered by (task, group index)
/// regardless of scheduling, and a failing episode is recorded on its trajectory instead of aborting the batch.
RolloutBatch rollout(const std::vector<taskgen::TaskQuery>& tasks, const sim::AppRegistry& apps,
                     const RolloutConfig& cfg);

/// Append-only JSONL file: trajectories as step/end lines followed by a verdict line.
class TrajectoryStore {
public:
    explicit TrajectoryStore(std::string path) : path_(std::move(path)) {}
    void append(const JudgedTrajectory& item);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::mutex mu_;
};

/// Reads a store back; verdict lines attach to the trajectory before them.
std::vector<JudgedTrajectory> read_store(const std::string& path);

}  // namespace owlsim::pipeline
