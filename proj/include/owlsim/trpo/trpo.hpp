#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "owlsim/agents/types.hpp"
#include "owlsim/core/rng.hpp"
#include "owlsim/taskgen/task.hpp"
#include "owlsim/trpo/policy.hpp"

namespace owlsim::trpo {

// ---- reward ---------------------------------------------------------------

struct RewardConfig {
    double format_penalty = -0.5;
    bool penalty_per_step = false;  // default: at most once per trajectory
};

/// Accuracy (1 on success) plus the format penalty for malformed actions.
double compute_reward(const agents::Trajectory& traj, bool success, const RewardConfig& cfg = {});

// ---- advantage ------------------------------------------------------------

/// Running reward statistics. Welford over everything seen, or an EMA when `ema_alpha` is set.
struct AdvantageStats {
    double mean = 0.0;
    double m2 = 0.0;  // Welford: sum of squared deviations; EMA: variance
    std::size_t count = 0;
    double eps_adv = 1e-4;
    std::optional<double> ema_alpha;

    double std() const;
    void absorb(double r);
};

/// (R - mean) / (std + eps) against the statistics before R is absorbed; then absorbs R.
double advantage(double reward, AdvantageStats& stats);

/// Group-relative advantages (group mean and population std).
std::vector<double> group_advantages(const std::vector<double>& rewards, double eps_adv);

// ---- replay ---------------------------------------------------------------

struct ScoredTrajectory {
    agents::Trajectory traj;
    bool success = false;
    double reward = 0.0;
    bool replayed = false;  // injected from the buffer; re-scored under theta_old
    bool operator==(const ScoredTrajectory& o) const;
};

/// Task-indexed store of successful trajectories with per-task FIFO eviction.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 4) : capacity_(capacity) {}

    /// Ignores failures.
    void add(const ScoredTrajectory& t);
    const std::deque<ScoredTrajectory>* find(const std::string& task_id) const;
    std::size_t size() const;
    std::size_t capacity() const { return capacity_; }
    const std::map<std::string, std::deque<ScoredTrajectory>>& entries() const { return store_; }

private:
    std::size_t capacity_;
    std::map<std::string, std::deque<ScoredTrajectory>> store_;
};

struct InjectResult {
    bool injected = false;
    bool buffer_miss = false;  // all failures but nothing buffered for the task
};

/// Replaces one member of an all-failure group with a buffered success for the same task, then
/// lets the buffer absorb the group's own successes.
InjectResult inject_replay(std::vector<ScoredTrajectory>& group, ReplayBuffer& buffer, Rng& rng);

// ---- loss -----------------------------------------------------------------

template <class T>
T clipped_term(const T& ratio, const T& adv, const T& eps_clip) {
    T lo = T(1) - eps_clip, hi = T(1) + eps_clip;
    T clipped = ratio < lo ? lo : (ratio > hi ? hi : ratio);
    T a = ratio * adv, b = clipped * adv;
    return a < b ? a : b;
}

/// Sum over one trajectory's step instances of clipped_term / S.
template <class T>
T segmented_sum(const std::vector<T>& ratios, const T& adv, const T& eps_clip) {
    T total(0);
    const T s(static_cast<long>(ratios.size()));
    for (const auto& r : ratios) total += clipped_term(r, adv, eps_clip) / s;
    return total;
}

/// The same quantity computed once for the whole trajectory.
template <class T>
T whole_trajectory_sum(const std::vector<T>& ratios, const T& adv, const T& eps_clip) {
    T total(0);
    for (const auto& r : ratios) total += clipped_term(r, adv, eps_clip);
    return total / T(static_cast<long>(ratios.size()));
}

struct StepInstance {
    std::vector<SparseVec> candidates;
    std::size_t taken = 0;
    double logp_old = 0.0;
    std::string traj_id;
    std::size_t steps_in_traj = 1;  // S_i
    double advantage = 0.0;
};

enum class Normalization { Instances, Trajectories };

struct LossResult {
    double loss = 0.0;
    std::vector<double> grad;
    std::size_t clipped = 0;
};

/// -(1/N) sum_i clipped_term(r_i, A_i, eps) / S_i with its exact gradient in theta.
/// N counts instances, or trajectories (sum of 1/S_i) when asked.
LossResult trpo_loss(const std::vector<StepInstance>& batch, const PolicyParams& params, double eps_clip,
                     Normalization norm = Normalization::Instances);

/// Splits a trajectory into step instances that all carry `adv`. Steps whose action is not among the
/// enumerated candidates are dropped. The old log-probability is the one recorded on the step when
/// `recorded_logp` is set and present, else it is computed under `old`.
std::vector<StepInstance> segment(const agents::Trajectory& traj, double adv, const FeatureMap& features,
                                  const PolicyParams& old, bool recorded_logp = true);

// ---- supervised fitting ---------------------------------------------------

struct SupervisedExample {
    std::string instruction;
    sim::Observation observation;
    std::size_t history_len = 0;
    sim::Action action;
    double weight = 1.0;
};

/// Weighted cross-entropy gradient steps; examples whose action is not a candidate are skipped.
/// Returns the number of examples used.
std::size_t fit_supervised(const std::vector<SupervisedExample>& data, const FeatureMap& features,
                           PolicyParams& params, double lr, int epochs);

}  // namespace owlsim::trpo
