#pragma once

#include <optional>
#include <string>
#include <vector>

#include "owlsim/trpo/trpo.hpp"

namespace owlsim::trpo {

enum class TrainMode { TrpoFull, OnlineFilter, OfflineFilter };

std::string_view to_string(TrainMode m);
std::optional<TrainMode> parse_train_mode(std::string_view s);

struct TrainConfig {
    TrainMode mode = TrainMode::TrpoFull;
    int group_size = 8;
    double eps_clip = 0.2;
    double eps_adv = 1e-4;
    std::optional<double> ema_alpha;
    bool warm_start_stats = true;  // seed the running statistics with the first batch
    double lr = 1.0;
    int updates_per_batch = 2;  // gradient steps against one theta_old snapshot
    int iters = 20;
    int t_max = 15;
    int k_history = 3;
    std::uint64_t seed = 0;
    int parallelism = 1;
    std::size_t replay_capacity = 4;
    bool use_replay = true;      // trpo_full only
    bool use_leftovers = true;   // trpo_full only
    int refill_rounds = 1;       // extra rollout passes to refill dropped groups
    std::size_t batch_capacity = 0;  // groups per update; the pool size when 0
    int probe_rollouts = 0;      // offline pruning probes per task; group_size when 0
    RewardConfig reward;
    Normalization normalization = Normalization::Instances;
};

struct IterationMetrics {
    int iteration = 0;
    TrainMode mode = TrainMode::TrpoFull;
    double success_rate = 0.0;  // fresh first-pass rollouts over the whole pool
    double mean_reward = 0.0;
    int dropped_groups = 0;
    int replay_injections = 0;
    double grad_norm = 0.0;
    std::uint64_t seed = 0;
    std::size_t batch_groups = 0;
    std::size_t leftover_groups = 0;
};

struct TrainResult {
    PolicyParams params;
    std::vector<IterationMetrics> metrics;
    std::vector<std::string> pruned_tasks;  // offline filtering
};

/// Runs `iters` batches of rollout, scoring, filtering and clipped policy-gradient updates.
TrainResult train(const std::vector<taskgen::TaskQuery>& pool, const sim::AppRegistry& apps,
                  std::shared_ptr<const FeatureMap> features, PolicyParams init, const TrainConfig& cfg);

/// Fraction of judged-Correct episodes of `params` over the pool (one end-to-end episode per task and repeat).
double evaluate_success(const std::vector<taskgen::TaskQuery>& pool, const sim::AppRegistry& apps,
                        std::shared_ptr<const FeatureMap> features, const PolicyParams& params, int t_max,
                        int k_history, std::uint64_t seed, int repeats = 1, int parallelism = 1);

std::string metrics_csv_header();
std::string metrics_csv_row(const IterationMetrics& m);
void write_metrics_csv(const std::string& path, const std::vector<IterationMetrics>& metrics);

}  // namespace owlsim::trpo
