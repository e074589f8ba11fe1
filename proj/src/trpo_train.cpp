#include "owlsim/trpo/train.hpp"

#include <cstdio>
#include <set>

#include "owlsim/core/errors.hpp"
#include "owlsim/pipeline/rollout.hpp"

namespace owlsim::trpo {

namespace {

constexpr std::string_view kModeNames[] = {"trpo_full", "online_filter", "offline_filter"};

struct Group {
    std::string task_id;
    std::vector<ScoredTrajectory> members;
};

bool zero_variance(const Group& g) {
    for (const auto& m : g.members)
        if (m.reward != g.members.front().reward) return false;
    return true;
}

std::vector<Group> score_groups(const pipeline::RolloutBatch& batch, const RewardConfig& rc) {
    std::vector<Group> out;
    std::map<std::string, std::size_t> slot;
    for (const auto& item : batch.items) {
        auto [it, fresh] = slot.emplace(item.traj.task_id, out.size());
        if (fresh) out.push_back({item.traj.task_id, {}});
        ScoredTrajectory s{item.traj, item.correct(), 0.0};
        s.reward = compute_reward(item.traj, s.success, rc);
        out[it->second].members.push_back(std::move(s));
    }
    return out;
}

pipeline::RolloutBatch run_pass(const std::vector<taskgen::TaskQuery>& tasks, const sim::AppRegistry& apps,
                                const agents::PolicyPtr& policy, const TrainConfig& cfg, int group_size, int tag) {
    pipeline::RolloutConfig rc;
    rc.mode = agents::Mode::E2E;
    rc.group_size = group_size;
    rc.parallelism = cfg.parallelism;
    rc.seed = cfg.seed;
    rc.iteration = tag;
    rc.t_max = cfg.t_max;
    rc.k_history = cfg.k_history;
    rc.policy = policy;
    return pipeline::rollout(tasks, apps, rc);
}

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

std::string_view to_string(TrainMode m) { return kModeNames[static_cast<int>(m)]; }

std::optional<TrainMode> parse_train_mode(std::string_view s) {
    for (int i = 0; i < 3; ++i)
        if (kModeNames[i] == s) return static_cast<TrainMode>(i);
    return std::nullopt;
}

TrainResult train(const std::vector<taskgen::TaskQuery>& pool, const sim::AppRegistry& apps,
                  std::shared_ptr<const FeatureMap> features, PolicyParams init, const TrainConfig& cfg) {
    if (cfg.group_size < 2) throw ConfigError("group size must be at least 2");
    if (cfg.iters < 0) throw ConfigError("iterations must be non-negative");
    if (!(cfg.eps_clip > 0.0) || !(cfg.eps_adv > 0.0)) throw ConfigError("eps_clip and eps_adv must be positive");
    if (init.theta.size() != features->dim()) throw ConfigError("parameter dimension does not match the feature map");

    TrainResult res;
    res.params = std::move(init);
    const bool full = cfg.mode == TrainMode::TrpoFull;
    const bool replay_on = full && cfg.use_replay;
    const bool leftovers_on = full && cfg.use_leftovers;
    const int passes = 1 + std::max(cfg.refill_rounds, 0);

    ReplayBuffer buffer(cfg.replay_capacity);
    AdvantageStats stats;
    stats.eps_adv = cfg.eps_adv;
    stats.ema_alpha = cfg.ema_alpha;
    Rng rng(derive_seed(cfg.seed, {fnv1a("replay")}));

    std::set<std::string> active;
    for (const auto& t : pool) active.insert(t.task_id);
    if (cfg.mode == TrainMode::OfflineFilter) {
        // Probe once with the initial policy; tasks that always or never succeed carry no signal.
        auto policy = std::make_shared<LinearPolicy>(features, res.params);
        const int probes = cfg.probe_rollouts > 0 ? cfg.probe_rollouts : cfg.group_size;
        for (const auto& g : score_groups(run_pass(pool, apps, policy, cfg, probes, -1), cfg.reward)) {
            if (zero_variance(g)) {
                active.erase(g.task_id);
                res.pruned_tasks.push_back(g.task_id);
            }
        }
    }

    std::vector<Group> leftovers;
    for (int k = 0; k < cfg.iters; ++k) {
        IterationMetrics m;
        m.iteration = k;
        m.mode = cfg.mode;
        m.seed = cfg.seed;
        auto policy = std::make_shared<LinearPolicy>(features, res.params);

        auto groups = score_groups(run_pass(pool, apps, policy, cfg, cfg.group_size, k * passes), cfg.reward);
        std::size_t n = 0, wins = 0;
        double reward_sum = 0.0;
        for (const auto& g : groups)
            for (const auto& s : g.members) {
                ++n;
                wins += s.success;
                reward_sum += s.reward;
            }
        m.success_rate = n ? static_cast<double>(wins) / static_cast<double>(n) : 0.0;
        m.mean_reward = n ? reward_sum / static_cast<double>(n) : 0.0;

        std::vector<Group> batch;
        if (cfg.mode == TrainMode::OfflineFilter) {
            for (auto& g : groups)
                if (active.count(g.task_id)) batch.push_back(std::move(g));
        } else {
            const std::size_t capacity = cfg.batch_capacity > 0 ? cfg.batch_capacity : pool.size();
            std::vector<Group> next_leftovers;
            if (leftovers_on)
                for (auto& g : leftovers) (batch.size() < capacity ? batch : next_leftovers).push_back(std::move(g));
            // Leftovers are at most one iteration stale; anything deferred twice is discarded.
            next_leftovers.clear();
            for (int pass = 0;; ++pass) {
                std::vector<std::string> dropped;
                // Which groups make the cut when the batch overflows must not depend on pool order.
                Rng order(derive_seed(cfg.seed, {fnv1a("order"), static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(pass)}));
                order.shuffle(groups);
                for (auto& g : groups) {
                    if (replay_on) {
                        auto r = inject_replay(g.members, buffer, rng);
                        m.replay_injections += r.injected;
                    }
                    if (zero_variance(g)) {
                        ++m.dropped_groups;
                        dropped.push_back(g.task_id);
                    } else if (batch.size() < capacity) {
                        batch.push_back(std::move(g));
                    } else if (leftovers_on) {
                        next_leftovers.push_back(std::move(g));
                    }
                }
                if (pass + 1 >= passes || batch.size() >= capacity || dropped.empty()) break;
                std::vector<taskgen::TaskQuery> refill;
                for (const auto& t : pool)
                    if (std::find(dropped.begin(), dropped.end(), t.task_id) != dropped.end()) refill.push_back(t);
                groups = score_groups(run_pass(refill, apps, policy, cfg, cfg.group_size, k * passes + pass + 1), cfg.reward);
            }
            leftovers = std::move(next_leftovers);
        }
        m.batch_groups = batch.size();
        m.leftover_groups = leftovers.size();

        if (stats.count == 0 && cfg.mode != TrainMode::OfflineFilter && cfg.warm_start_stats) {
            // Empty statistics would give the first success an advantage near 1/eps.
            for (const auto& g : batch)
                for (const auto& s : g.members) stats.absorb(s.reward);
        }
        std::vector<StepInstance> instances;
        for (const auto& g : batch) {
            std::vector<double> adv;
            if (cfg.mode == TrainMode::OfflineFilter) {
                std::vector<double> rewards;
                for (const auto& s : g.members) rewards.push_back(s.reward);
                adv = group_advantages(rewards, cfg.eps_adv);
            } else {
                for (const auto& s : g.members) adv.push_back(advantage(s.reward, stats));
            }
            for (std::size_t i = 0; i < g.members.size(); ++i) {
                auto part = segment(g.members[i].traj, adv[i], *features, res.params, !g.members[i].replayed);
                std::move(part.begin(), part.end(), std::back_inserter(instances));
            }
        }
        if (!instances.empty()) {
            for (int u = 0; u < cfg.updates_per_batch; ++u) {
                auto loss = trpo_loss(instances, res.params, cfg.eps_clip, cfg.normalization);
                if (u == 0) m.grad_norm = norm2(loss.grad);
                for (std::size_t i = 0; i < loss.grad.size(); ++i) res.params.theta[i] -= cfg.lr * loss.grad[i];
            }
        }
        res.metrics.push_back(m);
    }
    return res;
}

double evaluate_success(const std::vector<taskgen::TaskQuery>& pool, const sim::AppRegistry& apps,
                        std::shared_ptr<const FeatureMap> features, const PolicyParams& params, int t_max, int k_history,
                        std::uint64_t seed, int repeats, int parallelism) {
    pipeline::RolloutConfig rc;
    rc.group_size = repeats;
    rc.parallelism = parallelism;
    rc.seed = seed;
    rc.t_max = t_max;
    rc.k_history = k_history;
    rc.policy = std::make_shared<LinearPolicy>(std::move(features), params);
    auto batch = pipeline::rollout(pool, apps, rc);
    if (batch.items.empty()) return 0.0;
    std::size_t wins = 0;
    for (const auto& item : batch.items) wins += item.correct();
    return static_cast<double>(wins) / static_cast<double>(batch.items.size());
}

std::string metrics_csv_header() {
    return "iteration,mode,success_rate,mean_reward,dropped_groups,replay_injections,grad_norm,seed";
}

std::string metrics_csv_row(const IterationMetrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%s,%.6f,%.6f,%d,%d,%.9g,%llu", m.iteration, std::string(to_string(m.mode)).c_str(),
                  m.success_rate, m.mean_reward, m.dropped_groups, m.replay_injections, m.grad_norm,
                  static_cast<unsigned long long>(m.seed));
    return buf;
}

void write_metrics_csv(const std::string& path, const std::vector<IterationMetrics>& metrics) {
    std::string out = metrics_csv_header() + "\n";
    for (const auto& m : metrics) out += metrics_csv_row(m) + "\n";
    write_text_file(path, out);
}

}  // namespace owlsim::trpo
