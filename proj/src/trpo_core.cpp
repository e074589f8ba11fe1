#include "owlsim/trpo/trpo.hpp"

#include "owlsim/core/errors.hpp"

namespace owlsim::trpo {

double compute_reward(const agents::Trajectory& traj, bool success, const RewardConfig& cfg) {
    const double accuracy = success ? 1.0 : 0.0;
    const auto malformed = traj.malformed_steps();
    if (malformed == 0) return accuracy;
    return accuracy + (cfg.penalty_per_step ? cfg.format_penalty * static_cast<double>(malformed) : cfg.format_penalty);
}

double AdvantageStats::std() const {
    if (count == 0) return 0.0;
    return ema_alpha ? std::sqrt(m2) : std::sqrt(m2 / static_cast<double>(count));
}

void AdvantageStats::absorb(double r) {
    ++count;
    if (ema_alpha) {
        if (count == 1) {
            mean = r;
            m2 = 0.0;
            return;
        }
        const double a = *ema_alpha, d = r - mean;
        mean += a * d;
        m2 = (1.0 - a) * (m2 + a * d * d);
        return;
    }
    const double d = r - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (r - mean);
}

double advantage(double reward, AdvantageStats& stats) {
    const double a = (reward - stats.mean) / (stats.std() + stats.eps_adv);
    stats.absorb(reward);
    return a;
}

std::vector<double> group_advantages(const std::vector<double>& rewards, double eps_adv) {
    AdvantageStats s;
    for (double r : rewards) s.absorb(r);
    std::vector<double> out;
    out.reserve(rewards.size());
    for (double r : rewards) out.push_back((r - s.mean) / (s.std() + eps_adv));
    return out;
}

bool ScoredTrajectory::operator==(const ScoredTrajectory& o) const {
    if (success != o.success || reward != o.reward || replayed != o.replayed) return false;
    auto a = agents::trajectory_to_jsonl(traj), b = agents::trajectory_to_jsonl(o.traj);
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(),
                                              [](const Json& x, const Json& y) { return x.dump() == y.dump(); });
}

void ReplayBuffer::add(const ScoredTrajectory& t) {
    if (!t.success || capacity_ == 0) return;
    auto& q = store_[t.traj.task_id];
    q.push_back(t);
    while (q.size() > capacity_) q.pop_front();
}

const std::deque<ScoredTrajectory>* ReplayBuffer::find(const std::string& task_id) const {
    auto it = store_.find(task_id);
    return it == store_.end() || it->second.empty() ? nullptr : &it->second;
}

std::size_t ReplayBuffer::size() const {
    std::size_t n = 0;
    for (const auto& [k, q] : store_) n += q.size();
    return n;
}

InjectResult inject_replay(std::vector<ScoredTrajectory>& group, ReplayBuffer& buffer, Rng& rng) {
    InjectResult res;
    if (group.empty()) return res;
    const bool all_failed = std::none_of(group.begin(), group.end(), [](const auto& t) { return t.success; });
    if (!all_failed) {
        for (const auto& t : group) buffer.add(t);
        return res;
    }
    const auto* stored = buffer.find(group.front().traj.task_id);
    if (!stored) {
        res.buffer_miss = true;
        return res;
    }
    const auto slot = rng.index(group.size());
    group[slot] = (*stored)[rng.index(stored->size())];
    group[slot].replayed = true;
    res.injected = true;
    return res;
}

namespace {

// log pi(taken) and the softmax probabilities.
double log_prob(const PolicyParams& p, const std::vector<SparseVec>& cands, std::size_t taken, std::vector<double>& probs) {
    probs = action_probs(p, cands);
    return std::log(probs[taken]);
}

}  // namespace

LossResult trpo_loss(const std::vector<StepInstance>& batch, const PolicyParams& params, double eps_clip,
                     Normalization norm) {
    if (batch.empty()) throw DegenerateBatchError("empty batch");
    double n = 0.0;
    for (const auto& inst : batch) {
        if (inst.steps_in_traj == 0) throw DegenerateBatchError("step instance with S = 0");
        n += norm == Normalization::Instances ? 1.0 : 1.0 / static_cast<double>(inst.steps_in_traj);
    }
    LossResult res;
    res.grad.assign(params.theta.size(), 0.0);
    std::vector<double> probs;
    for (const auto& inst : batch) {
        const double lp = log_prob(params, inst.candidates, inst.taken, probs);
        const double r = std::exp(lp - inst.logp_old);
        const double scale = 1.0 / static_cast<double>(inst.steps_in_traj);
        const double term = clipped_term(r, inst.advantage, eps_clip);
        res.loss -= scale * term / n;
        const double lo = 1.0 - eps_clip, hi = 1.0 + eps_clip;
        const double c = std::clamp(r, lo, hi);
        if (r * inst.advantage > c * inst.advantage) {  // the clipped branch is active and flat in theta
            ++res.clipped;
            continue;
        }
        // d/dtheta of r*A = A r (phi_a - E[phi]) / T
        const double k = -scale * inst.advantage * r / (n * params.temperature);
        for (const auto& [i, v] : inst.candidates[inst.taken]) res.grad[i] += k * v;
        for (std::size_t b = 0; b < inst.candidates.size(); ++b)
            for (const auto& [i, v] : inst.candidates[b]) res.grad[i] -= k * probs[b] * v;
    }
    return res;
}

std::vector<StepInstance> segment(const agents::Trajectory& traj, double adv, const FeatureMap& features,
                                  const PolicyParams& old, bool recorded_logp) {
    std::vector<StepInstance> out;
    const std::size_t S = traj.steps.size();
    for (std::size_t t = 0; t < S; ++t) {
        const auto& step = traj.steps[t];
        auto cands = features.candidates(traj.instruction, step.obs_before, t);
        const auto idx = find_candidate(cands, step.action.action);
        if (idx >= cands.size()) continue;
        StepInstance inst;
        for (auto& c : cands) inst.candidates.push_back(std::move(c.phi));
        inst.taken = idx;
        if (recorded_logp && step.log_prob) {
            inst.logp_old = *step.log_prob;
        } else {
            std::vector<double> probs;
            inst.logp_old = log_prob(old, inst.candidates, idx, probs);
        }
        inst.traj_id = traj.traj_id;
        inst.steps_in_traj = S;
        inst.advantage = adv;
        out.push_back(std::move(inst));
    }
    return out;
}

std::size_t fit_supervised(const std::vector<SupervisedExample>& data, const FeatureMap& features, PolicyParams& params,
                           double lr, int epochs) {
    std::size_t used = 0;
    for (int e = 0; e < epochs; ++e) {
        used = 0;
        for (const auto& ex : data) {
            auto cands = features.candidates(ex.instruction, ex.observation, ex.history_len);
            const auto idx = find_candidate(cands, ex.action);
            if (idx >= cands.size()) continue;
            ++used;
            const auto probs = action_probs(params, cands);
            const double k = lr * ex.weight / params.temperature;
            for (const auto& [i, v] : cands[idx].phi) params.theta[i] += k * v;
            for (std::size_t b = 0; b < cands.size(); ++b)
                for (const auto& [i, v] : cands[b].phi) params.theta[i] -= k * probs[b] * v;
        }
    }
    return used;
}

}  // namespace owlsim::trpo
