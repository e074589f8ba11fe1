#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "owlsim/pipeline/rollout.hpp"
#include "owlsim/trpo/train.hpp"

namespace owlsim::pipeline {

enum class Polarity { Positive, Negative };

struct TrainingSample {
    std::string task_id;
    std::string traj_id;
    int t = 0;
    Json context;  // {instruction, history, history_len, observation[, observation_after]}
    std::string reasoning;
    sim::Action target_action;
    std::optional<std::string> role;
    double weight = 1.0;
    std::optional<Polarity> polarity;
    std::string source;  // hint | hint_fallback | distill | reflector
    std::optional<std::string> hint_style;
};

Json to_json(const TrainingSample& s);
TrainingSample sample_from_json(const Json& j);
void write_dataset(const std::string& path, const std::vector<TrainingSample>& samples);
std::vector<TrainingSample> read_dataset(const std::string& path);

/// Context of step t: instruction, the conclusions of earlier steps and the observation before the step.
Json step_context(const agents::Trajectory& traj, std::size_t t);

// ---- hint-guided rejection sampling ---------------------------------------

struct ReasoningRequest {
    std::string instruction;
    std::vector<std::string> history;
    sim::Observation observation;
    std::string hint_style;
    std::optional<sim::Action> hint_action;  // set only on the fallback attempt
    const sim::Action* truth = nullptr;       // consulted only by oracle generators
    std::uint64_t seed = 0;
    int attempt = 0;
};

class ReasoningGenerator {
public:
    virtual ~ReasoningGenerator() = default;
    virtual std::string generate(const ReasoningRequest& req) const = 0;
    virtual std::string describe() const = 0;
};

/// Reads only the reasoning text, never the context.
class ActionPredictor {
public:
    virtual ~ActionPredictor() = default;
    virtual std::optional<sim::Action> predict(const std::string& reasoning) const = 0;
    virtual std::string describe() const = 0;
};

/// Templated reasoning that ends with the intent clause of the true (or hinted) action.
class OracleGenerator final : public ReasoningGenerator {
public:
    std::string generate(const ReasoningRequest& req) const override;
    std::string describe() const override { return "oracle"; }
};

/// Oracle generator whose reasoning, unless a hint is given, commits to a wrong action with probability rho.
class NoisyGenerator final : public ReasoningGenerator {
public:
    explicit NoisyGenerator(double rho);
    std::string generate(const ReasoningRequest& req) const override;
    std::string describe() const override { return "noisy:" + std::to_string(rho_); }

private:
    double rho_;
};

/// Inverts the intent clause.
class IntentPredictor final : public ActionPredictor {
public:
    std::optional<sim::Action> predict(const std::string& reasoning) const override;
    std::string describe() const override { return "intent"; }
};

/// "oracle" | "noisy:<rho>".
std::shared_ptr<const ReasoningGenerator> make_generator(std::string_view spec);

inline const std::vector<std::string> kDefaultHintStyles{"concise", "deliberate"};

struct SamplingStats {
    std::size_t attempted = 0;  // (step, style) pairs
    std::size_t accepted = 0;
    std::size_t fallback = 0;   // accepted on the hinted attempt
    std::size_t rejected = 0;
    std::size_t generations = 0;

    double acceptance_rate() const { return attempted ? double(accepted + fallback) / double(attempted) : 0.0; }
    SamplingStats& operator+=(const SamplingStats& o);
};

/// Per step and hint style: generate reasoning, keep it when the predictor recovers the exact action.
/// After `max_tries` misses the true action goes into the hint for one last attempt, which needs only
/// the action type to agree. Returns nothing for trajectories not judged Correct.
std::vector<TrainingSample> hint_guided_rejection_sampling(const JudgedTrajectory& item,
                                                           const std::vector<std::string>& hint_styles,
                                                           const ReasoningGenerator& generator,
                                                           const ActionPredictor& predictor, int max_tries,
                                                           std::uint64_t seed, SamplingStats* stats = nullptr);

// ---- role distillation ------------------------------------------------------

/// (subgoal, worker thought, prior reflection or empty) -> one reasoning text.
using Merger = std::function<std::string(const std::string&, const std::string&, const std::string&)>;
std::string template_merge(const std::string& subgoal, const std::string& thought, const std::string& reflection);

/// One sample per step of a Correct role-mode trajectory. Throws MissingRoleRecordError when a step lacks
/// its worker, reflector or manager record.
std::vector<TrainingSample> distill_roles(const JudgedTrajectory& item, const Merger& merger = template_merge);

// ---- filters ------------------------------------------------------------------

/// The intent the reasoning declares matches the action's type and target widget. Reasoning without a
/// parseable intent clause must mention the action type and the widget's id or label.
bool thought_action_consistent(const TrainingSample& sample);

/// Samples whose step score is at least tau_c, in order.
std::vector<TrainingSample> critic_filter(const std::vector<TrainingSample>& samples,
                                          const std::vector<double>& step_scores, double tau_c);

struct TaskStats {
    std::string task_id;
    int attempts = 0;
    int successes = 0;
    double p_succ() const { return attempts ? double(successes) / double(attempts) : 0.0; }
};

/// weight ~ (1 - p_succ + delta), normalized to mean 1.
std::map<std::string, double> reweight_tasks(const std::vector<TaskStats>& stats, double delta = 0.1);

/// Negatives: FAILURE steps followed by a SUCCESS step. Positives: every step of all-SUCCESS trajectories.
/// The larger class is subsampled to the size of the smaller. Throws EmptyClassError if either is empty.
std::vector<TrainingSample> balance_reflector(const std::vector<agents::Trajectory>& trajectories, std::uint64_t seed);

// ---- the online loop ----------------------------------------------------------

enum class RolloutModes { E2E, Role, Both };
std::optional<RolloutModes> parse_rollout_modes(std::string_view s);

struct IterateConfig {
    RolloutModes modes = RolloutModes::Both;
    int group_size = 4;
    int parallelism = 1;
    std::uint64_t seed = 0;
    int t_max = 15;
    int k_history = 3;
    double tau_c = 0.75;
    double delta = 0.1;
    int max_tries = 4;
    std::vector<std::string> hint_styles = kDefaultHintStyles;
    std::string generator = "oracle";
    std::string manager_backend = "oracle";     // role mode; the worker is the learned policy
    std::string reflector_backend = "oracle";
    std::string notetaker_backend = "oracle";
    double lr = 0.5;
    int epochs = 2;
    std::string store_path;  // optional append-only trajectory store
};

struct IterationResult {
    int iteration = 0;
    std::vector<TrainingSample> dataset;
    trpo::PolicyParams params;
    std::vector<TaskStats> task_stats;
    std::map<std::string, double> weights;
    Json summary;  // acceptance rates, sizes, warnings
    std::vector<std::string> warnings;
};

/// rollout -> judge -> hint-guided sampling and role distillation -> consistency -> critic filter
/// -> task reweighting -> reflector balancing -> supervised update of the toy policy.
IterationResult iterate(const std::vector<taskgen::TaskQuery>& pool, const sim::AppRegistry& apps,
                        std::shared_ptr<const trpo::FeatureMap> features, const trpo::PolicyParams& params,
                        int iteration, const IterateConfig& cfg);

std::string task_stats_csv_header();
std::string task_stats_csv_rows(const IterationResult& r);

}  // namespace owlsim::pipeline
