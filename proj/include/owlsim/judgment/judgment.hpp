#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "owlsim/agents/protocol.hpp"
#include "owlsim/agents/types.hpp"
#include "owlsim/taskgen/planner.hpp"

namespace owlsim::judgment {

enum class StepLabel { Good, Neutral, Harmful };
enum class Verdict { Correct, Incorrect };
enum class Channel { Text, Multimodal };

std::string_view to_string(StepLabel l);
std::optional<StepLabel> parse_label(std::string_view s);
std::string_view to_string(Verdict v);
std::optional<Verdict> parse_verdict(std::string_view s);

inline constexpr std::size_t kMaxSummaryWords = 30;

struct StepCriticOutput {
    std::string analysis;
    std::string summary;  // at most kMaxSummaryWords words
    StepLabel label = StepLabel::Neutral;
};

struct TrajectoryVerdict {
    std::string task_id;
    std::string traj_id;
    Verdict text_channel = Verdict::Incorrect;
    Verdict multimodal_channel = Verdict::Incorrect;
    Verdict consensus = Verdict::Incorrect;
    std::vector<StepLabel> step_labels;
    std::string error;
};

Verdict consensus(Verdict text, Verdict multimodal);

/// GOOD 1.0, NEUTRAL 0.5, HARMFUL 0.0.
double critic_score(StepLabel label);
inline double critic_score(const StepCriticOutput& out) { return critic_score(out.label); }

/// What a critic sees: the task, its solution route and the simulator it ran on.
struct JudgeContext {
    const taskgen::TaskQuery& task;
    const sim::Environment& env;
    const taskgen::Route& route;
};

struct ChannelInput {
    const agents::Trajectory& traj;
    const std::vector<StepCriticOutput>& steps;
};

class Critic {
public:
    virtual ~Critic() = default;
    virtual StepCriticOutput judge_step(const JudgeContext& ctx, const agents::StepRecord& step) const = 0;
    virtual Verdict judge_channel(Channel channel, const JudgeContext& ctx, const ChannelInput& input) const = 0;
    /// Turns filtered effect lines into guidance text.
    virtual std::string summarize(const JudgeContext& ctx, const std::vector<std::string>& lines) const = 0;
    virtual std::string describe() const = 0;
};

using CriticPtr = std::shared_ptr<const Critic>;

/// Deterministic critic over simulator ground truth.
class OracleCritic final : public Critic {
public:
    StepCriticOutput judge_step(const JudgeContext& ctx, const agents::StepRecord& step) const override;
    Verdict judge_channel(Channel channel, const JudgeContext& ctx, const ChannelInput& input) const override;
    std::string summarize(const JudgeContext& ctx, const std::vector<std::string>& lines) const override;
    std::string describe() const override { return "oracle"; }
};

/// Critic served over POST /v1/critic; responses are schema-checked and violations raise BackendError.
class RemoteCritic final : public Critic {
public:
    explicit RemoteCritic(std::shared_ptr<const agents::Transport> transport) : transport_(std::move(transport)) {}
    StepCriticOutput judge_step(const JudgeContext& ctx, const agents::StepRecord& step) const override;
    Verdict judge_channel(Channel channel, const JudgeContext& ctx, const ChannelInput& input) const override;
    std::string summarize(const JudgeContext& ctx, const std::vector<std::string>& lines) const override;
    std::string describe() const override { return "remote"; }

private:
    Json post(const Json& body) const;
    std::shared_ptr<const agents::Transport> transport_;
};

/// "oracle" | "remote:<url>" | "adversarial[:<seed>]".
CriticPtr make_critic(std::string_view spec, std::uint64_t seed = 0);

/// Whether `screen` of the route's app still lies on some path that can satisfy the remaining goal.
bool on_goal_path(const sim::AppRegistry& apps, const taskgen::TaskQuery& task, const sim::EnvState& s);

StepCriticOutput step_critic(const JudgeContext& ctx, const agents::StepRecord& step, const Critic& critic);

/// Labels every step, then asks both channels. Any critic failure yields Incorrect with the error noted.
TrajectoryVerdict judge_trajectory(const agents::Trajectory& traj, const taskgen::TaskQuery& task,
                                   const sim::AppRegistry& apps, const Critic& text_critic, const Critic& mm_critic);

/// Steps worth keeping as guidance: reflector-approved, effect consistent with intent, not a scroll or wait.
std::vector<std::string> guidance_lines(const agents::Trajectory& traj);

/// Numbered list of the essential steps; throws EmptyGuidanceError when nothing survives filtering.
std::string generate_guidance(const agents::Trajectory& ref, const taskgen::TaskQuery& task,
                              const sim::AppRegistry& apps, const Critic& critic);

Json to_json(const TrajectoryVerdict& v);
TrajectoryVerdict verdict_from_json(const Json& j);

}  // namespace owlsim::judgment
