#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "owlsim/agents/protocol.hpp"
#include "owlsim/core/rng.hpp"

namespace owlsim::agents {

/// Input of an end-to-end policy: instruction, compressed history, current observation.
struct PolicyContext {
    std::string instruction;
    std::optional<std::string> guidance;
    std::vector<HistoryEntry> history;
    sim::Observation observation;
    int t = 0;
    std::uint64_t episode_seed = 0;
    GroundTruth truth;  // consulted only by oracle-backed policies
};

struct PolicyOutput {
    std::string thought;
    sim::Action action;
    std::string conclusion;  // written before execution; the loop may refine it with the effect
    bool malformed = false;
    std::optional<double> log_prob;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual PolicyOutput act(const PolicyContext& ctx, Rng& rng) const = 0;
    virtual std::string describe() const = 0;
};

using PolicyPtr = std::shared_ptr<const Policy>;

/// Serves the worker role (and the policy role) from an end-to-end policy.
class PolicyBackend final : public RoleBackend {
public:
    explicit PolicyBackend(PolicyPtr policy) : policy_(std::move(policy)) {}
    RoleResponse call(const RoleRequest& request) const override;
    std::string describe() const override { return "learned(" + policy_->describe() + ")"; }

private:
    PolicyPtr policy_;
};

/// End-to-end policy served by a role backend under the "policy" role. Decoding failures become Wait.
class BackendPolicy final : public Policy {
public:
    explicit BackendPolicy(BackendPtr backend) : backend_(std::move(backend)) {}
    PolicyOutput act(const PolicyContext& ctx, Rng& rng) const override;
    std::string describe() const override { return backend_->describe(); }

private:
    BackendPtr backend_;
};

/// "oracle" | "noisy:<rho>" | "learned" | "remote:<url>" | "adversarial[:<seed>]".
BackendPtr make_backend(std::string_view spec, std::uint64_t seed, PolicyPtr learned = nullptr);

}  // namespace owlsim::agents
