#pragma once

#include "owlsim/agents/protocol.hpp"

namespace owlsim::agents {

/// Deterministic role implementation that reads the simulator ground truth.
class OracleBackend final : public RoleBackend {
public:
    RoleResponse call(const RoleRequest& request) const override;
    std::string describe() const override { return "oracle"; }
};

/// Oracle whose worker errs with probability rho: wrong widget, malformed emission or premature Terminate.
class NoisyOracleBackend final : public RoleBackend {
public:
    NoisyOracleBackend(double rho, std::uint64_t seed);
    RoleResponse call(const RoleRequest& request) const override;
    std::string describe() const override;

private:
    double rho_;
    std::uint64_t seed_;
    OracleBackend oracle_;
};

/// Oracle worker decision: first feasible action among the top `n_inspect` subgoals.
struct WorkerDecision {
    ActionRecord record;
    bool feasible = false;
};
WorkerDecision oracle_worker(const RoleRequest& request);

std::pair<std::vector<std::string>, std::vector<std::string>> oracle_manager_init(const RoleRequest& request);
std::pair<std::vector<std::string>, std::vector<std::string>> oracle_manager_update(const RoleRequest& request);
ReflectionFeedback oracle_reflect(const RoleRequest& request);

}  // namespace owlsim::agents
