#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "owlsim/agents/types.hpp"
#include "owlsim/taskgen/planner.hpp"

namespace owlsim::agents {

enum class Role { ManagerInit, ManagerUpdate, Worker, Reflector, Notetaker, Policy };

std::string_view to_string(Role r);
std::optional<Role> parse_role(std::string_view s);

/// Simulator ground truth handed to in-process oracle backends. Never serialized.
struct GroundTruth {
    const taskgen::TaskQuery* task = nullptr;
    const taskgen::Route* route = nullptr;
    const sim::Environment* env = nullptr;
    const sim::EnvState* before = nullptr;
    const sim::EnvState* after = nullptr;
};

struct RoleRequest {
    Role role = Role::Worker;
    std::string task_id;
    std::uint64_t episode_seed = 0;
    int t = 0;
    std::string instruction;
    std::optional<std::string> guidance;
    sim::Observation observation;
    std::optional<sim::Observation> observation_after;  // reflector
    std::vector<HistoryEntry> history;                   // end-to-end policy
    OrchestratorState state;
    std::optional<ActionRecord> action;          // reflector, manager_update
    std::optional<ReflectionFeedback> feedback;  // manager_update
    int n_inspect = 3;
    GroundTruth truth;
};

struct RoleResponse {
    std::optional<std::string> thought;
    std::optional<sim::Action> action;
    std::optional<std::string> summary;
    std::optional<std::string> subgoal;
    std::optional<bool> feasible;
    std::optional<std::vector<std::string>> subgoals;
    std::optional<std::vector<std::string>> completed;
    std::optional<Judgment> judgment;
    std::optional<std::string> feedback;
    std::optional<Notes> notes;
    std::optional<std::string> conclusion;
};

/// Wire body for POST /v1/role.
Json to_json(const RoleRequest& r);
Json to_json(const RoleResponse& r);
/// Throws MalformedOutput for anything that is not a response object with well-typed fields.
RoleResponse response_from_json(const Json& j);
RoleResponse parse_response_body(std::string_view body);

/// One implementation of any subset of roles. Implementations must be safe for concurrent calls.
class RoleBackend {
public:
    virtual ~RoleBackend() = default;
    /// Throws MalformedOutput when the emission cannot be decoded, BackendError on transport failure.
    virtual RoleResponse call(const RoleRequest& request) const = 0;
    virtual std::string describe() const = 0;
};

using BackendPtr = std::shared_ptr<const RoleBackend>;

struct Backends {
    BackendPtr manager;
    BackendPtr worker;
    BackendPtr reflector;
    BackendPtr notetaker;

    static Backends uniform(BackendPtr b) { return {b, b, b, b}; }
};

struct HttpResult {
    int status = 0;
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    /// Throws BackendError when no response arrives at all.
    virtual HttpResult post(const std::string& path, const std::string& body) const = 0;
};

/// HTTP transport to `url` ("http://host:port").
std::shared_ptr<const Transport> make_http_transport(const std::string& url, double timeout_s = 30.0);

/// Deterministic garbage generator standing in for a hostile remote service.
std::shared_ptr<const Transport> make_adversarial_transport(std::uint64_t seed);

class RemoteBackend final : public RoleBackend {
public:
    explicit RemoteBackend(std::shared_ptr<const Transport> transport, std::string label = "remote");
    RoleResponse call(const RoleRequest& request) const override;
    std::string describe() const override { return label_; }

private:
    std::shared_ptr<const Transport> transport_;
    std::string label_;
};

}  // namespace owlsim::agents
