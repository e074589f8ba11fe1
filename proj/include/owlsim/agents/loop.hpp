#pragma once

#include <string>
#include <utility>
#include <vector>

#include "owlsim/agents/policy.hpp"
#include "owlsim/agents/protocol.hpp"

namespace owlsim::agents {

/// Ordered key phrase -> snippet table standing in for retrieval.
using KnowledgeTable = std::vector<std::pair<std::string, std::string>>;

KnowledgeTable load_knowledge(const std::string& path);
/// Snippets whose key phrase occurs in the instruction (case-insensitive), in table order.
std::string retrieve_knowledge(std::string_view instruction, const KnowledgeTable& table);

struct LoopConfig {
    int t_max = 15;
    int n_inspect = 3;
    int stalemate_limit = 3;
    int backend_retries = 2;
    std::size_t max_pending = 64;
    bool record_roles = false;
    std::uint64_t seed = 0;
    const KnowledgeTable* knowledge = nullptr;
};

struct WorkerResult {
    ActionRecord record;
    bool feasible = true;
    bool malformed = false;
};

/// Role phases with their decoding rules. Manager and reflector failures raise BackendError after
/// retries; the worker degrades to Wait; the notetaker to no notes.
std::pair<std::vector<std::string>, std::vector<std::string>> manager_init(const RoleRequest& request,
                                                                           const RoleBackend& backend,
                                                                           int retries = 0);
std::pair<std::vector<std::string>, std::vector<std::string>> manager_update(const RoleRequest& request,
                                                                             const RoleBackend& backend,
                                                                             int retries = 0);
WorkerResult worker_act(const RoleRequest& request, const RoleBackend& backend);
ReflectionFeedback reflect(const RoleRequest& request, const RoleBackend& backend, int retries = 0);
Notes take_notes(const RoleRequest& request, const RoleBackend& backend);

/// Keeps CS a growing set and SS disjoint from it.
void sanitize_plan(std::vector<std::string>& pending, std::vector<std::string>& completed,
                   const std::vector<std::string>& proposed_pending, const std::vector<std::string>& proposed_completed,
                   std::size_t max_pending);

/// Manager/worker/reflector/notetaker loop. Never throws for backend misbehaviour.
Trajectory run_episode(const taskgen::TaskQuery& task, sim::Environment& env, const Backends& backends,
                       const LoopConfig& config);

/// Single-policy loop; only the last `k_history` history entries keep their observation.
Trajectory run_episode_e2e(const taskgen::TaskQuery& task, sim::Environment& env, const Policy& policy,
                           int k_history, int t_max, std::uint64_t seed);

/// Appends an entry and strips observations that fall outside the window.
void push_history(std::vector<HistoryEntry>& history, HistoryEntry entry, int k_history);

}  // namespace owlsim::agents
