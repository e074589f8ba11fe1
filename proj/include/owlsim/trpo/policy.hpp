#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "owlsim/agents/policy.hpp"
#include "owlsim/sim/environment.hpp"

namespace owlsim::trpo {

using SparseVec = std::vector<std::pair<std::uint32_t, double>>;

inline constexpr int kFeatureVersion = 1;
inline constexpr std::size_t kDefaultDim = 1u << 14;

struct PolicyParams {
    std::vector<double> theta;
    double temperature = 1.0;
    int feature_version = kFeatureVersion;
};

double dot(const std::vector<double>& theta, const SparseVec& phi);

struct Candidate {
    sim::Action action;
    SparseVec phi;
};

/// Enumerates the actions available on an observation and their hashed indicator features.
class FeatureMap {
public:
    explicit FeatureMap(sim::AppRegistry apps, std::size_t dim = kDefaultDim);

    std::size_t dim() const { return dim_; }
    std::vector<Candidate> candidates(const std::string& instruction, const sim::Observation& obs,
                                      std::size_t history_len) const;
    std::uint32_t index(std::string_view feature) const;

    /// Starting weights: zero except for a few hand-set priors on the named indicator features.
    PolicyParams initial_params() const;

private:
    sim::AppRegistry apps_;
    std::size_t dim_;
};

/// Softmax of theta.phi / temperature over the candidates.
std::vector<double> action_probs(const PolicyParams& params, const std::vector<Candidate>& cands);
std::vector<double> action_probs(const PolicyParams& params, const std::vector<SparseVec>& phis);

/// Index of `a` among the candidates, or npos.
std::size_t find_candidate(const std::vector<Candidate>& cands, const sim::Action& a);

/// Toy stand-in for the trained agent: samples from a linear softmax.
class LinearPolicy final : public agents::Policy {
public:
    LinearPolicy(std::shared_ptr<const FeatureMap> features, PolicyParams params)
        : features_(std::move(features)), params_(std::move(params)) {}

    agents::PolicyOutput act(const agents::PolicyContext& ctx, Rng& rng) const override;
    std::string describe() const override { return "linear"; }

    const PolicyParams& params() const { return params_; }
    const FeatureMap& features() const { return *features_; }

private:
    std::shared_ptr<const FeatureMap> features_;
    PolicyParams params_;
};

/// JSON checkpoint holding the non-zero weights and the feature-map version.
void save_checkpoint(const std::string& path, const PolicyParams& params);
PolicyParams load_checkpoint(const std::string& path);
Json checkpoint_to_json(const PolicyParams& params);
PolicyParams checkpoint_from_json(const Json& j);

}  // namespace owlsim::trpo
