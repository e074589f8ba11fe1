#include "owlsim/trpo/policy.hpp"

#include <algorithm>
#include <cmath>

#include "owlsim/agents/reasoning.hpp"
#include "owlsim/core/errors.hpp"
#include "owlsim/core/text.hpp"

namespace owlsim::trpo {

using sim::Action;
using sim::ActionKind;

namespace {

std::string spaced(std::string s) {
    std::replace(s.begin(), s.end(), '_', ' ');
    return s;
}

// Screen of the app that the instruction mentions last, if any.
std::string last_mentioned_screen(const sim::AppGraph& g, const std::string& instruction) {
    const auto low = text::lower(instruction);
    std::string best;
    std::size_t best_pos = 0;
    for (const auto& s : g.screens) {
        const auto name = text::lower(spaced(s.screen_id));
        if (!text::contains_word_ci(instruction, name)) continue;
        const auto pos = low.rfind(name);
        if (best.empty() || pos > best_pos) {
            best = s.screen_id;
            best_pos = pos;
        }
    }
    return best;
}

// Named indicator features and their starting weights.
const std::vector<std::pair<std::string, double>> kPriors{
    {"f:app_mentioned", 3.0},    {"f:target_mentioned", 2.0}, {"f:label_mentioned", 1.5},
    {"f:new_value", 2.0},        {"f:same_value", -2.0},      {"f:checkbox_on", -1.0},
    {"f:terminate_here", 2.5},   {"kind:terminate", -1.5},    {"kind:wait", -1.5},
    {"kind:back", -1.0},         {"kind:scroll", -0.5},
};

}  // namespace

double dot(const std::vector<double>& theta, const SparseVec& phi) {
    double s = 0.0;
    for (const auto& [i, v] : phi) s += theta[i] * v;
    return s;
}

FeatureMap::FeatureMap(sim::AppRegistry apps, std::size_t dim) : apps_(std::move(apps)), dim_(dim) {
    if (dim_ == 0) throw ConfigError("feature dimension must be positive");
}

std::uint32_t FeatureMap::index(std::string_view feature) const {
    return static_cast<std::uint32_t>(fnv1a(feature) % dim_);
}

PolicyParams FeatureMap::initial_params() const {
    PolicyParams p;
    p.theta.assign(dim_, 0.0);
    for (const auto& [name, w] : kPriors) p.theta[index(name)] += w;
    return p;
}

std::vector<Candidate> FeatureMap::candidates(const std::string& instruction, const sim::Observation& obs,
                                              std::size_t history_len) const {
    std::vector<Candidate> out;
    const std::string where = obs.app.empty() ? std::string(sim::kLauncherScreen) : obs.app + "/" + obs.screen_id;
    const std::string task = std::to_string(fnv1a(instruction));
    const std::string hist = std::to_string(std::min<std::size_t>(history_len, 8));
    const sim::AppGraph* g = nullptr;
    if (auto it = apps_.find(obs.app); it != apps_.end()) g = it->second.get();

    auto add = [&](Action a, std::vector<std::string> flags) {
        const std::string kind(sim::kind_name(a.kind()));
        const std::string text = sim::to_string(a);
        std::vector<std::string> names{"kind:" + kind, "scr:" + where + "|" + kind, "act:" + where + "|" + text,
                                       "task:" + task + "|" + where + "|" + text, "hist:" + hist + "|" + kind};
        for (auto& f : flags) names.push_back(std::move(f));
        Candidate c{std::move(a), {}};
        for (const auto& n : names) c.phi.emplace_back(index(n), 1.0);
        out.push_back(std::move(c));
    };

    if (!g) {
        for (const auto& [name, app] : apps_) {
            std::vector<std::string> flags;
            if (text::contains_word_ci(instruction, name)) flags.push_back("f:app_mentioned");
            add(Action::open_app(name), std::move(flags));
        }
    } else {
        const auto* screen = g->find_screen(obs.screen_id);
        for (const auto& vw : obs.visible_widgets) {
            const sim::Widget* w = nullptr;
            if (screen)
                for (const auto& cand : screen->widgets)
                    if (cand.widget_id == vw.widget_id) w = &cand;
            if (vw.kind == sim::WidgetKind::TextField) {
                if (!w || !w->slot_key) continue;
                for (const auto& v : g->slot_values(*w->slot_key)) {
                    if (!text::contains_ci(instruction, v)) continue;
                    const bool same = vw.current_value && *vw.current_value == v;
                    add(Action::type(vw.widget_id, v), {same ? "f:same_value" : "f:new_value"});
                }
                continue;
            }
            std::vector<std::string> flags;
            if (!vw.label.empty() && text::contains_word_ci(instruction, vw.label)) flags.push_back("f:label_mentioned");
            if (w && w->target_screen && text::contains_word_ci(instruction, spaced(*w->target_screen)))
                flags.push_back("f:target_mentioned");
            if (vw.kind == sim::WidgetKind::Checkbox && vw.current_value == "on") flags.push_back("f:checkbox_on");
            add(Action::click(vw.widget_id), std::move(flags));
        }
        if (obs.scroll_offset < obs.max_offset) add(Action::scroll(sim::ScrollDirection::Down), {});
        if (obs.scroll_offset > 0) add(Action::scroll(sim::ScrollDirection::Up), {});
        add(Action::back(), {});
    }
    add(Action::wait(), {});
    std::vector<std::string> flags;
    if (g && last_mentioned_screen(*g, instruction) == obs.screen_id) flags.push_back("f:terminate_here");
    add(Action::terminate(), std::move(flags));
    return out;
}

std::vector<double> action_probs(const PolicyParams& params, const std::vector<SparseVec>& phis) {
    std::vector<double> logits;
    logits.reserve(phis.size());
    for (const auto& phi : phis) logits.push_back(dot(params.theta, phi) / params.temperature);
    const double mx = logits.empty() ? 0.0 : *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& l : logits) z += (l = std::exp(l - mx));
    for (auto& l : logits) l /= z;
    return logits;
}

std::vector<double> action_probs(const PolicyParams& params, const std::vector<Candidate>& cands) {
    std::vector<SparseVec> phis;
    phis.reserve(cands.size());
    for (const auto& c : cands) phis.push_back(c.phi);
    return action_probs(params, phis);
}

std::size_t find_candidate(const std::vector<Candidate>& cands, const Action& a) {
    for (std::size_t i = 0; i < cands.size(); ++i)
        if (cands[i].action == a) return i;
    return static_cast<std::size_t>(-1);
}

agents::PolicyOutput LinearPolicy::act(const agents::PolicyContext& ctx, Rng& rng) const {
    auto cands = features_->candidates(ctx.instruction, ctx.observation, ctx.history.size());
    auto probs = action_probs(params_, cands);
    const double u = rng.uniform();
    std::size_t pick = cands.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) {
            pick = i;
            break;
        }
    }
    agents::PolicyOutput out;
    out.action = cands[pick].action;
    const std::string where = ctx.observation.app.empty() ? "the launcher" : "the " + ctx.observation.screen_id + " screen";
    out.thought = "I am on " + where + ", " + agents::intent_clause(out.action, ctx.observation);
    out.log_prob = std::log(probs[pick]);
    return out;
}

Json checkpoint_to_json(const PolicyParams& params) {
    Json weights = Json::array();
    for (std::size_t i = 0; i < params.theta.size(); ++i)
        if (params.theta[i] != 0.0) weights.push_back(Json::array({i, params.theta[i]}));
    return Json{{"format", "owlsim-linear-policy"},
                {"feature_version", params.feature_version},
                {"dim", params.theta.size()},
                {"temperature", params.temperature},
                {"weights", std::move(weights)}};
}

PolicyParams checkpoint_from_json(const Json& j) {
    if (j.value("format", "") != "owlsim-linear-policy") throw SchemaError("not a policy checkpoint");
    PolicyParams p;
    p.feature_version = j.at("feature_version").get<int>();
    if (p.feature_version != kFeatureVersion)
        throw SchemaError("checkpoint feature version " + std::to_string(p.feature_version) + " is not supported");
    p.temperature = j.at("temperature").get<double>();
    if (!(p.temperature > 0.0)) throw SchemaError("temperature must be positive");
    p.theta.assign(j.at("dim").get<std::size_t>(), 0.0);
    for (const auto& w : j.at("weights")) {
        const auto i = w.at(0).get<std::size_t>();
        if (i >= p.theta.size()) throw SchemaError("weight index out of range");
        p.theta[i] = w.at(1).get<double>();
    }
    return p;
}

void save_checkpoint(const std::string& path, const PolicyParams& params) {
    write_text_file(path, checkpoint_to_json(params).dump() + "\n");
}

PolicyParams load_checkpoint(const std::string& path) { return checkpoint_from_json(read_json_file(path)); }

}  // namespace owlsim::trpo
