#include "owlsim/agents/protocol.hpp"
#include "owlsim/core/errors.hpp"
#include "owlsim/core/rng.hpp"

namespace owlsim::agents {

namespace {

constexpr std::string_view kRoleNames[] = {"manager_init", "manager_update", "worker",
                                           "reflector",    "notetaker",      "policy"};

template <class T>
std::optional<T> field(const Json& j, const char* key, Json::value_t type) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    const auto& v = j[key];
    if (v.type() != type && !(type == Json::value_t::number_float && v.is_number()))
        throw MalformedOutput(std::string("field '") + key + "' has the wrong type");
    return v.get<T>();
}

std::vector<std::string> string_list(const Json& v, const char* key) {
    if (!v.is_array()) throw MalformedOutput(std::string("field '") + key + "' is not a list");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) throw MalformedOutput(std::string("field '") + key + "' holds a non-string");
        out.push_back(e.get<std::string>());
    }
    return out;
}

}  // namespace

std::string_view to_string(Role r) { return kRoleNames[static_cast<int>(r)]; }

std::optional<Role> parse_role(std::string_view s) {
    for (int i = 0; i < 6; ++i)
        if (kRoleNames[i] == s) return static_cast<Role>(i);
    return std::nullopt;
}

Json to_json(const RoleRequest& r) {
    Json j;
    j["role"] = to_string(r.role);
    j["task_id"] = r.task_id;
    j["t"] = r.t;
    j["instruction"] = r.instruction;
    if (r.guidance) j["guidance"] = *r.guidance;
    j["observation"] = sim::to_json(r.observation);
    if (r.observation_after) j["observation_after"] = sim::to_json(*r.observation_after);
    Json history = Json::array();
    for (const auto& h : r.history) history.push_back(to_json(h));
    j["history"] = std::move(history);
    Json state;
    state["pending_subgoals"] = r.state.pending;
    state["completed_subgoals"] = r.state.completed;
    state["notes"] = r.state.notes;
    state["last_feedback"] = r.state.last_feedback ? to_json(*r.state.last_feedback) : Json(nullptr);
    j["state"] = std::move(state);
    if (!r.state.rag_knowledge.empty()) j["knowledge"] = r.state.rag_knowledge;
    if (r.action) j["action"] = to_json(*r.action);
    if (r.feedback) j["feedback"] = to_json(*r.feedback);
    j["n_inspect"] = r.n_inspect;
    return j;
}

Json to_json(const RoleResponse& r) {
    Json j = Json::object();
    if (r.thought) j["thought"] = *r.thought;
    if (r.action) j["action"] = sim::to_string(*r.action);
    if (r.summary) j["summary"] = *r.summary;
    if (r.subgoal) j["subgoal"] = *r.subgoal;
    if (r.feasible) j["feasible"] = *r.feasible;
    if (r.subgoals) j["subgoals"] = *r.subgoals;
    if (r.completed) j["completed_subgoals"] = *r.completed;
    if (r.judgment) j["judgment"] = to_string(*r.judgment);
    if (r.feedback) j["feedback"] = *r.feedback;
    if (r.notes) j["notes"] = *r.notes;
    if (r.conclusion) j["conclusion"] = *r.conclusion;
    return j;
}

RoleResponse response_from_json(const Json& j) {
    if (!j.is_object()) throw MalformedOutput("response is not a JSON object");
    using VT = Json::value_t;
    RoleResponse r;
    r.thought = field<std::string>(j, "thought", VT::string);
    r.summary = field<std::string>(j, "summary", VT::string);
    r.subgoal = field<std::string>(j, "subgoal", VT::string);
    r.feasible = field<bool>(j, "feasible", VT::boolean);
    r.feedback = field<std::string>(j, "feedback", VT::string);
    r.conclusion = field<std::string>(j, "conclusion", VT::string);
    if (j.contains("action") && !j["action"].is_null()) {
        const auto& a = j["action"];
        if (a.is_string()) {
            r.action = sim::parse_action(a.get<std::string>());
            if (!r.action) throw MalformedOutput("unparsable action '" + a.get<std::string>() + "'");
        } else {
            try {
                r.action = sim::action_from_json(a);
            } catch (const std::exception& e) {
                throw MalformedOutput(std::string("bad action object: ") + e.what());
            }
        }
    }
    if (j.contains("subgoals") && !j["subgoals"].is_null()) r.subgoals = string_list(j["subgoals"], "subgoals");
    if (j.contains("completed_subgoals") && !j["completed_subgoals"].is_null())
        r.completed = string_list(j["completed_subgoals"], "completed_subgoals");
    if (auto s = field<std::string>(j, "judgment", VT::string)) {
        r.judgment = parse_judgment(*s);
        if (!r.judgment) throw MalformedOutput("judgment must be SUCCESS or FAILURE");
    }
    if (j.contains("notes") && !j["notes"].is_null()) {
        if (!j["notes"].is_object()) throw MalformedOutput("notes is not an object");
        Notes notes;
        for (const auto& [k, v] : j["notes"].items()) {
            if (!v.is_string()) throw MalformedOutput("note '" + k + "' is not text");
            notes[k] = v.get<std::string>();
        }
        r.notes = std::move(notes);
    }
    return r;
}

RoleResponse parse_response_body(std::string_view body) {
    Json j = Json::parse(body.begin(), body.end(), nullptr, false);
    if (j.is_discarded()) throw MalformedOutput("response body is not JSON");
    return response_from_json(j);
}

RemoteBackend::RemoteBackend(std::shared_ptr<const Transport> transport, std::string label)
    : transport_(std::move(transport)), label_(std::move(label)) {}

RoleResponse RemoteBackend::call(const RoleRequest& request) const {
    auto result = transport_->post("/v1/role", to_json(request).dump());
    if (result.status < 200 || result.status >= 300)
        throw MalformedOutput("remote returned HTTP " + std::to_string(result.status));
    return parse_response_body(result.body);
}

namespace {

class AdversarialTransport final : public Transport {
public:
    explicit AdversarialTransport(std::uint64_t seed) : seed_(seed) {}

    HttpResult post(const std::string&, const std::string& body) const override {
        Rng rng(mix64(seed_ ^ fnv1a(body)));
        Json req = Json::parse(body, nullptr, false);
        std::vector<std::string> known;
        std::vector<std::string> widgets{"ghost_widget"};
        if (req.is_object()) {
            for (const char* key : {"pending_subgoals", "completed_subgoals"})
                for (const auto& s : req["state"][key]) known.push_back(s.get<std::string>());
            for (const auto& w : req["observation"]["visible_widgets"])
                widgets.push_back(w["widget_id"].get<std::string>());
        }
        auto pick = [&](const std::vector<std::string>& v) { return v[rng.index(v.size())]; };

        switch (rng.index(11)) {
            case 0: return {500, "internal error"};
            case 1: return {200, "not json at all {"};
            case 2: return {200, "[1, 2, 3]"};
            case 3: return {200, "{}"};
            case 4: {
                Json j;
                Json subgoals = Json::array();
                const auto n = rng.between(0, 200);
                for (long i = 0; i < n; ++i)
                    subgoals.push_back(known.empty() || rng.bernoulli(0.3) ? "navigate to nowhere" : pick(known));
                j["subgoals"] = subgoals;
                Json done = Json::array();
                for (const auto& k : known)
                    if (rng.bernoulli(0.5)) done.push_back(k);
                j["completed_subgoals"] = done;
                j["action"] = "click(" + pick(widgets) + ")";
                j["judgment"] = rng.bernoulli(0.5) ? "SUCCESS" : "FAILURE";
                return {200, j.dump()};
            }
            case 5: return {200, R"j({"action": "click(", "thought": 7})j"};
            case 6:
                return {200, R"j({"action": "terminate(success)", "summary": "done", "judgment": "SUCCESS",
                                 "feedback": "", "subgoals": [], "notes": {}})j"};
            case 7: {
                Json j;
                static const char* kinds[] = {"click(%)", "scroll(down)", "back()", "wait()", "open_app(NoSuchApp)"};
                std::string a = kinds[rng.index(5)];
                if (auto p = a.find('%'); p != std::string::npos) a.replace(p, 1, pick(widgets));
                j["action"] = a;
                j["summary"] = "";
                j["feasible"] = rng.bernoulli(0.5);
                j["judgment"] = rng.bernoulli(0.5) ? "SUCCESS" : "FAILURE";
                j["feedback"] = "";
                j["notes"] = {{"k" + std::to_string(rng.index(4)), "v" + std::to_string(rng.index(100))}};
                Json subgoals = Json::array();
                for (const auto& k : known)
                    if (rng.bernoulli(0.7)) subgoals.push_back(k);
                j["subgoals"] = subgoals;
                return {200, j.dump()};
            }
            case 8: return {200, R"({"judgment": "MAYBE", "subgoals": "finish"})"};
            case 9: return {302, ""};
            default: return {200, R"({"notes": "order code X9", "action": {"type": "type"}})"};
        }
    }

private:
    std::uint64_t seed_;
};

}  // namespace

std::shared_ptr<const Transport> make_adversarial_transport(std::uint64_t seed) {
    return std::make_shared<AdversarialTransport>(seed);
}

}  // namespace owlsim::agents
