#include "owlsim/sim/action.hpp"

#include <array>

#include "owlsim/core/errors.hpp"
#include "owlsim/core/text.hpp"

namespace owlsim::sim {

namespace {
constexpr std::array<std::string_view, 7> kKindNames = {"click", "type", "scroll", "back", "open_app", "wait",
                                                        "terminate"};

template <class... Fs>
struct overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

std::string quote(std::string_view s) { return Json(std::string(s)).dump(); }
}  // namespace

std::string_view Action::widget() const {
    if (auto* c = as<act::Click>()) return c->widget_id;
    if (auto* t = as<act::Type>()) return t->widget_id;
    return {};
}

std::string_view kind_name(ActionKind k) { return kKindNames[static_cast<std::size_t>(k)]; }

std::optional<ActionKind> parse_kind(std::string_view name) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i)
        if (kKindNames[i] == name) return static_cast<ActionKind>(i);
    return std::nullopt;
}

std::string_view to_string(ScrollDirection d) { return d == ScrollDirection::Up ? "up" : "down"; }
std::string_view to_string(TerminateStatus s) { return s == TerminateStatus::Success ? "success" : "failure"; }

std::string to_string(const Action& a) {
    return std::visit(overloaded{
                          [](const act::Click& c) { return "click(" + c.widget_id + ")"; },
                          [](const act::Type& t) { return "type(" + t.widget_id + ", " + quote(t.text) + ")"; },
                          [](const act::Scroll& s) { return "scroll(" + std::string(to_string(s.direction)) + ")"; },
                          [](const act::Back&) { return std::string("back()"); },
                          [](const act::OpenApp& o) { return "open_app(" + o.app_name + ")"; },
                          [](const act::Wait&) { return std::string("wait()"); },
                          [](const act::Terminate& t) {
                              return "terminate(" + std::string(to_string(t.status)) + ")";
                          },
                      },
                      a.op);
}

std::optional<Action> parse_action(std::string_view raw) {
    const std::string s = text::trim(raw);
    auto open = s.find('(');
    if (open == std::string::npos || s.back() != ')') return std::nullopt;
    auto kind = parse_kind(text::trim(s.substr(0, open)));
    if (!kind) return std::nullopt;
    const std::string args = text::trim(s.substr(open + 1, s.size() - open - 2));
    switch (*kind) {
        case ActionKind::Click:
            if (args.empty()) return std::nullopt;
            return Action::click(args);
        case ActionKind::Type: {
            auto comma = args.find(',');
            if (comma == std::string::npos) return std::nullopt;
            auto widget = text::trim(args.substr(0, comma));
            try {
                auto value = Json::parse(text::trim(args.substr(comma + 1)));
                if (!value.is_string() || widget.empty()) return std::nullopt;
                return Action::type(widget, value.get<std::string>());
            } catch (const Json::exception&) {
                return std::nullopt;
            }
        }
        case ActionKind::Scroll:
            if (args == "up") return Action::scroll(ScrollDirection::Up);
            if (args == "down") return Action::scroll(ScrollDirection::Down);
            return std::nullopt;
        case ActionKind::Back:
            return args.empty() ? std::optional(Action::back()) : std::nullopt;
        case ActionKind::OpenApp:
            if (args.empty()) return std::nullopt;
            return Action::open_app(args);
        case ActionKind::Wait:
            return args.empty() ? std::optional(Action::wait()) : std::nullopt;
        case ActionKind::Terminate:
            if (args == "success") return Action::terminate(TerminateStatus::Success);
            if (args == "failure") return Action::terminate(TerminateStatus::Failure);
            return std::nullopt;
    }
    return std::nullopt;
}

Json to_json(const Action& a) {
    Json j;
    j["type"] = std::string(kind_name(a.kind()));
    std::visit(overloaded{
                   [&](const act::Click& c) { j["widget_id"] = c.widget_id; },
                   [&](const act::Type& t) {
                       j["widget_id"] = t.widget_id;
                       j["text"] = t.text;
                   },
                   [&](const act::Scroll& s) { j["direction"] = std::string(to_string(s.direction)); },
                   [&](const act::Back&) {},
                   [&](const act::OpenApp& o) { j["app_name"] = o.app_name; },
                   [&](const act::Wait&) {},
                   [&](const act::Terminate& t) { j["status"] = std::string(to_string(t.status)); },
               },
               a.op);
    return j;
}

Action action_from_json(const Json& j) {
    auto str = [&](const char* key) -> std::string {
        if (!j.contains(key) || !j[key].is_string())
            throw SchemaError(std::string("action missing string field '") + key + "'");
        return j[key].get<std::string>();
    };
    if (!j.is_object()) throw SchemaError("action must be an object");
    auto kind = parse_kind(str("type"));
    if (!kind) throw SchemaError("unknown action type '" + j["type"].get<std::string>() + "'");
    switch (*kind) {
        case ActionKind::Click:
            return Action::click(str("widget_id"));
        case ActionKind::Type:
            return Action::type(str("widget_id"), str("text"));
        case ActionKind::Scroll: {
            auto d = str("direction");
            if (d != "up" && d != "down") throw SchemaError("bad scroll direction '" + d + "'");
            return Action::scroll(d == "up" ? ScrollDirection::Up : ScrollDirection::Down);
        }
        case ActionKind::Back:
            return Action::back();
        case ActionKind::OpenApp:
            return Action::open_app(str("app_name"));
        case ActionKind::Wait:
            return Action::wait();
        case ActionKind::Terminate: {
            auto s = str("status");
            if (s != "success" && s != "failure") throw SchemaError("bad terminate status '" + s + "'");
            return Action::terminate(s == "success" ? TerminateStatus::Success : TerminateStatus::Failure);
        }
    }
    throw SchemaError("unreachable action type");
}

}  // namespace owlsim::sim
