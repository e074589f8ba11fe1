#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "owlsim/core/json_io.hpp"

namespace owlsim::sim {

enum class ScrollDirection { Up, Down };
enum class TerminateStatus { Success, Failure };
enum class ActionKind { Click, Type, Scroll, Back, OpenApp, Wait, Terminate };

namespace act {
struct Click {
    std::string widget_id;
    bool operator==(const Click&) const = default;
};
struct Type {
    std::string widget_id;
    std::string text;
    bool operator==(const Type&) const = default;
};
struct Scroll {
    ScrollDirection direction = ScrollDirection::Down;
    bool operator==(const Scroll&) const = default;
};
struct Back {
    bool operator==(const Back&) const = default;
};
struct OpenApp {
    std::string app_name;
    bool operator==(const OpenApp&) const = default;
};
struct Wait {
    bool operator==(const Wait&) const = default;
};
struct Terminate {
    TerminateStatus status = TerminateStatus::Success;
    bool operator==(const Terminate&) const = default;
};
}  // namespace act

/// One GUI operation. Exactly one variant is held; parameters live inside it.
struct Action {
    std::variant<act::Click, act::Type, act::Scroll, act::Back, act::OpenApp, act::Wait, act::Terminate> op;

    static Action click(std::string widget) { return {act::Click{std::move(widget)}}; }
    static Action type(std::string widget, std::string text) { return {act::Type{std::move(widget), std::move(text)}}; }
    static Action scroll(ScrollDirection d) { return {act::Scroll{d}}; }
    static Action back() { return {act::Back{}}; }
    static Action open_app(std::string app) { return {act::OpenApp{std::move(app)}}; }
    static Action wait() { return {act::Wait{}}; }
    static Action terminate(TerminateStatus s = TerminateStatus::Success) { return {act::Terminate{s}}; }

    ActionKind kind() const { return static_cast<ActionKind>(op.index()); }

    /// Target widget for Click/Type, empty otherwise.
    std::string_view widget() const;

    template <class T>
    const T* as() const { return std::get_if<T>(&op); }

    bool is_terminate(TerminateStatus s) const {
        auto* t = as<act::Terminate>();
        return t && t->status == s;
    }

    bool operator==(const Action&) const = default;
};

std::string_view kind_name(ActionKind k);
std::optional<ActionKind> parse_kind(std::string_view name);
std::string_view to_string(ScrollDirection d);
std::string_view to_string(TerminateStatus s);

/// Compact call syntax, e.g. `type(search_box, "pizza")`.
std::string to_string(const Action& a);
std::optional<Action> parse_action(std::string_view text);

Json to_json(const Action& a);
/// Throws SchemaError on unknown type or missing parameters.
Action action_from_json(const Json& j);

}  // namespace owlsim::sim
