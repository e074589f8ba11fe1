#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "owlsim/core/json_io.hpp"

namespace owlsim::sim {

enum class WidgetKind { Button, TextField, Checkbox, ListItem, ScrollRegion };

std::string_view to_string(WidgetKind k);

struct Widget {
    std::string widget_id;
    WidgetKind kind = WidgetKind::Button;
    std::string label;
    std::optional<std::string> target_screen;  // navigation widgets
    std::optional<std::string> slot_key;       // value-editing widgets
    int visible_from_scroll = 0;

    bool is_navigation() const { return target_screen.has_value(); }
    bool is_editor() const { return slot_key.has_value(); }
};

struct Screen {
    std::string screen_id;
    std::string description;
    std::vector<Widget> widgets;
    int viewport_size = 1;

    const Widget* find(std::string_view widget_id) const;
    /// Largest reachable scroll offset (a multiple of the viewport size).
    int max_offset() const;
    bool visible_at(const Widget& w, int offset) const {
        return w.visible_from_scroll >= offset && w.visible_from_scroll < offset + viewport_size;
    }
};

/// Immutable app definition: screens are nodes, navigation widgets are edges.
struct AppGraph {
    std::string app_name;
    std::vector<Screen> screens;
    std::string home_screen;
    std::set<std::pair<std::string, std::string>> edges;

    // Optional extensions of the definition document.
    std::map<std::string, std::vector<std::string>> value_pools;
    std::string intent_verb = "Use";

    const Screen* find_screen(std::string_view id) const;
    const Screen& screen(std::string_view id) const;
    std::vector<std::string> successors(std::string_view id) const;
    /// Every value an editing slot can take: the declared pool, list-item labels, or "on" for checkboxes.
    std::vector<std::string> slot_values(std::string_view slot_key) const;
    /// First widget editing `slot_key` on `screen_id`, if any.
    const Widget* editor_for(std::string_view screen_id, std::string_view slot_key) const;
};

/// Validates and builds an app graph. Throws SchemaError, CycleError, DanglingRefError.
AppGraph load_app_graph(const Json& doc);
AppGraph load_app_graph_file(const std::string& path);
/// Loads every *.json file in `dir` in lexicographic filename order.
std::vector<AppGraph> load_app_dir(const std::string& dir);
Json to_json(const AppGraph& g);

/// Kahn ordering of the navigation edges; empty optional when cyclic.
std::optional<std::vector<std::string>> topological_order(const std::vector<std::string>& nodes,
                                                          const std::set<std::pair<std::string, std::string>>& edges);

using AppRegistry = std::map<std::string, std::shared_ptr<const AppGraph>, std::less<>>;

AppRegistry make_registry(std::vector<AppGraph> graphs);

}  // namespace owlsim::sim
