#include "owlsim/sim/app_graph.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <queue>

#include "owlsim/core/errors.hpp"

namespace owlsim::sim {

namespace {

const std::map<std::string, WidgetKind, std::less<>> kKinds = {
    {"button", WidgetKind::Button},       {"textfield", WidgetKind::TextField},
    {"checkbox", WidgetKind::Checkbox},   {"list_item", WidgetKind::ListItem},
    {"scroll_region", WidgetKind::ScrollRegion},
};

std::string req_string(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key) || !j[key].is_string())
        throw SchemaError(where + ": missing string field '" + key + "'");
    return j[key].get<std::string>();
}

std::optional<std::string> opt_string(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string()) throw SchemaError(where + ": field '" + key + "' must be a string");
    return j[key].get<std::string>();
}

int req_int(const Json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_number_integer())
        throw SchemaError(where + ": missing integer field '" + key + "'");
    return j[key].get<int>();
}

Widget parse_widget(const Json& j, const std::string& where, std::size_t widget_count) {
    Widget w;
    w.widget_id = req_string(j, "widget_id", where);
    const std::string at = where + "/" + w.widget_id;
    auto kind = req_string(j, "kind", at);
    auto it = kKinds.find(kind);
    if (it == kKinds.end()) throw SchemaError(at + ": unknown widget kind '" + kind + "'");
    w.kind = it->second;
    w.label = req_string(j, "label", at);
    w.target_screen = opt_string(j, "target_screen", at);
    w.slot_key = opt_string(j, "slot_key", at);
    w.visible_from_scroll = req_int(j, "visible_from_scroll", at);
    if (w.visible_from_scroll < 0 || static_cast<std::size_t>(w.visible_from_scroll) >= widget_count)
        throw SchemaError(at + ": visible_from_scroll must lie in [0, widget count)");
    if (w.target_screen && w.slot_key)
        throw SchemaError(at + ": a widget cannot both navigate and edit a slot");
    switch (w.kind) {
        case WidgetKind::TextField:
        case WidgetKind::Checkbox:
            if (!w.slot_key) throw SchemaError(at + ": " + kind + " requires slot_key");
            break;
        case WidgetKind::Button:
            if (w.slot_key) throw SchemaError(at + ": buttons cannot edit slots");
            break;
        case WidgetKind::ScrollRegion:
            if (w.slot_key || w.target_screen) throw SchemaError(at + ": scroll_region is display-only");
            break;
        case WidgetKind::ListItem:
            break;
    }
    return w;
}

}  // namespace

std::string_view to_string(WidgetKind k) {
    for (const auto& [name, kind] : kKinds)
        if (kind == k) return name;
    return "?";
}

const Widget* Screen::find(std::string_view widget_id) const {
    for (const auto& w : widgets)
        if (w.widget_id == widget_id) return &w;
    return nullptr;
}

int Screen::max_offset() const {
    int top = 0;
    for (const auto& w : widgets) top = std::max(top, w.visible_from_scroll);
    return (top / viewport_size) * viewport_size;
}

const Screen* AppGraph::find_screen(std::string_view id) const {
    for (const auto& s : screens)
        if (s.screen_id == id) return &s;
    return nullptr;
}

const Screen& AppGraph::screen(std::string_view id) const {
    if (auto* s = find_screen(id)) return *s;
    throw DanglingRefError(app_name + ": unknown screen '" + std::string(id) + "'");
}

std::vector<std::string> AppGraph::successors(std::string_view id) const {
    std::vector<std::string> out;
    for (const auto& [from, to] : edges)
        if (from == id) out.push_back(to);
    return out;
}

std::vector<std::string> AppGraph::slot_values(std::string_view slot_key) const {
    if (auto it = value_pools.find(std::string(slot_key)); it != value_pools.end()) return it->second;
    std::vector<std::string> out;
    for (const auto& s : screens)
        for (const auto& w : s.widgets) {
            if (w.slot_key != slot_key) continue;
            if (w.kind == WidgetKind::Checkbox) return {"on"};
            if (w.kind == WidgetKind::ListItem && std::find(out.begin(), out.end(), w.label) == out.end())
                out.push_back(w.label);
        }
    return out;
}

const Widget* AppGraph::editor_for(std::string_view screen_id, std::string_view slot_key) const {
    const Screen* s = find_screen(screen_id);
    if (!s) return nullptr;
    for (const auto& w : s->widgets)
        if (w.slot_key == slot_key) return &w;
    return nullptr;
}

std::optional<std::vector<std::string>> topological_order(
    const std::vector<std::string>& nodes, const std::set<std::pair<std::string, std::string>>& edges) {
    std::map<std::string, int> indegree;
    for (const auto& n : nodes) indegree[n] = 0;
    for (const auto& [from, to] : edges) ++indegree[to];
    std::queue<std::string> ready;
    for (const auto& n : nodes)
        if (indegree[n] == 0) ready.push(n);
    std::vector<std::string> order;
    while (!ready.empty()) {
        auto n = ready.front();
        ready.pop();
        order.push_back(n);
        for (const auto& [from, to] : edges)
            if (from == n && --indegree[to] == 0) ready.push(to);
    }
    if (order.size() != indegree.size()) return std::nullopt;
    return order;
}

AppGraph load_app_graph(const Json& doc) {
    if (!doc.is_object()) throw SchemaError("app graph must be a JSON object");
    AppGraph g;
    g.app_name = req_string(doc, "app_name", "app");
    if (g.app_name.empty()) throw SchemaError("app_name must be non-empty");
    const std::string where = g.app_name;
    g.home_screen = req_string(doc, "home_screen", where);
    if (!doc.contains("screens") || !doc["screens"].is_array() || doc["screens"].empty())
        throw SchemaError(where + ": 'screens' must be a non-empty array");

    for (const auto& sj : doc["screens"]) {
        Screen s;
        s.screen_id = req_string(sj, "screen_id", where);
        const std::string at = where + "/" + s.screen_id;
        if (g.find_screen(s.screen_id)) throw SchemaError(at + ": duplicate screen_id");
        s.description = req_string(sj, "description", at);
        if (s.description.empty()) throw SchemaError(at + ": description must be non-empty");
        s.viewport_size = req_int(sj, "viewport_size", at);
        if (s.viewport_size < 1) throw SchemaError(at + ": viewport_size must be >= 1");
        if (!sj.contains("widgets") || !sj["widgets"].is_array())
            throw SchemaError(at + ": 'widgets' must be an array");
        for (const auto& wj : sj["widgets"]) {
            Widget w = parse_widget(wj, at, sj["widgets"].size());
            if (s.find(w.widget_id)) throw SchemaError(at + ": duplicate widget_id '" + w.widget_id + "'");
            s.widgets.push_back(std::move(w));
        }
        g.screens.push_back(std::move(s));
    }

    if (!g.find_screen(g.home_screen))
        throw DanglingRefError(where + ": home_screen '" + g.home_screen + "' does not exist");

    std::set<std::string> slots;
    for (const auto& s : g.screens)
        for (const auto& w : s.widgets) {
            if (w.target_screen) {
                if (!g.find_screen(*w.target_screen))
                    throw DanglingRefError(where + "/" + s.screen_id + "/" + w.widget_id + ": unknown target_screen '" +
                                           *w.target_screen + "'");
                g.edges.emplace(s.screen_id, *w.target_screen);
            }
            if (w.slot_key) slots.insert(*w.slot_key);
        }

    if (doc.contains("value_pools")) {
        const auto& pools = doc["value_pools"];
        if (!pools.is_object()) throw SchemaError(where + ": value_pools must be an object");
        for (const auto& [slot, values] : pools.items()) {
            if (!slots.count(slot)) throw DanglingRefError(where + ": value pool for unknown slot_key '" + slot + "'");
            if (!values.is_array() || values.empty())
                throw SchemaError(where + ": value pool '" + slot + "' must be a non-empty array");
            auto& pool = g.value_pools[slot];
            for (const auto& v : values) {
                if (!v.is_string()) throw SchemaError(where + ": value pool entries must be strings");
                auto value = v.get<std::string>();
                if (value.empty() || value.find('\'') != std::string::npos)
                    throw SchemaError(where + ": pool value must be non-empty and free of quotes");
                pool.push_back(std::move(value));
            }
        }
    }
    if (auto verb = opt_string(doc, "intent_verb", where)) g.intent_verb = *verb;

    std::vector<std::string> nodes;
    for (const auto& s : g.screens) nodes.push_back(s.screen_id);
    if (!topological_order(nodes, g.edges)) throw CycleError(where + ": navigation edges contain a cycle");
    return g;
}

AppGraph load_app_graph_file(const std::string& path) { return load_app_graph(read_json_file(path)); }

std::vector<AppGraph> load_app_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw Error("apps directory not found: " + dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<AppGraph> graphs;
    std::set<std::string> names;
    for (const auto& f : files) {
        auto g = load_app_graph_file(f.string());
        if (!names.insert(g.app_name).second) throw SchemaError("duplicate app_name '" + g.app_name + "'");
        graphs.push_back(std::move(g));
    }
    return graphs;
}

Json to_json(const AppGraph& g) {
    Json doc;
    doc["app_name"] = g.app_name;
    doc["home_screen"] = g.home_screen;
    doc["screens"] = Json::array();
    for (const auto& s : g.screens) {
        Json sj;
        sj["screen_id"] = s.screen_id;
        sj["description"] = s.description;
        sj["viewport_size"] = s.viewport_size;
        sj["widgets"] = Json::array();
        for (const auto& w : s.widgets) {
            Json wj;
            wj["widget_id"] = w.widget_id;
            wj["kind"] = std::string(to_string(w.kind));
            wj["label"] = w.label;
            if (w.target_screen) wj["target_screen"] = *w.target_screen;
            if (w.slot_key) wj["slot_key"] = *w.slot_key;
            wj["visible_from_scroll"] = w.visible_from_scroll;
            sj["widgets"].push_back(std::move(wj));
        }
        doc["screens"].push_back(std::move(sj));
    }
    if (!g.value_pools.empty()) {
        doc["value_pools"] = Json::object();
        for (const auto& [k, v] : g.value_pools) doc["value_pools"][k] = v;
    }
    doc["intent_verb"] = g.intent_verb;
    return doc;
}

AppRegistry make_registry(std::vector<AppGraph> graphs) {
    AppRegistry reg;
    for (auto& g : graphs) {
        auto name = g.app_name;
        reg.emplace(std::move(name), std::make_shared<const AppGraph>(std::move(g)));
    }
    return reg;
}

}  // namespace owlsim::sim
