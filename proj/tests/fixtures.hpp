#pragma once

#include <string>

#include "owlsim/sim/environment.hpp"
#include "owlsim/taskgen/task.hpp"

namespace owlsim::testing {

inline std::string data_dir() { return OWLSIM_DATA_DIR; }
inline std::string apps_dir() { return data_dir() + "/apps"; }

inline sim::AppRegistry fixture_apps() { return sim::make_registry(sim::load_app_dir(apps_dir())); }

inline sim::AppGraph takeout() { return sim::load_app_graph_file(apps_dir() + "/takeout.json"); }

inline Json single_screen_doc() {
    return Json::parse(R"({
      "app_name": "NoteApp", "home_screen": "main",
      "screens": [{"screen_id": "main", "description": "A single note", "viewport_size": 2,
                   "widgets": [{"widget_id": "title", "kind": "textfield", "label": "title", "slot_key": "title",
                                "visible_from_scroll": 0}]}],
      "value_pools": {"title": ["groceries"]}
    })");
}

/// Hand-built task on the takeout fixture: search pizza on the menu, finish on the cart.
inline taskgen::TaskQuery pizza_task() {
    using sim::Action;
    taskgen::TaskQuery t;
    t.task_id = "pizza";
    t.instruction = "Open TakeoutApp, go to menu, enter 'pizza' in search, proceed to cart";
    t.app_names = {"TakeoutApp"};
    t.goal.slot_constraints = {{"search", "pizza"}};
    t.goal.goal_screen = "cart";
    t.oracle_actions = {Action::open_app("TakeoutApp"), Action::click("to_menu"), Action::type("search_box", "pizza"),
                        Action::click("to_cart"), Action::terminate()};
    t.difficulty = 3;
    return t;
}

}  // namespace owlsim::testing
