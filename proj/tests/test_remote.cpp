#include <gtest/gtest.h>
#include <httplib.h>

#include <thread>

#include "fixtures.hpp"
#include "owlsim/agents/loop.hpp"
#include "owlsim/core/errors.hpp"

using namespace owlsim;
using namespace owlsim::agents;

namespace {

// Minimal remote service: plans a single "finish", terminates, and approves everything.
class FakeService {
public:
    FakeService() {
        server_.Post("/v1/role", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = Json::parse(req.body);
            roles_seen_.push_back(body["role"].get<std::string>());
            const auto role = body["role"].get<std::string>();
            Json out;
            if (role == "manager_init") out = {{"subgoals", {"finish"}}};
            if (role == "worker") out = {{"thought", "done, so I end the task with success"}, {"action", "terminate(success)"}};
            if (role == "reflector") out = {{"judgment", "SUCCESS"}, {"feedback", ""}};
            if (role == "notetaker") out = {{"notes", Json::object()}};
            if (role == "manager_update") out = {{"subgoals", Json::array()}, {"completed_subgoals", {"finish"}}};
            if (role == "policy") {
                res.status = 503;
                return;
            }
            res.set_content(out.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeService() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    std::vector<std::string> roles_seen_;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST(Remote, EpisodeOverHttp) {
    FakeService service;
    auto backend = make_backend("remote:" + service.url(), 0);
    sim::Environment env(owlsim::testing::fixture_apps());
    auto task = owlsim::testing::pizza_task();
    LoopConfig config;
    auto traj = run_episode(task, env, Backends::uniform(backend), config);
    EXPECT_EQ(traj.outcome, Outcome::Succeeded);
    ASSERT_EQ(traj.steps.size(), 1u);
    EXPECT_EQ(traj.steps[0].action.action, sim::Action::terminate());
    EXPECT_EQ(service.roles_seen_,
              (std::vector<std::string>{"manager_init", "worker", "reflector", "notetaker", "manager_update"}));
}

TEST(Remote, ErrorStatusIsMalformed) {
    FakeService service;
    BackendPolicy policy(make_backend("remote:" + service.url(), 0));
    sim::Environment env(owlsim::testing::fixture_apps());
    auto traj = run_episode_e2e(owlsim::testing::pizza_task(), env, policy, 3, 2, 0);
    ASSERT_EQ(traj.steps.size(), 2u);
    for (const auto& s : traj.steps) {
        EXPECT_TRUE(s.transition.malformed);
        EXPECT_EQ(s.action.action, sim::Action::wait());
    }
}

TEST(Remote, UnreachableServiceFailsTheEpisode) {
    auto backend = make_backend("remote:http://127.0.0.1:1", 0);
    sim::Environment env(owlsim::testing::fixture_apps());
    auto traj = run_episode(owlsim::testing::pizza_task(), env, Backends::uniform(backend), LoopConfig{});
    EXPECT_EQ(traj.outcome, Outcome::Failed);
    EXPECT_NE(traj.error.find("manager_init"), std::string::npos);
}
