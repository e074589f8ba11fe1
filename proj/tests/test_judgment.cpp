#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "owlsim/agents/loop.hpp"
#include "owlsim/agents/oracle.hpp"
#include "owlsim/core/errors.hpp"
#include "owlsim/core/text.hpp"
#include "owlsim/judgment/judgment.hpp"
#include "owlsim/taskgen/generator.hpp"

using namespace owlsim;
using namespace owlsim::judgment;
using owlsim::testing::fixture_apps;
using owlsim::testing::pizza_task;
using sim::Action;

namespace {

struct Bench {
    sim::AppRegistry apps = fixture_apps();
    sim::Environment env{apps};
    taskgen::TaskQuery task = pizza_task();
    taskgen::Route route = taskgen::route_of(task, apps);
    JudgeContext ctx{task, env, route};

    Bench() { taskgen::reset(env, task); }

    agents::StepRecord step(const Action& a) {
        agents::StepRecord s;
        s.state_before = env.state();
        s.obs_before = env.observe();
        auto [obs, report] = env.step(a);
        s.obs_after = obs;
        s.transition = report;
        s.state_after = env.state();
        s.action = {"", a, sim::to_string(a), ""};
        return s;
    }
    agents::Trajectory run(std::initializer_list<Action> actions) {
        agents::Trajectory t;
        t.task_id = task.task_id;
        t.traj_id = "t0";
        for (const auto& a : actions) t.steps.push_back(step(a));
        t.final_state = env.state();
        return t;
    }
};

const OracleCritic kOracle;

agents::Trajectory oracle_episode(const taskgen::TaskQuery& t, sim::Environment& env, int t_max) {
    agents::LoopConfig c;
    c.t_max = t_max;
    return agents::run_episode(t, env, agents::Backends::uniform(std::make_shared<agents::OracleBackend>()), c);
}

}  // namespace

TEST(StepCritic, NavigationClickIsGood) {
    Bench b;
    b.step(Action::open_app("TakeoutApp"));
    auto out = step_critic(b.ctx, b.step(Action::click("to_menu")), kOracle);
    EXPECT_EQ(out.label, StepLabel::Good) << out.analysis;
    EXPECT_EQ(critic_score(out), 1.0);
}

TEST(StepCritic, WaitIsNeutral) {
    Bench b;
    b.step(Action::open_app("TakeoutApp"));
    auto out = step_critic(b.ctx, b.step(Action::wait()), kOracle);
    EXPECT_EQ(out.label, StepLabel::Neutral);
    EXPECT_EQ(critic_score(out), 0.5);
}

TEST(StepCritic, OverwritingCorrectValueIsHarmful) {
    Bench b;
    b.run({Action::open_app("TakeoutApp"), Action::click("to_menu"), Action::type("search_box", "pizza")});
    auto out = step_critic(b.ctx, b.step(Action::type("search_box", "burger")), kOracle);
    EXPECT_EQ(out.label, StepLabel::Harmful);
    EXPECT_EQ(critic_score(out), 0.0);
}

TEST(StepCritic, PrematureTerminateIsHarmfulAndCorrectOneGood) {
    Bench b;
    b.step(Action::open_app("TakeoutApp"));
    EXPECT_EQ(step_critic(b.ctx, b.step(Action::terminate()), kOracle).label, StepLabel::Harmful);

    Bench c;
    c.run({Action::open_app("TakeoutApp"), Action::click("to_menu"), Action::type("search_box", "pizza"),
           Action::click("to_cart")});
    EXPECT_EQ(step_critic(c.ctx, c.step(Action::terminate()), kOracle).label, StepLabel::Good);
}

TEST(StepCritic, LeavingTheAppIsHarmful) {
    Bench b;
    b.run({Action::open_app("TakeoutApp"), Action::click("to_menu")});
    EXPECT_EQ(step_critic(b.ctx, b.step(Action::open_app("WeatherApp")), kOracle).label, StepLabel::Harmful);
}

TEST(StepCritic, SummariesStayWithinWordLimit) {
    auto apps = fixture_apps();
    Rng rng(5);
    auto pool = taskgen::generate_pool(apps, 40, rng, 10);
    sim::Environment env(apps);
    for (const auto& t : pool) {
        auto traj = agents::run_episode(t, env, agents::Backends::uniform(agents::make_backend("noisy:0.5", 3)), {});
        auto route = taskgen::route_of(t, apps);
        JudgeContext ctx{t, env, route};
        for (const auto& s : traj.steps) {
            auto out = step_critic(ctx, s, kOracle);
            EXPECT_LE(text::word_count(out.summary), kMaxSummaryWords);
            EXPECT_FALSE(out.summary.empty());
        }
    }
}

TEST(OnGoalPath, ReachabilityOracle) {
    Bench b;
    auto s = b.env.state();
    EXPECT_FALSE(on_goal_path(b.apps, b.task, s));  // launcher
    b.step(Action::open_app("TakeoutApp"));
    EXPECT_TRUE(on_goal_path(b.apps, b.task, b.env.state()));
    b.step(Action::click("to_menu"));
    b.step(Action::click("to_cart"));
    // On the goal screen but search still unset; menu is not reachable forward from cart.
    EXPECT_FALSE(on_goal_path(b.apps, b.task, b.env.state()));
    b.step(Action::back());
    b.step(Action::type("search_box", "pizza"));
    EXPECT_TRUE(on_goal_path(b.apps, b.task, b.env.state()));
}

TEST(Consensus, TruthTable) {
    using V = Verdict;
    EXPECT_EQ(consensus(V::Correct, V::Correct), V::Correct);
    EXPECT_EQ(consensus(V::Correct, V::Incorrect), V::Incorrect);
    EXPECT_EQ(consensus(V::Incorrect, V::Correct), V::Incorrect);
    EXPECT_EQ(consensus(V::Incorrect, V::Incorrect), V::Incorrect);
}

TEST(Verdicts, OracleTrajectoriesAreCorrectAndTruncatedOnesAreNot) {
    auto apps = fixture_apps();
    Rng rng(11);
    auto pool = taskgen::generate_pool(apps, 60, rng, 10);
    sim::Environment env(apps);
    for (const auto& t : pool) {
        const int n = static_cast<int>(t.oracle_actions.size());
        auto full = oracle_episode(t, env, n);
        auto v = judge_trajectory(full, t, apps, kOracle, kOracle);
        EXPECT_EQ(v.consensus, Verdict::Correct) << t.task_id << " " << v.error;
        EXPECT_EQ(v.step_labels.size(), full.steps.size());
        for (auto l : v.step_labels) EXPECT_NE(l, StepLabel::Harmful) << t.task_id;
        if (n > 0) {
            auto cut = oracle_episode(t, env, n - 1);
            EXPECT_EQ(judge_trajectory(cut, t, apps, kOracle, kOracle).consensus, Verdict::Incorrect) << t.task_id;
        }
    }
}

TEST(Verdicts, RecoveredDetourIsStillCorrect) {
    Bench b;
    auto traj = b.run({Action::open_app("TakeoutApp"), Action::click("to_menu"), Action::type("search_box", "burger"),
                       Action::type("search_box", "pizza"), Action::click("to_cart"), Action::terminate()});
    auto v = judge_trajectory(traj, b.task, b.apps, kOracle, kOracle);
    EXPECT_EQ(v.consensus, Verdict::Correct);
}

TEST(Verdicts, TamperedObservationFailsMultimodalOnly) {
    Bench b;
    auto traj = b.run({Action::open_app("TakeoutApp"), Action::click("to_menu"), Action::type("search_box", "pizza"),
                       Action::click("to_cart"), Action::terminate()});
    traj.steps[2].obs_after.serialized += " ";
    auto v = judge_trajectory(traj, b.task, b.apps, kOracle, kOracle);
    EXPECT_EQ(v.text_channel, Verdict::Correct);
    EXPECT_EQ(v.multimodal_channel, Verdict::Incorrect);
    EXPECT_EQ(v.consensus, Verdict::Incorrect);
}

TEST(Verdicts, AdversarialCriticNeverThrows) {
    Bench b;
    auto traj = b.run({Action::open_app("TakeoutApp"), Action::click("to_menu")});
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto critic = make_critic("adversarial:" + std::to_string(seed));
        auto v = judge_trajectory(traj, b.task, b.apps, *critic, *critic);
        EXPECT_EQ(v.consensus, Verdict::Incorrect);
    }
    EXPECT_THROW(make_critic("psychic"), ConfigError);
}

TEST(Verdicts, JsonRoundTrip) {
    TrajectoryVerdict v{"q1", "q1#0", Verdict::Correct, Verdict::Incorrect, Verdict::Incorrect,
                        {StepLabel::Good, StepLabel::Harmful}, "text channel: boom"};
    auto back = verdict_from_json(Json::parse(to_json(v).dump()));
    EXPECT_EQ(back.traj_id, "q1#0");
    EXPECT_EQ(back.multimodal_channel, Verdict::Incorrect);
    EXPECT_EQ(back.step_labels, v.step_labels);
    EXPECT_EQ(back.error, v.error);
    EXPECT_EQ(to_json(back).dump(), to_json(v).dump());
}

TEST(Guidance, CleanTrajectoryListsEveryPhase) {
    Bench b;
    auto traj = b.run({Action::open_app("TakeoutApp"), Action::click("to_menu"), Action::type("search_box", "pizza"),
                       Action::click("to_cart"), Action::terminate()});
    auto g = generate_guidance(traj, b.task, b.apps, kOracle);
    auto lines = text::split(g, '\n');
    ASSERT_EQ(lines.size(), 5u);
    for (std::size_t i = 0; i < lines.size(); ++i)
        EXPECT_EQ(lines[i].rfind(std::to_string(i + 1) + ". ", 0), 0u) << lines[i];
    EXPECT_NE(g.find("pizza"), std::string::npos);
}

TEST(Guidance, NoOpsScrollsAndFailuresAreOmitted) {
    Bench b;
    auto traj = b.run({Action::open_app("TakeoutApp"), Action::wait(), Action::click("banner"),
                       Action::scroll(sim::ScrollDirection::Down), Action::click("to_menu"), Action::click("nope")});
    agents::ReflectionFeedback bad;
    bad.judgment = agents::Judgment::Failure;
    traj.steps[4].reflection = bad;
    auto lines = guidance_lines(traj);
    ASSERT_EQ(lines.size(), 1u);
    EXPECT_EQ(lines[0], traj.steps[0].transition.description);
}

TEST(Guidance, SingleStepAndEmpty) {
    Bench b;
    auto one = b.run({Action::open_app("TakeoutApp")});
    auto g = generate_guidance(one, b.task, b.apps, kOracle);
    EXPECT_EQ(text::split(g, '\n').size(), 1u);

    Bench c;
    auto none = c.run({Action::wait(), Action::click("nowhere")});
    EXPECT_THROW(generate_guidance(none, c.task, c.apps, kOracle), EmptyGuidanceError);
}

TEST(Guidance, IdempotentAndGuidanceFollowable) {
    auto apps = fixture_apps();
    Rng rng(29);
    auto pool = taskgen::generate_pool(apps, 30, rng, 10);
    sim::Environment env(apps);
    for (const auto& t : pool) {
        auto ref = oracle_episode(t, env, 15);
        std::string g1, g2;
        try {
            g1 = generate_guidance(ref, t, apps, kOracle);
        } catch (const EmptyGuidanceError&) {
            continue;
        }
        g2 = generate_guidance(ref, t, apps, kOracle);
        EXPECT_EQ(g1, g2);
        // One numbered line per effective oracle step.
        EXPECT_EQ(text::split(g1, '\n').size(), guidance_lines(ref).size());
    }
}
