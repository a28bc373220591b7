#include "fairsched/activation_mdp.hpp"
#include "fairsched/harness.hpp"

#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace fairsched;
using fixtures::scalar_system;

namespace {

ActionMask mask(std::initializer_list<int> bits) {
    std::vector<std::uint8_t> b;
    for (int v : bits) {
        b.push_back(static_cast<std::uint8_t>(v));
    }
    return ActionMask(std::move(b));
}

ScheduleSequence repeat(const ScheduleSequence& cycle, std::size_t times,
                        const ScheduleSequence& prefix = {}) {
    ScheduleSequence out = prefix;
    for (std::size_t t = 0; t < times; ++t) {
        out.insert(out.end(), cycle.begin(), cycle.end());
    }
    return out;
}

}  // namespace

TEST(OneStageCost, ZeroHoldingIsCostOfSteadyTrace) {
    const auto c = steady_state(fixtures::case1_systems()[0]);
    for (double q : {0.0, 0.5, 3.0}) {
        EXPECT_NEAR(one_stage_cost(0, c, FairnessParam(q)), fair_cost(c.trace(0), FairnessParam(q)),
                    1e-12 * fair_cost(c.trace(0), FairnessParam(q)));
    }
}

TEST(OneStageCost, EfficiencyCaseIsRawTrace) {
    const auto c = steady_state(fixtures::case1_systems()[1]);
    for (std::uint32_t tau = 0; tau < 10; ++tau) {
        EXPECT_NEAR(one_stage_cost(tau, c, FairnessParam(0.0)), c.trace(tau), 1e-9 * c.trace(tau));
    }
}

TEST(OneStageCost, PartialSumsTelescope) {
    const auto c = steady_state(scalar_system(2.0, 1.0));
    const FairnessParam fp(2.0);
    double partial = 0.0;
    double traces = 0.0;
    for (std::uint32_t d = 1; d <= 4; ++d) {
        partial += one_stage_cost(d - 1, c, fp);
        traces += c.trace(d - 1);
        const double mean = traces / d;
        const double rhs = d * mean * mean * mean / 3.0;
        EXPECT_NEAR(partial, rhs, 1e-9 * rhs) << "d=" << d;
    }
}

TEST(EnumerateActions, TwoSensorsOneSlot) {
    const auto a = enumerate_actions(2, 1);
    ASSERT_EQ(a.size(), 3u);
    EXPECT_EQ(a[0], mask({0, 0}));
    EXPECT_EQ(a[1], mask({1, 0}));
    EXPECT_EQ(a[2], mask({0, 1}));
}

TEST(EnumerateActions, Counts) {
    EXPECT_EQ(enumerate_actions(5, 2).size(), 16u);
    EXPECT_EQ(enumerate_actions(3, 3).size(), 8u);
    EXPECT_THROW(enumerate_actions(3, 0), std::invalid_argument);
}

TEST(EnumerateActions, RespectsCardinalityAndIsUnique) {
    const auto a = enumerate_actions(5, 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_LE(a[i].count(), 2u);
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            EXPECT_FALSE(a[i] == a[j]);
        }
    }
}

TEST(Transition, Examples) {
    EXPECT_EQ(transition({0, 0}, mask({1, 0}), 12), (HoldingState{0, 1}));
    EXPECT_EQ(transition({12, 3}, mask({0, 0}), 12), (HoldingState{12, 4}));
    EXPECT_EQ(transition({2, 5}, mask({1, 1}), 12), (HoldingState{0, 0}));
}

TEST(RelativeValueIteration, SingleSensorAlwaysTransmits) {
    const auto caches = build_caches({fixtures::case1_systems()[2]});
    for (double q : {0.0, 2.0}) {
        const FairnessParam fp(q);
        MdpConfig cfg;
        cfg.tau_max = 6;
        const auto sol = relative_value_iteration(caches, fp, 1, cfg);
        ASSERT_TRUE(sol.values.converged);
        EXPECT_NEAR(sol.values.average_cost_estimate, fair_cost(caches[0].trace(0), fp),
                    1e-8 * fair_cost(caches[0].trace(0), fp));
        for (std::uint32_t tau = 0; tau <= cfg.tau_max; ++tau) {
            EXPECT_EQ(sol.policy.decide({tau}), mask({1}));
        }
    }
}

TEST(RelativeValueIteration, IdenticalPairMatchesExhaustiveSearchAndAlternates) {
    const auto sys = scalar_system(1.3, 1.0);
    const auto caches = build_caches({sys, sys});
    const FairnessParam fp(0.0);
    MdpConfig cfg;
    cfg.tau_max = 12;
    const auto sol = relative_value_iteration(caches, fp, 1, cfg);
    ASSERT_TRUE(sol.values.converged);
    const auto oracle = brute_force_periodic_oracle(caches, fp, 1, 12, CycleObjective::relaxed);
    EXPECT_NEAR(sol.values.average_cost_estimate, oracle.value, 1e-6);

    const auto costs = tabulate_stage_costs(caches, fp, cfg.tau_max);
    const auto ro = rollout_policy(sol.policy, costs, {0, 0}, 200);
    const auto period = detect_period(ro.actions);
    ASSERT_TRUE(period.has_value());
    EXPECT_EQ(period->length, 2u);
    const auto& a = ro.actions[period->burn_in];
    const auto& b = ro.actions[period->burn_in + 1];
    EXPECT_EQ(a.count(), 1u);
    EXPECT_EQ(b.count(), 1u);
    EXPECT_FALSE(a == b);
}

TEST(RelativeValueIteration, ReferenceStateStaysAtZero) {
    const auto caches = build_caches({scalar_system(1.1, 1.0), scalar_system(0.7, 2.0)});
    MdpConfig cfg;
    cfg.tau_max = 8;
    const auto sol = relative_value_iteration(caches, FairnessParam(1.0), 1, cfg);
    EXPECT_EQ(sol.values.value({0, 0}), 0.0);
    for (double v : sol.values.values) {
        EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(RelativeValueIteration, FlagsExhaustedSweeps) {
    const auto caches = build_caches({scalar_system(1.1, 1.0), scalar_system(0.7, 2.0)});
    MdpConfig cfg;
    cfg.tau_max = 8;
    cfg.max_sweeps = 2;
    const auto sol = relative_value_iteration(caches, FairnessParam(0.0), 1, cfg);
    EXPECT_FALSE(sol.values.converged);
    EXPECT_EQ(sol.values.sweeps, 2u);
    EXPECT_GT(sol.values.last_span, 0.0);
}

TEST(RelativeValueIteration, RejectsTruncationTooShortForRoundRobin) {
    const auto caches = build_caches(fixtures::case1_systems());
    MdpConfig cfg;
    cfg.tau_max = 2;
    EXPECT_THROW(relative_value_iteration(caches, FairnessParam(0.0), 2, cfg),
                 std::invalid_argument);
}

TEST(RelativeValueIteration, PolicyActionsAreFeasible) {
    const auto caches = build_caches({scalar_system(1.2, 1.0), scalar_system(0.9, 1.0),
                                      scalar_system(1.05, 3.0)});
    MdpConfig cfg;
    cfg.tau_max = 6;
    const auto sol = relative_value_iteration(caches, FairnessParam(0.5), 1, cfg);
    ASSERT_EQ(sol.policy.choice.size(), sol.policy.space.size());
    for (auto c : sol.policy.choice) {
        EXPECT_LE(sol.policy.actions.at(c).count(), 1u);
    }
}

TEST(RolloutPolicy, SingleSensorConstantState) {
    const auto caches = build_caches({fixtures::case1_systems()[0]});
    const FairnessParam fp(1.0);
    MdpConfig cfg;
    cfg.tau_max = 4;
    const auto sol = relative_value_iteration(caches, fp, 1, cfg);
    const auto costs = tabulate_stage_costs(caches, fp, cfg.tau_max);
    const auto ro = rollout_policy(sol.policy, costs, {0}, 50);
    for (const auto& s : ro.states) {
        EXPECT_EQ(s, HoldingState{0});
    }
    EXPECT_NEAR(ro.running_average.back(), fair_cost(caches[0].trace(0), fp), 1e-9);
}

TEST(RolloutPolicy, EntersCycleWithinStateCount) {
    const auto caches = build_caches({scalar_system(1.2, 1.0), scalar_system(0.9, 1.0),
                                      scalar_system(1.05, 3.0)});
    MdpConfig cfg;
    cfg.tau_max = 5;
    const FairnessParam fp(2.0);
    const auto sol = relative_value_iteration(caches, fp, 1, cfg);
    const auto costs = tabulate_stage_costs(caches, fp, cfg.tau_max);
    const std::size_t states = sol.policy.space.size();
    const auto ro = rollout_policy(sol.policy, costs, {0, 0, 0}, 3 * states);
    const auto period = detect_period(ro.actions);
    ASSERT_TRUE(period.has_value());
    EXPECT_LE(period->burn_in + period->length, states);
}

TEST(DetectPeriod, Examples) {
    EXPECT_EQ(detect_period(repeat({mask({1})}, 20)), (Period{0, 1}));
    EXPECT_EQ(detect_period(repeat({mask({0}), mask({1})}, 10)), (Period{0, 2}));
    const auto with_prefix = repeat({mask({1, 0}), mask({0, 1}), mask({0, 1})}, 5,
                                    {mask({0, 0}), mask({1, 1})});
    EXPECT_EQ(detect_period(with_prefix), (Period{2, 3}));
}

TEST(DetectPeriod, NoneWhenTailTooShort) {
    ScheduleSequence seq;
    for (int k = 0; k < 10; ++k) {
        seq.push_back(mask({k == 3 ? 1 : 0, (k * k) % 3 == 1 ? 1 : 0}));
    }
    seq.push_back(mask({1, 1}));
    EXPECT_FALSE(detect_period(seq).has_value());
    EXPECT_FALSE(detect_period({}).has_value());
}

TEST(Exports, ScheduleCsvAndValueDump) {
    const auto caches = build_caches({scalar_system(1.1, 1.0), scalar_system(0.7, 2.0)});
    MdpConfig cfg;
    cfg.tau_max = 3;
    const FairnessParam fp(0.0);
    const auto sol = relative_value_iteration(caches, fp, 1, cfg);
    const auto costs = tabulate_stage_costs(caches, fp, cfg.tau_max);
    const auto ro = rollout_policy(sol.policy, costs, {0, 0}, 4);
    std::ostringstream csv;
    write_schedule_csv(csv, ro.actions, ro.stage_costs);
    std::istringstream lines(csv.str());
    std::string header;
    std::getline(lines, header);
    EXPECT_EQ(header, "k,zeta_1,zeta_2,cost");
    std::size_t rows = 0;
    for (std::string l; std::getline(lines, l);) {
        ++rows;
    }
    EXPECT_EQ(rows, 4u);

    std::ostringstream dump;
    write_value_dump(dump, sol);
    std::size_t dump_lines = 0;
    std::istringstream dl(dump.str());
    for (std::string l; std::getline(dl, l);) {
        if (!l.empty() && l[0] == '(') {
            ++dump_lines;
        }
    }
    EXPECT_EQ(dump_lines, 16u);
}
