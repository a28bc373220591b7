#include "fairsched/config.hpp"
#include "fairsched/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace fairsched;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigDir = FAIRSCHED_CONFIG_DIR;

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("fairsched_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const char* kTwoSensor = R"({
  "case": "activation",
  "Z": 1,
  "q_values": [0, 2],
  "method": "all",
  "mdp": {"tau_max": 6},
  "greedy": {"horizon": 200},
  "systems": [
    {"label": "a", "A": [[1.2]], "C": [[1]], "Q": [[1]], "R": [[1]]},
    {"label": "b", "A": [[0.5]], "C": [[1]], "Q": [[2]], "R": [[1]]}
  ]
}
)";

// Expects a ConfigError whose message contains every fragment.
void expect_error(const std::string& text, std::initializer_list<const char*> fragments) {
    try {
        parse_config_text(text, "cfg.json");
        ADD_FAILURE() << "no error for:\n" << text;
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        for (const char* f : fragments) {
            EXPECT_NE(msg.find(f), std::string::npos) << "'" << f << "' not in: " << msg;
        }
    }
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
    const auto pos = text.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    return text.replace(pos, from.size(), to);
}

}  // namespace

TEST(ParseConfig, RateCaseShippedConfig) {
    const auto cfg = parse_config(kConfigDir / "case1_rate.json");
    EXPECT_EQ(cfg.experiment_case, ExperimentCase::rate);
    ASSERT_EQ(cfg.systems.size(), 5u);
    EXPECT_EQ(cfg.budget, 2.0);
    EXPECT_EQ(cfg.highlight_q, (std::vector<double>{0, 0.5, 2, 20}));
    for (double q : cfg.highlight_q) {
        EXPECT_NE(std::find(cfg.q_values.begin(), cfg.q_values.end(), q), cfg.q_values.end());
    }
    EXPECT_EQ(cfg.systems[2].A(0, 1), 1.0);
    EXPECT_EQ(cfg.systems[4].Q(0, 0), 0.3);
}

TEST(ParseConfig, ActivationCaseShippedConfig) {
    const auto cfg = parse_config(kConfigDir / "case2_activation.json");
    EXPECT_EQ(cfg.experiment_case, ExperimentCase::activation);
    EXPECT_EQ(cfg.activation_budget(), 2u);
    ASSERT_EQ(cfg.systems.size(), 5u);
    EXPECT_EQ(cfg.systems[2].A(0, 0), 1.1);
    EXPECT_EQ(cfg.systems[2].A(0, 1), 0.0);
    EXPECT_EQ(cfg.systems[2].Q, Matrix::Identity(2, 2));
    EXPECT_EQ(cfg.systems[2].R, 10 * Matrix::Identity(2, 2));
    EXPECT_EQ(cfg.systems[4].Q(0, 0), 2.0);
    EXPECT_EQ(cfg.systems[4].Q(1, 1), 8.0);
    EXPECT_EQ(cfg.systems[4].R, 5 * Matrix::Identity(2, 2));
    EXPECT_GE(cfg.mdp.tau_max, 12u);
}

TEST(ParseConfig, RoundTripIsIdentity) {
    for (const char* name : {"case1_rate.json", "case2_activation.json"}) {
        const auto cfg = parse_config(kConfigDir / name);
        const auto text = serialize_config(cfg);
        const auto again = parse_config_text(text);
        EXPECT_TRUE(cfg == again) << name;
        EXPECT_EQ(serialize_config(again), text);
    }
    const auto small = parse_config_text(kTwoSensor);
    EXPECT_TRUE(parse_config_text(serialize_config(small)) == small);
}

TEST(ParseConfig, NonPsdQIsRejectedWithFieldAndLine) {
    const auto text = replace(kTwoSensor, R"("Q": [[2]])", R"("Q": [[-2]])");
    expect_error(text, {"cfg.json:10:", "/systems/1/Q", "not positive semidefinite"});
}

TEST(ParseConfig, NonPdMeasurementNoiseIsRejected) {
    const auto text = replace(kTwoSensor, R"("R": [[1]]})", R"("R": [[0]]})");
    expect_error(text, {"cfg.json:9:", "/systems/0/R", "not positive definite"});
}

TEST(ParseConfig, NegativeQIsRejected) {
    expect_error(replace(kTwoSensor, "[0, 2]", "[0, -2]"), {"cfg.json:4:", "/q_values/1", ">= 0"});
}

TEST(ParseConfig, MissingFieldIsNamed) {
    expect_error(replace(kTwoSensor, R"("Z": 1,)", ""), {"missing required field 'Z'"});
    expect_error(replace(kTwoSensor, R"("C": [[1]], )", ""), {"/systems/0", "'C'"});
}

TEST(ParseConfig, DimensionMismatchIsRejected) {
    expect_error(replace(kTwoSensor, R"("C": [[1]], "Q": [[2]])", R"("C": [[1, 0]], "Q": [[2]])"),
                 {"/systems/1/C", "C must be"});
    expect_error(replace(kTwoSensor, R"("A": [[1.2]])", R"("A": [[1.2, 0], [0]])"),
                 {"/systems/0/A/1", "row has 1 entries"});
}

TEST(ParseConfig, SyntaxErrorReportsLineAndColumn) {
    expect_error(replace(kTwoSensor, R"("Z": 1,)", R"("Z": 1)"), {"cfg.json:4:", "syntax error"});
}

TEST(ParseConfig, UnknownFieldAndBadEnumsAreRejected) {
    expect_error(replace(kTwoSensor, R"("tau_max")", R"("taumax")"), {"cfg.json:6:", "/mdp/taumax"});
    expect_error(replace(kTwoSensor, R"("method": "all")", R"("method": "lp")"), {"/method"});
    expect_error(replace(kTwoSensor, R"("activation")", R"("hybrid")"), {"/case"});
    expect_error(replace(kTwoSensor, R"("Z": 1)", R"("Z": 0)"), {"/Z"});
    expect_error(replace(kTwoSensor, R"("Z": 1)", R"("R_total": 1)"), {"does not apply"});
}

TEST(ParseConfig, MissingFileIsAConfigError) {
    EXPECT_THROW(parse_config(kConfigDir / "does_not_exist.json"), ConfigError);
}

TEST(RunExperiment, WritesArtifactsInStableLayout) {
    auto cfg = parse_config_text(kTwoSensor);
    cfg.output = scratch_dir("layout").string();
    const auto res = run_experiment(cfg);
    EXPECT_TRUE(res.all_converged);
    ASSERT_EQ(res.rows.size(), 4u);
    const fs::path base = fs::path(cfg.output) / "activation";
    for (const char* m : {"mdp", "greedy"}) {
        for (const char* q : {"q=0", "q=2"}) {
            EXPECT_TRUE(fs::exists(base / m / q / "report.csv")) << m << q;
            EXPECT_TRUE(fs::exists(base / m / q / "schedule.csv")) << m << q;
        }
    }
    EXPECT_TRUE(fs::exists(base / "summary.csv"));
    for (const auto& row : res.rows) {
        EXPECT_GE(row.report.relative_performance, 1.0 - 1e-3) << row.report.method;
    }
    std::ostringstream os;
    print_summary(os, cfg, res);
    EXPECT_NE(os.str().find("relative"), std::string::npos);
}

TEST(RunExperiment, ByteIdenticalAcrossRuns) {
    auto cfg = parse_config_text(kTwoSensor);
    const fs::path a = scratch_dir("repro_a");
    const fs::path b = scratch_dir("repro_b");
    cfg.output = a.string();
    run_experiment(cfg);
    cfg.output = b.string();
    run_experiment(cfg);
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) {
            continue;
        }
        const auto rel = fs::relative(entry.path(), a);
        EXPECT_EQ(read_file(entry.path()), read_file(b / rel)) << rel;
        ++compared;
    }
    EXPECT_GE(compared, 9u);
}

TEST(RunExperiment, RateCaseWritesTraceAndRates) {
    auto cfg = parse_config(kConfigDir / "case1_rate.json");
    cfg.q_values = {0.5};
    cfg.output = scratch_dir("rate").string();
    const auto res = run_experiment(cfg);
    EXPECT_TRUE(res.all_converged);
    const fs::path dir = fs::path(cfg.output) / "rate" / "subgradient" / "q=0.5";
    EXPECT_TRUE(fs::exists(dir / "trace.csv"));
    EXPECT_TRUE(fs::exists(dir / "rates.csv"));
    EXPECT_EQ(read_file(dir / "trace.csv").substr(0, 39), "iter,objective,violation_norm,step_size");
}

TEST(RunExperiment, SingleSensorIsTrivial) {
    const std::string text = R"({
      "case": "rate", "R_total": 1, "q_values": [0, 3],
      "systems": [{"A": [[1.3]], "C": [[1]], "Q": [[1]], "R": [[1]]}]
    })";
    auto cfg = parse_config_text(text);
    cfg.output = scratch_dir("single").string();
    const auto res = run_experiment(cfg);
    ASSERT_EQ(res.rows.size(), 2u);
    const auto rates = read_file(fs::path(cfg.output) / "rate" / "subgradient" / "q=3" / "rates.csv");
    EXPECT_NE(rates.find("1,sensor1,1,0,1,"), std::string::npos) << rates;

    cfg.experiment_case = ExperimentCase::activation;
    cfg.method = Method::all;
    cfg.mdp.tau_max = 3;
    cfg.greedy.horizon = 20;
    cfg.rollout_horizon = 20;
    const auto act = run_experiment(cfg);
    for (const auto& row : act.rows) {
        EXPECT_EQ(row.report.period, (Period{0, 1})) << row.report.method;
        EXPECT_NEAR(row.report.relative_performance, 1.0, 1e-9);
    }
}

TEST(RunExperiment, NonConvergenceIsReportedAndArtifactsKept) {
    auto cfg = parse_config_text(kTwoSensor);
    cfg.mdp.max_sweeps = 1;
    cfg.output = scratch_dir("nonconv").string();
    const auto res = run_experiment(cfg);
    EXPECT_FALSE(res.all_converged);
    EXPECT_TRUE(fs::exists(fs::path(cfg.output) / "activation" / "mdp" / "q=0" / "report.csv"));
}

TEST(FormatQ, ShortestRoundTrip) {
    EXPECT_EQ(format_q(0.0), "0");
    EXPECT_EQ(format_q(0.5), "0.5");
    EXPECT_EQ(format_q(20.0), "20");
}
