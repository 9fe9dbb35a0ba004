#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>
#include <random>

#include "sassopt/evaluators.hpp"
#include "support.hpp"

using namespace sassopt;
using sassopt::testing::load_corpus;

namespace {

long sim(const std::string& text, const EvaluatorConfig& cfg = {}) { return simulate(parse_kernel(text), cfg); }

std::vector<std::size_t> identity(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST(Simulator, BarrierWaitAfterLoad) {
  const Kernel k = parse_kernel(
      "[B------:R-:W0:-:S02] LDG.E R4, [R2.64] ;\n"
      "[B0-----:R-:W-:-:S04] IADD3 R5, R4, 0x1, RZ ;\n");
  SimTrace trace;
  const long total = simulate(k, EvaluatorConfig{}, &trace);
  ASSERT_EQ(trace.records.size(), 2u);
  EXPECT_EQ(trace.records[0].issue, 0);
  EXPECT_EQ(trace.records[0].completion, 202);
  EXPECT_EQ(trace.records[1].issue, 202);
  EXPECT_EQ(trace.records[1].barrier_stall, 200);
  EXPECT_EQ(trace.records[1].waited_barriers, std::vector<int>{0});
  EXPECT_EQ(total, 206);
}

TEST(Simulator, StallCountsAddUp) {
  EXPECT_EQ(sim("[B------:R-:W-:-:S04] IADD3 R1, R0, 0x1, RZ ;\n"
                "[B------:R-:W-:-:S04] IADD3 R2, R0, 0x1, RZ ;\n"
                "[B------:R-:W-:-:S04] IADD3 R3, R0, 0x1, RZ ;\n"),
            12);
  EXPECT_EQ(sim(""), 0);
}

TEST(Simulator, HoistingLoadReducesCycles) {
  // Hand trace: the consumer waits for the load, so every cycle the load
  // issues earlier comes straight off the total.
  const Kernel k = load_corpus("hoist5.sass");
  EXPECT_EQ(simulate(k, {}), 219);
  EXPECT_EQ(simulate(k.permuted({0, 1, 3, 2, 4}), {}), 215);
  EXPECT_EQ(simulate(k.permuted({0, 3, 1, 2, 4}), {}), 211);
}

TEST(Simulator, ReadBarrierReleasesEarly) {
  const std::string text =
      "[B------:R-:W-:-:S04] IADD3 R9, R0, 0x1, RZ ;\n"
      "[B------:R0:W-:-:S02] STS [R9], R5 ;\n"
      "[B0-----:R-:W-:-:S04] MOV R5, 0x0 ;\n";
  EXPECT_EQ(sim(text), 4 + 2 + 8 + 4);
  EvaluatorConfig cfg;
  cfg.read_barrier_latency = 20;
  EXPECT_EQ(sim(text, cfg), 4 + 2 + 20 + 4);
}

TEST(Simulator, LatencyMapOverridesByMnemonicThenRoot) {
  const std::string text =
      "[B------:R-:W0:-:S01] LDG.E.64 R4, [R2.64] ;\n"
      "[B0-----:R-:W-:-:S01] IADD3 R6, R4, R5, RZ ;\n";
  EvaluatorConfig cfg;
  cfg.variable_latency_map = {{"LDG", 100}};
  EXPECT_EQ(sim(text, cfg), 1 + 100 + 1);
  cfg.variable_latency_map = {{"LDG", 100}, {"LDG.E.64", 40}};
  EXPECT_EQ(sim(text, cfg), 1 + 40 + 1);
  cfg.variable_latency_map = {};
  cfg.default_variable_latency = 10;
  EXPECT_EQ(sim(text, cfg), 1 + 10 + 1);
}

TEST(Simulator, WaitOnUnsetBarrierIsAnError) {
  EXPECT_THROW(sim("[B--2---:R-:W-:-:S04] IADD3 R1, R0, 0x1, RZ ;\n"), SimulationError);
}

TEST(Simulator, ReportsHazardsAgainstGroundTruth) {
  const std::string text =
      "[B------:R-:W-:-:S02] IADD3 R4, R0, 0x1, RZ ;\n"
      "[B------:R-:W-:-:S04] STG.E [R2.64], R4 ;\n";
  EvaluatorConfig cfg;
  cfg.fixed_latency_map = {{"IADD3", 4}};
  SimTrace trace;
  simulate(parse_kernel(text), cfg, &trace);
  ASSERT_EQ(trace.hazards.size(), 1u);
  EXPECT_EQ(trace.hazards[0].producer, 0u);
  EXPECT_EQ(trace.hazards[0].consumer, 1u);
  EXPECT_EQ(trace.hazards[0].separation, 2);
  EXPECT_EQ(trace.hazards[0].required, 4);
  cfg.fixed_latency_map = {{"IADD3", 2}};
  simulate(parse_kernel(text), cfg, &trace);
  EXPECT_TRUE(trace.hazards.empty());
}

TEST(Simulator, IssueCyclesStrictlyIncrease) {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    SimTrace trace;
    simulate(parse_kernel(sassopt::testing::random_kernel(seed).text), {}, &trace);
    for (std::size_t i = 1; i < trace.records.size(); ++i)
      EXPECT_GT(trace.records[i].issue, trace.records[i - 1].issue) << "seed " << seed;
  }
}

TEST(Simulator, NopNeverShortensAndAddsExactlyWithoutBarriers) {
  std::mt19937_64 rng(11);
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const auto sk = sassopt::testing::random_kernel(seed);
    const Kernel k = parse_kernel(sk.text);
    const long base = simulate(k, {});
    std::vector<std::string> lines;
    std::istringstream in(sk.text);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    const std::size_t at = std::uniform_int_distribution<std::size_t>(0, lines.size() - 1)(rng);
    const int s = std::uniform_int_distribution<int>(1, 15)(rng);
    char nop[64];
    std::snprintf(nop, sizeof nop, "[B------:R-:W-:-:S%02d] NOP ;", s);
    lines.insert(lines.begin() + static_cast<long>(at), nop);
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    EXPECT_GE(simulate(parse_kernel(text), {}), base) << "seed " << seed;
  }
  const std::string plain =
      "[B------:R-:W-:-:S04] IADD3 R1, R0, 0x1, RZ ;\n"
      "[B------:R-:W-:-:S03] MOV R2, 0x1 ;\n";
  for (int s = 1; s <= 15; ++s) {
    char nop[64];
    std::snprintf(nop, sizeof nop, "[B------:R-:W-:-:S%02d] NOP ;\n", s);
    EXPECT_EQ(sim(plain + nop), sim(plain) + s);
  }
}

TEST(Simulator, DumpTraceHasOneLinePerInstruction) {
  SimTrace trace;
  simulate(load_corpus("one_ldg.sass"), {}, &trace);
  const std::string dump = dump_trace(trace);
  EXPECT_EQ(std::count(dump.begin(), dump.end(), '\n'), 10 + 2);
  EXPECT_NE(dump.find("# total 239"), std::string::npos);
}

TEST(SimulatorEvaluator, MeasuresSimulatedCycles) {
  SimulatorEvaluator ev;
  EXPECT_EQ(ev.measure(load_corpus("one_ldg.sass")), 239.0);
  EXPECT_TRUE(ev.concurrent());
}

class ExecutorTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("sassopt-exec-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(dir_);
    std::filesystem::create_directories(dir_);
    cfg_.backend = Backend::Executor;
    cfg_.work_dir = dir_;
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::filesystem::path dir_;
  EvaluatorConfig cfg_;
};

TEST_F(ExecutorTest, EchoStub) {
  cfg_.executor_command = "echo 42.0";
  EXPECT_EQ(execute_external(load_corpus("one_ldg.sass"), cfg_), 42.0);
}

TEST_F(ExecutorTest, SubstitutesPlaceholders) {
  cfg_.executor_command = "test -f {sass_path} && test {warmup} = 3 && echo {iters}";
  cfg_.warmup_iters = 3;
  cfg_.measure_iters = 17;
  EXPECT_EQ(execute_external(load_corpus("one_ldg.sass"), cfg_), 17.0);
  EXPECT_TRUE(std::filesystem::is_empty(dir_));
}

TEST_F(ExecutorTest, KernelTextReachesCommand) {
  cfg_.executor_command = "grep -c ' ;$' {sass_path}";
  EXPECT_EQ(execute_external(load_corpus("one_ldg.sass"), cfg_), 10.0);
}

TEST_F(ExecutorTest, FailureCarriesDiagnostics) {
  cfg_.executor_command = "sh -c 'echo launch failed >&2; exit 1'";
  try {
    execute_external(load_corpus("one_ldg.sass"), cfg_);
    FAIL() << "expected EvaluatorError";
  } catch (const EvaluatorError& e) {
    EXPECT_NE(std::string(e.what()).find("status 1"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("launch failed"), std::string::npos) << e.what();
  }
}

TEST_F(ExecutorTest, RejectsUnparsableOutput) {
  cfg_.executor_command = "echo fast";
  EXPECT_THROW(execute_external(load_corpus("one_ldg.sass"), cfg_), EvaluatorError);
  cfg_.executor_command = "echo -3";
  EXPECT_THROW(execute_external(load_corpus("one_ldg.sass"), cfg_), EvaluatorError);
  cfg_.executor_command = "";
  EXPECT_THROW(execute_external(load_corpus("one_ldg.sass"), cfg_), EvaluatorError);
}

TEST_F(ExecutorTest, VarianceWarningAboveOnePercent) {
  const auto counter = (dir_ / "n").string();
  cfg_.executor_command =
      "sh -c 'n=$(cat " + counter + " 2>/dev/null || echo 0); echo $((n+1)) > " + counter + "; echo $((100 + 5*n))'";
  ExecutorEvaluator ev(cfg_);
  const Kernel k = load_corpus("one_ldg.sass");
  EXPECT_EQ(ev.measure(k), 100.0);
  EXPECT_EQ(ev.variance_warnings(), 0u);
  EXPECT_EQ(ev.measure(k), 105.0);
  EXPECT_EQ(ev.variance_warnings(), 1u);

  cfg_.executor_command = "echo 100.5";
  ExecutorEvaluator steady(cfg_);
  steady.measure(k);
  steady.measure(k);
  EXPECT_EQ(steady.variance_warnings(), 0u);
}

TEST(EvaluatorConfig, RejectsNonPositiveIterations) {
  EvaluatorConfig cfg;
  cfg.measure_iters = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Oracle, IdentityAccepted) {
  for (const auto& p : sassopt::testing::corpus_files()) {
    const Kernel k = parse_kernel(sassopt::testing::read_file(p));
    EXPECT_TRUE(verify_dataflow(k, k, StallCountTable::builtin())) << p;
  }
}

TEST(Oracle, DefUseSwapRejectedWithRegisterAndLines) {
  const Kernel k = parse_kernel(
      "[B------:R-:W-:-:S04] IADD3 R4, R0, 0x1, RZ ;\n"
      "[B------:R-:W-:-:S04] MOV R7, 0x1 ;\n"
      "[B------:R-:W-:-:S02] STG.E [R2.64], R4 ;\n");
  const DataflowVerdict v = verify_permutation(k, {2, 0, 1}, StallCountTable::builtin());
  EXPECT_FALSE(v);
  EXPECT_EQ(v.violation, Violation::RegisterOrder);
  ASSERT_TRUE(v.reg);
  EXPECT_EQ(to_string(*v.reg), "R4");
  EXPECT_EQ(v.first_line, 1u);
  EXPECT_EQ(v.second_line, 3u);
}

TEST(Oracle, BarrierSetterOrderRejected) {
  const Kernel k = parse_kernel(
      "[B------:R-:W0:-:S02] LDG.E R4, [R2.64] ;\n"
      "[B0-----:R-:W-:-:S04] STS [R9], R5 ;\n");
  const DataflowVerdict v = verify_permutation(k, {1, 0}, StallCountTable::builtin());
  EXPECT_EQ(v.violation, Violation::BarrierOrder);
}

TEST(Oracle, StallSeparationRejected) {
  const Kernel k = load_corpus("stall_walk.sass");
  const DataflowVerdict v = verify_permutation(k, {0, 1, 2, 4, 3}, StallCountTable::builtin());
  EXPECT_EQ(v.violation, Violation::StallSeparation);
  const Kernel ok = load_corpus("stall_walk_ok.sass");
  EXPECT_TRUE(verify_permutation(ok, {0, 1, 2, 4, 3}, StallCountTable::builtin()));
}

TEST(Oracle, BlockMembershipRejected) {
  const Kernel k = load_corpus("label_denylist.sass");
  auto order = identity(k.num_instructions());
  std::swap(order[2], order[3]);
  EXPECT_EQ(verify_permutation(k, order, StallCountTable::builtin()).violation, Violation::BlockMembership);
}

TEST(Oracle, LdgstsRunOrderRejected) {
  const Kernel k = load_corpus("ldgsts_runs.sass");
  auto order = identity(k.num_instructions());
  std::swap(order[0], order[2]);
  EXPECT_EQ(verify_permutation(k, order, StallCountTable::builtin()).violation, Violation::LdgstsGroupOrder);
}

TEST(Oracle, MutatedMustBePermutation) {
  const Kernel k = load_corpus("one_ldg.sass");
  const Kernel other = load_corpus("hoist5.sass");
  EXPECT_THROW(verify_dataflow(k, other, StallCountTable::builtin()), StructuralError);
  EXPECT_THROW(verify_permutation(k, {0, 0, 1, 2, 3, 4, 5, 6, 7, 8}, StallCountTable::builtin()), StructuralError);
}

TEST(Oracle, IdenticalInstructionsAreInterchangeable) {
  // Rows 0 and 3 print identically but lead different runs.
  const Kernel k = parse_kernel(
      "[B------:R-:W-:-:S04] LDGSTS.E.BYPASS.128 [R60+0x4000], desc[UR4][R48.64] ;\n"
      "[B------:R-:W-:-:S04] LDGSTS.E.BYPASS.128 [R60+0x4800], desc[UR4][R34.64] ;\n"
      "[B------:R-:W-:-:S04] IADD3 R9, R0, 0x1, RZ ;\n"
      "[B------:R-:W-:-:S04] LDGSTS.E.BYPASS.128 [R60+0x4000], desc[UR4][R48.64] ;\n"
      "[B------:R-:W-:-:S04] LDGSTS.E.BYPASS.128 [R60+0x4800], desc[UR4][R36.64] ;\n");
  EXPECT_TRUE(verify_permutation(k, {3, 4, 0, 1, 2}, StallCountTable::builtin()));
  EXPECT_FALSE(verify_permutation(k, {0, 4, 3, 1, 2}, StallCountTable::builtin()));
  EXPECT_TRUE(verify_dataflow(k, k.permuted({3, 4, 0, 1, 2}), StallCountTable::builtin()));
}
