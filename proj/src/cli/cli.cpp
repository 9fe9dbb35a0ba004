#include "sassopt/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sassopt/microbench.hpp"

namespace sassopt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Bad input: missing files, unparsable SASS, inconsistent flags.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  if (!fs::is_regular_file(path)) throw UsageError("no such file: " + path);
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Kernel load_kernel(const std::string& path) {
  const std::string text = read_text(path);
  try {
    return parse_kernel(text);
  } catch (const ParseError& e) {
    throw UsageError(path + ": " + e.what());
  }
}

void setup_logging(bool verbose) {
  auto logger = spdlog::get("sassopt");
  if (!logger) logger = spdlog::stderr_color_mt("sassopt");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
}

struct EvalFlags {
  std::string backend = "sim";
  std::string exec_cmd;
  int warmup = 100;
  int iters = 100;
  std::vector<std::string> latencies;

  void add(CLI::App* app) {
    app->add_option("--backend", backend, "Evaluator: sim or exec")->check(CLI::IsMember({"sim", "exec"}));
    app->add_option("--exec-cmd", exec_cmd, "Executor command; {sass_path}, {warmup}, {iters} are substituted");
    app->add_option("--warmup", warmup, "Executor warmup iterations");
    app->add_option("--iters", iters, "Executor measured iterations");
    app->add_option("--latency", latencies, "Simulator variable latency override, MNEMONIC=CYCLES");
  }

  EvaluatorConfig config() const {
    EvaluatorConfig cfg;
    cfg.backend = backend == "exec" ? Backend::Executor : Backend::Simulator;
    cfg.warmup_iters = warmup;
    cfg.measure_iters = iters;
    cfg.executor_command = exec_cmd;
    for (const auto& l : latencies) {
      auto eq = l.find('=');
      if (eq == std::string::npos) throw UsageError("--latency expects MNEMONIC=CYCLES, got '" + l + "'");
      try {
        cfg.variable_latency_map[l.substr(0, eq)] = std::stoi(l.substr(eq + 1));
      } catch (const std::exception&) {
        throw UsageError("--latency expects MNEMONIC=CYCLES, got '" + l + "'");
      }
    }
    if (cfg.backend == Backend::Executor && exec_cmd.empty()) throw UsageError("--backend exec requires --exec-cmd");
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }

  std::unique_ptr<Evaluator> make() const {
    auto cfg = config();
    if (cfg.backend == Backend::Executor) return std::make_unique<ExecutorEvaluator>(cfg);
    return std::make_unique<SimulatorEvaluator>(cfg);
  }
};

StallCountTable base_table(const std::string& path) {
  if (path.empty()) return StallCountTable::builtin();
  read_text(path);
  return load_stall_table(path);
}

fs::path default_out() {
  if (const char* env = std::getenv(kOutEnvVar); env && *env) return env;
  return "sassopt-out";
}

std::string config_dump(const PPOConfig& c) {
  PolicyCheckpoint tmp;
  tmp.config = c;
  return json::parse(checkpoint_json(tmp))["config"].dump();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"SASS schedule optimizer"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string input, stall_table_path;
  bool as_json = false;

  auto* parse = app.add_subcommand("parse", "Dump the structure of a SASS file");
  parse->add_option("input", input, "SASS file")->required();

  auto* analyze_cmd = app.add_subcommand("analyze", "Run the pre-game analysis");
  analyze_cmd->add_option("input", input, "SASS file")->required();
  analyze_cmd->add_flag("--json", as_json, "Machine-readable output");
  analyze_cmd->add_option("--stall-table", stall_table_path, "Stall table file replacing the builtin one");

  EvalFlags eval;
  bool show_trace = false;
  auto* simulate_cmd = app.add_subcommand("simulate", "Time a kernel with the simulator");
  simulate_cmd->add_option("input", input, "SASS file")->required();
  simulate_cmd->add_flag("--trace", show_trace, "Print the per-instruction timeline");
  simulate_cmd->add_option("--latency", eval.latencies, "Variable latency override, MNEMONIC=CYCLES");

  std::string mutated;
  auto* verify = app.add_subcommand("verify", "Check that a reordered kernel preserves every dependency");
  verify->add_option("original", input, "Original SASS file")->required();
  verify->add_option("mutated", mutated, "Reordered SASS file")->required();
  verify->add_option("--stall-table", stall_table_path, "Stall table file replacing the builtin one");

  PPOConfig ppo;
  ppo.total_steps = 2000;
  std::string out_root, key, device, workload = "default";
  auto* optimize = app.add_subcommand("optimize", "Search for a faster schedule and store it");
  optimize->add_option("input", input, "SASS file")->required();
  eval.add(optimize);
  optimize->add_option("--stall-table", stall_table_path, "Stall table file replacing the builtin one");
  optimize->add_option("--steps", ppo.total_steps, "Environment steps");
  optimize->add_option("--seed", ppo.seed, "Seed");
  optimize->add_option("--episode-len", ppo.episode_length, "Steps per episode");
  optimize->add_option("--lr", ppo.learning_rate, "Learning rate");
  optimize->add_option("--rollout", ppo.rollout_length, "Steps per PPO update");
  optimize->add_option("--minibatch", ppo.minibatch_size, "Minibatch size");
  optimize->add_option("--epochs", ppo.epochs, "Epochs per update");
  optimize->add_option("--gamma", ppo.gamma, "Discount");
  optimize->add_option("--gae-lambda", ppo.gae_lambda, "GAE lambda");
  optimize->add_option("--clip", ppo.clip, "Clip ratio");
  optimize->add_option("--ent-coef", ppo.ent_coef, "Entropy coefficient");
  optimize->add_option("--vf-coef", ppo.vf_coef, "Value coefficient");
  optimize->add_option("--max-grad-norm", ppo.max_grad_norm, "Gradient norm clip");
  optimize->add_option("--out", out_root, std::string("Output root (default $") + kOutEnvVar + " or ./sassopt-out)");
  optimize->add_option("--key", key, "Lookup key (default: input file stem)");
  optimize->add_option("--device", device, "Device tag (default: sim or gpu by backend)");
  optimize->add_option("--workload", workload, "Workload tag");

  auto* lookup = app.add_subcommand("lookup", "Print the stored schedule for a key");
  lookup->add_option("key", key, "KEY or DEVICE/WORKLOAD/KEY")->required();
  lookup->add_option("--device", device, "Device tag");
  lookup->add_option("--workload", workload, "Workload tag");
  lookup->add_option("--out", out_root, "Output root");

  std::string checkpoint_path, trace_out;
  bool sample = false;
  int replay_steps = 32;
  std::uint64_t replay_seed = 0;
  auto* replay_cmd = app.add_subcommand("replay", "Roll out a trained policy and print its trace");
  replay_cmd->add_option("input", input, "SASS file")->required();
  replay_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  replay_cmd->add_option("--seed", replay_seed, "Seed");
  replay_cmd->add_flag("--sample", sample, "Sample actions instead of acting greedily");
  replay_cmd->add_option("--episode-len", replay_steps, "Steps");
  replay_cmd->add_option("--trace-out", trace_out, "Write the trace here instead of stdout");
  replay_cmd->add_option("--stall-table", stall_table_path, "Stall table file replacing the builtin one");
  eval.add(replay_cmd);

  std::vector<std::string> opcodes, planted;
  int ceiling = kMaxEncodableStall;
  std::string table_out;
  auto* microbench = app.add_subcommand("microbench", "Find minimum stall counts with dependent probes");
  microbench->add_option("--opcode", opcodes, "Opcodes to measure (default: every builtin table entry)");
  microbench->add_option("--ground-truth", planted, "Simulator ground truth, MNEMONIC=CYCLES (default: builtin table)");
  microbench->add_option("--ceiling", ceiling, "Highest stall count probed")->check(CLI::Range(0, 15));
  microbench->add_option("--output,-o", table_out, "Table file (default: stdout)");
  microbench->add_option("--exec-cmd", eval.exec_cmd,
                         "Probe runner; exits 0 and prints a time when the stored value matches");

  std::string log_path, plot_dir = ".";
  auto* plot = app.add_subcommand("plot", "Render training-log series to SVG");
  plot->add_option("log", log_path, "train_log.jsonl")->required();
  plot->add_option("--out", plot_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  setup_logging(verbose);

  try {
    if (parse->parsed()) {
      out << dump_structure(load_kernel(input));
      return kExitOk;
    }

    if (analyze_cmd->parsed()) {
      const Kernel k = load_kernel(input);
      const AnalysisReport r = analyze(k, base_table(stall_table_path));
      out << (as_json ? report_json(r) : format_report(r));
      return kExitOk;
    }

    if (simulate_cmd->parsed()) {
      const Kernel k = load_kernel(input);
      SimTrace trace;
      const long total = simulate(k, eval.config(), &trace);
      if (show_trace) out << dump_trace(trace);
      else out << total << "\n";
      return kExitOk;
    }

    if (verify->parsed()) {
      const Kernel a = load_kernel(input);
      const Kernel b = load_kernel(mutated);
      const DataflowVerdict v = verify_dataflow(a, b, base_table(stall_table_path));
      if (v) {
        out << "accepted\n";
        return kExitOk;
      }
      out << "rejected: " << to_string(v.violation) << " between lines " << v.first_line << " and " << v.second_line
          << ": " << v.detail << "\n";
      return kExitFailure;
    }

    if (optimize->parsed()) {
      const Kernel k = load_kernel(input);
      auto evaluator = eval.make();
      try {
        ppo.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      const StoreKey sk{device.empty() ? (eval.backend == "sim" ? "sim" : "gpu") : device, workload,
                        key.empty() ? fs::path(input).stem().string() : key};
      const std::string name = fs::path(input).filename().string();
      auto ctx = make_context(k, base_table(stall_table_path));
      TrainResult res = train(ctx, *evaluator, ppo, name);

      std::string trace;
      if (!res.aborted && ctx->num_actions() > 0) {
        try {
          trace = trace_jsonl(replay(ctx, *evaluator, res.checkpoint, ppo.seed, SelectMode::Greedy, ppo.episode_length).trace);
        } catch (const EvaluatorError& e) {
          res.aborted = e.what();
        }
      }
      json meta = {{"status", res.aborted ? "partial" : "complete"},
                   {"kernel", name},
                   {"kernel_fingerprint", kernel_fingerprint(k)},
                   {"key", sk.str()},
                   {"backend", eval.backend},
                   {"steps", res.steps},
                   {"seed", ppo.seed},
                   {"initial_time", res.initial_time},
                   {"best_time", res.best_time},
                   {"speedup", res.best_time > 0 ? res.initial_time / res.best_time : 0.0},
                   {"config", json::parse(config_dump(ppo))}};
      if (res.aborted) meta["error"] = *res.aborted;
      StoredArtifacts arts{serialize_kernel(res.best_kernel), checkpoint_json(res.checkpoint), log_jsonl(res.log), trace,
                           meta.dump(1) + "\n"};
      const fs::path dir = store_artifacts(out_root.empty() ? default_out() : fs::path(out_root), sk, arts);
      if (res.aborted) {
        err << "error: evaluator failed: " << *res.aborted << "\npartial artifacts stored in " << dir.string() << "\n";
        return kExitFailure;
      }
      out << "stored " << sk.str() << " in " << dir.string() << "\n";
      out << "initial " << res.initial_time << " best " << res.best_time << " after " << res.steps << " steps\n";
      return kExitOk;
    }

    if (lookup->parsed()) {
      const fs::path root = out_root.empty() ? default_out() : fs::path(out_root);
      StoreKey wanted;
      if (auto full = parse_store_key(key)) wanted = *full;
      else wanted = StoreKey{device.empty() ? "sim" : device, workload, key};
      const fs::path path = wanted.dir(root) / kScheduleFile;
      if (fs::is_regular_file(path)) {
        out << path.string() << "\n";
        return kExitOk;
      }
      const auto keys = list_store(root);
      err << "error: no stored schedule for " << wanted.str() << " under " << root.string() << "\n";
      if (keys.empty()) {
        err << "no keys stored\n";
      } else {
        err << "did you mean:";
        for (const auto& k : nearest_keys(keys, wanted)) err << " " << k.str();
        err << "\navailable keys:\n";
        for (const auto& k : keys) err << "  " << k.str() << "\n";
      }
      return kExitFailure;
    }

    if (replay_cmd->parsed()) {
      const Kernel k = load_kernel(input);
      read_text(checkpoint_path);
      const PolicyCheckpoint ck = load_checkpoint(checkpoint_path);
      auto evaluator = eval.make();
      auto ctx = make_context(k, base_table(stall_table_path));
      const ReplayResult r = replay(ctx, *evaluator, ck, replay_seed, sample ? SelectMode::Sample : SelectMode::Greedy,
                                    replay_steps);
      const std::string text = trace_jsonl(r.trace);
      if (trace_out.empty()) out << text;
      else write_text(trace_out, text);
      std::size_t lingering = 0;
      for (const auto& t : r.trace) lingering += t.lingering ? 1 : 0;
      err << "final " << r.final_time << " best " << r.best_time << " initial " << ck.best_time << " (checkpoint best); "
          << lingering << " lingering steps\n";
      return kExitOk;
    }

    if (microbench->parsed()) {
      const StallCountTable builtin = StallCountTable::builtin();
      ProbeOracle oracle;
      if (!eval.exec_cmd.empty()) {
        EvaluatorConfig cfg;
        cfg.backend = Backend::Executor;
        cfg.executor_command = eval.exec_cmd;
        oracle = [cfg](const Kernel& probe) {
          try {
            execute_external(probe, cfg);
            return true;
          } catch (const EvaluatorError&) {
            return false;
          }
        };
      } else {
        EvaluatorConfig cfg;
        if (planted.empty()) {
          for (const auto& [m, e] : builtin.entries()) cfg.fixed_latency_map[m] = e.cycles;
        }
        for (const auto& p : planted) {
          auto eq = p.find('=');
          if (eq == std::string::npos) throw UsageError("--ground-truth expects MNEMONIC=CYCLES, got '" + p + "'");
          cfg.fixed_latency_map[p.substr(0, eq)] = std::stoi(p.substr(eq + 1));
        }
        oracle = simulator_oracle(cfg);
      }
      if (opcodes.empty()) {
        for (const auto& [m, _] : builtin.entries()) opcodes.push_back(m);
      }
      for (const auto& op : opcodes) {
        try {
          probe_template(op);
        } catch (const MicrobenchError& e) {
          throw UsageError(e.what());
        }
      }
      const StallCountTable t = microbench_table(opcodes, oracle, ceiling);
      std::ostringstream os;
      write_stall_table(os, t);
      if (table_out.empty()) out << os.str();
      else write_text(table_out, os.str());
      return kExitOk;
    }

    if (plot->parsed()) {
      const auto log = parse_log_jsonl(read_text(log_path));
      std::vector<double> steps, kl, ent, ret_x, ret;
      for (const auto& r : log) {
        steps.push_back(static_cast<double>(r.step));
        kl.push_back(r.approx_kl);
        ent.push_back(r.entropy);
        if (r.episodic_return) {
          ret_x.push_back(static_cast<double>(r.step));
          ret.push_back(*r.episodic_return);
        }
      }
      const fs::path dir = plot_dir;
      fs::create_directories(dir);
      const std::pair<const char*, std::string> files[] = {
          {"episodic_return.svg", render_svg("episodic return", ret_x, ret)},
          {"approx_kl.svg", render_svg("approximate KL", steps, kl)},
          {"entropy.svg", render_svg("policy entropy", steps, ent)},
      };
      for (const auto& [name, svg] : files) {
        write_text(dir / name, svg);
        out << (dir / name).string() << "\n";
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace sassopt
