#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "warprnn/csv.hpp"
#include "warprnn/tasks.hpp"
#include "warprnn/train.hpp"

namespace warprnn {

// Everything the command line can express. `cfg` is the experiment
// description; the remaining fields steer the non-training subcommands.
struct CliConfig {
  std::string subcommand;
  TrainConfig cfg;
  std::string warp_mode = "uniform";
  std::int64_t seq_len = 500;      // warp/pad sequence length
  std::int64_t runs = 5;
  std::string export_path;
  std::string config_path;
  // gradcheck
  std::string gc_arch;             // empty: all architectures
  std::int64_t gc_hidden = 8;
  std::int64_t gc_seq_len = 12;
};

namespace detail {

inline void add_task_flags(CLI::App* sub, CliConfig& c) {
  static const std::map<std::string, TaskKind> task_map{
      {"warp", TaskKind::warp},
      {"pad", TaskKind::pad},
      {"copy", TaskKind::copy_task},
      {"varcopy", TaskKind::varcopy},
      {"adding", TaskKind::adding}};
  sub->add_option("--task", c.cfg.task, "benchmark task")
      ->transform(CLI::CheckedTransformer(task_map));
  sub->add_option("--warp-mode", c.warp_mode, "warp draw mode")
      ->check(CLI::IsMember({"uniform", "variable"}));
  sub->add_option("--max-warp", c.cfg.warp.max_warp,
                  "largest warp/pad factor");
  sub->add_option("--T", c.cfg.T, "copy/varcopy/adding length parameter");
  sub->add_option("--seq-len", c.seq_len, "warp/pad sequence length");
  sub->add_option("--seed", c.cfg.seed, "master RNG seed");
}

inline void add_train_flags(CLI::App* sub, CliConfig& c) {
  static const std::map<std::string, Arch> arch_map{
      {"rnn", Arch::rnn},
      {"leaky", Arch::leaky},
      {"gated", Arch::gated},
      {"lstm", Arch::lstm}};
  static const std::map<std::string, InitPolicy::Kind> init_map{
      {"default", InitPolicy::Kind::none},
      {"standard", InitPolicy::Kind::standard},
      {"chrono", InitPolicy::Kind::chrono},
      {"gate-range", InitPolicy::Kind::gate_range},
      {"heavy-tail", InitPolicy::Kind::heavy_tail}};
  sub->add_option("--arch", c.cfg.arch, "recurrent architecture")
      ->transform(CLI::CheckedTransformer(arch_map));
  sub->add_option("--init", c.cfg.init.kind, "bias initialization policy")
      ->transform(CLI::CheckedTransformer(init_map));
  sub->add_option("--t-max", c.cfg.init.t_max,
                  "upper forgetting-time bound (chrono / gate-range)");
  sub->add_option("--t-min", c.cfg.init.t_min,
                  "lower forgetting-time bound (gate-range)");
  sub->add_option("--forget-bias", c.cfg.init.forget_bias,
                  "constant forget bias (standard init)");
  sub->add_option("--hidden", c.cfg.hidden, "hidden units");
  sub->add_option("--batch", c.cfg.batch, "batch size");
  sub->add_option("--lr", c.cfg.lr, "learning rate");
  sub->add_option("--rho", c.cfg.rho, "RMSprop decay");
  sub->add_option("--eps", c.cfg.eps, "RMSprop epsilon");
  sub->add_option("--patience", c.cfg.patience,
                  "evaluations without improvement before halving the lr");
  sub->add_option("--train-samples", c.cfg.train_samples,
                  "training set size");
  sub->add_option("--eval-samples", c.cfg.eval_samples,
                  "evaluation set size");
  auto* ep = sub->add_option("--epochs", c.cfg.epochs,
                             "passes over the training set");
  sub->add_option("--iters", c.cfg.max_iters,
                  "iteration budget (overrides --epochs)")
      ->excludes(ep);
  sub->add_option("--eval-every", c.cfg.eval_every,
                  "iterations between evaluations");
  sub->add_option("--out", c.cfg.out_path, "metrics CSV path");
  sub->add_option("--test-max-warp", c.cfg.test_max_warp,
                  "evaluate on fixed warps of this factor instead of the "
                  "training distribution");
  sub->add_option("--config", c.config_path,
                  "config file (key = value lines, # comments); flags given "
                  "on the command line take precedence");
}

// Reads a `key = value` config file (# starts a comment) and returns the
// equivalent flag tokens. Keys mirror flag names without the leading dashes.
inline std::vector<std::string> load_config_tokens(const std::string& path) {
  std::ifstream in(path);
  check_config(in.good(), "cannot open config file '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  auto trim = [](std::string s) {
    const char* ws = " \t\r\n";
    const std::size_t a = s.find_first_not_of(ws);
    if (a == std::string::npos) return std::string();
    const std::size_t b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
  };
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    check_config(eq != std::string::npos && eq > 0,
                 path + ":" + std::to_string(lineno) +
                     ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    check_config(!key.empty(), path + ":" + std::to_string(lineno) +
                                   ": empty key");
    if (val.size() >= 2 &&
        ((val.front() == '"' && val.back() == '"') ||
         (val.front() == '\'' && val.back() == '\'')))
      val = val.substr(1, val.size() - 2);
    tokens.push_back("--" + key + "=" + val);
  }
  return tokens;
}

// Replaces `--config PATH` in the argument list with the file's contents,
// inserted right after the subcommand name so explicit flags (parsed with a
// take-last policy) override config values, which override defaults.
inline void expand_config(std::vector<std::string>& args) {
  std::vector<std::string> expanded;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    std::string path;
    if (a == "--config") {
      check_config(i + 1 < args.size(), "--config requires a path");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      --i;
    } else if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      --i;
    } else {
      continue;
    }
    const std::vector<std::string> toks = load_config_tokens(path);
    expanded.insert(expanded.end(), toks.begin(), toks.end());
  }
  if (expanded.empty()) return;
  std::size_t at = 0;
  while (at < args.size() && !args[at].empty() && args[at][0] == '-') ++at;
  if (at < args.size()) ++at;  // place after the subcommand name
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(at),
              expanded.begin(), expanded.end());
}

// Resolve flag interactions that span several options.
inline void finish_config(CliConfig& c) {
  const bool pad = c.cfg.task == TaskKind::pad;
  if (c.warp_mode == "uniform")
    c.cfg.warp.mode =
        pad ? WarpSpec::Mode::uniform_pad : WarpSpec::Mode::uniform;
  else
    c.cfg.warp.mode =
        pad ? WarpSpec::Mode::variable_pad : WarpSpec::Mode::variable;
  check_config(c.seq_len >= 1, "--seq-len must be >= 1");
  c.cfg.warp.base_len = c.seq_len;
  c.cfg.warp.trunc_len = c.seq_len;
}

inline std::string run_file_path(const std::string& base, std::size_t r) {
  const std::string tag = ".run" + std::to_string(r);
  const std::size_t dot = base.find_last_of('.');
  const std::size_t slash = base.find_last_of("/\\");
  if (dot == std::string::npos ||
      (slash != std::string::npos && dot < slash))
    return base + tag;
  return base.substr(0, dot) + tag + base.substr(dot);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommand bodies. Each returns the process exit code: 0 success,
// 1 configuration/usage error, 2 runtime or numerical error.
// ---------------------------------------------------------------------------

inline int cmd_train(const CliConfig& c, std::ostream& out,
                     std::ostream& err) {
  MetricsLog log = run_experiment(c.cfg);
  if (c.cfg.out_path.empty())
    emit_csv(log, out);
  else
    emit_csv_file(log, c.cfg.out_path);
  if (log.aborted) {
    err << "error: training aborted: " << log.error << "\n";
    return 2;
  }
  return 0;
}

inline int cmd_multirun(const CliConfig& c, std::ostream& out,
                        std::ostream& err) {
  MultiRunSummary summary = multi_run(c.cfg, c.runs);
  if (!c.cfg.out_path.empty())
    for (std::size_t r = 0; r < summary.logs.size(); ++r)
      emit_csv_file(summary.logs[r],
                    detail::run_file_path(c.cfg.out_path, r));
  if (c.cfg.out_path.empty())
    emit_summary_csv(summary, out);
  else
    emit_summary_csv_file(summary, c.cfg.out_path);
  if (!summary.failed_seeds.empty()) {
    err << "error: " << summary.failed_seeds.size() << " of "
        << summary.logs.size() << " runs aborted\n";
    return 2;
  }
  return 0;
}

inline int cmd_gradcheck(const CliConfig& c, std::ostream& out,
                         std::ostream& err) {
  std::vector<Arch> archs;
  if (c.gc_arch.empty())
    archs = {Arch::rnn, Arch::leaky, Arch::gated, Arch::lstm};
  else if (c.gc_arch == "rnn")
    archs = {Arch::rnn};
  else if (c.gc_arch == "leaky")
    archs = {Arch::leaky};
  else if (c.gc_arch == "gated")
    archs = {Arch::gated};
  else if (c.gc_arch == "lstm")
    archs = {Arch::lstm};
  else
    throw ConfigError("unknown architecture '" + c.gc_arch + "'");

  bool ok = true;
  for (Arch a : archs) {
    const double rel = grad_check(a, c.gc_hidden, c.gc_seq_len, c.cfg.seed);
    const bool pass = rel < 1e-4;
    ok = ok && pass;
    out << arch_name(a) << ": max relative error " << detail::real17(rel)
        << (pass ? "  OK" : "  FAIL") << "\n";
  }
  if (!ok) err << "error: gradient check failed\n";
  return ok ? 0 : 2;
}

// Monte-Carlo estimate of the memoryless predictor's loss. Copy family:
// a predictor that is sure of the filler symbol and uniform over the 8
// content symbols inside the answer window scores ln 8 per answer step.
// Adding: the constant-1 predictor scores (target - 1)^2.
inline double baseline_monte_carlo(const TaskSpec& spec, std::int64_t n,
                                   Rng rng) {
  check_config(n >= 1, "sample count must be >= 1");
  const double ln8 = std::log(8.0);
  double sum = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const TaskSample s = gen_sample(spec, rng);
    if (spec.kind == TaskKind::adding) {
      const double d = s.target_sum - 1.0;
      sum += d * d;
    } else {
      std::int64_t answer_steps = 0;
      for (std::size_t t = 0; t < s.targets.size(); ++t)
        if (s.mask[t] != 0 && s.targets[t] != 8) ++answer_steps;
      sum += static_cast<double>(answer_steps) * ln8 /
             static_cast<double>(s.mask_count());
    }
  }
  return sum / static_cast<double>(n);
}

inline int cmd_baseline(const CliConfig& c, std::ostream& out,
                        std::ostream& /*err*/) {
  const TaskKind task = c.cfg.task;
  check_config(task == TaskKind::copy_task || task == TaskKind::varcopy ||
                   task == TaskKind::adding,
               "no closed-form baseline for this task");
  const double closed = task == TaskKind::adding ? adding_baseline()
                                                 : copy_baseline(c.cfg.T);
  TaskSpec spec = c.cfg.task_spec();
  const std::int64_t n = c.cfg.eval_samples;
  const double mc = baseline_monte_carlo(spec, n, Rng(c.cfg.seed));
  out << "task " << task_name(task);
  if (task != TaskKind::adding) out << " T=" << c.cfg.T;
  out << "\nclosed form:  " << detail::real17(closed)
      << "\nmonte carlo:  " << detail::real17(mc) << "  (" << n
      << " samples)\n";
  return 0;
}

inline int cmd_export(const CliConfig& c, std::ostream& /*out*/,
                      std::ostream& err) {
  check_config(!c.export_path.empty(), "--export PATH is required");
  const TaskSpec spec = c.cfg.task_spec();
  const std::vector<TaskSample> data =
      build_dataset(spec, c.cfg.eval_samples, Rng(c.cfg.seed).derive(3));
  std::ofstream os(c.export_path);
  check_config(os.good(), "cannot open '" + c.export_path + "' for writing");
  export_dataset(os, data);
  os.flush();
  check_config(os.good(), "write to '" + c.export_path + "' failed");
  err << "wrote " << data.size() << " samples to " << c.export_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// Argument parsing and dispatch.
// ---------------------------------------------------------------------------

inline std::unique_ptr<CLI::App> parse_args(CliConfig& c) {
  auto app = std::make_unique<CLI::App>(
      "recurrent-network time-warping laboratory");
  app->require_subcommand(1);
  // Later occurrences of a flag win, so config-file values (inserted first)
  // yield to explicit flags.
  auto take_last = [](CLI::App* sub) {
    sub->option_defaults()->multi_option_policy(
        CLI::MultiOptionPolicy::TakeLast);
    return sub;
  };

  CLI::App* train = take_last(app->add_subcommand("train", "train one model"));
  detail::add_task_flags(train, c);
  detail::add_train_flags(train, c);

  CLI::App* multirun =
      take_last(app->add_subcommand("multirun", "train across several seeds"));
  detail::add_task_flags(multirun, c);
  detail::add_train_flags(multirun, c);
  multirun->add_option("--runs", c.runs, "number of seeds");

  CLI::App* gradcheck = take_last(app->add_subcommand(
      "gradcheck", "compare backpropagation with finite differences"));
  gradcheck->add_option("--arch", c.gc_arch, "architecture (default: all)");
  gradcheck->add_option("--hidden", c.gc_hidden, "hidden units");
  gradcheck->add_option("--seq-len", c.gc_seq_len, "sequence length");
  gradcheck->add_option("--seed", c.cfg.seed, "RNG seed");

  CLI::App* baseline = take_last(app->add_subcommand(
      "baseline", "print the memoryless baseline for a task"));
  detail::add_task_flags(baseline, c);
  baseline->add_option("--eval-samples", c.cfg.eval_samples,
                       "Monte-Carlo sample count");

  CLI::App* exportd = take_last(
      app->add_subcommand("export-data", "write generated samples to a file"));
  detail::add_task_flags(exportd, c);
  exportd->add_option("--eval-samples", c.cfg.eval_samples,
                      "number of samples");
  exportd->add_option("--export", c.export_path, "output path");

  return app;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out,
                   std::ostream& err) {
  CliConfig c;
  std::unique_ptr<CLI::App> app = parse_args(c);
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    detail::expand_config(args);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  std::vector<const char*> ptrs;
  ptrs.push_back(argc > 0 ? argv[0] : "warprnn");
  for (const std::string& a : args) ptrs.push_back(a.c_str());
  try {
    app->parse(static_cast<int>(ptrs.size()), ptrs.data());
  } catch (const CLI::CallForHelp& e) {
    return app->exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app->exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app->exit(e, out, err);
    return 1;
  }

  try {
    c.subcommand = app->get_subcommands().front()->get_name();
    detail::finish_config(c);
    if (c.subcommand == "train") return cmd_train(c, out, err);
    if (c.subcommand == "multirun") return cmd_multirun(c, out, err);
    if (c.subcommand == "gradcheck") return cmd_gradcheck(c, out, err);
    if (c.subcommand == "baseline") return cmd_baseline(c, out, err);
    if (c.subcommand == "export-data") return cmd_export(c, out, err);
    err << "error: unknown subcommand\n";
    return 1;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace warprnn
