#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "warprnn/cells.hpp"
#include "warprnn/csv.hpp"
#include "warprnn/init.hpp"
#include "warprnn/optim.hpp"
#include "warprnn/params.hpp"
#include "warprnn/tasks.hpp"

namespace warprnn {

// Full experiment description. Derived RNG streams: 0 weights, 1 gate-bias
// init, 2 training data (per-sample sub-streams by index), 3 evaluation data.
struct TrainConfig {
  TaskKind task = TaskKind::warp;
  WarpSpec warp;
  std::int64_t T = 500;          // copy/varcopy/adding length parameter
  std::int64_t alphabet = 10;
  Arch arch = Arch::lstm;
  std::int64_t hidden = 64;
  InitPolicy init;
  std::int64_t batch = 32;
  double lr = 1e-3;
  double rho = 0.9;
  double eps = 1e-8;
  std::int64_t patience = 100;
  std::int64_t train_samples = 5000;
  std::int64_t eval_samples = 1000;
  std::int64_t epochs = 3;
  std::int64_t max_iters = -1;   // >= 0 overrides epochs
  std::int64_t eval_every = 100;
  std::uint64_t seed = 1;
  std::string out_path;
  std::int64_t test_max_warp = 0;  // > 0: evaluate on uniform warps of this factor

  TaskSpec task_spec() const { return TaskSpec{task, warp, T, alphabet}; }

  // The halving schedule applies to the warping/padding experiments;
  // copy/adding runs use a constant learning rate.
  bool uses_schedule() const {
    return task == TaskKind::warp || task == TaskKind::pad;
  }
};

inline bool init_compatible(Arch arch, InitPolicy::Kind kind) {
  using K = InitPolicy::Kind;
  switch (kind) {
    case K::none: return true;
    case K::standard:
    case K::chrono:
    case K::heavy_tail: return arch == Arch::lstm;
    case K::gate_range: return arch == Arch::gated;
  }
  return false;
}

inline void validate(const TrainConfig& c) {
  check_config(c.hidden >= 1, "hidden units must be >= 1");
  check_config(c.batch >= 1, "batch size must be >= 1");
  check_config(c.train_samples >= 1, "train_samples must be >= 1");
  check_config(c.eval_samples >= 1, "eval_samples must be >= 1");
  check_config(c.eval_every >= 1, "eval_every must be >= 1");
  check_config(c.patience >= 1, "patience must be >= 1");
  check_config(c.max_iters >= 0 || c.epochs >= 1,
               "epochs must be >= 1 (or give an iteration budget)");
  check_config(c.max_iters >= 0 || c.train_samples >= c.batch,
               "epoch mode needs train_samples >= batch");
  check_config(c.alphabet >= 3, "alphabet must be >= 3");
  if (c.task == TaskKind::copy_task || c.task == TaskKind::varcopy)
    check_config(c.T >= 1, "T must be >= 1");
  if (c.task == TaskKind::adding)
    check_config(c.T >= 2, "adding task needs T >= 2");
  if (c.task == TaskKind::warp || c.task == TaskKind::pad) {
    check_config(c.warp.max_warp >= 1, "max_warp must be >= 1");
    check_config(c.warp.trunc_len >= 1 && c.warp.base_len >= c.warp.trunc_len,
                 "warp lengths invalid (need base_len >= trunc_len >= 1)");
  }
  check_config(c.test_max_warp == 0 ||
                   c.task == TaskKind::warp || c.task == TaskKind::pad,
               "--test-max-warp only applies to warp/pad tasks");
  check_config(init_compatible(c.arch, c.init.kind),
               std::string("init '") + init_name(c.init.kind) +
                   "' is not defined for architecture '" + arch_name(c.arch) +
                   "'");
  check_config(c.lr > 0 && c.rho >= 0 && c.rho < 1 && c.eps > 0,
               "optimizer hyperparameters out of range");
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;  // -1 where undefined (adding task)
};

// Mean per-sample masked loss over the first n samples, plus the fraction of
// masked timesteps predicted correctly (argmax). Never mutates parameters.
template <class P>
EvalResult evaluate(const Network<P>& net, const std::vector<TaskSample>& data,
                    std::int64_t n, std::int64_t batch, Tape& tape) {
  check_config(n >= 1 && n <= static_cast<std::int64_t>(data.size()),
               "evaluate: n out of range");
  double loss_sum = 0.0;
  std::int64_t total = 0, correct = 0;
  bool classification = true;
  std::vector<TaskSample> chunk;
  for (std::int64_t at = 0; at < n; at += batch) {
    const std::int64_t sz = std::min(batch, n - at);
    chunk.assign(data.begin() + at, data.begin() + at + sz);
    const double chunk_loss = sequence_forward(net, chunk, tape, false);
    loss_sum += chunk_loss * static_cast<double>(sz);
    if (tape.masked_total < 0) {
      classification = false;
    } else {
      total += tape.masked_total;
      correct += tape.masked_correct;
    }
  }
  EvalResult r;
  r.loss = loss_sum / static_cast<double>(n);
  r.accuracy = classification
                   ? static_cast<double>(correct) / static_cast<double>(total)
                   : -1.0;
  return r;
}

template <class P>
EvalResult evaluate(const Network<P>& net, const std::vector<TaskSample>& data,
                    std::int64_t n) {
  Tape tape;
  return evaluate(net, data, n, std::min<std::int64_t>(n, 50), tape);
}

namespace detail {

// The evaluation dataset spec: same task as training unless a test warp
// factor decouples the ranges, in which case evaluation uses fixed
// (uniform) warps/pads of that factor.
inline TaskSpec eval_task_spec(const TrainConfig& cfg) {
  TaskSpec spec = cfg.task_spec();
  if (cfg.test_max_warp > 0) {
    spec.warp.max_warp = cfg.test_max_warp;
    spec.warp.mode = cfg.task == TaskKind::warp ? WarpSpec::Mode::uniform
                                                : WarpSpec::Mode::uniform_pad;
  }
  return spec;
}

// Callback checked after each recorded evaluation; returning true ends the
// loop there (the log keeps its records and is not marked aborted). Used for
// early stopping, e.g. "halt once eval loss crosses a threshold".
using StopPredicate = std::function<bool(const MetricsRecord&)>;

template <class P>
MetricsLog run_loop(const TrainConfig& cfg, Network<P>& net,
                    const StopPredicate& stop = {}) {
  const TaskSpec train_spec = cfg.task_spec();
  const Rng train_master = Rng(cfg.seed).derive(2);
  const Rng eval_master = Rng(cfg.seed).derive(3);
  const std::vector<TaskSample> eval_set =
      build_dataset(eval_task_spec(cfg), cfg.eval_samples, eval_master);

  RmsPropState<Network<P>> rms =
      RmsPropState<Network<P>>::fresh(net, cfg.lr, cfg.rho, cfg.eps);
  LrSchedule sched{cfg.patience};
  const bool use_schedule = cfg.uses_schedule();

  const std::int64_t total_iters =
      cfg.max_iters >= 0 ? cfg.max_iters
                         : cfg.epochs * (cfg.train_samples / cfg.batch);

  Tape tape, eval_tape;
  Network<P> grads = zeros_like(net);
  std::vector<TaskSample> batch(static_cast<std::size_t>(cfg.batch));
  auto fill_batch = [&](std::int64_t iter) {
    for (std::int64_t j = 0; j < cfg.batch; ++j) {
      const std::uint64_t idx = static_cast<std::uint64_t>(
          (iter * cfg.batch + j) % cfg.train_samples);
      batch[static_cast<std::size_t>(j)] =
          dataset_sample(train_spec, train_master, idx);
    }
  };

  MetricsLog log;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  auto record = [&](std::int64_t iter, double train_loss) {
    const EvalResult ev =
        evaluate(net, eval_set, cfg.eval_samples, cfg.batch, eval_tape);
    check_numeric(std::isfinite(ev.loss), "evaluation loss is non-finite");
    // The learning rate in effect at this evaluation is recorded; a halving
    // triggered here applies from the next batch on.
    log.records.push_back(
        {iter, train_loss, ev.loss, ev.accuracy, rms.lr, elapsed()});
    if (use_schedule) sched.update(ev.loss, rms);
    return stop && stop(log.records.back());
  };

  try {
    fill_batch(0);
    const double loss0 = sequence_forward(net, batch, tape, false);
    if (record(0, loss0)) return log;

    double train_acc = 0.0;
    std::int64_t train_n = 0;
    for (std::int64_t iter = 1; iter <= total_iters; ++iter) {
      fill_batch(iter - 1);
      const double loss = sequence_forward(net, batch, tape, true);
      sequence_backward(tape, net, grads);
      rmsprop_step(rms, net, grads);
      train_acc += loss;
      ++train_n;
      if (iter % cfg.eval_every == 0 || iter == total_iters) {
        const bool done = record(iter, train_acc / static_cast<double>(train_n));
        train_acc = 0.0;
        train_n = 0;
        if (done) break;
      }
    }
  } catch (const NumericError& e) {
    log.aborted = true;
    log.error = std::string(e.what()) + " (iteration " +
                std::to_string(log.records.empty()
                                   ? 0
                                   : log.records.back().iteration) +
                "+)";
  }
  return log;
}

}  // namespace detail

// Runs one seeded experiment: weight init, gate-bias policy, training loop
// with periodic evaluation (and the halving schedule where it applies).
// Deterministic given (cfg, seed) up to wall_time_s. A non-finite loss or
// gradient aborts with the partial log and a diagnostic in `error`.
inline MetricsLog run_experiment(const TrainConfig& cfg,
                                 const detail::StopPredicate& stop = {}) {
  validate(cfg);
  const TaskSpec spec = cfg.task_spec();
  Rng root(cfg.seed);
  Rng weight_rng = root.derive(0);
  Rng init_rng = root.derive(1);
  AnyNet net = make_network(cfg.arch, cfg.hidden, input_dim(spec),
                            readout_dim(spec), weight_rng);
  apply_init(net, cfg.init, init_rng);
  return std::visit([&](auto& n) { return detail::run_loop(cfg, n, stop); },
                    net);
}

// Trains a model and returns it together with the log (used by callers that
// evaluate the trained network on extra datasets, e.g. decoupled test warps).
inline std::pair<AnyNet, MetricsLog> run_experiment_model(
    const TrainConfig& cfg, const detail::StopPredicate& stop = {}) {
  validate(cfg);
  const TaskSpec spec = cfg.task_spec();
  Rng root(cfg.seed);
  Rng weight_rng = root.derive(0);
  Rng init_rng = root.derive(1);
  AnyNet net = make_network(cfg.arch, cfg.hidden, input_dim(spec),
                            readout_dim(spec), weight_rng);
  apply_init(net, cfg.init, init_rng);
  MetricsLog log =
      std::visit([&](auto& n) { return detail::run_loop(cfg, n, stop); }, net);
  return {std::move(net), std::move(log)};
}

// Runs the experiment once per seed (default seeds: seed, seed+1, ...)
// and aggregates mean/min/max per (iteration, metric) across the runs that
// recorded that iteration. Aborted runs contribute their partial records and
// are listed in failed_seeds. Runs execute on up to hardware_concurrency
// threads; results do not depend on the thread count.
inline MultiRunSummary multi_run(const TrainConfig& cfg, std::int64_t n_runs,
                                 std::vector<std::uint64_t> seeds = {}) {
  check_config(n_runs >= 1, "multi_run: n_runs must be >= 1");
  if (seeds.empty())
    for (std::int64_t r = 0; r < n_runs; ++r)
      seeds.push_back(cfg.seed + static_cast<std::uint64_t>(r));
  check_config(static_cast<std::int64_t>(seeds.size()) == n_runs,
               "multi_run: seed count must match n_runs");
  check_config(std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() ==
                   seeds.size(),
               "multi_run: seeds must be distinct");
  validate(cfg);

  MultiRunSummary summary;
  summary.logs.resize(seeds.size());
  const std::size_t workers = std::max<std::size_t>(
      1, std::min<std::size_t>(seeds.size(),
                               std::thread::hardware_concurrency()));
  auto work = [&](std::size_t first, std::size_t step) {
    for (std::size_t r = first; r < seeds.size(); r += step) {
      TrainConfig c = cfg;
      c.seed = seeds[r];
      summary.logs[r] = run_experiment(c);
    }
  };
  if (workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back(work, w, workers);
    for (std::thread& th : pool) th.join();
  }

  for (std::size_t r = 0; r < seeds.size(); ++r)
    if (summary.logs[r].aborted) summary.failed_seeds.push_back(seeds[r]);

  // Align by iteration over whichever runs recorded it.
  std::map<std::int64_t, std::vector<const MetricsRecord*>> by_iter;
  for (const MetricsLog& log : summary.logs)
    for (const MetricsRecord& rec : log.records)
      by_iter[rec.iteration].push_back(&rec);

  const char* names[5] = {"train_loss", "eval_loss", "eval_accuracy", "lr",
                          "wall_time_s"};
  for (const auto& [iter, recs] : by_iter) {
    for (int m = 0; m < 5; ++m) {
      auto field = [m](const MetricsRecord* r) {
        switch (m) {
          case 0: return r->train_loss;
          case 1: return r->eval_loss;
          case 2: return r->eval_accuracy;
          case 3: return r->lr;
          default: return r->wall_time_s;
        }
      };
      SummaryRow row;
      row.iteration = iter;
      row.metric = names[m];
      row.min = row.max = field(recs[0]);
      double sum = 0.0;
      for (const MetricsRecord* r : recs) {
        const double v = field(r);
        sum += v;
        row.min = std::min(row.min, v);
        row.max = std::max(row.max, v);
      }
      row.mean = sum / static_cast<double>(recs.size());
      summary.rows.push_back(row);
    }
  }
  return summary;
}

}  // namespace warprnn
