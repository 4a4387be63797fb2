#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "warprnn/common.hpp"
#include "warprnn/rng.hpp"

namespace warprnn {

enum class TaskKind { warp, pad, copy_task, varcopy, adding };

inline const char* task_name(TaskKind t) {
  switch (t) {
    case TaskKind::warp: return "warp";
    case TaskKind::pad: return "pad";
    case TaskKind::copy_task: return "copy";
    case TaskKind::varcopy: return "varcopy";
    case TaskKind::adding: return "adding";
  }
  return "?";
}

// One training/evaluation sequence. Classification tasks use inputs/targets
// (symbol indices) with a {0,1} loss mask per step. The adding task uses
// per-step (value, marker) pairs and a single real target scored at the final
// step, expressed through the same mask mechanism (mask zero except the last
// step).
struct TaskSample {
  TaskKind kind = TaskKind::warp;
  std::vector<std::int32_t> inputs;
  std::vector<std::int32_t> targets;
  std::vector<std::uint8_t> mask;
  std::vector<double> values;        // adding only
  std::vector<std::uint8_t> markers; // adding only
  double target_sum = 0.0;           // adding only

  std::size_t length() const {
    return kind == TaskKind::adding ? values.size() : inputs.size();
  }
  std::size_t mask_count() const {
    std::size_t n = 0;
    for (std::uint8_t m : mask) n += m;
    return n;
  }
};

// Warping/padding generator settings. For *_pad modes, max_warp=w means each
// character is followed by w-1 pad symbols (fixed) or by 0..w-1 of them
// (variable), so max_warp=1 is the unwarped/unpadded base task in all four
// modes.
struct WarpSpec {
  enum class Mode { uniform, variable, uniform_pad, variable_pad };
  Mode mode = Mode::uniform;
  std::int64_t max_warp = 1;
  std::int64_t base_len = 500;
  std::int64_t trunc_len = 500;
};

namespace detail {
// Content characters are 1..alphabet-1 (0 is the dummy/pad symbol) and
// contiguous characters differ; a single draw picks uniformly among the
// alphabet-2 characters distinct from `prev` (or all alphabet-1 when there is
// no previous character).
inline std::int32_t draw_content_char(Rng& rng, std::int64_t alphabet,
                                      std::int32_t prev) {
  const std::int64_t n = alphabet - 1;  // content symbols 1..alphabet-1
  if (prev <= 0) return static_cast<std::int32_t>(1 + rng.uniform_int(0, n - 1));
  const std::int64_t step = rng.uniform_int(1, n - 1);
  return static_cast<std::int32_t>(1 + ((prev - 1) + step) % n);
}

inline void validate_warp_spec(const WarpSpec& spec) {
  check_config(spec.max_warp >= 1, "warp: max_warp must be >= 1");
  check_config(spec.trunc_len >= 1, "warp: trunc_len must be >= 1");
  check_config(spec.base_len >= spec.trunc_len,
               "warp: base_len must be >= trunc_len so truncation applies");
}
}  // namespace detail

// Next-step recall under time warping: the base task predicts the previous
// character (dummy at step 0); each base character and its base target are
// repeated the same number of times (a fixed max_warp times, or uniformly
// 1..max_warp per character), and both streams are truncated to trunc_len.
inline TaskSample gen_warped(const WarpSpec& spec, std::int64_t alphabet,
                             Rng& rng) {
  detail::validate_warp_spec(spec);
  check_config(alphabet >= 3, "gen_warped: alphabet must be >= 3");
  check_config(spec.mode == WarpSpec::Mode::uniform ||
                   spec.mode == WarpSpec::Mode::variable,
               "gen_warped: expected a warping mode, not a padding mode");
  const bool variable = spec.mode == WarpSpec::Mode::variable;
  const std::size_t L = static_cast<std::size_t>(spec.trunc_len);

  TaskSample s;
  s.kind = TaskKind::warp;
  s.inputs.reserve(L);
  s.targets.reserve(L);
  std::int32_t prev = 0;
  for (std::int64_t i = 0; i < spec.base_len && s.inputs.size() < L; ++i) {
    const std::int32_t c = detail::draw_content_char(rng, alphabet, prev);
    const std::int64_t rep =
        variable ? rng.uniform_int(1, spec.max_warp) : spec.max_warp;
    for (std::int64_t r = 0; r < rep && s.inputs.size() < L; ++r) {
      s.inputs.push_back(c);
      s.targets.push_back(prev);
    }
    prev = c;
  }
  s.mask.assign(s.inputs.size(), 1);
  return s;
}

// Padding variant: characters are separated by runs of the pad symbol (0);
// at non-pad steps the target is the previous non-pad character (dummy for
// the first), at pad steps the target is the dummy symbol.
inline TaskSample gen_padded(const WarpSpec& spec, std::int64_t alphabet,
                             Rng& rng) {
  detail::validate_warp_spec(spec);
  check_config(alphabet >= 3, "gen_padded: alphabet must be >= 3");
  check_config(spec.mode == WarpSpec::Mode::uniform_pad ||
                   spec.mode == WarpSpec::Mode::variable_pad,
               "gen_padded: expected a padding mode");
  const bool variable = spec.mode == WarpSpec::Mode::variable_pad;
  const std::size_t L = static_cast<std::size_t>(spec.trunc_len);

  TaskSample s;
  s.kind = TaskKind::pad;
  s.inputs.reserve(L);
  s.targets.reserve(L);
  std::int32_t prev = 0;
  for (std::int64_t i = 0; i < spec.base_len && s.inputs.size() < L; ++i) {
    const std::int32_t c = detail::draw_content_char(rng, alphabet, prev);
    const std::int64_t pads =
        variable ? rng.uniform_int(0, spec.max_warp - 1) : spec.max_warp - 1;
    s.inputs.push_back(c);
    s.targets.push_back(prev);
    for (std::int64_t r = 0; r < pads && s.inputs.size() < L; ++r) {
      s.inputs.push_back(0);
      s.targets.push_back(0);
    }
    prev = c;
  }
  s.mask.assign(s.inputs.size(), 1);
  return s;
}

// Copy task over alphabet 10: symbols 0-7 content, 8 dummy, 9 signal.
// Input:  [10 content][T-1 dummies][signal][10 dummies]      (length T+20)
// Target: [T+10 dummies][the 10 content symbols]
inline TaskSample gen_copy(std::int64_t T, Rng& rng) {
  check_config(T >= 1, "gen_copy: T must be >= 1");
  const std::size_t L = static_cast<std::size_t>(T) + 20;
  TaskSample s;
  s.kind = TaskKind::copy_task;
  s.inputs.assign(L, 8);
  s.targets.assign(L, 8);
  for (std::size_t i = 0; i < 10; ++i)
    s.inputs[i] = static_cast<std::int32_t>(rng.uniform_int(0, 7));
  s.inputs[static_cast<std::size_t>(T) + 9] = 9;
  for (std::size_t i = 0; i < 10; ++i)
    s.targets[static_cast<std::size_t>(T) + 10 + i] = s.inputs[i];
  s.mask.assign(L, 1);
  return s;
}

// Variable copy: the gap g is drawn uniformly in {1..T} and realized as g-1
// dummies between content and signal, so total length stays exactly T+20 and
// the answer window fills the 10 steps after the signal; the remainder is
// dummy-padded. g=T reproduces the gen_copy layout.
inline TaskSample gen_variable_copy(std::int64_t T, Rng& rng) {
  check_config(T >= 1, "gen_variable_copy: T must be >= 1");
  const std::size_t L = static_cast<std::size_t>(T) + 20;
  TaskSample s;
  s.kind = TaskKind::varcopy;
  s.inputs.assign(L, 8);
  s.targets.assign(L, 8);
  for (std::size_t i = 0; i < 10; ++i)
    s.inputs[i] = static_cast<std::int32_t>(rng.uniform_int(0, 7));
  const std::int64_t gap = rng.uniform_int(1, T);
  const std::size_t signal_pos = static_cast<std::size_t>(10 + (gap - 1));
  s.inputs[signal_pos] = 9;
  for (std::size_t i = 0; i < 10; ++i)
    s.targets[signal_pos + 1 + i] = s.inputs[i];
  s.mask.assign(L, 1);
  return s;
}

// Adding task: per-step (value, marker) input pairs; values uniform in [0,1),
// exactly one marker in each half of the sequence; target is the sum of the
// two marked values, scored at the final step only.
inline TaskSample gen_adding(std::int64_t T, Rng& rng) {
  check_config(T >= 2, "gen_adding: T must be >= 2");
  TaskSample s;
  s.kind = TaskKind::adding;
  const std::size_t L = static_cast<std::size_t>(T);
  s.values.resize(L);
  for (std::size_t i = 0; i < L; ++i) s.values[i] = rng.uniform(0.0, 1.0);
  const std::int64_t half = (T + 1) / 2;  // first half is {0 .. ceil(T/2)-1}
  const std::int64_t p1 = rng.uniform_int(0, half - 1);
  const std::int64_t p2 = rng.uniform_int(half, T - 1);
  s.markers.assign(L, 0);
  s.markers[static_cast<std::size_t>(p1)] = 1;
  s.markers[static_cast<std::size_t>(p2)] = 1;
  s.target_sum = s.values[static_cast<std::size_t>(p1)] +
                 s.values[static_cast<std::size_t>(p2)];
  s.mask.assign(L, 0);
  s.mask[L - 1] = 1;
  return s;
}

// Best loss achievable while ignoring all past inputs: the answer window is
// 10 characters uniform over 8 possibilities, averaged over T+20 steps.
inline double copy_baseline(std::int64_t T) {
  check_config(T >= 1, "copy_baseline: T must be >= 1");
  return 10.0 * std::log(8.0) / static_cast<double>(T + 20);
}

// Memoryless optimum of the adding task: predict the mean sum 1; the MSE is
// the variance of the sum of two independent uniforms, 2/12 = 1/6.
inline double adding_baseline() { return 1.0 / 6.0; }

// ---- unified task description + dataset handling ------------------------------

struct TaskSpec {
  TaskKind kind = TaskKind::warp;
  WarpSpec warp;
  std::int64_t T = 500;
  std::int64_t alphabet = 10;
};

inline TaskSample gen_sample(const TaskSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case TaskKind::warp: return gen_warped(spec.warp, spec.alphabet, rng);
    case TaskKind::pad: return gen_padded(spec.warp, spec.alphabet, rng);
    case TaskKind::copy_task: return gen_copy(spec.T, rng);
    case TaskKind::varcopy: return gen_variable_copy(spec.T, rng);
    case TaskKind::adding: return gen_adding(spec.T, rng);
  }
  throw ConfigError("gen_sample: unknown task kind");
}

// Input feature width seen by the cell (one-hot symbols, or value+marker).
inline std::int64_t input_dim(const TaskSpec& spec) {
  switch (spec.kind) {
    case TaskKind::warp:
    case TaskKind::pad: return spec.alphabet;
    case TaskKind::copy_task:
    case TaskKind::varcopy: return 10;
    case TaskKind::adding: return 2;
  }
  throw ConfigError("input_dim: unknown task kind");
}

inline std::int64_t readout_dim(const TaskSpec& spec) {
  switch (spec.kind) {
    case TaskKind::warp:
    case TaskKind::pad: return spec.alphabet;
    case TaskKind::copy_task:
    case TaskKind::varcopy: return 10;
    case TaskKind::adding: return 1;
  }
  throw ConfigError("readout_dim: unknown task kind");
}

// Sample i is a pure function of (spec, rng.seed, i): generators never touch
// the parent stream, so datasets can be rebuilt or sharded reproducibly.
inline TaskSample dataset_sample(const TaskSpec& spec, const Rng& rng,
                                 std::uint64_t index) {
  Rng child = rng.derive(index);
  return gen_sample(spec, child);
}

inline std::vector<TaskSample> build_dataset(const TaskSpec& spec,
                                             std::int64_t n_samples,
                                             const Rng& rng) {
  check_config(n_samples >= 1, "build_dataset: n_samples must be >= 1");
  std::vector<TaskSample> out;
  out.reserve(static_cast<std::size_t>(n_samples));
  for (std::int64_t i = 0; i < n_samples; ++i)
    out.push_back(dataset_sample(spec, rng, static_cast<std::uint64_t>(i)));
  return out;
}

// ---- line-based export ---------------------------------------------------------
// One sample per line, fields tab-separated. Classification:
// inputs / targets / mask, each a space-separated int list. Adding:
// values / markers / target, reals at 17 significant digits.

namespace detail {
inline void write_real17(std::ostream& os, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

template <class IntVec>
void write_int_list(std::ostream& os, const IntVec& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ' ';
    os << static_cast<long long>(v[i]);
  }
}
}  // namespace detail

inline void export_sample(std::ostream& os, const TaskSample& s) {
  if (s.kind == TaskKind::adding) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (i) os << ' ';
      detail::write_real17(os, s.values[i]);
    }
    os << '\t';
    detail::write_int_list(os, s.markers);
    os << '\t';
    detail::write_real17(os, s.target_sum);
  } else {
    detail::write_int_list(os, s.inputs);
    os << '\t';
    detail::write_int_list(os, s.targets);
    os << '\t';
    detail::write_int_list(os, s.mask);
  }
  os << '\n';
}

inline void export_dataset(std::ostream& os,
                           const std::vector<TaskSample>& samples) {
  for (const TaskSample& s : samples) export_sample(os, s);
}

}  // namespace warprnn
