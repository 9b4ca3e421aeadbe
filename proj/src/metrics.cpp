#include "planahead/metrics.hpp"

#include "planahead/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>
#include <vector>

namespace planahead {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

void require_single_model(const RewardMatrix& matrix) {
  if (matrix.empty()) throw ValidationError("no tasks");
  if (matrix.model_count() != 1) {
    throw ValidationError("metrics need a single-model matrix; select one with for_model()");
  }
}

// Per-task success counts, the only statistic every metric depends on.
std::vector<std::size_t> success_counts(const RewardMatrix& matrix) {
  std::vector<std::size_t> counts(matrix.task_count(), 0);
  for (std::size_t t = 0; t < matrix.task_count(); ++t) {
    for (auto r : matrix.row(t, 0)) counts[t] += r;
  }
  return counts;
}

struct TaskStats {
  std::size_t achieved = 0;
  std::size_t successes = 0;
};

template <typename IndexFn>
TaskStats accumulate(const std::vector<std::size_t>& counts, std::size_t draws, IndexFn&& pick) {
  TaskStats stats;
  for (std::size_t k = 0; k < draws; ++k) {
    const std::size_t c = counts[pick(k)];
    if (c > 0) {
      ++stats.achieved;
      stats.successes += c;
    }
  }
  return stats;
}

double ar_value(const TaskStats& s, std::size_t tasks) {
  return static_cast<double>(s.achieved) / static_cast<double>(tasks) * 100.0;
}

std::optional<double> stc_value(const TaskStats& s, std::size_t runs) {
  if (s.achieved == 0) return std::nullopt;
  return static_cast<double>(s.successes) / (static_cast<double>(s.achieved) * static_cast<double>(runs)) * 100.0;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::string_view to_string(MetricName metric) {
  switch (metric) {
    case MetricName::SR: return "SR";
    case MetricName::SE: return "SE";
    case MetricName::AR: return "AR";
    case MetricName::STC: return "STC";
  }
  return "?";
}

std::string format_percent(const std::optional<double>& value) {
  if (!value) return "—";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", *value);
  return buf;
}

SuccessRate success_rate(const RewardMatrix& matrix) {
  require_single_model(matrix);
  const auto counts = success_counts(matrix);
  std::size_t total = 0;
  for (auto c : counts) total += c;
  const double trials = static_cast<double>(matrix.task_count() * matrix.runs());
  const double p = static_cast<double>(total) / trials;

  SuccessRate out;
  out.sr = {MetricName::SR, p * 100.0, matrix.task_count(), matrix.runs(), 0};
  out.se = {MetricName::SE, std::sqrt(p * (1.0 - p) / trials) * 100.0, matrix.task_count(), matrix.runs(), 0};
  for (auto c : counts) out.sr.achieved_count += c > 0 ? 1 : 0;
  out.se.achieved_count = out.sr.achieved_count;
  return out;
}

MetricResult achievement_rate(const RewardMatrix& matrix) {
  require_single_model(matrix);
  const auto counts = success_counts(matrix);
  const auto stats = accumulate(counts, counts.size(), [](std::size_t k) { return k; });
  return {MetricName::AR, ar_value(stats, counts.size()), matrix.task_count(), matrix.runs(), stats.achieved};
}

MetricResult solved_task_consistency(const RewardMatrix& matrix) {
  require_single_model(matrix);
  const auto counts = success_counts(matrix);
  const auto stats = accumulate(counts, counts.size(), [](std::size_t k) { return k; });
  return {MetricName::STC, stc_value(stats, matrix.runs()), matrix.task_count(), matrix.runs(), stats.achieved};
}

BootstrapStream::BootstrapStream(std::uint64_t seed, std::uint64_t index) : state_(mix(seed + mix(index + 1))) {}

std::uint64_t BootstrapStream::mix(std::uint64_t x) {
  x += kGolden;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t BootstrapStream::next() {
  state_ += kGolden;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t BootstrapStream::below(std::size_t bound) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(next()) * bound) >> 64);
}

BootstrapInterval bootstrap_ci(const RewardMatrix& matrix, MetricName metric, const BootstrapOptions& options) {
  require_single_model(matrix);
  if (metric != MetricName::AR && metric != MetricName::STC) {
    throw ValidationError("bootstrap supports AR and STC only");
  }
  if (options.resamples < 1) throw ValidationError("bootstrap needs at least one resample");
  if (!(options.level > 0.0 && options.level < 1.0)) throw ValidationError("confidence level must be in (0, 1)");

  const auto counts = success_counts(matrix);
  const std::size_t tasks = counts.size();
  const std::size_t runs = matrix.runs();

  // NaN marks an undefined resample; slots are filled by index so the worker
  // split cannot change the result.
  std::vector<double> values(options.resamples);
  auto evaluate = [&](std::size_t j) {
    BootstrapStream stream(options.seed, j);
    const auto stats = accumulate(counts, tasks, [&](std::size_t) { return stream.below(tasks); });
    if (metric == MetricName::AR) {
      values[j] = ar_value(stats, tasks);
    } else {
      values[j] = stc_value(stats, runs).value_or(std::nan(""));
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, options.resamples);
  if (workers == 1) {
    for (std::size_t j = 0; j < options.resamples; ++j) evaluate(j);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < options.resamples; j += workers) evaluate(j);
      });
    }
  }

  std::vector<double> defined;
  defined.reserve(values.size());
  for (double v : values) {
    if (!std::isnan(v)) defined.push_back(v);
  }
  if (defined.empty()) throw Error("metric undefined on data");
  std::sort(defined.begin(), defined.end());

  const double alpha = 1.0 - options.level;
  BootstrapInterval out;
  out.lower = std::clamp(quantile_sorted(defined, alpha / 2.0), 0.0, 100.0);
  out.upper = std::clamp(quantile_sorted(defined, 1.0 - alpha / 2.0), 0.0, 100.0);
  out.resamples = options.resamples;
  out.used_resamples = defined.size();
  out.level = options.level;
  out.seed = options.seed;
  return out;
}

}  // namespace planahead
