#pragma once

#include "planahead/reward_matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace planahead {

enum class MetricName { SR, SE, AR, STC };

std::string_view to_string(MetricName metric);

// A percentage in [0, 100], or no value when the metric is undefined on the
// data (STC with no achieved task).
struct MetricResult {
  MetricName metric = MetricName::SR;
  std::optional<double> value;
  std::size_t task_count = 0;
  std::size_t run_count = 0;
  std::size_t achieved_count = 0;

  bool defined() const { return value.has_value(); }
};

// One decimal, or an em dash for an undefined value.
std::string format_percent(const std::optional<double>& value);
inline std::string format_percent(const MetricResult& result) { return format_percent(result.value); }

struct SuccessRate {
  MetricResult sr;
  MetricResult se;
};

// All metrics take a single-model matrix (see RewardMatrix::for_model) and
// throw ValidationError on an empty or multi-model matrix.

// SR pools all T*N trials; SE is the binomial standard error of that pooled
// mean, sqrt(p(1-p)/(T*N)), in percentage points.
SuccessRate success_rate(const RewardMatrix& matrix);

// Share of tasks solved in at least one run.
MetricResult achievement_rate(const RewardMatrix& matrix);

// Success share over all runs of the tasks solved at least once.
MetricResult solved_task_consistency(const RewardMatrix& matrix);

struct BootstrapOptions {
  std::size_t resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct BootstrapInterval {
  double lower = 0;
  double upper = 0;
  std::size_t resamples = 0;
  std::size_t used_resamples = 0;  // resamples on which the metric was defined
  double level = 0.95;
  std::uint64_t seed = 0;
};

// Percentile bootstrap over tasks. Resample j draws T task indices with
// replacement from its own stream BootstrapStream(seed, j), so the result is
// identical for any worker count. Resamples on which STC is undefined are
// skipped. Quantiles use linear interpolation between order statistics.
//
// Only AR and STC are accepted. Throws Error("metric undefined on data") if
// every resample is undefined.
BootstrapInterval bootstrap_ci(const RewardMatrix& matrix, MetricName metric, const BootstrapOptions& options = {});

// Counter-based substream used by bootstrap_ci: a SplitMix64 generator whose
// state starts at mix(seed + mix(index + 1)).
class BootstrapStream {
 public:
  BootstrapStream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next();
  // Uniform index in [0, bound) by multiply-shift.
  std::size_t below(std::size_t bound);

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t state_;
};

}  // namespace planahead
