#pragma once

// Reference computations written independently of the library, used as test
// oracles. They work on plain integer rows or raw JSON so that a bug shared
// with the library code path cannot hide.

#include "planahead/reward_matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

using Rows = std::vector<std::vector<int>>;  // rows[t][i] for one model

double sr(const Rows& rows);
double ar(const Rows& rows);
std::optional<double> stc(const Rows& rows);
double se(const Rows& rows);

Rows random_rows(std::mt19937_64& rng, std::size_t tasks, std::size_t runs, double p);
std::vector<std::string> task_names(std::size_t count);

// Label sets over every model and run of the first `runs` runs.
struct LabelSets {
  std::set<std::string> easy, medium, hard;
};
LabelSets label_sets(const planahead::RewardMatrix& matrix, std::size_t runs);

// Percentile bootstrap over tasks with SplitMix64 substreams: resample j
// starts from state mix(seed + mix(j + 1)) and draws indices by
// multiply-shift. Quantiles interpolate linearly between order statistics.
struct Interval {
  double lower = 0;
  double upper = 0;
};
Interval bootstrap(const Rows& rows, bool stc_metric, std::size_t resamples, double level, std::uint64_t seed);

// AR/STC per cell recomputed from the raw JSON lines under cells/ of each
// run directory, keyed by (planner, executor, mode, representation).
struct CellStats {
  std::map<std::string, std::vector<int>> rewards_by_task;  // run-indexed
};
using CellKey = std::tuple<std::string, std::string, std::string, std::string>;
std::map<CellKey, CellStats> read_raw_cells(const std::vector<std::filesystem::path>& dirs);

// One parsed markdown report: (planner, executor, column title) -> (AR, STC, bold).
struct RenderedEntry {
  std::string ar;
  std::string stc;
  bool bold = false;

  friend bool operator==(const RenderedEntry&, const RenderedEntry&) = default;
};
using RenderedTable = std::map<std::tuple<std::string, std::string, std::string>, RenderedEntry>;
RenderedTable parse_markdown_report(const std::string& markdown);

// The table a reader would write down by hand from the raw records.
RenderedTable expected_ar_stc_table(const std::map<CellKey, CellStats>& cells);

std::string one_decimal(double v);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle
