#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace planahead {

// One binary outcome as it appears in a flat file or a run log.
struct RewardObservation {
  std::string task_id;
  std::string model_id;
  std::int64_t run_index = 0;
  int reward = 0;
};

// Tasks x models x runs tensor of binary rewards with a uniform run count.
//
// Tasks and models keep the order they were given in. Runs are ordered by
// their recorded run index, so "the first n runs" is well defined.
class RewardMatrix {
 public:
  // `rewards` is laid out task-major, then model, then run. Throws
  // ValidationError if any value is not 0/1, the size does not match, ids
  // repeat, or models/runs are zero.
  RewardMatrix(std::vector<std::string> task_ids, std::vector<std::string> model_ids,
               std::size_t runs, std::vector<std::uint8_t> rewards);

  // Builds a matrix from loose observations. Every (task, model) cell must
  // carry the same set of run indices; ragged or duplicated data is rejected.
  static RewardMatrix from_observations(std::span<const RewardObservation> observations);

  // Convenience for the single-model case: rows[t][i] = Reward(t, i).
  static RewardMatrix single_model(std::string model_id, std::vector<std::string> task_ids,
                                   const std::vector<std::vector<int>>& rows);

  std::size_t task_count() const { return task_ids_.size(); }
  std::size_t model_count() const { return model_ids_.size(); }
  std::size_t runs() const { return runs_; }
  bool empty() const { return task_ids_.empty(); }

  const std::vector<std::string>& task_ids() const { return task_ids_; }
  const std::vector<std::string>& model_ids() const { return model_ids_; }

  bool reward(std::size_t task, std::size_t model, std::size_t run) const {
    return rewards_[index(task, model, run)] != 0;
  }
  std::span<const std::uint8_t> row(std::size_t task, std::size_t model) const {
    return {rewards_.data() + index(task, model, 0), runs_};
  }
  const std::vector<std::uint8_t>& values() const { return rewards_; }

  // Keeps the first n runs of every cell. Requires 1 <= n <= runs().
  RewardMatrix run_prefix(std::size_t n) const;
  RewardMatrix for_model(std::size_t model) const;
  RewardMatrix for_model(const std::string& model_id) const;

  friend bool operator==(const RewardMatrix&, const RewardMatrix&) = default;

 private:
  std::size_t index(std::size_t task, std::size_t model, std::size_t run) const {
    return (task * model_ids_.size() + model) * runs_ + run;
  }

  std::vector<std::string> task_ids_;
  std::vector<std::string> model_ids_;
  std::size_t runs_ = 0;
  std::vector<std::uint8_t> rewards_;
};

// Reads a CSV with a header naming task_id, model_id, run_index and reward
// (any column order, extra columns ignored).
RewardMatrix read_reward_csv(std::istream& in);
void write_reward_csv(std::ostream& out, const RewardMatrix& matrix);

}  // namespace planahead
