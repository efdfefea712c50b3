#pragma once

#include <functional>
#include <string>
#include <vector>

#include "triage/strategies.hpp"

namespace triage {

// Monotonic clock in seconds; injectable so tests can pin the timings.
using Timer = std::function<double()>;
double steady_seconds();

struct BenchResult {
  Strategy strategy = Strategy::SegmentBatch;
  std::size_t instances = 0;
  std::vector<double> totals;  // seconds per repetition over the whole set
  double mean_total = 0;
  double sd_total = 0;  // sample standard deviation over repetitions
  double mean_per_instance = 0;
  double sd_per_instance = 0;
};

// Times end-to-end inference (tokenization included) over the set after one
// untimed warm-up pass. Brute force skips zero-document instances.
BenchResult bench_inference(const EncoderModel<float>& model, const Tokenizer& tokenizer, Strategy strategy,
                            const std::vector<const Instance*>& instances, const StrategyOptions& options = {},
                            int repetitions = 3, const Timer& timer = steady_seconds);

std::string format_bench_table(const std::vector<BenchResult>& results);
std::string bench_to_json(const std::vector<BenchResult>& results);

}  // namespace triage
