#include "triage/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "triage/errors.hpp"

namespace triage {

double steady_seconds() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

namespace {

double sample_sd(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

BenchResult bench_inference(const EncoderModel<float>& model, const Tokenizer& tokenizer, Strategy strategy,
                            const std::vector<const Instance*>& instances, const StrategyOptions& options,
                            int repetitions, const Timer& timer) {
  if (repetitions < 1) throw ArgumentError("repetitions must be >= 1");
  std::vector<const Instance*> set;
  for (const Instance* inst : instances) {
    if (strategy == Strategy::BruteForce && inst->documents.empty()) continue;
    set.push_back(inst);
  }
  if (set.empty()) throw ArgumentError("bench_inference: no instances to time");

  auto pass = [&] {
    for (const Instance* inst : set) {
      volatile int sink = team_index(run_strategy(strategy, *inst, model, tokenizer, options).recommendation.predicted);
      (void)sink;
    }
  };
  pass();  // warm-up
  BenchResult r;
  r.strategy = strategy;
  r.instances = set.size();
  for (int i = 0; i < repetitions; ++i) {
    const double start = timer();
    pass();
    r.totals.push_back(timer() - start);
  }
  double sum = 0;
  for (double t : r.totals) sum += t;
  r.mean_total = sum / static_cast<double>(r.totals.size());
  r.sd_total = sample_sd(r.totals, r.mean_total);
  const auto n = static_cast<double>(set.size());
  r.mean_per_instance = r.mean_total / n;
  r.sd_per_instance = r.sd_total / n;
  return r;
}

std::string format_bench_table(const std::vector<BenchResult>& results) {
  std::ostringstream out;
  char line[200];
  std::snprintf(line, sizeof line, "%-16s %9s %14s %12s %16s %14s\n", "strategy", "instances", "total_mean_s",
                "total_sd_s", "per_instance_ms", "per_inst_sd_ms");
  out << line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-16s %9zu %14.4f %12.4f %16.3f %14.3f\n",
                  std::string(to_string(r.strategy)).c_str(), r.instances, r.mean_total, r.sd_total,
                  r.mean_per_instance * 1e3, r.sd_per_instance * 1e3);
    out << line;
  }
  return out.str();
}

std::string bench_to_json(const std::vector<BenchResult>& results) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    arr.push_back({{"strategy", to_string(r.strategy)},
                   {"instances", r.instances},
                   {"totals_s", r.totals},
                   {"mean_total_s", r.mean_total},
                   {"sd_total_s", r.sd_total},
                   {"mean_per_instance_s", r.mean_per_instance},
                   {"sd_per_instance_s", r.sd_per_instance}});
  }
  return arr.dump(2);
}

}  // namespace triage
