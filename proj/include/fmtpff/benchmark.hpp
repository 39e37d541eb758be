#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fmtpff/planner.hpp"

namespace fmtpff {

struct BenchmarkConfig {
  std::vector<PlannerKind> planners{PlannerKind::FmtPff, PlannerKind::FmtFull, PlannerKind::KinoRrtStar};
  std::vector<int> sample_counts{500, 1000, 2000};
  int seeds = 10;
  std::uint64_t first_seed = 1;
  double r = 1.5;
  double goal_tolerance = 0.3;
  int buckets = 20;
  int workers = 1;

  void validate() const;
};

struct BenchmarkRun {
  PlannerKind planner = PlannerKind::FmtPff;
  int m = 0;
  std::uint64_t seed = 0;
  bool solved = false;
  double cost = 0.0;
  double wall_time_s = 0.0;
  int iterations = 0;
  int vertices = 0;
  std::vector<PlanEvent> events;
  // Tree consistency and ordered-search violations found after the run.
  std::vector<std::string> issues;
};

struct BucketMedian {
  PlannerKind planner = PlannerKind::FmtPff;
  double time_s = 0.0;
  int solved_seeds = 0;
  double median_cost = 0.0;  // +inf when at most half of the seeds have a solution
};

struct BenchmarkReport {
  std::vector<BenchmarkRun> runs;
  std::vector<double> buckets;
  std::vector<BucketMedian> summary;
};

/// Every planner on every (m, seed) pair; run i uses seed first_seed + i for
/// all planners and sample counts. Runs are independent, so the result does
/// not depend on the worker count apart from measured times.
BenchmarkReport run_benchmark(const Problem& problem, const SteeringBackend& backend, const BenchmarkConfig& cfg);

// Best cost the run had reported by time t; +inf before its first solution.
double cost_at(const BenchmarkRun& run, double t);

/// Log-spaced bucket edges from the earliest first solution to the latest
/// finishing run.
std::vector<double> wall_time_buckets(const std::vector<BenchmarkRun>& runs, int count);

/// Per planner and bucket: for each seed the best cost over its runs (all
/// sample counts) reported by the bucket time, then the median over seeds.
std::vector<BucketMedian> summarize(const std::vector<BenchmarkRun>& runs, const std::vector<double>& buckets);

double median(std::vector<double> values);

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRun>& runs);
void write_benchmark_events_csv(std::ostream& out, const std::vector<BenchmarkRun>& runs);
void write_summary_csv(std::ostream& out, const std::vector<BucketMedian>& summary);
std::vector<BucketMedian> read_summary_csv(std::istream& in);

std::string render_benchmark_svg(const std::vector<BucketMedian>& summary);

}  // namespace fmtpff
