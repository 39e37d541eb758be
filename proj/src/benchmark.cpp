#include "fmtpff/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "fmtpff/errors.hpp"
#include "fmtpff/format.hpp"
#include "fmtpff/svg.hpp"

namespace fmtpff {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Job {
  PlannerKind planner;
  int m;
  std::uint64_t seed;
};

BenchmarkRun execute(const Problem& problem, const SteeringBackend& backend, const BenchmarkConfig& cfg,
                     const Job& job) {
  PlanQuery q;
  q.env = problem.env;
  q.x_s = problem.x_s;
  q.goal = problem.goal;
  q.m = job.m;
  q.r = cfg.r;
  q.goal_tolerance = cfg.goal_tolerance;
  q.seed = job.seed;
  const PlanResult res = plan(job.planner, q, backend);

  BenchmarkRun run;
  run.planner = job.planner;
  run.m = job.m;
  run.seed = job.seed;
  run.solved = res.solved;
  run.cost = res.cost;
  run.wall_time_s = res.wall_time_s;
  run.iterations = res.iterations;
  run.vertices = static_cast<int>(res.tree.vertices.size());
  run.events = res.events;
  run.issues = check_tree(res.tree, &q.env);
  if (!std::is_sorted(res.expansion_costs.begin(), res.expansion_costs.end())) {
    run.issues.push_back("expansion costs decrease");
  }
  return run;
}

}  // namespace

void BenchmarkConfig::validate() const {
  require(!planners.empty(), "benchmark: no planners");
  require(!sample_counts.empty(), "benchmark: no sample counts");
  for (int m : sample_counts) require(m >= 1, "benchmark: sample counts must be positive");
  require(seeds >= 1, "benchmark: seeds must be at least 1");
  require(r > 0, "benchmark: radius must be positive");
  require(goal_tolerance > 0, "benchmark: goal tolerance must be positive");
  require(buckets >= 2, "benchmark: at least two buckets");
  require(workers >= 1, "benchmark: workers must be at least 1");
}

BenchmarkReport run_benchmark(const Problem& problem, const SteeringBackend& backend, const BenchmarkConfig& cfg) {
  cfg.validate();
  problem.validate();
  std::vector<Job> jobs;
  for (PlannerKind p : cfg.planners) {
    for (int m : cfg.sample_counts) {
      for (int s = 0; s < cfg.seeds; ++s) jobs.push_back({p, m, cfg.first_seed + static_cast<std::uint64_t>(s)});
    }
  }

  BenchmarkReport report;
  report.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        report.runs[i] = execute(problem, backend, cfg, jobs[i]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int n_threads = std::min<int>(cfg.workers, static_cast<int>(jobs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  report.buckets = wall_time_buckets(report.runs, cfg.buckets);
  report.summary = summarize(report.runs, report.buckets);
  return report;
}

double cost_at(const BenchmarkRun& run, double t) {
  double best = kInf;
  for (const auto& e : run.events) {
    if (e.wall_time_s <= t) best = std::min(best, e.best_cost);
  }
  return best;
}

std::vector<double> wall_time_buckets(const std::vector<BenchmarkRun>& runs, int count) {
  require(count >= 2, "wall_time_buckets: at least two buckets");
  double lo = kInf;
  double hi = 0.0;
  for (const auto& r : runs) {
    hi = std::max(hi, r.wall_time_s);
    if (!r.events.empty()) lo = std::min(lo, r.events.front().wall_time_s);
  }
  if (!std::isfinite(lo)) lo = std::max(hi, 1e-3) / 100.0;
  lo = std::max(lo, 1e-6);
  hi = std::max(hi, lo * 1.01);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
  return out;
}

double median(std::vector<double> values) {
  require(!values.empty(), "median: no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  const double a = values[n / 2 - 1];
  const double b = values[n / 2];
  return std::isinf(b) ? kInf : 0.5 * (a + b);
}

std::vector<BucketMedian> summarize(const std::vector<BenchmarkRun>& runs, const std::vector<double>& buckets) {
  std::vector<PlannerKind> planners;
  std::map<std::pair<PlannerKind, std::uint64_t>, std::vector<const BenchmarkRun*>> by_seed;
  for (const auto& r : runs) {
    if (std::find(planners.begin(), planners.end(), r.planner) == planners.end()) planners.push_back(r.planner);
    by_seed[{r.planner, r.seed}].push_back(&r);
  }
  std::vector<BucketMedian> out;
  for (PlannerKind p : planners) {
    for (double t : buckets) {
      std::vector<double> per_seed;
      for (const auto& [key, group] : by_seed) {
        if (key.first != p) continue;
        double best = kInf;
        for (const BenchmarkRun* r : group) best = std::min(best, cost_at(*r, t));
        per_seed.push_back(best);
      }
      BucketMedian b;
      b.planner = p;
      b.time_s = t;
      b.solved_seeds = static_cast<int>(std::count_if(per_seed.begin(), per_seed.end(), [](double c) { return std::isfinite(c); }));
      b.median_cost = median(per_seed);
      out.push_back(b);
    }
  }
  return out;
}

void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRun>& runs) {
  out << "planner,m,seed,outcome,cost,wall_time_s,iterations,vertices,issues\n";
  for (const auto& r : runs) {
    out << to_string(r.planner) << ',' << r.m << ',' << r.seed << ',' << (r.solved ? "solved" : "failure") << ','
        << (r.solved ? format_double(r.cost) : "") << ',' << format_double(r.wall_time_s) << ',' << r.iterations << ','
        << r.vertices << ',' << r.issues.size() << '\n';
  }
}

void write_benchmark_events_csv(std::ostream& out, const std::vector<BenchmarkRun>& runs) {
  out << "planner,m,seed,wall_time_s,best_cost\n";
  for (const auto& r : runs) {
    for (const auto& e : r.events) {
      out << to_string(r.planner) << ',' << r.m << ',' << r.seed << ',' << format_double(e.wall_time_s) << ','
          << format_double(e.best_cost) << '\n';
    }
  }
}

void write_summary_csv(std::ostream& out, const std::vector<BucketMedian>& summary) {
  out << "planner,time_s,solved_seeds,median_cost\n";
  for (const auto& b : summary) {
    out << to_string(b.planner) << ',' << format_double(b.time_s) << ',' << b.solved_seeds << ','
        << format_double(b.median_cost) << '\n';
  }
}

std::vector<BucketMedian> read_summary_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "planner,time_s,solved_seeds,median_cost",
          "summary csv: unexpected header");
  std::vector<BucketMedian> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == 4, "summary csv: wrong column count");
    BucketMedian b;
    b.planner = planner_kind_from_string(cells[0]);
    b.time_s = parse_double(cells[1]);
    b.solved_seeds = static_cast<int>(parse_double(cells[2]));
    b.median_cost = parse_double(cells[3]);
    out.push_back(b);
  }
  return out;
}

std::string render_benchmark_svg(const std::vector<BucketMedian>& summary) {
  std::vector<ChartSeries> series;
  for (const auto& b : summary) {
    const std::string name = to_string(b.planner);
    auto it = std::find_if(series.begin(), series.end(), [&](const ChartSeries& s) { return s.name == name; });
    if (it == series.end()) {
      series.push_back({name, {}});
      it = series.end() - 1;
    }
    it->points.emplace_back(b.time_s, b.median_cost);
  }
  return render_chart_svg("Median solution cost vs planning time", "wall time [s]", "median cost", series);
}

}  // namespace fmtpff
