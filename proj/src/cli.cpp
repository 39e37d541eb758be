#include "fmtpff/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "fmtpff/benchmark.hpp"
#include "fmtpff/errors.hpp"
#include "fmtpff/format.hpp"
#include "fmtpff/ocp_solver.hpp"
#include "fmtpff/svg.hpp"

namespace fmtpff {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> to_vector(const auto& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

template <typename Writer>
void write_stream(const fs::path& path, Writer writer) {
  std::ostringstream s;
  writer(s);
  write_file(path, s.str());
}

// Flags layered over an optional JSON file. Keys are snake_case in the file
// and dashed on the command line.
class Settings {
 public:
  explicit Settings(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON settings file; flags take precedence");
  }

  template <typename T>
  void bind(const std::string& key, T& field, const std::string& help) {
    auto value = std::make_shared<T>(field);
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    CLI::Option* opt = app_->add_option(flag, *value, help);
    bindings_.push_back({key, [&field](const json& j) { field = j.get<T>(); },
                         [&field, value, opt] {
                           if (opt->count() > 0) field = *value;
                         }});
  }

  void resolve() const {
    if (!config_path_.empty()) {
      json j;
      try {
        j = json::parse(read_file(config_path_));
      } catch (const json::exception& e) {
        throw UsageError("config " + config_path_ + ": " + e.what());
      }
      if (!j.is_object()) throw UsageError("config " + config_path_ + ": expected a JSON object");
      for (const auto& [key, value] : j.items()) {
        auto it = std::find_if(bindings_.begin(), bindings_.end(), [&](const Binding& b) { return b.key == key; });
        if (it == bindings_.end()) throw UsageError("config: unknown key '" + key + "'");
        try {
          it->from_json(value);
        } catch (const json::exception& e) {
          throw UsageError("config key '" + key + "': " + e.what());
        }
      }
    }
    for (const auto& b : bindings_) b.from_flag();
  }

 private:
  struct Binding {
    std::string key;
    std::function<void(const json&)> from_json;
    std::function<void()> from_flag;
  };
  CLI::App* app_;
  std::string config_path_;
  std::vector<Binding> bindings_;
};

class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& description)
      : app_(parent.add_subcommand(name, description)), settings_(app_) {}
  virtual ~Command() = default;

  CLI::App* app() const { return app_; }
  // Resolves settings and checks them; failures are usage errors.
  void prepare() {
    settings_.resolve();
    check();
  }
  virtual int execute(std::ostream& out) = 0;

 protected:
  virtual void check() = 0;
  template <typename T>
  void bind(const std::string& key, T& field, const std::string& help) {
    settings_.bind(key, field, help);
  }

 private:
  CLI::App* app_;
  Settings settings_;
};

void usage_check(bool condition, const std::string& message) {
  if (!condition) throw UsageError(message);
}

fs::path output_dir(const std::string& out) {
  usage_check(!out.empty(), "--out is required");
  fs::create_directories(out);
  return out;
}

std::unique_ptr<SteeringBackend> make_backend(SystemKind kind, const std::string& controller,
                                              const std::string& cost) {
  if (kind == SystemKind::DoubleIntegrator2D) {
    return std::make_unique<LinearBackend>(LinearSystem::double_integrator());
  }
  usage_check(!controller.empty() && !cost.empty(), "the car needs --controller and --cost model files");
  return std::make_unique<LearnedBackend>(SystemModel::kinematic_car(), Mlp::load(controller), Mlp::load(cost));
}

double default_radius(SystemKind kind) { return kind == SystemKind::KinematicCar ? 2.5 : 1.5; }

class GenDataCommand final : public Command {
 public:
  explicit GenDataCommand(CLI::App& parent)
      : Command(parent, "gen-data", "Solve random steering problems and write a training dataset") {
    bind("system", system_, "double_integrator or car");
    bind("n", n_, "number of problems");
    bind("seed", seed_, "random seed");
    bind("workers", workers_, "solver threads (0 = all cores)");
    bind("out", out_, "output directory");
  }

  void check() override {
    kind_ = system_kind_from_string(system_);
    usage_check(n_ >= 1, "--n must be at least 1");
    dir_ = output_dir(out_);
  }

  int execute(std::ostream& out) override {
    const SystemModel model = kind_ == SystemKind::KinematicCar ? SystemModel::kinematic_car()
                                                                 : SystemModel::double_integrator();
    const StateBox box = training_box(kind_);
    GenerationSettings settings;
    settings.workers = workers_;
    GenerationReport report;
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset data = generate_dataset(model, n_, seed_, box, settings, &report);
    const double wall = seconds_since(t0);

    write_stream(dir_ / "dataset.csv", [&](std::ostream& s) { write_dataset_csv(s, data); });
    const json manifest = {{"system", to_string(kind_)},
                           {"n", n_},
                           {"seed", seed_},
                           {"attempted", report.attempted},
                           {"solved", report.solved},
                           {"success_rate", report.success_rate()},
                           {"rows", data.size()},
                           {"box", {{"lower", to_vector(box.lower)}, {"upper", to_vector(box.upper)}}},
                           {"wall_time_s", wall}};
    write_file(dir_ / "dataset_manifest.json", manifest.dump(2) + "\n");
    out << "solved " << report.solved << "/" << report.attempted << " (success rate "
        << format_double(report.success_rate()) << "), " << data.size() << " rows\n";
    return kExitOk;
  }

 private:
  std::string system_ = "car";
  int n_ = 2000;
  std::uint64_t seed_ = 1;
  unsigned workers_ = 0;
  std::string out_;
  SystemKind kind_ = SystemKind::KinematicCar;
  fs::path dir_;
};

class TrainCommand final : public Command {
 public:
  explicit TrainCommand(CLI::App& parent)
      : Command(parent, "train", "Train the controller and cost-to-go networks") {
    bind("data", data_, "dataset CSV");
    bind("system", system_, "double_integrator or car");
    bind("out", out_, "output directory");
    bind("hidden", cfg_.hidden, "hidden layer widths");
    bind("epochs", cfg_.epochs, "training epochs");
    bind("batch_size", cfg_.batch_size, "mini-batch size");
    bind("learning_rate", cfg_.learning_rate, "initial learning rate");
    bind("lr_decay", cfg_.lr_decay, "per-epoch learning-rate factor");
    bind("momentum", cfg_.momentum, "SGD momentum");
    bind("validation_fraction", cfg_.validation_fraction, "validation share of the training rows");
    bind("seed", cfg_.seed, "random seed");
    bind("holdout_fraction", holdout_fraction_, "share of trajectories held out for the report");
    bind("eval_rollouts", eval_rollouts_, "closed-loop rollouts in the report (0 to skip)");
    bind("eval_seed", eval_seed_, "seed of the rollout starts");
  }

  void check() override {
    kind_ = system_kind_from_string(system_);
    cfg_.validate();
    usage_check(holdout_fraction_ > 0.0 && holdout_fraction_ < 1.0, "--holdout-fraction must lie in (0, 1)");
    usage_check(eval_rollouts_ >= 0, "--eval-rollouts must be non-negative");
    usage_check(!data_.empty(), "--data is required");
    std::istringstream in(read_file(data_));
    dataset_ = read_dataset_csv(in);
    dir_ = output_dir(out_);
  }

  int execute(std::ostream& out) override {
    const SystemModel model = kind_ == SystemKind::KinematicCar ? SystemModel::kinematic_car()
                                                                 : SystemModel::double_integrator();
    const auto [train_rows, held_out] = split_by_trajectory(dataset_, holdout_fraction_);
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult controller = train_controller(train_rows, cfg_);
    const TrainResult cost = train_cost(cost_to_go_samples(train_rows, model), cfg_);
    const double train_wall = seconds_since(t0);
    const HeldOutMetrics metrics = evaluate_held_out(model, controller.net, cost.net, held_out);

    json report = {{"system", to_string(kind_)},
                   {"data", data_},
                   {"config",
                    {{"hidden", cfg_.hidden},
                     {"epochs", cfg_.epochs},
                     {"batch_size", cfg_.batch_size},
                     {"learning_rate", cfg_.learning_rate},
                     {"lr_decay", cfg_.lr_decay},
                     {"momentum", cfg_.momentum},
                     {"validation_fraction", cfg_.validation_fraction},
                     {"seed", cfg_.seed},
                     {"holdout_fraction", holdout_fraction_}}},
                   {"rows", {{"train", train_rows.size()}, {"held_out", held_out.size()}}},
                   {"best_epoch", {{"controller", controller.best_epoch}, {"cost", cost.best_epoch}}},
                   {"held_out",
                    {{"control_rows", metrics.control_rows},
                     {"control_median_abs_error", metrics.control_median_abs_error},
                     {"cost_rows", metrics.cost_rows},
                     {"cost_median_relative_error", metrics.cost_median_relative_error},
                     {"cost_at_goal", metrics.cost_at_goal}}},
                   {"train_wall_time_s", train_wall}};
    if (eval_rollouts_ > 0) {
      const auto t1 = std::chrono::steady_clock::now();
      const RolloutStats stats = evaluate_rollouts(model, controller.net, eval_rollouts_, eval_seed_, training_box(kind_));
      report["rollouts"] = {{"attempts", stats.attempts},
                            {"successes", stats.successes},
                            {"success_rate", stats.success_rate()},
                            {"mean_endpoint_error", stats.mean_endpoint_error},
                            {"mean_cost", stats.mean_cost},
                            {"seed", eval_seed_},
                            {"eval_wall_time_s", seconds_since(t1)}};
      out << "rollout success " << stats.successes << "/" << stats.attempts << "\n";
    }

    controller.net.save((dir_ / "controller.json").string());
    cost.net.save((dir_ / "cost.json").string());
    write_stream(dir_ / "controller_loss.csv", [&](std::ostream& s) { write_loss_csv(s, controller); });
    write_stream(dir_ / "cost_loss.csv", [&](std::ostream& s) { write_loss_csv(s, cost); });
    write_file(dir_ / "train_report.json", report.dump(2) + "\n");
    out << "held-out control median abs error " << format_double(metrics.control_median_abs_error)
        << ", cost median relative error " << format_double(metrics.cost_median_relative_error) << "\n";
    return kExitOk;
  }

 private:
  std::string data_;
  std::string system_ = "car";
  std::string out_;
  TrainConfig cfg_;
  double holdout_fraction_ = 0.1;
  int eval_rollouts_ = 1000;
  std::uint64_t eval_seed_ = 2024;
  SystemKind kind_ = SystemKind::KinematicCar;
  Dataset dataset_;
  fs::path dir_;
};

// Problem, backend and query settings shared by plan and benchmark.
struct ProblemSettings {
  std::string problem;
  std::string controller;
  std::string cost;
  double r = 0.0;  // 0 selects the system default
  double goal_tolerance = 0.3;

  ProblemFile file;
  std::unique_ptr<SteeringBackend> backend;

  void bind(const std::function<void(const std::string&, std::string&, const std::string&)>& bind_string,
            const std::function<void(const std::string&, double&, const std::string&)>& bind_double) {
    bind_string("problem", problem, "problem JSON file");
    bind_string("controller", controller, "controller model (learned backend)");
    bind_string("cost", cost, "cost-to-go model (learned backend)");
    bind_double("r", r, "neighbor radius (0 = system default)");
    bind_double("goal_tolerance", goal_tolerance, "goal ball radius");
  }

  void load() {
    usage_check(!problem.empty(), "--problem is required");
    usage_check(fs::exists(problem), "cannot read " + problem);
    file = load_problem(problem);
    backend = make_backend(file.system, controller, cost);
    if (r == 0.0) r = default_radius(file.system);
  }

  PlanQuery query() const {
    PlanQuery q;
    q.env = file.problem.env;
    q.x_s = file.problem.x_s;
    q.goal = file.problem.goal;
    q.r = r;
    q.goal_tolerance = goal_tolerance;
    return q;
  }
};

void write_tree_csv(std::ostream& out, const PlanDrawing& drawing) {
  out << "edge,px,py\n";
  for (std::size_t e = 0; e < drawing.tree_edges.size(); ++e) {
    for (const auto& p : drawing.tree_edges[e]) {
      out << e << ',' << format_double(p.x()) << ',' << format_double(p.y()) << '\n';
    }
  }
}

std::vector<Polyline> read_tree_csv(std::istream& in) {
  std::string line;
  usage_check(static_cast<bool>(std::getline(in, line)) && line == "edge,px,py", "tree csv: unexpected header");
  std::vector<Polyline> edges;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    usage_check(cells.size() == 3, "tree csv: wrong column count");
    const auto e = static_cast<std::size_t>(std::stoul(cells[0]));
    if (edges.size() <= e) edges.resize(e + 1);
    edges[e].emplace_back(parse_double(cells[1]), parse_double(cells[2]));
  }
  return edges;
}

class PlanCommand final : public Command {
 public:
  explicit PlanCommand(CLI::App& parent) : Command(parent, "plan", "Run one planner on one problem") {
    problem_.bind([this](const std::string& k, std::string& f, const std::string& h) { bind(k, f, h); },
                  [this](const std::string& k, double& f, const std::string& h) { bind(k, f, h); });
    bind("planner", planner_, "fmt_pff, fmt_full or kino_rrt_star");
    bind("m", m_, "samples (FMT) or iterations (RRT*)");
    bind("seed", seed_, "random seed");
    bind("velocity_bound", velocity_bound_, "velocity sampling bound for fmt_full");
    bind("goal_bias", goal_bias_, "goal sampling probability for kino_rrt_star");
    bind("out", out_, "output directory");
  }

  void check() override {
    kind_ = planner_kind_from_string(planner_);
    problem_.load();
    query_ = problem_.query();
    query_.m = m_;
    query_.seed = seed_;
    query_.velocity_bound = velocity_bound_;
    query_.goal_bias = goal_bias_;
    query_.validate(*problem_.backend);
    if (kind_ != PlannerKind::FmtPff && !problem_.backend->exact()) {
      throw UsageError(planner_ + " needs exact steering; the " + problem_.backend->name() + " backend has none");
    }
    dir_ = output_dir(out_);
  }

  int execute(std::ostream& out) override {
    const PlanResult result = plan(kind_, query_, *problem_.backend);
    json manifest = plan_manifest(query_, *problem_.backend, result);
    manifest["problem"] = problem_.problem;
    manifest["env"] = env_to_json(query_.env);
    const PlanDrawing drawing = plan_drawing(query_, result);

    write_file(dir_ / "manifest.json", manifest.dump(2) + "\n");
    write_stream(dir_ / "trajectory.csv", [&](std::ostream& s) { write_trajectory_csv(s, result.solution); });
    write_stream(dir_ / "events.csv", [&](std::ostream& s) { write_event_log_csv(s, result); });
    write_stream(dir_ / "tree.csv", [&](std::ostream& s) { write_tree_csv(s, drawing); });
    write_file(dir_ / "plan.svg", render_plan_svg(drawing));
    out << result.outcome();
    if (result.solved) out << " cost " << format_double(result.cost);
    out << " (" << result.tree.vertices.size() << " vertices)\n";
    return kExitOk;
  }

 private:
  ProblemSettings problem_;
  std::string planner_ = "fmt_pff";
  int m_ = 1000;
  std::uint64_t seed_ = 1;
  double velocity_bound_ = 2.0;
  double goal_bias_ = 0.05;
  std::string out_;
  PlannerKind kind_ = PlannerKind::FmtPff;
  PlanQuery query_;
  fs::path dir_;
};

class BenchmarkCommand final : public Command {
 public:
  explicit BenchmarkCommand(CLI::App& parent)
      : Command(parent, "benchmark", "Sweep planners, sample counts and seeds on one problem") {
    problem_.bind([this](const std::string& k, std::string& f, const std::string& h) { bind(k, f, h); },
                  [this](const std::string& k, double& f, const std::string& h) { bind(k, f, h); });
    bind("planners", planners_, "planner names");
    bind("m", cfg_.sample_counts, "sample counts");
    bind("seeds", cfg_.seeds, "seeds per setting");
    bind("first_seed", cfg_.first_seed, "first seed");
    bind("buckets", cfg_.buckets, "wall-time buckets in the summary");
    bind("workers", cfg_.workers, "parallel runs");
    bind("out", out_, "output directory");
  }

  void check() override {
    cfg_.planners.clear();
    for (const auto& p : planners_) cfg_.planners.push_back(planner_kind_from_string(p));
    problem_.load();
    cfg_.r = problem_.r;
    cfg_.goal_tolerance = problem_.goal_tolerance;
    cfg_.validate();
    PlanQuery q = problem_.query();
    q.validate(*problem_.backend);
    for (PlannerKind p : cfg_.planners) {
      if (p != PlannerKind::FmtPff && !problem_.backend->exact()) {
        throw UsageError(to_string(p) + " needs exact steering; the " + problem_.backend->name() + " backend has none");
      }
    }
    dir_ = output_dir(out_);
  }

  int execute(std::ostream& out) override {
    const BenchmarkReport report = run_benchmark(problem_.file.problem, *problem_.backend, cfg_);
    int solved = 0;
    std::size_t issues = 0;
    for (const auto& r : report.runs) {
      solved += r.solved;
      issues += r.issues.size();
    }
    const json manifest = {{"problem", problem_.problem},
                           {"planners", planners_},
                           {"m", cfg_.sample_counts},
                           {"seeds", cfg_.seeds},
                           {"first_seed", cfg_.first_seed},
                           {"r", cfg_.r},
                           {"goal_tolerance", cfg_.goal_tolerance},
                           {"buckets", cfg_.buckets},
                           {"runs", report.runs.size()},
                           {"solved_runs", solved},
                           {"invariant_issues", issues}};
    write_stream(dir_ / "benchmark.csv", [&](std::ostream& s) { write_benchmark_csv(s, report.runs); });
    write_stream(dir_ / "benchmark_events.csv", [&](std::ostream& s) { write_benchmark_events_csv(s, report.runs); });
    write_stream(dir_ / "summary.csv", [&](std::ostream& s) { write_summary_csv(s, report.summary); });
    write_file(dir_ / "benchmark.svg", render_benchmark_svg(report.summary));
    write_file(dir_ / "benchmark_manifest.json", manifest.dump(2) + "\n");
    out << solved << "/" << report.runs.size() << " runs solved\n";
    for (PlannerKind p : cfg_.planners) {
      const auto last = std::find_if(report.summary.rbegin(), report.summary.rend(),
                                     [&](const BucketMedian& b) { return b.planner == p; });
      out << "  " << to_string(p) << ": median cost " << format_double(last->median_cost) << " at "
          << format_double(last->time_s) << " s\n";
    }
    if (issues > 0) {
      throw std::runtime_error(std::to_string(issues) + " tree invariant violations, see benchmark.csv");
    }
    return kExitOk;
  }

 private:
  ProblemSettings problem_;
  std::vector<std::string> planners_{"fmt_pff", "fmt_full", "kino_rrt_star"};
  BenchmarkConfig cfg_;
  std::string out_;
  fs::path dir_;
};

class PlotCommand final : public Command {
 public:
  explicit PlotCommand(CLI::App& parent)
      : Command(parent, "plot", "Re-render the SVG files of a plan or benchmark output directory") {
    bind("dir", dir_, "output directory of plan or benchmark");
  }

  void check() override {
    usage_check(!dir_.empty(), "--dir is required");
    has_plan_ = fs::exists(fs::path(dir_) / "manifest.json") && fs::exists(fs::path(dir_) / "tree.csv");
    has_benchmark_ = fs::exists(fs::path(dir_) / "summary.csv");
    usage_check(has_plan_ || has_benchmark_, "no plan or benchmark results in " + dir_);
  }

  int execute(std::ostream& out) override {
    const fs::path dir(dir_);
    if (has_plan_) {
      const json manifest = json::parse(read_file(dir / "manifest.json"));
      PlanDrawing d;
      d.env = env_from_json(manifest.at("env"));
      const auto x_s = manifest.at("x_s").get<std::vector<double>>();
      const auto goal = manifest.at("goal").get<std::vector<double>>();
      usage_check(x_s.size() >= 2 && goal.size() == 2, "manifest: malformed start or goal");
      d.start = PartialState(x_s[0], x_s[1]);
      d.goal = PartialState(goal[0], goal[1]);
      d.goal_tolerance = manifest.at("settings").at("goal_tolerance").get<double>();
      std::istringstream tree(read_file(dir / "tree.csv"));
      d.tree_edges = read_tree_csv(tree);
      std::istringstream traj(read_file(dir / "trajectory.csv"));
      for (const auto& x : read_trajectory_csv(traj).states) d.solution.push_back(position(x));
      write_file(dir / "plan.svg", render_plan_svg(d));
      out << "wrote " << (dir / "plan.svg").string() << "\n";
    }
    if (has_benchmark_) {
      std::istringstream in(read_file(dir / "summary.csv"));
      write_file(dir / "benchmark.svg", render_benchmark_svg(read_summary_csv(in)));
      out << "wrote " << (dir / "benchmark.svg").string() << "\n";
    }
    return kExitOk;
  }

 private:
  std::string dir_;
  bool has_plan_ = false;
  bool has_benchmark_ = false;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kinodynamic planning with partial-final-state-free steering", "fmtpff"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<Command>> commands;
  commands.push_back(std::make_unique<GenDataCommand>(app));
  commands.push_back(std::make_unique<TrainCommand>(app));
  commands.push_back(std::make_unique<PlanCommand>(app));
  commands.push_back(std::make_unique<BenchmarkCommand>(app));
  commands.push_back(std::make_unique<PlotCommand>(app));

  std::vector<const char*> argv{"fmtpff"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }
  Command* command = nullptr;
  for (const auto& c : commands) {
    if (c->app()->parsed()) command = c.get();
  }

  try {
    command->prepare();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnsupportedConfiguration& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  try {
    return command->execute(out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace fmtpff
