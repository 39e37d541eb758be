#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fmtpff/dataset.hpp"
#include "fmtpff/dynamics.hpp"
#include "fmtpff/steering.hpp"
#include "json.hpp"

namespace fmtpff {

/// Fully connected network: tanh on hidden layers, identity output. Inputs
/// and outputs are standardized with per-dimension statistics, so the layers
/// operate on (x - mean) / std and the raw output is de-standardized.
class Mlp {
 public:
  struct Layer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd biases;
  };

  Mlp() = default;
  // Glorot-uniform weights, zero biases, identity normalization.
  Mlp(std::vector<int> layer_dims, std::uint64_t seed);

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  const std::vector<Layer>& layers() const { return layers_; }

  Eigen::VectorXd input_mean, input_std, output_mean, output_std;

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  // Column-batched forward pass in normalized space.
  Eigen::MatrixXd forward_normalized(const Eigen::MatrixXd& z) const;

  /// Mean squared error over all entries of a normalized batch (columns are
  /// samples) and, when grad is non-null, its gradient w.r.t. parameters().
  double loss(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, Eigen::VectorXd* grad) const;

  // All weights then biases, layer by layer; weights row-major.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& p);
  int num_parameters() const;

  void validate() const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static Mlp load(const std::string& path);

  static constexpr int kFormatVersion = 1;

 private:
  std::vector<int> dims_;
  std::vector<Layer> layers_;
};

struct TrainConfig {
  std::vector<int> hidden{64, 64};
  int epochs = 200;
  int batch_size = 64;
  double learning_rate = 0.01;
  // Per-epoch multiplicative decay of the learning rate.
  double lr_decay = 0.99;
  double momentum = 0.9;
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainResult {
  Mlp net;  // parameters from the epoch with the lowest validation loss
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = -1;
};

/// Mini-batch SGD with momentum on the normalized MSE. Rows are samples.
/// Deterministic in cfg.seed. Throws TrainingFailure on a non-finite loss.
TrainResult train(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, const TrainConfig& cfg);

// Controller: state -> control over every row.
TrainResult train_controller(const Dataset& data, const TrainConfig& cfg);
// Cost-to-go: state -> optimal cost over rows that carry a cost.
TrainResult train_cost(const Dataset& data, const TrainConfig& cfg);

struct CostSamples {
  std::vector<StateVec> states;
  std::vector<double> costs;
};

/// Cost-to-go samples along every trajectory of the dataset. A trajectory
/// runs from one cost-carrying row to the next; its uniform step h follows
/// from the total J = h * sum_k (1 + u_k' R u_k). Tails of optimal
/// trajectories are optimal, so every row yields its tail sum, and the final
/// state (the last row integrated over h) yields zero.
CostSamples cost_to_go_samples(const Dataset& data, const SystemModel& system);
TrainResult train_cost(const CostSamples& samples, const TrainConfig& cfg);

void write_loss_csv(std::ostream& out, const TrainResult& result);

/// Splits at a trajectory boundary (a row carrying a cost starts a
/// trajectory): the last ceil(fraction * trajectories) trajectories are held
/// out.
std::pair<Dataset, Dataset> split_by_trajectory(const Dataset& data, double holdout_fraction);

struct HeldOutMetrics {
  int control_rows = 0;
  // Median over rows and control dimensions of |predicted - target|.
  double control_median_abs_error = 0.0;
  int cost_rows = 0;
  // Median of |predicted - target| / target over rows carrying a cost.
  double cost_median_relative_error = 0.0;
  // Cost prediction at the goal with every free state zero.
  double cost_at_goal = 0.0;
};

HeldOutMetrics evaluate_held_out(const SystemModel& system, const Mlp& controller, const Mlp& cost,
                                 const Dataset& held_out);

/// Forward pass clamped to the system's control box.
ControlVec predict_control(const Mlp& net, const SystemModel& system, const StateVec& x);

/// Forward pass of a cost head, floored at zero.
double predict_cost(const Mlp& net, const StateVec& x);

// Default training box of each system; doubles as the extrapolation guard.
StateBox training_box(SystemKind kind);

struct RolloutOptions {
  double dt = 0.05;
  double t_max = 15.0;
  double stop_radius = 0.05;
  double success_radius = 0.3;
  std::optional<StateBox> guard;  // training_box(kind) when unset
};

/// Closed-loop steering with the network controller. The problem is shifted
/// so the goal is the origin, rolled out with RK4 until the position is within
/// stop_radius, or until the distance starts growing again after entering
/// success_radius (the rollout is cut at the closest approach), or t_max.
/// Succeeds when the final distance is within success_radius. A start outside
/// the guard box fails immediately.
SteeringResult rollout_nn_steer(const SystemModel& system, const Mlp& net, const StateVec& x_a,
                                const PartialState& goal, const RolloutOptions& options = {});

struct RolloutStats {
  int attempts = 0;
  int successes = 0;
  double mean_endpoint_error = 0.0;
  double mean_cost = 0.0;  // over successful rollouts
  double success_rate() const { return attempts ? static_cast<double>(successes) / attempts : 0.0; }
};

/// Rollouts to the origin from n starts drawn uniformly in box.
RolloutStats evaluate_rollouts(const SystemModel& system, const Mlp& net, int n, std::uint64_t seed,
                               const StateBox& box, const RolloutOptions& options = {});

}  // namespace fmtpff
