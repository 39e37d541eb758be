#include "fmtpff/learning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include "fmtpff/errors.hpp"
#include "fmtpff/format.hpp"
#include "fmtpff/random.hpp"

namespace fmtpff {

namespace {

using nlohmann::json;

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j, int expected, const std::string& what) {
  const auto values = j.get<std::vector<double>>();
  require(static_cast<int>(values.size()) == expected, "model: wrong length for " + what);
  return Eigen::Map<const Eigen::VectorXd>(values.data(), expected);
}

void standardize_stats(const Eigen::MatrixXd& rows, Eigen::VectorXd& mean, Eigen::VectorXd& stddev) {
  mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - mean.transpose();
  stddev = (centered.array().square().colwise().sum() / static_cast<double>(rows.rows())).sqrt().transpose();
  for (Eigen::Index i = 0; i < stddev.size(); ++i) {
    if (!(stddev[i] > 1e-12)) stddev[i] = 1.0;
  }
}

// Fisher-Yates with the fixed-mapping RNG helpers (std::shuffle's algorithm
// is implementation-defined).
void shuffle(std::vector<int>& order, Rng& rng) {
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(uniform_int(rng, 0, i))]);
  }
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m, const std::vector<int>& order, std::size_t begin,
                               std::size_t end) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) out.col(static_cast<Eigen::Index>(i - begin)) = m.col(order[i]);
  return out;
}

}  // namespace

Mlp::Mlp(std::vector<int> layer_dims, std::uint64_t seed) : dims_(std::move(layer_dims)) {
  require(dims_.size() >= 2, "mlp: need at least input and output layers");
  for (int d : dims_) require(d >= 1, "mlp: layer widths must be positive");
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    const int in = dims_[l];
    const int out = dims_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    Layer layer;
    layer.weights.resize(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weights(r, c) = uniform(rng, -limit, limit);
    }
    layer.biases = Eigen::VectorXd::Zero(out);
    layers_.push_back(std::move(layer));
  }
  input_mean = Eigen::VectorXd::Zero(input_dim());
  input_std = Eigen::VectorXd::Ones(input_dim());
  output_mean = Eigen::VectorXd::Zero(output_dim());
  output_std = Eigen::VectorXd::Ones(output_dim());
}

Eigen::MatrixXd Mlp::forward_normalized(const Eigen::MatrixXd& z) const {
  Eigen::MatrixXd a = z;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd pre = (layers_[l].weights * a).colwise() + layers_[l].biases;
    a = l + 1 < layers_.size() ? Eigen::MatrixXd(pre.array().tanh()) : pre;
  }
  return a;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  require(x.size() == input_dim(), "mlp: input dimension mismatch");
  const Eigen::VectorXd z = (x - input_mean).cwiseQuotient(input_std);
  const Eigen::VectorXd y = forward_normalized(z);
  return y.cwiseProduct(output_std) + output_mean;
}

double Mlp::loss(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, Eigen::VectorXd* grad) const {
  const std::size_t n_layers = layers_.size();
  std::vector<Eigen::MatrixXd> acts(n_layers + 1);
  acts[0] = inputs;
  for (std::size_t l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd pre = (layers_[l].weights * acts[l]).colwise() + layers_[l].biases;
    acts[l + 1] = l + 1 < n_layers ? Eigen::MatrixXd(pre.array().tanh()) : pre;
  }
  const Eigen::MatrixXd err = acts[n_layers] - targets;
  const double scale = 1.0 / static_cast<double>(err.size());
  const double value = err.squaredNorm() * scale;
  if (!grad) return value;

  grad->resize(num_parameters());
  std::vector<Eigen::Index> offsets(n_layers);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    offsets[l] = offset;
    offset += layers_[l].weights.size() + layers_[l].biases.size();
  }
  Eigen::MatrixXd delta = 2.0 * scale * err;
  for (std::size_t l = n_layers; l-- > 0;) {
    const Layer& layer = layers_[l];
    const Eigen::MatrixXd g_w = delta * acts[l].transpose();
    const Eigen::Index rows = layer.weights.rows();
    const Eigen::Index cols = layer.weights.cols();
    for (Eigen::Index r = 0; r < rows; ++r) {
      grad->segment(offsets[l] + r * cols, cols) = g_w.row(r).transpose();
    }
    grad->segment(offsets[l] + rows * cols, rows) = delta.rowwise().sum();
    if (l > 0) {
      delta = (layer.weights.transpose() * delta).cwiseProduct((1.0 - acts[l].array().square()).matrix());
    }
  }
  return value;
}

int Mlp::num_parameters() const {
  int n = 0;
  for (const auto& layer : layers_) n += static_cast<int>(layer.weights.size() + layer.biases.size());
  return n;
}

Eigen::VectorXd Mlp::parameters() const {
  Eigen::VectorXd p(num_parameters());
  Eigen::Index at = 0;
  for (const auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      p.segment(at, layer.weights.cols()) = layer.weights.row(r).transpose();
      at += layer.weights.cols();
    }
    p.segment(at, layer.biases.size()) = layer.biases;
    at += layer.biases.size();
  }
  return p;
}

void Mlp::set_parameters(const Eigen::VectorXd& p) {
  require(p.size() == num_parameters(), "mlp: parameter count mismatch");
  Eigen::Index at = 0;
  for (auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      layer.weights.row(r) = p.segment(at, layer.weights.cols()).transpose();
      at += layer.weights.cols();
    }
    layer.biases = p.segment(at, layer.biases.size());
    at += layer.biases.size();
  }
}

void Mlp::validate() const {
  require(dims_.size() >= 2 && layers_.size() + 1 == dims_.size(), "mlp: layer structure mismatch");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    require(layers_[l].weights.rows() == dims_[l + 1] && layers_[l].weights.cols() == dims_[l] &&
                layers_[l].biases.size() == dims_[l + 1],
            "mlp: layer " + std::to_string(l) + " does not chain");
  }
  require(input_mean.size() == input_dim() && input_std.size() == input_dim(), "mlp: input statistics size");
  require(output_mean.size() == output_dim() && output_std.size() == output_dim(), "mlp: output statistics size");
  require((input_std.array() > 0.0).all() && (output_std.array() > 0.0).all(),
          "mlp: normalization std must be positive");
  require(parameters().allFinite(), "mlp: non-finite parameters");
}

json Mlp::to_json() const {
  json layers = json::array();
  for (const auto& layer : layers_) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = layer.weights;
    layers.push_back({{"weights", std::vector<double>(w.data(), w.data() + w.size())},
                      {"biases", vector_json(layer.biases)}});
  }
  return {{"format_version", kFormatVersion},
          {"layer_dims", dims_},
          {"hidden_activation", "tanh"},
          {"output_activation", "identity"},
          {"input_mean", vector_json(input_mean)},
          {"input_std", vector_json(input_std)},
          {"output_mean", vector_json(output_mean)},
          {"output_std", vector_json(output_std)},
          {"layers", layers}};
}

Mlp Mlp::from_json(const json& j) {
  require(j.at("format_version").get<int>() == kFormatVersion, "model: unsupported format_version");
  require(j.value("hidden_activation", "tanh") == "tanh", "model: unsupported hidden activation");
  Mlp net;
  net.dims_ = j.at("layer_dims").get<std::vector<int>>();
  require(net.dims_.size() >= 2, "model: need at least two layer dims");
  const json& layers = j.at("layers");
  require(layers.size() + 1 == net.dims_.size(), "model: layer count does not match layer_dims");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const int in = net.dims_[l];
    const int out = net.dims_[l + 1];
    const auto w = layers[l].at("weights").get<std::vector<double>>();
    require(static_cast<int>(w.size()) == in * out, "model: wrong weight count in layer " + std::to_string(l));
    Layer layer;
    layer.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        w.data(), out, in);
    layer.biases = vector_from_json(layers[l].at("biases"), out, "biases");
    net.layers_.push_back(std::move(layer));
  }
  net.input_mean = vector_from_json(j.at("input_mean"), net.input_dim(), "input_mean");
  net.input_std = vector_from_json(j.at("input_std"), net.input_dim(), "input_std");
  net.output_mean = vector_from_json(j.at("output_mean"), net.output_dim(), "output_mean");
  net.output_std = vector_from_json(j.at("output_std"), net.output_dim(), "output_std");
  net.validate();
  return net;
}

void Mlp::save(const std::string& path) const {
  std::ofstream out(path);
  require(static_cast<bool>(out), "model: cannot write " + path);
  out << to_json().dump(1) << '\n';
}

Mlp Mlp::load(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "model: cannot read " + path);
  return from_json(json::parse(in));
}

void TrainConfig::validate() const {
  require(epochs >= 1 && batch_size >= 1, "train: epochs and batch_size must be positive");
  require(learning_rate > 0.0 && lr_decay > 0.0 && lr_decay <= 1.0, "train: invalid learning rate schedule");
  require(momentum >= 0.0 && momentum < 1.0, "train: momentum must be in [0, 1)");
  require(validation_fraction > 0.0 && validation_fraction <= 0.5, "train: validation_fraction must be in (0, 0.5]");
  for (int h : hidden) require(h >= 1, "train: hidden widths must be positive");
}

TrainResult train(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets, const TrainConfig& cfg) {
  cfg.validate();
  require(inputs.rows() >= 1, "train: empty dataset");
  require(inputs.rows() == targets.rows(), "train: input and target row counts differ");
  require(inputs.allFinite() && targets.allFinite(), "train: non-finite data");
  const int n = static_cast<int>(inputs.rows());

  Rng rng(cfg.seed);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  int n_val = static_cast<int>(std::floor(cfg.validation_fraction * n));
  std::vector<int> train_rows, val_rows;
  if (n_val < 1 || n - n_val < 1) {
    // Too small to split: validate on the training rows.
    train_rows = order;
    val_rows = order;
  } else {
    val_rows.assign(order.begin(), order.begin() + n_val);
    train_rows.assign(order.begin() + n_val, order.end());
  }

  std::vector<int> dims{static_cast<int>(inputs.cols())};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(static_cast<int>(targets.cols()));
  TrainResult result;
  Mlp net(dims, derive_seed(cfg.seed, 1));

  Eigen::MatrixXd train_in(inputs.cols(), static_cast<Eigen::Index>(train_rows.size()));
  Eigen::MatrixXd train_out(targets.cols(), train_in.cols());
  for (std::size_t i = 0; i < train_rows.size(); ++i) {
    train_in.col(static_cast<Eigen::Index>(i)) = inputs.row(train_rows[i]).transpose();
    train_out.col(static_cast<Eigen::Index>(i)) = targets.row(train_rows[i]).transpose();
  }
  standardize_stats(train_in.transpose(), net.input_mean, net.input_std);
  standardize_stats(train_out.transpose(), net.output_mean, net.output_std);
  auto normalize = [](const Eigen::MatrixXd& cols, const Eigen::VectorXd& mean, const Eigen::VectorXd& sd) {
    return Eigen::MatrixXd((cols.colwise() - mean).array().colwise() / sd.array());
  };
  train_in = normalize(train_in, net.input_mean, net.input_std);
  train_out = normalize(train_out, net.output_mean, net.output_std);
  Eigen::MatrixXd val_in(inputs.cols(), static_cast<Eigen::Index>(val_rows.size()));
  Eigen::MatrixXd val_out(targets.cols(), val_in.cols());
  for (std::size_t i = 0; i < val_rows.size(); ++i) {
    val_in.col(static_cast<Eigen::Index>(i)) = inputs.row(val_rows[i]).transpose();
    val_out.col(static_cast<Eigen::Index>(i)) = targets.row(val_rows[i]).transpose();
  }
  val_in = normalize(val_in, net.input_mean, net.input_std);
  val_out = normalize(val_out, net.output_mean, net.output_std);

  Eigen::VectorXd params = net.parameters();
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd grad;
  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_params = params;
  std::vector<int> batch_order(train_rows.size());
  std::iota(batch_order.begin(), batch_order.end(), 0);
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  double lr = cfg.learning_rate;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(batch_order, rng);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < batch_order.size(); begin += batch) {
      const std::size_t end = std::min(begin + batch, batch_order.size());
      const Eigen::MatrixXd xb = gather_columns(train_in, batch_order, begin, end);
      const Eigen::MatrixXd yb = gather_columns(train_out, batch_order, begin, end);
      const double l = net.loss(xb, yb, &grad);
      if (!std::isfinite(l) || !grad.allFinite()) {
        throw TrainingFailure("training diverged at epoch " + std::to_string(epoch) + " (batch loss " +
                              format_double(l) + ", learning rate " + format_double(lr) + ")");
      }
      epoch_loss += l * static_cast<double>(end - begin);
      velocity = cfg.momentum * velocity - lr * grad;
      params += velocity;
      net.set_parameters(params);
    }
    epoch_loss /= static_cast<double>(batch_order.size());
    const double val = net.loss(val_in, val_out, nullptr);
    if (!std::isfinite(val)) {
      throw TrainingFailure("training diverged at epoch " + std::to_string(epoch) + " (validation loss " +
                            format_double(val) + ")");
    }
    result.train_loss.push_back(epoch_loss);
    result.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      best_params = params;
      result.best_epoch = epoch;
    }
    lr *= cfg.lr_decay;
  }
  net.set_parameters(best_params);
  result.net = std::move(net);
  return result;
}

TrainResult train_controller(const Dataset& data, const TrainConfig& cfg) {
  data.validate();
  require(data.size() >= 1, "train: empty dataset");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), kStateDim);
  Eigen::MatrixXd y(static_cast<Eigen::Index>(data.size()), kControlDim);
  for (std::size_t i = 0; i < data.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = data.inputs[i].transpose();
    y.row(static_cast<Eigen::Index>(i)) = data.control_targets[i].transpose();
  }
  return train(x, y, cfg);
}

TrainResult train_cost(const Dataset& data, const TrainConfig& cfg) {
  data.validate();
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.cost_targets[i]) rows.push_back(i);
  }
  require(!rows.empty(), "train: dataset has no cost-to-go rows");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), kStateDim);
  Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = data.inputs[rows[i]].transpose();
    y(static_cast<Eigen::Index>(i), 0) = *data.cost_targets[rows[i]];
  }
  return train(x, y, cfg);
}

CostSamples cost_to_go_samples(const Dataset& data, const SystemModel& system) {
  data.validate();
  require(data.size() == 0 || data.cost_targets.front().has_value(), "cost_to_go_samples: first row must carry a cost");
  CostSamples out;
  std::size_t begin = 0;
  while (begin < data.size()) {
    std::size_t end = begin + 1;
    while (end < data.size() && !data.cost_targets[end]) ++end;
    std::vector<double> stage(end - begin);
    double total = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const ControlVec& u = data.control_targets[i];
      stage[i - begin] = 1.0 + u.dot(system.cost_weights * u);
      total += stage[i - begin];
    }
    const double h = *data.cost_targets[begin] / total;
    double tail = *data.cost_targets[begin];
    for (std::size_t i = begin; i < end; ++i) {
      out.states.push_back(data.inputs[i]);
      out.costs.push_back(std::max(tail, 0.0));
      tail -= h * stage[i - begin];
    }
    const ControlVec& u_last = data.control_targets[end - 1];
    out.states.push_back(integrate_rk4(system, data.inputs[end - 1], ControlSignal::constant(u_last, h), h, h).back());
    out.costs.push_back(0.0);
    begin = end;
  }
  return out;
}

TrainResult train_cost(const CostSamples& samples, const TrainConfig& cfg) {
  require(!samples.states.empty() && samples.states.size() == samples.costs.size(),
          "train: cost samples are empty or ragged");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.states.size()), kStateDim);
  Eigen::MatrixXd y(static_cast<Eigen::Index>(samples.states.size()), 1);
  for (std::size_t i = 0; i < samples.states.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = samples.states[i].transpose();
    y(static_cast<Eigen::Index>(i), 0) = samples.costs[i];
  }
  return train(x, y, cfg);
}

std::pair<Dataset, Dataset> split_by_trajectory(const Dataset& data, double holdout_fraction) {
  data.validate();
  require(holdout_fraction > 0.0 && holdout_fraction < 1.0, "split_by_trajectory: fraction must lie in (0, 1)");
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.cost_targets[i]) starts.push_back(i);
  }
  require(starts.size() >= 2, "split_by_trajectory: need at least two trajectories");
  const auto held = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(holdout_fraction * static_cast<double>(starts.size()))), 1, starts.size() - 1);
  const std::size_t cut = starts[starts.size() - held];
  std::pair<Dataset, Dataset> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (i < cut ? out.first : out.second).append(data.inputs[i], data.control_targets[i], data.cost_targets[i]);
  }
  return out;
}

HeldOutMetrics evaluate_held_out(const SystemModel& system, const Mlp& controller, const Mlp& cost,
                                 const Dataset& held_out) {
  held_out.validate();
  require(held_out.size() >= 1, "evaluate_held_out: empty dataset");
  std::vector<double> control_errors;
  std::vector<double> cost_errors;
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    const ControlVec err = (predict_control(controller, system, held_out.inputs[i]) - held_out.control_targets[i]).cwiseAbs();
    for (int k = 0; k < kControlDim; ++k) control_errors.push_back(err[k]);
    if (const auto& c = held_out.cost_targets[i]; c && *c > 0.0) {
      cost_errors.push_back(std::abs(predict_cost(cost, held_out.inputs[i]) - *c) / *c);
    }
  }
  auto median_of = [](std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
  };
  HeldOutMetrics m;
  m.control_rows = static_cast<int>(held_out.size());
  m.control_median_abs_error = median_of(control_errors);
  m.cost_rows = static_cast<int>(cost_errors.size());
  m.cost_median_relative_error = median_of(cost_errors);
  m.cost_at_goal = predict_cost(cost, StateVec::Zero());
  return m;
}

void write_loss_csv(std::ostream& out, const TrainResult& result) {
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
    out << e << ',' << format_double(result.train_loss[e]) << ',' << format_double(result.val_loss[e]) << '\n';
  }
}

ControlVec predict_control(const Mlp& net, const SystemModel& system, const StateVec& x) {
  require(net.input_dim() == kStateDim && net.output_dim() == kControlDim, "predict_control: not a controller");
  const Eigen::VectorXd y = net.forward(x);
  ControlVec u(y[0], y[1]);
  if (!u.allFinite()) u.setZero();
  return system.control_bounds.clamp(u);
}

double predict_cost(const Mlp& net, const StateVec& x) {
  require(net.input_dim() == kStateDim && net.output_dim() == 1, "predict_cost: not a cost head");
  const double c = net.forward(x)[0];
  return std::isfinite(c) ? std::max(0.0, c) : std::numeric_limits<double>::infinity();
}

StateBox training_box(SystemKind kind) {
  return kind == SystemKind::KinematicCar ? StateBox::car_training() : StateBox::double_integrator_training();
}

SteeringResult rollout_nn_steer(const SystemModel& system, const Mlp& net, const StateVec& x_a,
                                const PartialState& goal, const RolloutOptions& options) {
  require(options.dt > 0.0 && options.t_max > 0.0, "rollout: dt and t_max must be positive");
  const StateBox guard = options.guard.value_or(training_box(system.kind));
  StateVec x = normalize_state(system, x_a);
  x.head<kPartialDim>() -= goal;
  if (!x.allFinite() || !guard.contains(x)) return steering_failure(position(x).norm());

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(x);
  double best = position(x).norm();
  std::size_t best_k = 0;
  const auto steps = static_cast<std::size_t>(std::llround(options.t_max / options.dt));
  for (std::size_t k = 0;; ++k) {
    const double dist = position(x).norm();
    if (dist <= options.stop_radius) break;
    if (best <= options.success_radius && dist > best) {
      traj.states.resize(best_k + 1);
      traj.times.resize(best_k + 1);
      traj.controls.resize(best_k);
      break;
    }
    if (k >= steps) break;
    const ControlVec u = predict_control(net, system, x);
    x = rk4_step(system, x, u, options.dt);
    if (!x.allFinite()) return steering_failure();
    traj.controls.push_back(u);
    traj.states.push_back(x);
    traj.times.push_back(static_cast<double>(k + 1) * options.dt);
    if (position(x).norm() < best) {
      best = position(x).norm();
      best_k = traj.states.size() - 1;
    }
  }

  SteeringResult r;
  r.endpoint_error = position(traj.back()).norm();
  r.trajectory = translate(std::move(traj), goal);
  r.trajectory.cost = trajectory_cost(r.trajectory, system);
  r.final_state = r.trajectory.back();
  r.cost = r.trajectory.cost;
  r.tf = r.trajectory.times.back();
  r.success = r.endpoint_error <= options.success_radius;
  if (!r.success) r.cost = std::numeric_limits<double>::infinity();
  return r;
}

RolloutStats evaluate_rollouts(const SystemModel& system, const Mlp& net, int n, std::uint64_t seed,
                               const StateBox& box, const RolloutOptions& options) {
  require(n >= 1, "evaluate_rollouts: n must be at least 1");
  Rng rng(seed);
  RolloutStats stats;
  double cost_sum = 0.0;
  double err_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    StateVec x;
    for (int d = 0; d < kStateDim; ++d) x[d] = uniform(rng, box.lower[d], box.upper[d]);
    const SteeringResult r = rollout_nn_steer(system, net, x, PartialState::Zero(), options);
    ++stats.attempts;
    err_sum += r.endpoint_error;
    if (r.success) {
      ++stats.successes;
      cost_sum += r.cost;
    }
  }
  stats.mean_endpoint_error = err_sum / n;
  stats.mean_cost = stats.successes ? cost_sum / stats.successes : 0.0;
  return stats;
}

}  // namespace fmtpff
