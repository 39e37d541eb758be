#include "fmtpff/dataset.hpp"

#include <istream>
#include <numbers>
#include <ostream>

#include "fmtpff/errors.hpp"
#include "fmtpff/format.hpp"

namespace fmtpff {

StateBox StateBox::car_training() {
  StateBox box;
  box.lower << -4.0, -4.0, -std::numbers::pi, -2.0;
  box.upper << 4.0, 4.0, std::numbers::pi, 2.0;
  return box;
}

StateBox StateBox::double_integrator_training() {
  StateBox box;
  box.lower << -4.0, -4.0, -2.0, -2.0;
  box.upper << 4.0, 4.0, 2.0, 2.0;
  return box;
}

void Dataset::validate() const {
  require(control_targets.size() == inputs.size() && cost_targets.size() == inputs.size(),
          "dataset: column lengths differ");
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  data.validate();
  for (int i = 0; i < kStateDim; ++i) out << 'x' << i + 1 << ',';
  for (int i = 0; i < kControlDim; ++i) out << 'u' << i + 1 << ',';
  out << "cost_to_go\n";
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (int i = 0; i < kStateDim; ++i) out << format_double(data.inputs[r][i]) << ',';
    for (int i = 0; i < kControlDim; ++i) out << format_double(data.control_targets[r][i]) << ',';
    if (data.cost_targets[r]) out << format_double(*data.cost_targets[r]);
    out << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in) {
  Dataset data;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "dataset csv: missing header");
  require(line.rfind("x1,", 0) == 0 && line.find("cost_to_go") != std::string::npos,
          "dataset csv: unexpected header '" + line + "'");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == kStateDim + kControlDim + 1, "dataset csv: wrong column count");
    StateVec x;
    ControlVec u;
    for (int i = 0; i < kStateDim; ++i) x[i] = parse_double(cells[i]);
    for (int i = 0; i < kControlDim; ++i) u[i] = parse_double(cells[kStateDim + i]);
    std::optional<double> cost;
    if (!cells.back().empty()) cost = parse_double(cells.back());
    data.append(x, u, cost);
  }
  return data;
}

}  // namespace fmtpff
