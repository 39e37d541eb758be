#pragma once

#include <string>
#include <utility>
#include <vector>

#include "fmtpff/environment.hpp"
#include "fmtpff/planner.hpp"

namespace fmtpff {

using Polyline = std::vector<PartialState>;

/// Everything needed to draw one planning run.
struct PlanDrawing {
  Env env;
  std::vector<Polyline> tree_edges;
  Polyline solution;
  PartialState start = PartialState::Zero();
  PartialState goal = PartialState::Zero();
  double goal_tolerance = 0.3;
};

// Position polylines of every tree edge, at most max_points per edge.
PlanDrawing plan_drawing(const PlanQuery& q, const PlanResult& result, int max_points = 16);

/// Workspace view: obstacles, tree edges, the solution highlighted
/// (class="solution"), start and goal region.
std::string render_plan_svg(const PlanDrawing& drawing);

struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;  // non-finite y values are skipped
};

/// Line chart with a logarithmic x axis (x must be positive).
std::string render_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                             const std::vector<ChartSeries>& series);

std::string xml_escape(const std::string& text);

}  // namespace fmtpff
