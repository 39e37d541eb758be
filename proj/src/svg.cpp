#include "fmtpff/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "fmtpff/format.hpp"

namespace fmtpff {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();
constexpr double kCanvas = 640.0;
constexpr double kMargin = 20.0;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Workspace-to-canvas map with the y axis pointing up.
struct View {
  Box2 bounds;
  double scale = 1.0;

  double x(double wx) const { return kMargin + (wx - bounds.min.x()) * scale; }
  double y(double wy) const { return kMargin + (bounds.max.y() - wy) * scale; }
  double width() const { return 2 * kMargin + (bounds.max.x() - bounds.min.x()) * scale; }
  double height() const { return 2 * kMargin + (bounds.max.y() - bounds.min.y()) * scale; }
};

std::string points_attr(const View& view, const Polyline& line) {
  std::string out;
  for (const auto& p : line) {
    if (!out.empty()) out += ' ';
    out += num(view.x(p.x())) + ',' + num(view.y(p.y()));
  }
  return out;
}

std::string header(double width, double height) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) +
         "\" height=\"" + num(height) + "\" viewBox=\"0 0 " + num(width) + ' ' + num(height) + "\">\n";
}

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

PlanDrawing plan_drawing(const PlanQuery& q, const PlanResult& result, int max_points) {
  PlanDrawing d;
  d.env = q.env;
  d.start = position(q.x_s);
  d.goal = q.goal;
  d.goal_tolerance = q.goal_tolerance;
  auto thin = [&](const Trajectory& t) {
    Polyline line;
    const std::size_t n = t.size();
    if (n == 0) return line;
    const std::size_t stride = std::max<std::size_t>(1, (n + max_points - 2) / std::max(1, max_points - 1));
    for (std::size_t i = 0; i < n; i += stride) line.push_back(position(t.states[i]));
    if ((n - 1) % stride != 0) line.push_back(position(t.states.back()));
    return line;
  };
  for (const auto& v : result.tree.vertices) {
    if (v.parent >= 0) d.tree_edges.push_back(thin(v.edge));
  }
  for (const auto& x : result.solution.states) d.solution.push_back(position(x));
  return d;
}

std::string render_plan_svg(const PlanDrawing& d) {
  View view{d.env.bounds, 1.0};
  const double span = std::max(d.env.bounds.max.x() - d.env.bounds.min.x(), d.env.bounds.max.y() - d.env.bounds.min.y());
  view.scale = (kCanvas - 2 * kMargin) / span;

  std::ostringstream out;
  out << header(view.width(), view.height());
  out << "<rect class=\"bounds\" x=\"" << num(view.x(d.env.bounds.min.x())) << "\" y=\""
      << num(view.y(d.env.bounds.max.y())) << "\" width=\""
      << num((d.env.bounds.max.x() - d.env.bounds.min.x()) * view.scale) << "\" height=\""
      << num((d.env.bounds.max.y() - d.env.bounds.min.y()) * view.scale)
      << "\" fill=\"white\" stroke=\"black\"/>\n";
  out << "<g class=\"obstacles\" fill=\"#888888\">\n";
  for (const auto& o : d.env.obstacles) {
    if (const auto* r = std::get_if<RectObstacle>(&o)) {
      out << "<rect x=\"" << num(view.x(r->min.x())) << "\" y=\"" << num(view.y(r->max.y())) << "\" width=\""
          << num((r->max.x() - r->min.x()) * view.scale) << "\" height=\"" << num((r->max.y() - r->min.y()) * view.scale)
          << "\"/>\n";
    } else {
      const auto& c = std::get<CircleObstacle>(o);
      out << "<circle cx=\"" << num(view.x(c.center.x())) << "\" cy=\"" << num(view.y(c.center.y())) << "\" r=\""
          << num(c.radius * view.scale) << "\"/>\n";
    }
  }
  out << "</g>\n<g class=\"tree\" fill=\"none\" stroke=\"#9ecae1\" stroke-width=\"0.8\">\n";
  for (const auto& e : d.tree_edges) {
    if (e.size() >= 2) out << "<polyline points=\"" << points_attr(view, e) << "\"/>\n";
  }
  out << "</g>\n";
  if (d.solution.size() >= 2) {
    out << "<polyline class=\"solution\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2.5\" points=\""
        << points_attr(view, d.solution) << "\"/>\n";
  }
  out << "<circle class=\"goal\" cx=\"" << num(view.x(d.goal.x())) << "\" cy=\"" << num(view.y(d.goal.y()))
      << "\" r=\"" << num(std::max(d.goal_tolerance * view.scale, 3.0))
      << "\" fill=\"#fdae6b\" fill-opacity=\"0.6\" stroke=\"#e6550d\"/>\n";
  out << "<circle class=\"start\" cx=\"" << num(view.x(d.start.x())) << "\" cy=\"" << num(view.y(d.start.y()))
      << "\" r=\"4\" fill=\"#31a354\"/>\n";
  out << "</svg>\n";
  return out.str();
}

std::string render_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                             const std::vector<ChartSeries>& series) {
  constexpr double w = 720, h = 460, left = 70, right = 170, top = 40, bottom = 50;
  double x_lo = kInfinity, x_hi = -kInfinity, y_lo = kInfinity, y_hi = -kInfinity;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!(x > 0) || !std::isfinite(x) || !std::isfinite(y)) continue;
      x_lo = std::min(x_lo, x);
      x_hi = std::max(x_hi, x);
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
  }
  const bool empty = !(x_lo <= x_hi);
  if (empty) x_lo = 1, x_hi = 10, y_lo = 0, y_hi = 1;
  if (x_hi <= x_lo * 1.0001) x_lo /= 2, x_hi *= 2;
  if (y_hi <= y_lo) y_lo -= 0.5, y_hi += 0.5;
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;
  const double lx_lo = std::log10(x_lo), lx_hi = std::log10(x_hi);
  auto px = [&](double x) { return left + (std::log10(x) - lx_lo) / (lx_hi - lx_lo) * (w - left - right); };
  auto py = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * (h - top - bottom); };

  std::ostringstream out;
  out << header(w, h);
  out << "<rect width=\"" << num(w) << "\" height=\"" << num(h) << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(title)
      << "</text>\n";
  out << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n<polyline points=\"" << num(left) << ',' << num(top) << ' '
      << num(left) << ',' << num(h - bottom) << ' ' << num(w - right) << ',' << num(h - bottom) << "\"/>\n</g>\n";
  out << "<g class=\"ticks\" font-size=\"11\">\n";
  for (int e = static_cast<int>(std::floor(lx_lo)); e <= static_cast<int>(std::ceil(lx_hi)); ++e) {
    for (int m : {1, 2, 5}) {
      const double x = m * std::pow(10.0, e);
      if (x < x_lo || x > x_hi) continue;
      out << "<text x=\"" << num(px(x)) << "\" y=\"" << num(h - bottom + 16) << "\" text-anchor=\"middle\">"
          << format_double(x) << "</text>\n";
    }
  }
  for (int i = 0; i <= 5; ++i) {
    const double y = y_lo + (y_hi - y_lo) * i / 5.0;
    out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(y) + 4) << "\" text-anchor=\"end\">" << num(y)
        << "</text>\n";
  }
  out << "</g>\n";
  out << "<text x=\"" << num((left + w - right) / 2) << "\" y=\"" << num(h - 12) << "\" text-anchor=\"middle\">"
      << xml_escape(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << num((top + h - bottom) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num((top + h - bottom) / 2) << ")\">" << xml_escape(y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    std::string pts;
    for (const auto& [x, y] : series[i].points) {
      if (!(x > 0) || !std::isfinite(x) || !std::isfinite(y)) continue;
      if (!pts.empty()) pts += ' ';
      pts += num(px(x)) + ',' + num(py(y));
    }
    out << "<polyline class=\"series\" data-name=\"" << xml_escape(series[i].name) << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
    const double ly = top + 20.0 * static_cast<double>(i);
    out << "<line x1=\"" << num(w - right + 12) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(w - right + 32)
        << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << num(w - right + 38) << "\" y=\"" << num(ly + 4) << "\" font-size=\"12\">"
        << xml_escape(series[i].name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace fmtpff
