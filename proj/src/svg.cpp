#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>

#include "fc/error.hpp"
#include "fc/report.hpp"

namespace fc {

namespace {

struct Colors {
  const char* fine;
  const char* coarse;
  const char* amnesia;
  const char* copy;
  const char* lm;
};

constexpr Colors kPaper{"#b7e4b0", "#b3cde8", "#f4b6b2", "#1f4e9c", "#c0392b"};
// Okabe-Ito hues, distinguishable under the common colour-vision deficiencies.
constexpr Colors kColorblind{"#f0e442", "#56b4e9", "#cc79a7", "#0072b2", "#d55e00"};

constexpr const char* kSeries[] = {"#0072b2", "#d55e00", "#009e73", "#cc79a7", "#e69f00", "#56b4e9", "#000000"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double left = 70, right, top = 40, bottom;
  double x_max;

  Frame(const PlotOptions& o, double max_len)
      : right(o.width - 170.0), bottom(o.height - 60.0), x_max(max_len > 0 ? max_len : 1.0) {}

  double x(double length) const { return left + (right - left) * std::clamp(length / x_max, 0.0, 1.0); }
  double y(double acc) const { return bottom - (bottom - top) * std::clamp(acc, 0.0, 1.0); }
};

std::string open_svg(const PlotOptions& o) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(o.width) +
       "\" height=\"" + std::to_string(o.height) + "\" viewBox=\"0 0 " + std::to_string(o.width) + " " +
       std::to_string(o.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(o.width) + "\" height=\"" + std::to_string(o.height) +
       "\" fill=\"#ffffff\"/>\n";
  if (!o.title.empty())
    s += "<text x=\"" + num(o.width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(o.title) + "</text>\n";
  return s;
}

std::string axes(const Frame& f) {
  std::string s = "<g id=\"axes\" stroke=\"#333333\" fill=\"none\">\n";
  s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.bottom) + "\" x2=\"" + num(f.right) + "\" y2=\"" +
       num(f.bottom) + "\"/>\n";
  s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(f.left) + "\" y2=\"" +
       num(f.bottom) + "\"/>\n</g>\n<g id=\"ticks\" fill=\"#333333\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double len = f.x_max * k / 4.0;
    const double acc = k / 4.0;
    s += "<text x=\"" + num(f.x(len)) + "\" y=\"" + num(f.bottom + 16) + "\" text-anchor=\"middle\">" +
         std::to_string(static_cast<long long>(std::llround(len))) + "</text>\n";
    s += "<text x=\"" + num(f.left - 6) + "\" y=\"" + num(f.y(acc) + 4) + "\" text-anchor=\"end\">" + num(acc) +
         "</text>\n";
  }
  s += "<text x=\"" + num((f.left + f.right) / 2) + "\" y=\"" + num(f.bottom + 40) +
       "\" text-anchor=\"middle\">prefix length</text>\n";
  s += "<text x=\"18\" y=\"" + num((f.top + f.bottom) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
       num((f.top + f.bottom) / 2) + ")\">accuracy</text>\n</g>\n";
  return s;
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                     const std::string& extra) {
  std::string s = "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"" + extra + " points=\"";
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (k) s += ' ';
    s += num(pts[k].first) + "," + num(pts[k].second);
  }
  return s + "\"/>\n";
}

std::string band(const Frame& f, const std::vector<const CurvePoint*>& pts, bool copy, const std::string& color) {
  std::string s = "<polygon fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
  bool first = true;
  auto add = [&](double x, double y) {
    if (!first) s += ' ';
    first = false;
    s += num(x) + "," + num(y);
  };
  for (const auto* p : pts) add(f.x(p->grid_length), f.y((copy ? p->copy_mean + p->copy_std : p->lm_mean + p->lm_std)));
  for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
    const auto* p = *it;
    add(f.x(p->grid_length), f.y(copy ? p->copy_mean - p->copy_std : p->lm_mean - p->lm_std));
  }
  return s + "\"/>\n";
}

std::string region(const Frame& f, const char* name, const char* color, double start, double end) {
  if (end <= start) return {};
  const double x0 = f.x(start), x1 = f.x(end);
  return "<rect class=\"region\" data-region=\"" + std::string(name) + "\" data-start=\"" +
         std::to_string(static_cast<long long>(start)) + "\" data-end=\"" +
         std::to_string(static_cast<long long>(end)) + "\" x=\"" + num(x0) + "\" y=\"" + num(f.top) +
         "\" width=\"" + num(x1 - x0) + "\" height=\"" + num(f.bottom - f.top) + "\" fill=\"" + color +
         "\" fill-opacity=\"0.6\"/>\n";
}

std::string legend_entry(double x, double y, const std::string& color, const std::string& label, bool dashed,
                         bool swatch) {
  std::string s;
  if (swatch) {
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y - 9) + "\" width=\"22\" height=\"10\" fill=\"" + color +
         "\" fill-opacity=\"0.6\"/>\n";
  } else {
    s += "<line x1=\"" + num(x) + "\" y1=\"" + num(y - 4) + "\" x2=\"" + num(x + 22) + "\" y2=\"" + num(y - 4) +
         "\" stroke=\"" + color + "\" stroke-width=\"2\"" + (dashed ? " stroke-dasharray=\"6 3\"" : "") + "/>\n";
  }
  s += "<text x=\"" + num(x + 28) + "\" y=\"" + num(y) + "\">" + escape(label) + "</text>\n";
  return s;
}

std::vector<const CurvePoint*> valid_points(const ForgettingCurve& curve) {
  std::vector<const CurvePoint*> out;
  for (const auto& p : curve.points)
    if (!p.failed) out.push_back(&p);
  return out;
}

double axis_max(const ForgettingCurve& curve) {
  double m = static_cast<double>(curve.config.max_len);
  for (const auto& p : curve.points) m = std::max(m, static_cast<double>(p.grid_length));
  return m;
}

}  // namespace

std::string plot_svg(const ForgettingCurve& curve, const MemoryLengths& analysis, const PlotOptions& options) {
  const auto pts = valid_points(curve);
  if (pts.size() < 2) throw DataError("cannot plot a curve with fewer than two valid points");
  const Colors& c = options.palette == Palette::colorblind ? kColorblind : kPaper;
  const Frame f(options, axis_max(curve));

  const double fine = analysis.fine.indeterminate ? 0.0 : static_cast<double>(reported_length(analysis.fine));
  const double coarse =
      std::max(fine, analysis.coarse.indeterminate ? 0.0 : static_cast<double>(reported_length(analysis.coarse)));

  std::string s = open_svg(options);
  s += "<g id=\"regions\">\n";
  s += region(f, "fine", c.fine, 0.0, fine);
  s += region(f, "coarse", c.coarse, fine, coarse);
  s += region(f, "amnesia", c.amnesia, coarse, f.x_max);
  s += "</g>\n";
  s += axes(f);

  s += "<g id=\"threshold\">\n<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.y(analysis.options.fine_threshold)) +
       "\" x2=\"" + num(f.right) + "\" y2=\"" + num(f.y(analysis.options.fine_threshold)) +
       "\" stroke=\"#555555\" stroke-dasharray=\"2 3\"/>\n<text x=\"" + num(f.right - 4) + "\" y=\"" +
       num(f.y(analysis.options.fine_threshold) - 4) + "\" text-anchor=\"end\" fill=\"#555555\">acc " +
       num(analysis.options.fine_threshold) + "</text>\n</g>\n";

  std::vector<std::pair<double, double>> copy_line, lm_line;
  for (const auto* p : pts) {
    copy_line.emplace_back(f.x(p->grid_length), f.y(p->copy_mean));
    lm_line.emplace_back(f.x(p->grid_length), f.y(p->lm_mean));
  }
  s += "<g id=\"copy\">\n" + band(f, pts, true, c.copy) + polyline(copy_line, c.copy, "") + "</g>\n";
  s += "<g id=\"lm\">\n" + band(f, pts, false, c.lm) + polyline(lm_line, c.lm, " stroke-dasharray=\"6 3\"") +
       "</g>\n";

  const double lx = f.right + 14;
  double ly = f.top + 10;
  s += "<g id=\"legend\">\n";
  s += legend_entry(lx, ly, c.copy, "copy accuracy", false, false);
  s += legend_entry(lx, ly += 18, c.lm, "LM accuracy", true, false);
  s += legend_entry(lx, ly += 18, c.fine, "fine " + display_length(analysis.fine), false, true);
  s += legend_entry(lx, ly += 18, c.coarse, "coarse " + display_length(analysis.coarse), false, true);
  s += legend_entry(lx, ly += 18, c.amnesia, "amnesia", false, true);
  s += legend_entry(lx, ly += 18, "#888888", "band: mean \xC2\xB1 std", false, true);
  s += "</g>\n</svg>\n";
  return s;
}

std::string overlay_svg(const std::vector<ReportBundle>& bundles, const std::vector<std::string>& labels,
                        const PlotOptions& options) {
  if (bundles.empty() || labels.size() != bundles.size()) throw ConfigError("overlay needs one label per report");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const ReportBundle*>> groups;
  for (std::size_t b = 0; b < bundles.size(); ++b) {
    if (!groups.count(labels[b])) order.push_back(labels[b]);
    groups[labels[b]].push_back(&bundles[b]);
  }
  double x_max = 0.0;
  for (const auto& b : bundles) x_max = std::max(x_max, axis_max(b.curve));
  const Frame f(options, x_max);

  std::string s = open_svg(options);
  s += axes(f);
  std::string legend = "<g id=\"legend\">\n";
  double ly = f.top + 10;
  for (std::size_t g = 0; g < order.size(); ++g) {
    const auto& members = groups[order[g]];
    const std::string color = kSeries[g % std::size(kSeries)];
    std::vector<std::pair<double, double>> copy_line, lm_line;
    const auto& grid = members.front()->curve.points;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double copy = 0.0, lm = 0.0;
      std::size_t n = 0;
      for (const auto* m : members) {
        if (k >= m->curve.points.size() || m->curve.points[k].failed) continue;
        copy += m->curve.points[k].copy_mean;
        lm += m->curve.points[k].lm_mean;
        ++n;
      }
      if (n == 0) continue;
      copy_line.emplace_back(f.x(grid[k].grid_length), f.y(copy / n));
      lm_line.emplace_back(f.x(grid[k].grid_length), f.y(lm / n));
    }
    s += "<g class=\"series\" data-label=\"" + escape(order[g]) + "\">\n";
    s += polyline(copy_line, color, "");
    s += polyline(lm_line, color, " stroke-dasharray=\"6 3\"");
    s += "</g>\n";
    legend += legend_entry(f.right + 14, ly, color, order[g], false, false);
    ly += 18;
  }
  legend += legend_entry(f.right + 14, ly + 6, "#333333", "copy (solid)", false, false);
  legend += legend_entry(f.right + 14, ly + 24, "#333333", "LM (dashed)", true, false);
  s += legend + "</g>\n</svg>\n";
  return s;
}

}  // namespace fc
