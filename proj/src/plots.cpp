// Minimal static SVG renderings of the analysis artifacts. Layout is plain on
// purpose: the CSVs are the data of record, these are for eyeballing.
#include "clickrender/analysis.hpp"
#include "clickrender/format.hpp"

#include <algorithm>
#include <cstdio>

namespace clickrender {
namespace {

constexpr double kW = 640, kH = 400, kLeft = 60, kRight = 20, kTop = 20, kBottom = 50;

struct Axes {
  double x0, x1, y0, y1;
  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); }
  double py(double y) const { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); }
};

void open_svg(std::ostream& os, const char* title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n<title>" << title << "</title>\n";
}

void frame(std::ostream& os, const Axes& ax, const char* xlabel, const char* ylabel) {
  os << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kW - kLeft - kRight << "\" height=\""
     << kH - kTop - kBottom << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double x = ax.x0 + i * (ax.x1 - ax.x0) / 5, y = ax.y0 + i * (ax.y1 - ax.y0) / 5;
    os << "<text x=\"" << fmt_double(ax.px(x)) << "\" y=\"" << kH - kBottom + 14 << "\" text-anchor=\"middle\">"
       << fmt_double(std::round(x)) << "</text>\n";
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt_double(ax.py(y) + 4) << "\" text-anchor=\"end\">"
       << fmt_double(std::round(y)) << "</text>\n";
  }
  os << "<text x=\"" << (kLeft + kW - kRight) / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">" << xlabel
     << "</text>\n";
  os << "<text transform=\"translate(14," << (kTop + kH - kBottom) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << ylabel << "</text>\n";
}

const char* palette(int i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                 "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return colors[i % 10];
}

}  // namespace

void write_overlap_svg(std::ostream& os, const AnalysisResult& r) {
  const Axes ax{0, 260, kMapDutyMin - 0.5, kMapDutyMax + 0.5};
  open_svg(os, "Subjects agreeing on an acceptable click");
  const double n = std::max(1, r.overlap.n_subjects);
  const double cw = ax.px(1) - ax.px(0), ch = ax.py(0) - ax.py(1);
  for (int duty = kMapDutyMin; duty <= kMapDutyMax; ++duty)
    for (int d = kMinDurationMs; d <= kMaxDurationMs; ++d) {
      const int c = r.overlap.at(duty, d);
      if (!c) continue;
      const int shade = static_cast<int>(std::lround(255 * (1.0 - c / n)));
      char color[8];
      std::snprintf(color, sizeof color, "#%02x%02x%02x", 255, 255, shade);
      os << "<rect x=\"" << fmt_double(ax.px(d - 0.5)) << "\" y=\"" << fmt_double(ax.py(duty + 0.5))
         << "\" width=\"" << fmt_double(cw) << "\" height=\"" << fmt_double(ch) << "\" fill=\"" << color
         << "\" stroke=\"none\"/>\n";
    }
  frame(os, ax, "duration (ms)", "duty cycle (%)");
  os << "</svg>\n";
}

void write_percentages_svg(std::ostream& os, const AnalysisResult& r) {
  const Axes ax{0, 260, 0, 100};
  open_svg(os, "Good click and pulse percentages");
  frame(os, ax, "duration (ms)", "percent of trials");
  int i = 0;
  for (const auto& [duty, row] : r.curves) {
    std::string good, pulse;
    for (const auto& [d, c] : row) {
      good += fmt_double(ax.px(d)) + "," + fmt_double(ax.py(c.pct_good())) + " ";
      pulse += fmt_double(ax.px(d)) + "," + fmt_double(ax.py(c.pct_pulse())) + " ";
    }
    os << "<polyline fill=\"none\" stroke=\"" << palette(i) << "\" points=\"" << good << "\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"" << palette(i) << "\" stroke-dasharray=\"4 3\" points=\"" << pulse
       << "\"/>\n";
    os << "<text x=\"" << kW - kRight - 90 << "\" y=\"" << kTop + 14 * (i + 1) << "\" fill=\"" << palette(i) << "\">"
       << duty << "% (dashed: pulse)</text>\n";
    ++i;
  }
  os << "</svg>\n";
}

void write_ratings_svg(std::ostream& os, const AnalysisResult& r) {
  const Axes ax{0, 260, 0, 7};
  open_svg(os, "Section-2 ratings with quadratic fits");
  frame(os, ax, "duration (ms)", "rating");
  for (const auto& f : r.fits) {
    const int ci = f.duty_pct == 5 ? 0 : f.duty_pct == 25 ? 1 : 2;
    for (const auto& [d, rating] : f.points)
      os << "<circle cx=\"" << fmt_double(ax.px(d)) << "\" cy=\"" << fmt_double(ax.py(rating))
         << "\" r=\"1.5\" fill=\"" << palette(ci) << "\" fill-opacity=\"0.4\"/>\n";
    if (f.fit.n == 0) continue;
    double lo = f.points.front().first, hi = lo;
    for (const auto& p : f.points) lo = std::min(lo, p.first), hi = std::max(hi, p.first);
    std::string pts;
    for (int k = 0; k <= 40; ++k) {
      const double d = lo + (hi - lo) * k / 40.0;
      pts += fmt_double(ax.px(d)) + "," + fmt_double(ax.py(std::clamp(f.fit(d), 0.0, 7.0))) + " ";
    }
    os << "<polyline fill=\"none\" stroke=\"" << palette(ci) << "\" points=\"" << pts << "\"/>\n";
  }
  os << "</svg>\n";
}

void write_grouping_svg(std::ostream& os, const AnalysisResult& r) {
  const Axes ax{0, 55, 0, 60};
  open_svg(os, "Initial pulse width of best picks by group");
  frame(os, ax, "duty cycle (%)", "initial pulse width (ms)");
  for (const auto& g : r.groups) {
    std::string pts;
    for (const auto& [duty, w] : g.initial_width_ms) pts += fmt_double(ax.px(duty)) + "," + fmt_double(ax.py(w)) + " ";
    os << "<polyline fill=\"none\" stroke=\"" << palette(g.group) << "\" points=\"" << pts << "\"><title>"
       << g.subject << " group " << g.group << "</title></polyline>\n";
  }
  os << "</svg>\n";
}

}  // namespace clickrender
