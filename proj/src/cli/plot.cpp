#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "sassopt/cli.hpp"

namespace sassopt {

double trend_slope(const std::vector<double>& y) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  const double mx = static_cast<double>(n - 1) / 2.0;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - mx;
    sxy += dx * (y[i] - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::vector<double> smooth(const std::vector<double>& y, std::size_t window) {
  window = std::max<std::size_t>(window, 1);
  std::vector<double> out(y.size());
  double sum = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sum += y[i];
    if (i >= window) sum -= y[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const std::string& title, const std::vector<double>& x, const std::vector<double>& y) {
  constexpr double w = 640, h = 400, left = 70, right = 20, top = 40, bottom = 50;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  svg += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" + escape(title) + "</text>\n";
  if (x.empty() || x.size() != y.size()) {
    svg += "<text x=\"320\" y=\"200\" text-anchor=\"middle\" font-family=\"sans-serif\">no data</text>\n</svg>\n";
    return svg;
  }
  auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
  double xmin = *xmin_it, xmax = *xmax_it, ymin = *ymin_it, ymax = *ymax_it;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  auto px = [&](double v) { return left + (v - xmin) / (xmax - xmin) * (w - left - right); };
  auto py = [&](double v) { return h - bottom - (v - ymin) / (ymax - ymin) * (h - top - bottom); };

  svg += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(h - bottom) + "\" x2=\"" + fmt(w - right) + "\" y2=\"" +
         fmt(h - bottom) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + fmt(left) + "\" y1=\"" + fmt(top) + "\" x2=\"" + fmt(left) + "\" y2=\"" + fmt(h - bottom) +
         "\" stroke=\"black\"/>\n";
  for (double v : {ymin, ymax})
    svg += "<text x=\"" + fmt(left - 6) + "\" y=\"" + fmt(py(v) + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + fmt(v) + "</text>\n";
  for (double v : {xmin, xmax})
    svg += "<text x=\"" + fmt(px(v)) + "\" y=\"" + fmt(h - bottom + 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + fmt(v) + "</text>\n";

  svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < x.size(); ++i) svg += (i ? " " : "") + fmt(px(x[i])) + "," + fmt(py(y[i]));
  svg += "\"/>\n";

  const std::size_t window = std::max<std::size_t>(1, y.size() / 10);
  const auto sm = smooth(y, window);
  svg += "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < x.size(); ++i) svg += (i ? " " : "") + fmt(px(x[i])) + "," + fmt(py(sm[i]));
  svg += "\"/>\n";

  const double slope = trend_slope(y);
  const double span = ymax - ymin;
  const char* word = std::abs(slope) * static_cast<double>(y.size()) < 0.05 * span ? "flat"
                     : slope > 0                                                 ? "increasing"
                                                                                 : "decreasing";
  svg += "<text x=\"" + fmt(w - right) + "\" y=\"" + fmt(h - 12) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">trend: " + word + " (slope " + fmt(slope) +
         " per update)</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace sassopt
