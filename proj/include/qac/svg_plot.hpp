#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

namespace qac {

// Minimal multi-series line chart writer (SVG). Convenience output for
// sweep results; the CSV files remain the authoritative data.
class LinePlot {
 public:
  LinePlot(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void add_series(std::string name, std::vector<double> xs, std::vector<double> ys) {
    series_.push_back({std::move(name), std::move(xs), std::move(ys)});
  }

  void set_log_y(bool v) { log_y_ = v; }

  void write(std::ostream& out) const {
    const double w = 640, h = 420, ml = 70, mr = 150, mt = 40, mb = 50;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& s : series_) {
      for (std::size_t i = 0; i < s.xs.size(); ++i) {
        const double y = log_y_ ? std::log10(std::max(s.ys[i], 1e-300)) : s.ys[i];
        if (first) {
          xmin = xmax = s.xs[i];
          ymin = ymax = y;
          first = false;
        } else {
          xmin = std::min(xmin, s.xs[i]);
          xmax = std::max(xmax, s.xs[i]);
          ymin = std::min(ymin, y);
          ymax = std::max(ymax, y);
        }
      }
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double y) {
      const double v = log_y_ ? std::log10(std::max(y, 1e-300)) : y;
      return h - mb - (v - ymin) / (ymax - ymin) * (h - mt - mb);
    };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
        << h << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << title_ << "</text>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr
        << "\" y2=\"" << h - mb << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << h - mb << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
      const double fx = xmin + (xmax - xmin) * i / 4.0;
      const double fy = ymin + (ymax - ymin) * i / 4.0;
      out << "<text x=\"" << px(fx) << "\" y=\"" << h - mb + 18
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
          << label(fx, false) << "</text>\n"
          << "<text x=\"" << ml - 8 << "\" y=\"" << h - mb - (h - mt - mb) * i / 4.0 + 4
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
          << label(fy, log_y_) << "</text>\n";
    }
    out << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << xlabel_ << "</text>\n"
        << "<text x=\"16\" y=\"" << (mt + h - mb) / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 16 " << (mt + h - mb) / 2 << ")\">" << ylabel_
        << "</text>\n";
    for (std::size_t si = 0; si < series_.size(); ++si) {
      const auto& s = series_[si];
      const char* color = colors[si % 8];
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.xs.size(); ++i)
        out << px(s.xs[i]) << ',' << py(s.ys[i]) << ' ';
      out << "\"/>\n";
      for (std::size_t i = 0; i < s.xs.size(); ++i)
        out << "<circle cx=\"" << px(s.xs[i]) << "\" cy=\"" << py(s.ys[i])
            << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
      const double ly = mt + 16.0 * si;
      out << "<line x1=\"" << w - mr + 10 << "\" y1=\"" << ly << "\" x2=\"" << w - mr + 30
          << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n"
          << "<text x=\"" << w - mr + 36 << "\" y=\"" << ly + 4
          << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.name << "</text>\n";
    }
    out << "</svg>\n";
  }

 private:
  struct Series {
    std::string name;
    std::vector<double> xs, ys;
  };

  static std::string label(double v, bool is_log) {
    char buf[32];
    if (is_log) std::snprintf(buf, sizeof buf, "1e%.1f", v);
    else std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
  }

  std::string title_, xlabel_, ylabel_;
  bool log_y_ = false;
  std::vector<Series> series_;
};

}  // namespace qac
