#include "stephint/svg_chart.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace stephint {

namespace {

constexpr const char* kPalette[] = {"#2563eb", "#dc2626", "#059669", "#d97706",
                                    "#7c3aed", "#0891b2", "#be185d", "#4d7c0f"};

std::string fmt(Scalar v) {
  std::ostringstream ss;
  ss << std::setprecision(6) << v;
  return ss.str();
}

// Rounds a raw step to 1/2/5 * 10^k for readable axis ticks.
Scalar nice_step(Scalar span, int target_ticks) {
  if (!(span > 0)) return 1.0;
  const Scalar raw = span / std::max(1, target_ticks);
  const Scalar mag = std::pow(10.0, std::floor(std::log10(raw)));
  const Scalar frac = raw / mag;
  const Scalar nice = frac <= 1.0 ? 1.0 : frac <= 2.0 ? 2.0 : frac <= 5.0 ? 5.0 : 10.0;
  return nice * mag;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_line_chart(const ChartSpec& spec, const std::filesystem::path& path) {
  if (spec.series.empty()) throw ConfigError("chart: no series");
  Scalar xmin = std::numeric_limits<Scalar>::infinity(), xmax = -xmin;
  Scalar ymin = xmin, ymax = -xmin;
  bool any = false;
  for (const auto& s : spec.series) {
    if (s.xs.size() != s.ys.size()) throw ConfigError("chart: series size mismatch");
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      Scalar x = s.xs[i];
      if (spec.log2_x) {
        if (!(x > 0)) throw ConfigError("chart: log-scale x requires positive values");
        x = std::log2(x);
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, s.ys[i]);
      ymax = std::max(ymax, s.ys[i]);
      any = true;
    }
  }
  if (!any) throw ConfigError("chart: all series empty");
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  // A little headroom so lines do not sit on the frame.
  const Scalar ypad = (ymax - ymin) * 0.06;
  ymin -= ypad;
  ymax += ypad;

  const int W = spec.width, H = spec.height;
  const int ml = 64, mr = 16, mt = 36, mb = 48;
  const Scalar pw = W - ml - mr, ph = H - mt - mb;
  const auto px = [&](Scalar x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](Scalar y) { return mt + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n"
      << "<style>text{font-family:sans-serif;font-size:12px;fill:#1f2430}"
         ".t{font-size:15px;font-weight:bold}.grid{stroke:#d7dbe4;stroke-width:1}"
         ".axis{stroke:#1f2430;stroke-width:1.2}</style>\n"
      << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"#ffffff\"/>\n"
      << "<text class=\"t\" x=\"" << ml << "\" y=\"22\">" << escape(spec.title) << "</text>\n";

  const Scalar ystep = nice_step(ymax - ymin, 6);
  for (Scalar y = std::ceil(ymin / ystep) * ystep; y <= ymax + 1e-12; y += ystep) {
    svg << "<line class=\"grid\" x1=\"" << ml << "\" y1=\"" << fmt(py(y)) << "\" x2=\"" << W - mr
        << "\" y2=\"" << fmt(py(y)) << "\"/>\n"
        << "<text x=\"" << ml - 8 << "\" y=\"" << fmt(py(y) + 4)
        << "\" text-anchor=\"end\">" << fmt(y) << "</text>\n";
  }
  const Scalar xstep = nice_step(xmax - xmin, 8);
  for (Scalar x = std::ceil(xmin / xstep) * xstep; x <= xmax + 1e-12; x += xstep) {
    const Scalar label = spec.log2_x ? std::pow(2.0, x) : x;
    svg << "<line class=\"grid\" x1=\"" << fmt(px(x)) << "\" y1=\"" << mt << "\" x2=\""
        << fmt(px(x)) << "\" y2=\"" << H - mb << "\"/>\n"
        << "<text x=\"" << fmt(px(x)) << "\" y=\"" << H - mb + 18
        << "\" text-anchor=\"middle\">" << fmt(label) << "</text>\n";
  }
  svg << "<line class=\"axis\" x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
      << "\" y2=\"" << H - mb << "\"/>\n"
      << "<line class=\"axis\" x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
      << H - mb << "\"/>\n"
      << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
      << escape(spec.x_label) << "</text>\n"
      << "<text transform=\"translate(16," << mt + ph / 2 << ") rotate(-90)\" "
         "text-anchor=\"middle\">"
      << escape(spec.y_label) << "</text>\n";

  for (std::size_t si = 0; si < spec.series.size(); ++si) {
    const auto& s = spec.series[si];
    if (s.xs.empty()) continue;
    const char* color = kPalette[si % std::size(kPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      const Scalar x = spec.log2_x ? std::log2(s.xs[i]) : s.xs[i];
      svg << fmt(px(x)) << ',' << fmt(py(s.ys[i])) << ' ';
    }
    svg << "\"/>\n";
    const int ly = mt + 16 + static_cast<int>(si) * 18;
    svg << "<rect x=\"" << W - mr - 150 << "\" y=\"" << ly - 10
        << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n"
        << "<text x=\"" << W - mr - 132 << "\" y=\"" << ly << "\">" << escape(s.name)
        << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("chart: cannot open '" + path.string() + "' for writing");
  f << svg.str();
  if (!f) throw DataError("chart: write failed for '" + path.string() + "'");
}

}  // namespace stephint
