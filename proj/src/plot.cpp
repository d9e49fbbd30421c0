#include "igasil/plot.hpp"

#include "igasil/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace igasil {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 180.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s == "-0.00" || s == "-0") s = s.substr(1);
  return s;
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

double nice_step(double range, int target) {
  const double raw = range / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, const std::filesystem::path& csv, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(csv.string() + ":" + std::to_string(line) + ": malformed number '" + cell + "'");
  }
}

}  // namespace

std::string render_svg(const std::vector<Series>& series, const PlotOptions& opt) {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  bool any = false;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!any) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        any = true;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!any) {
    x0 = 0.0;
    x1 = opt.x_tick;
    y0 = 0.0;
    y1 = 1.0;
  }
  x0 = std::min(x0, 0.0);
  if (x1 <= x0) x1 = x0 + opt.x_tick;
  if (y1 - y0 < 1e-9) {
    y0 -= 1.0;
    y1 += 1.0;
  }
  const double ystep = nice_step(y1 - y0, 6);
  y0 = std::floor(y0 / ystep) * ystep;
  y1 = std::ceil(y1 / ystep) * ystep;
  const double xstep = std::max(1.0, std::ceil((x1 - x0) / (10.0 * opt.x_tick))) * opt.x_tick;

  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opt.title.empty())
    o << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(opt.title) << "</text>\n";
  o << "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
  for (double y = y0; y <= y1 + ystep * 1e-9; y += ystep)
    o << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(py(y)) << "\" x2=\"" << fmt(kLeft + pw) << "\" y2=\""
      << fmt(py(y)) << "\"/>\n";
  o << "</g>\n";
  o << "<g stroke=\"black\" stroke-width=\"1\">\n"
    << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\"" << fmt(kLeft + pw) << "\" y2=\""
    << fmt(kTop + ph) << "\"/>\n"
    << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft) << "\" y2=\""
    << fmt(kTop + ph) << "\"/>\n";
  for (double x = x0; x <= x1 + xstep * 1e-9; x += xstep)
    o << "<line x1=\"" << fmt(px(x)) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\"" << fmt(px(x)) << "\" y2=\""
      << fmt(kTop + ph + 5) << "\"/>\n";
  o << "</g>\n<g text-anchor=\"middle\">\n";
  for (double x = x0; x <= x1 + xstep * 1e-9; x += xstep)
    o << "<text x=\"" << fmt(px(x)) << "\" y=\"" << fmt(kTop + ph + 20) << "\">" << fmt(x, 0) << "</text>\n";
  o << "</g>\n<g text-anchor=\"end\">\n";
  const int ydec = ystep >= 1.0 ? 0 : static_cast<int>(std::ceil(-std::log10(ystep)));
  for (double y = y0; y <= y1 + ystep * 1e-9; y += ystep)
    o << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(py(y) + 4) << "\">" << fmt(y, ydec) << "</text>\n";
  o << "</g>\n";
  o << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 15)
    << "\" text-anchor=\"middle\">" << escape(opt.x_label) << "</text>\n";
  o << "<text x=\"18\" y=\"" << fmt(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << fmt(kTop + ph / 2) << ")\">" << escape(opt.y_label) << "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    if (!s.x.empty()) {
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) o << (i ? " " : "") << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i]));
      o << "\"/>\n";
    }
    const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
    o << "<line x1=\"" << fmt(kLeft + pw + 12) << "\" y1=\"" << fmt(ly) << "\" x2=\"" << fmt(kLeft + pw + 32)
      << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << fmt(kLeft + pw + 38) << "\" y=\"" << fmt(ly + 4) << "\">" << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

Series read_metrics_curve(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot read " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(csv.string() + ": missing header");
  const auto expected = split(kMetricsHeader);
  const auto got = split(line);
  for (std::size_t i = 0; i < std::max(expected.size(), got.size()); ++i) {
    if (i >= got.size())
      throw std::runtime_error(csv.string() + ": schema mismatch, missing column '" + expected[i] + "'");
    if (i >= expected.size())
      throw std::runtime_error(csv.string() + ": schema mismatch, unexpected column '" + got[i] + "'");
    if (got[i] != expected[i])
      throw std::runtime_error(csv.string() + ": schema mismatch at column " + std::to_string(i + 1) + ": expected '" +
                               expected[i] + "', found '" + got[i] + "'");
  }
  Series s;
  const auto parent = csv.parent_path().filename();
  s.label = parent.empty() ? csv.filename().string() : (parent / csv.filename()).string();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != expected.size())
      throw std::runtime_error(csv.string() + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(expected.size()) + " columns, found " + std::to_string(cells.size()));
    s.x.push_back(parse_cell(cells[0], csv, line_no));
    s.y.push_back(parse_cell(cells[1], csv, line_no));
  }
  return s;
}

std::string plot_metrics(const std::vector<std::filesystem::path>& csvs, const PlotOptions& options) {
  std::vector<Series> series;
  for (const auto& p : csvs) series.push_back(read_metrics_curve(p));
  return render_svg(series, options);
}

}  // namespace igasil
