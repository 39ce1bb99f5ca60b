#include "gestauth/svg.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "gestauth/error.hpp"

namespace gestauth::plot {

namespace {

constexpr double kW = 480, kH = 360, kMargin = 40;
constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string esc(const std::string& s) {
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
  double x0, x1, y0, y1;
  double left = kMargin, top = kMargin, width = kW - 2 * kMargin, height = kH - 2 * kMargin;
  [[nodiscard]] double px(double x) const { return left + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * width; }
  [[nodiscard]] double py(double y) const { return top + height - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.5) * height; }
};

void open(std::ostringstream& o, double w, double h, const std::string& title) {
  o.precision(6);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 " << w
    << ' ' << h << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << w / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << esc(title) << "</text>\n";
}

void axes(std::ostringstream& o, const Frame& f) {
  o << "<rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\"" << f.width << "\" height=\"" << f.height
    << "\" fill=\"none\" stroke=\"black\"/>\n";
}

void polyline(std::ostringstream& o, const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
              const char* colour, const char* extra = "") {
  o << "<polyline fill=\"none\" stroke=\"" << colour << "\" " << extra << " points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) o << (i ? " " : "") << f.px(xs[i]) << ',' << f.py(ys[i]);
  o << "\"/>\n";
}

}  // namespace

std::string roc_svg(const std::vector<eval::RocPoint>& roc, const std::string& title) {
  std::ostringstream o;
  open(o, kW, kH, title);
  const Frame f{0, 1, 0, 1};
  axes(o, f);
  polyline(o, f, {0, 1}, {0, 1}, "#999999", "stroke-dasharray=\"4 4\"");
  std::vector<double> xs, ys;
  for (const auto& p : roc) {
    xs.push_back(p.far);
    ys.push_back(p.tar);
  }
  polyline(o, f, xs, ys, kPalette[0], "stroke-width=\"2\"");
  o << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 8 << "\" text-anchor=\"middle\" font-size=\"12\">FAR</text>\n";
  o << "<text x=\"12\" y=\"" << kH / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 " << kH / 2
    << ")\">TAR</text>\n";
  o << "</svg>\n";
  return o.str();
}

std::vector<std::array<double, 2>> pca2(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const auto n = rows.size(), d = rows[0].size();
  if (d == 0) throw InputError("pca2: empty rows");
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != d) throw InputError("pca2: ragged rows");
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rows[i][j];
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = x.transpose() * x;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::MatrixXd basis(d, 2);
  basis.setZero();
  for (std::size_t k = 0; k < std::min<std::size_t>(2, d); ++k) {
    Eigen::VectorXd v = es.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - k));
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    basis.col(static_cast<Eigen::Index>(k)) = v;
  }
  const Eigen::MatrixXd p = x * basis;
  std::vector<std::array<double, 2>> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {p(i, 0), p(i, 1)};
  return out;
}

std::string scatter_svg(const std::vector<std::array<double, 2>>& points, const std::vector<std::string>& groups,
                        const std::string& title) {
  if (points.size() != groups.size()) throw InputError("scatter: points and groups differ in length");
  Frame f{0, 1, 0, 1};
  if (!points.empty()) {
    f.x0 = f.x1 = points[0][0];
    f.y0 = f.y1 = points[0][1];
    for (const auto& p : points) {
      f.x0 = std::min(f.x0, p[0]);
      f.x1 = std::max(f.x1, p[0]);
      f.y0 = std::min(f.y0, p[1]);
      f.y1 = std::max(f.y1, p[1]);
    }
  }
  std::map<std::string, std::size_t> colour;
  for (const auto& gname : groups) colour.emplace(gname, 0);
  std::size_t k = 0;
  for (auto& [name, c] : colour) c = k++ % kPalette.size();
  std::ostringstream o;
  open(o, kW + 100, kH, title);
  axes(o, f);
  for (std::size_t i = 0; i < points.size(); ++i) {
    o << "<circle cx=\"" << f.px(points[i][0]) << "\" cy=\"" << f.py(points[i][1]) << "\" r=\"3\" fill=\""
      << kPalette[colour[groups[i]]] << "\" fill-opacity=\"0.7\"/>\n";
  }
  double y = kMargin + 10;
  for (const auto& [name, c] : colour) {
    o << "<circle cx=\"" << kW << "\" cy=\"" << y - 4 << "\" r=\"4\" fill=\"" << kPalette[c] << "\"/>";
    o << "<text x=\"" << kW + 8 << "\" y=\"" << y << "\" font-size=\"11\">" << esc(name) << "</text>\n";
    y += 16;
  }
  o << "</svg>\n";
  return o.str();
}

std::string line_svg(const std::vector<double>& x, const std::vector<NamedLine>& lines, const std::string& title) {
  if (x.empty()) throw InputError("line plot: no x values");
  Frame f{*std::min_element(x.begin(), x.end()), *std::max_element(x.begin(), x.end()), 0, 0};
  bool first = true;
  for (const auto& l : lines) {
    if (l.y.size() != x.size()) throw InputError("line plot: '" + l.name + "' has the wrong length");
    for (double v : l.y) {
      f.y0 = first ? v : std::min(f.y0, v);
      f.y1 = first ? v : std::max(f.y1, v);
      first = false;
    }
  }
  std::ostringstream o;
  open(o, kW + 100, kH, title);
  axes(o, f);
  double ly = kMargin + 10;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const char* c = kPalette[i % kPalette.size()];
    polyline(o, f, x, lines[i].y, c, "stroke-width=\"2\"");
    o << "<line x1=\"" << kW - 8 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kW + 4 << "\" y2=\"" << ly - 4
      << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>";
    o << "<text x=\"" << kW + 8 << "\" y=\"" << ly << "\" font-size=\"11\">" << esc(lines[i].name) << "</text>\n";
    ly += 16;
  }
  o << "<text x=\"" << f.left << "\" y=\"" << kH - 8 << "\" font-size=\"11\">" << f.x0 << "</text>";
  o << "<text x=\"" << f.left + f.width << "\" y=\"" << kH - 8 << "\" text-anchor=\"end\" font-size=\"11\">" << f.x1
    << "</text>\n";
  o << "<text x=\"4\" y=\"" << f.top + 10 << "\" font-size=\"11\">" << f.y1 << "</text>";
  o << "<text x=\"4\" y=\"" << f.top + f.height << "\" font-size=\"11\">" << f.y0 << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

std::string overlay_svg(const Series& original, const Series& reconstruction, const std::string& title) {
  if (!original.same_shape(reconstruction)) throw InputError("overlay: series shapes differ");
  if (original.empty()) throw InputError("overlay: empty series");
  const auto t = original.rows(), c = original.cols();
  const double panel = 90;
  std::ostringstream o;
  open(o, kW, kMargin + panel * static_cast<double>(c) + 10, title);
  std::vector<double> xs(t);
  for (std::size_t i = 0; i < t; ++i) xs[i] = static_cast<double>(i);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const auto a = original.column(ch), b = reconstruction.column(ch);
    const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
    const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
    Frame f{0, static_cast<double>(t ? t - 1 : 1), std::min(*amin, *bmin), std::max(*amax, *bmax)};
    f.top = kMargin + panel * static_cast<double>(ch);
    f.height = panel - 10;
    axes(o, f);
    polyline(o, f, xs, a, kPalette[0]);
    polyline(o, f, xs, b, kPalette[3], "stroke-dasharray=\"3 2\"");
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace gestauth::plot
