#include "gestauth/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "gestauth/error.hpp"

namespace gestauth::eval {

std::size_t ScoreSet::genuine() const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true)); }

std::size_t ScoreSet::impostors() const { return labels.size() - genuine(); }

void validate(const ScoreSet& s) {
  if (s.scores.size() != s.labels.size()) throw InputError("score set: scores and labels differ in length");
  if (s.scores.empty()) throw InputError("score set is empty");
  for (double v : s.scores)
    if (!std::isfinite(v)) throw InputError("score set contains a non-finite score");
  if (s.genuine() == 0 || s.impostors() == 0) throw InputError("score set needs both genuine and impostor samples");
}

std::vector<RocPoint> roc_curve(const ScoreSet& s) {
  validate(s);
  std::vector<std::size_t> idx(s.scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.scores[a] > s.scores[b]; });
  const auto ng = static_cast<double>(s.genuine());
  const auto ni = static_cast<double>(s.impostors());

  std::vector<RocPoint> out;
  out.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0, 0.0});
  double acc_g = 0.0, acc_i = 0.0;
  for (std::size_t k = 0; k < idx.size();) {
    const double t = s.scores[idx[k]];
    while (k < idx.size() && s.scores[idx[k]] == t) {
      (s.labels[idx[k]] ? acc_g : acc_i) += 1.0;
      ++k;
    }
    out.push_back({t, acc_i / ni, 1.0 - acc_g / ng, acc_g / ng});
  }
  return out;
}

double auroc(const ScoreSet& s) {
  const auto roc = roc_curve(s);
  double area = 0.0;
  for (std::size_t k = 1; k < roc.size(); ++k) {
    area += (roc[k].far - roc[k - 1].far) * 0.5 * (roc[k].tar + roc[k - 1].tar);
  }
  return area;
}

EerInterval eer_interval(const ScoreSet& s) {
  for (const auto& p : roc_curve(s)) {
    if (p.far >= p.frr) return {std::min(p.far, p.frr), std::max(p.far, p.frr)};
  }
  return {1.0, 1.0};  // unreachable: the lowest threshold has FAR = 1, FRR = 0
}

double far_at_zero(const ScoreSet& s, double frr_tol) {
  for (const auto& p : roc_curve(s)) {
    if (p.frr < frr_tol) return p.far;
  }
  return 1.0;
}

MetricsReport compute_metrics(const ScoreSet& s, const std::string& config_json) {
  MetricsReport r;
  r.roc = roc_curve(s);
  r.auroc = auroc(s);
  r.eer = eer_interval(s);
  r.far_at_zero = far_at_zero(s);
  r.n_genuine = s.genuine();
  r.n_impostor = s.impostors();
  r.config_json = config_json;
  return r;
}

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["auroc"] = r.auroc;
  j["eer"] = {{"lower", r.eer.lower}, {"upper", r.eer.upper}};
  j["far_at_zero"] = r.far_at_zero;
  j["n_genuine"] = r.n_genuine;
  j["n_impostor"] = r.n_impostor;
  j["roc_points"] = r.roc.size();
  j["config"] = nlohmann::ordered_json::parse(r.config_json);
  return j.dump(2);
}

void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& roc) {
  out << "threshold,far,frr,tar\n";
  const auto old = out.precision(17);
  for (const auto& p : roc) {
    if (std::isinf(p.threshold)) {
      out << "inf";
    } else {
      out << p.threshold;
    }
    out << ',' << p.far << ',' << p.frr << ',' << p.tar << '\n';
  }
  out.precision(old);
}

ScoreSet read_score_csv(std::istream& in) {
  ScoreSet s;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("score", 0) == 0) continue;
    std::istringstream ls(line);
    std::string a, b;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b)) throw ParseError(lineno, "expected score,label");
    try {
      std::size_t used = 0;
      const double v = std::stod(a, &used);
      if (used != a.size()) throw ParseError(lineno, "bad score");
      if (b != "0" && b != "1") throw ParseError(lineno, "label must be 0 or 1");
      s.scores.push_back(v);
      s.labels.push_back(b == "1");
    } catch (const std::logic_error&) {
      throw ParseError(lineno, "bad score '" + a + "'");
    }
  }
  return s;
}

void write_score_csv(std::ostream& out, const ScoreSet& s) {
  out << "score,label\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < s.scores.size(); ++i) out << s.scores[i] << ',' << (s.labels[i] ? 1 : 0) << '\n';
  out.precision(old);
}

}  // namespace gestauth::eval
