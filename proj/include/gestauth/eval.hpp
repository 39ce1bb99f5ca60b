#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace gestauth::eval {

/// Scores with labels; true marks the genuine user.
struct ScoreSet {
  std::vector<double> scores;
  std::vector<bool> labels;

  [[nodiscard]] std::size_t genuine() const;
  [[nodiscard]] std::size_t impostors() const;
};

/// Throws InputError unless sizes agree, n >= 1, scores are finite and both
/// classes are present.
void validate(const ScoreSet& s);

/// A sample is accepted when score >= threshold.
struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
  double tar = 0.0;
};

/// Points for +inf followed by every distinct score in decreasing order, so
/// FAR is non-decreasing along the list.
std::vector<RocPoint> roc_curve(const ScoreSet& s);

/// Trapezoidal area under (FAR, TAR).
double auroc(const ScoreSet& s);

struct EerInterval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Walks thresholds from +inf downwards (FAR rising, FRR falling) and stops
/// at the first one with FAR >= FRR; returns (min, max) of the two rates there.
EerInterval eer_interval(const ScoreSet& s);

/// FAR at the largest threshold whose FRR is below `frr_tol`, or 1.0 if none.
double far_at_zero(const ScoreSet& s, double frr_tol = 0.01);

struct MetricsReport {
  double auroc = 0.0;
  EerInterval eer;
  double far_at_zero = 1.0;
  std::vector<RocPoint> roc;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
  std::string config_json = "{}";
};

MetricsReport compute_metrics(const ScoreSet& s, const std::string& config_json = "{}");

std::string metrics_to_json(const MetricsReport& r);
/// CSV with header `threshold,far,frr,tar`; the +inf threshold is written as "inf".
void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& roc);

/// Score set file: CSV `score,label` with label 1 for genuine, 0 for impostor.
ScoreSet read_score_csv(std::istream& in);
void write_score_csv(std::ostream& out, const ScoreSet& s);

}  // namespace gestauth::eval
