#pragma once

#include <array>
#include <string>
#include <vector>

#include "gestauth/eval.hpp"
#include "gestauth/series.hpp"

namespace gestauth::plot {

/// TAR against FAR with the chance diagonal.
std::string roc_svg(const std::vector<eval::RocPoint>& roc, const std::string& title);

/// Projects rows onto their two leading principal components (rows centred
/// on their mean). Signs are fixed so each component's largest-magnitude
/// loading is positive.
std::vector<std::array<double, 2>> pca2(const std::vector<std::vector<double>>& rows);

/// Scatter of 2-D points coloured by group label.
std::string scatter_svg(const std::vector<std::array<double, 2>>& points, const std::vector<std::string>& groups,
                        const std::string& title);

struct NamedLine {
  std::string name;
  std::vector<double> y;
};

/// Line chart of several series over shared x values.
std::string line_svg(const std::vector<double>& x, const std::vector<NamedLine>& lines, const std::string& title);

/// Original and reconstructed traces of each channel, stacked vertically.
std::string overlay_svg(const Series& original, const Series& reconstruction, const std::string& title);

}  // namespace gestauth::plot
