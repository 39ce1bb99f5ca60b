#include "gestauth/series.hpp"

#include <cmath>

#include "gestauth/error.hpp"

namespace gestauth {

Series::Series(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InputError("series data length does not match " + std::to_string(rows_) + "x" +
                     std::to_string(cols_));
  }
}

std::vector<double> Series::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t t = 0; t < rows_; ++t) out[t] = (*this)(t, c);
  return out;
}

void Series::set_column(std::size_t c, std::span<const double> values) {
  if (values.size() != rows_) throw InputError("column length mismatch");
  for (std::size_t t = 0; t < rows_; ++t) (*this)(t, c) = values[t];
}

bool Series::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Series column_series(std::span<const double> values) {
  return Series(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

}  // namespace gestauth
