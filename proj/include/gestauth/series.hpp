#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gestauth {

inline constexpr std::size_t kTimesteps = 200;
inline constexpr std::size_t kChannels = 6;
inline constexpr double kSampleRateHz = 50.0;
inline constexpr long kSamplePeriodMs = 20;

/// Dense row-major [timesteps x channels] matrix of reals.
class Series {
 public:
  Series() = default;
  Series(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Series(std::size_t rows, std::size_t cols, std::vector<double> data);

  [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
  [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t t, std::size_t c) { return data_[t * cols_ + c]; }
  double operator()(std::size_t t, std::size_t c) const { return data_[t * cols_ + c]; }

  [[nodiscard]] std::span<double> flat() noexcept { return data_; }
  [[nodiscard]] std::span<const double> flat() const noexcept { return data_; }
  [[nodiscard]] const std::vector<double>& data() const noexcept { return data_; }

  /// Copy of one column as a contiguous vector.
  [[nodiscard]] std::vector<double> column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

  [[nodiscard]] bool all_finite() const noexcept;
  [[nodiscard]] bool same_shape(const Series& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Series&, const Series&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Wraps a single column of values as a [T x 1] series.
Series column_series(std::span<const double> values);

}  // namespace gestauth
