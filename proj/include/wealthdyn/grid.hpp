#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace wealthdyn {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

inline double asinh(double w) { return std::asinh(w); }
inline double asinh_inv(double x) { return std::sinh(x); }

/// Equal-width bins on the asinh scale.
struct WealthGrid {
  double lower_asinh = -0.9;
  double bin_width = 0.1;
  std::size_t n_bins = 91;

  WealthGrid() = default;
  WealthGrid(double lower, double width, std::size_t n);

  /// Builds the grid covering [lower, upper]; the span must be a whole number of bins.
  static WealthGrid from_range(double lower, double upper, double width);

  double upper_asinh() const {
    return lower_asinh + static_cast<double>(n_bins) * bin_width;
  }
  double lower_edge(std::size_t i) const {
    return lower_asinh + static_cast<double>(i) * bin_width;
  }
  double upper_edge(std::size_t i) const { return lower_edge(i + 1); }
  double center(std::size_t i) const {
    return lower_asinh + (static_cast<double>(i) + 0.5) * bin_width;
  }
  double wealth_center(std::size_t i) const { return asinh_inv(center(i)); }

  Eigen::VectorXd centers() const;
  Eigen::VectorXd wealth_centers() const;
  Eigen::VectorXd upper_edges() const;

  /// Bin index for an asinh coordinate; -1 below the grid, n_bins above.
  std::ptrdiff_t locate(double x) const;

  /// Exact identity of bin layout up to 1e-12 relative tolerance.
  bool compatible(const WealthGrid& other) const;
};

/// Population shares per bin at a point in time.
struct DistributionSnapshot {
  double time = 0.0;
  WealthGrid grid;
  Eigen::VectorXd mass;

  DistributionSnapshot() = default;
  DistributionSnapshot(double t, const WealthGrid& g, Eigen::VectorXd m);

  double total_mass() const { return mass.sum(); }
  Eigen::VectorXd density_asinh() const { return mass / grid.bin_width; }
  /// Cumulative mass at bin upper edges.
  Eigen::VectorXd cdf() const;
  /// Cumulative mass at bin centers (half of the own bin included).
  Eigen::VectorXd cdf_at_centers() const;
  DistributionSnapshot normalized() const;
  /// Mean wealth in linear units using bin-center wealth.
  double mean_wealth() const;
};

struct HistogramResult {
  DistributionSnapshot snapshot;
  double underflow = 0.0;     ///< share of weight below the grid
  double overflow = 0.0;      ///< share of weight above the grid
  double total_weight = 0.0;  ///< raw summed input weight
};

/// Weighted histogram of wealth values (linear units). Shares include the overflow counters,
/// so snapshot mass + underflow + overflow sums to one.
HistogramResult build_histogram(const std::vector<double>& wealth, const std::vector<double>& weights,
                                const WealthGrid& grid, double time = 0.0);
HistogramResult build_histogram(const std::vector<double>& wealth, const WealthGrid& grid,
                                double time = 0.0);

/// Slope of log density_asinh per bin via local-linear regression with a rectangular kernel.
/// The bandwidth must cover at least two bins; bins whose window holds fewer than two usable points are missing.
Eigen::VectorXd log_density_slope(const DistributionSnapshot& snapshot, double bandwidth);

/// Largest absolute difference between two CDFs on compatible grids.
double sup_cdf_distance(const DistributionSnapshot& a, const DistributionSnapshot& b);

}  // namespace wealthdyn
