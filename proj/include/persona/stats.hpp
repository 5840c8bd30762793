#pragma once

#include <span>
#include <vector>

namespace persona::stats {

/// Upper tail P(X >= x) of a chi-square with `dof` degrees of freedom.
double chi2_sf(double x, double dof);

/// Upper tail of a gamma distribution with the given shape and scale.
double gamma_sf(double x, double shape, double scale);

/// Interpolated (type 7) quantile of already sorted values.
double sorted_quantile(std::span<const double> sorted, double q);

double median(std::vector<double> values);

/// Bin index in [0, bins) from quantile cut points. Equal values always
/// share a bin, so heavily tied data can leave bins empty.
std::vector<int> quantile_bins(std::span<const double> values, int bins);

double mean(std::span<const double> v);

/// Sample variance (n - 1 divisor).
double sample_variance(std::span<const double> v);

double pearson(std::span<const double> a, std::span<const double> b);

}  // namespace persona::stats
