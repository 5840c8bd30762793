#include "persona/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "persona/error.hpp"

namespace persona::stats {

double chi2_sf(double x, double dof) {
  if (!(dof > 0)) throw ValidationError("chi2_sf: dof must be positive");
  if (x <= 0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, x / 2.0);
}

double gamma_sf(double x, double shape, double scale) {
  if (!(shape > 0) || !(scale > 0)) throw ValidationError("gamma_sf: non-positive parameter");
  if (x <= 0) return 1.0;
  return boost::math::gamma_q(shape, x / scale);
}

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return sorted_quantile(values, 0.5);
}

std::vector<int> quantile_bins(std::span<const double> values, int bins) {
  if (bins < 1) throw ValidationError("quantile_bins: need at least one bin");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts;
  for (int k = 1; k < bins; ++k) {
    cuts.push_back(sorted_quantile(sorted, static_cast<double>(k) / bins));
  }
  std::vector<int> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<int>(std::lower_bound(cuts.begin(), cuts.end(), values[i]) - cuts.begin());
  }
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw ValidationError("mean of empty data");
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) throw ValidationError("sample variance needs two values");
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("pearson: bad lengths");
  const double ma = mean(a);
  const double mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0 || sbb <= 0) throw ValidationError("pearson: zero variance");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace persona::stats
