#pragma once

#include "qsp/rng.hpp"

#include <functional>
#include <vector>

namespace qsp {

// One-sample Kolmogorov-Smirnov statistic sup_x |F_n(x) - F(x)|.
double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);

// Asymptotic KS p-value with Stephens' finite-n correction.
double ks_pvalue(double d, std::size_t n);

double ks_test(const std::vector<double>& sample, const std::function<double(double)>& cdf);

// Two-sample energy test p-value by label permutation. Linear-time E-statistic
// per permutation after one sort, so large samples stay cheap.
double energy_test(const std::vector<double>& x, const std::vector<double>& y,
                   int permutations, RngStream& rng);

// Multivariate variant on point clouds of equal dimension. Precomputes the
// pooled distance matrix once (float storage), then permutes labels.
double energy_test_multivariate(const std::vector<std::vector<double>>& x,
                                const std::vector<std::vector<double>>& y,
                                int permutations, RngStream& rng);

// Bias-corrected distance correlation of two equal-length scalar samples,
// clamped to [0, 1]. Centered at zero under independence (the uncorrected
// V-statistic drifts upward at small n). O(n log n) via the sorted-sweep
// pair-product identity, so 10^5-sample checks stay cheap.
double distance_correlation(const std::vector<double>& x, const std::vector<double>& y);

// Adaptive Simpson quadrature to absolute tolerance tol.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol);

double chi_square_cdf(double x, int dof);
double chi_square_quantile(double p, int dof);
double normal_cdf(double x);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v); // unbiased

// Chi-square goodness-of-fit p-value for binned counts vs expected counts.
double chi_square_gof(const std::vector<double>& observed, const std::vector<double>& expected);

} // namespace qsp
