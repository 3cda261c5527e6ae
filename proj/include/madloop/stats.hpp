#pragma once

#include <span>

namespace madloop {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    double sd = 0.0;
};

/// Sample mean, standard deviation (n - 1), and standard error of the mean.
MeanSe mean_se(std::span<const double> values);

/// Ordinary least-squares slope of y on x.
///
/// The numerator pairs the i-th and (n-1-i)-th points, so an exactly constant
/// y gives an exactly zero slope when x is symmetric about its mean (equally
/// spaced generations).
double ols_slope(std::span<const double> x, std::span<const double> y);

/// Residual standard error of the OLS slope (needs n >= 3).
double ols_slope_se(std::span<const double> x, std::span<const double> y);

/// Two-sided Student-t critical value for the given confidence and degrees of freedom.
double t_critical(double confidence, double dof);

} // namespace madloop
