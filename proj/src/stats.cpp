#include "madloop/stats.hpp"

#include "madloop/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>

namespace madloop {

MeanSe mean_se(std::span<const double> values) {
    MeanSe out;
    const auto n = static_cast<double>(values.size());
    if (values.empty()) {
        return out;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    out.mean = sum / n;
    if (values.size() < 2) {
        return out;
    }
    double ss = 0.0;
    for (double v : values) {
        ss += (v - out.mean) * (v - out.mean);
    }
    out.sd = std::sqrt(ss / (n - 1.0));
    out.se = out.sd / std::sqrt(n);
    return out;
}

namespace {

double centered_x_sum_sq(std::span<const double> x, double& x_mean) {
    double sum = 0.0;
    for (double v : x) {
        sum += v;
    }
    x_mean = sum / static_cast<double>(x.size());
    double sxx = 0.0;
    for (double v : x) {
        sxx += (v - x_mean) * (v - x_mean);
    }
    return sxx;
}

} // namespace

double ols_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw InvalidDataError("ols_slope needs two equally sized series of length >= 2");
    }
    double x_mean = 0.0;
    const double sxx = centered_x_sum_sq(x, x_mean);
    if (sxx == 0.0) {
        throw InvalidDataError("ols_slope needs at least two distinct x values");
    }
    const std::size_t n = x.size();
    double sxy = 0.0;
    for (std::size_t i = 0; i < n / 2; ++i) {
        const std::size_t j = n - 1 - i;
        sxy += (x[j] - x_mean) * y[j] + (x[i] - x_mean) * y[i];
    }
    if (n % 2 == 1) {
        sxy += (x[n / 2] - x_mean) * y[n / 2];
    }
    return sxy / sxx;
}

double ols_slope_se(std::span<const double> x, std::span<const double> y) {
    if (x.size() < 3) {
        throw InsufficientDataError("slope standard error needs at least three points");
    }
    double x_mean = 0.0;
    const double sxx = centered_x_sum_sq(x, x_mean);
    const double slope = ols_slope(x, y);
    double y_mean = 0.0;
    for (double v : y) {
        y_mean += v;
    }
    y_mean /= static_cast<double>(y.size());
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (y_mean + slope * (x[i] - x_mean));
        rss += r * r;
    }
    return std::sqrt(rss / static_cast<double>(x.size() - 2) / sxx);
}

double t_critical(double confidence, double dof) {
    if (!(dof > 0.0)) {
        throw DomainError("t_critical needs positive degrees of freedom");
    }
    const boost::math::students_t dist(dof);
    return boost::math::quantile(boost::math::complement(dist, (1.0 - confidence) / 2.0));
}

} // namespace madloop
