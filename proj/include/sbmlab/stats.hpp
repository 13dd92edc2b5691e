#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sbmlab {

/// Sample mean together with its standard error.
struct MeanEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t n = 0;
};

MeanEstimate mean_estimate(std::span<const double> xs);

/// Ordinary least squares y = slope * x + intercept.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double r2 = 0.0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Log-log power-law fit y ~ C x^exponent. Only pairs with x > 0 and y > 0
/// enter the regression; the arrays keep the pairs that were used.
struct PowerLawFit {
    double exponent = 0.0;
    double intercept = 0.0;  // log C
    double stderr_ = 0.0;
    double r2 = 0.0;
    std::vector<double> x_values;
    std::vector<double> y_values;
};

/// Throws DegenerateFit when fewer than two usable pairs remain.
PowerLawFit fit_power_law(std::span<const double> x, std::span<const double> y);

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// P(K > x) for the Kolmogorov distribution.
double kolmogorov_survival(double x);

}  // namespace sbmlab
