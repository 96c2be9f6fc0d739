#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace symident::signal {

// One scalar channel sampled at strictly increasing times.
struct Series {
    Eigen::VectorXd t;
    Eigen::VectorXd y;
};

void validate(const Series& s);
bool is_uniform(const Eigen::VectorXd& t, double rel_tol = 1e-9);

// Central differences in the interior, second-order one-sided at the ends.
Series fdm_derivative(const Series& s);

// Sliding least-squares polynomial fit; deriv selects value (0) or first
// derivative (1) of the local fit at each point. Endpoints reuse the
// nearest full window. Requires a uniform grid, odd window, degree < window.
Series savitzky_golay(const Series& s, int window, int degree, int deriv);

struct TvOptions {
    double reg_lambda = -1.0;  // < 0: use 0.01 * (data range)
    int iters = 100;
    double eps = 1e-8;  // TV smoothing parameter
};

// Total-variation regularized derivative: u minimizing
// ||A u - (y - y_1)||^2 + lambda * TV(u), A = cumulative trapezoid,
// solved by the lagged-diffusivity fixed point.
Series tv_derivative(const Series& s, const TvOptions& opt = {});

enum class SmoothMethod { SavGol, Tv };

struct SmoothParams {
    int window = 11;
    int degree = 3;
    TvOptions tv;
};

// Smoothing = the deriv-0 variant of the corresponding differentiator;
// the TV route integrates the TV derivative back through the grid.
Series smooth(const Series& s, SmoothMethod method, const SmoothParams& p = {});

}  // namespace symident::signal
