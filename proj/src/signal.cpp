#include "symident/signal.hpp"

#include <cmath>

namespace symident::signal {

void validate(const Series& s) {
    if (s.t.size() != s.y.size())
        throw std::invalid_argument("Series: t and y lengths differ");
    for (Eigen::Index i = 1; i < s.t.size(); ++i)
        if (s.t(i) <= s.t(i - 1))
            throw std::invalid_argument("Series: t must be strictly increasing");
}

bool is_uniform(const Eigen::VectorXd& t, double rel_tol) {
    if (t.size() < 3) return true;
    const double h = t(1) - t(0);
    for (Eigen::Index i = 2; i < t.size(); ++i)
        if (std::abs((t(i) - t(i - 1)) - h) > rel_tol * std::max(1.0, std::abs(h)))
            return false;
    return true;
}

Series fdm_derivative(const Series& s) {
    validate(s);
    const Eigen::Index n = s.t.size();
    if (n < 3) throw std::invalid_argument("fdm_derivative: need at least 3 samples");
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 1; i + 1 < n; ++i)
        d(i) = (s.y(i + 1) - s.y(i - 1)) / (s.t(i + 1) - s.t(i - 1));
    // second-order one-sided stencils assuming locally uniform spacing
    {
        const double h = s.t(1) - s.t(0);
        d(0) = (-3.0 * s.y(0) + 4.0 * s.y(1) - s.y(2)) / (2.0 * h);
        const double hn = s.t(n - 1) - s.t(n - 2);
        d(n - 1) = (3.0 * s.y(n - 1) - 4.0 * s.y(n - 2) + s.y(n - 3)) / (2.0 * hn);
    }
    return {s.t, std::move(d)};
}

Series savitzky_golay(const Series& s, int window, int degree, int deriv) {
    validate(s);
    const Eigen::Index n = s.t.size();
    if (window % 2 == 0) throw std::invalid_argument("savitzky_golay: window must be odd");
    if (degree >= window) throw std::invalid_argument("savitzky_golay: degree >= window");
    if (window > n) throw std::invalid_argument("savitzky_golay: window > length");
    if (deriv != 0 && deriv != 1) throw std::invalid_argument("savitzky_golay: deriv must be 0 or 1");
    if (!is_uniform(s.t)) throw std::invalid_argument("savitzky_golay: non-uniform grid");

    const double h = s.t(1) - s.t(0);
    const int half = window / 2;
    const int p = degree + 1;

    Eigen::MatrixXd V(window, p);
    for (int j = 0; j < window; ++j) {
        double x = (j - half) * h;
        double pw = 1.0;
        for (int k = 0; k < p; ++k) {
            V(j, k) = pw;
            pw *= x;
        }
    }
    // weights mapping a window of samples to the fit (or its derivative)
    // evaluated at every in-window offset
    Eigen::MatrixXd G = (V.transpose() * V).ldlt().solve(V.transpose());  // p x window
    Eigen::MatrixXd E(window, p);
    for (int j = 0; j < window; ++j) {
        double x = (j - half) * h;
        for (int k = 0; k < p; ++k) {
            if (deriv == 0) {
                E(j, k) = std::pow(x, k);
            } else {
                E(j, k) = (k == 0) ? 0.0 : k * std::pow(x, k - 1);
            }
        }
    }
    Eigen::MatrixXd S = E * G;  // window x window

    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index start = i - half;
        start = std::max<Eigen::Index>(0, std::min(start, n - window));
        const Eigen::Index offset = i - start;
        out(i) = S.row(offset) * s.y.segment(start, window);
    }
    return {s.t, std::move(out)};
}

namespace {

// lower-triangular cumulative trapezoid operator on a uniform grid
Eigen::MatrixXd integration_operator(Eigen::Index n, double h) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 1; i < n; ++i) {
        A.row(i) = A.row(i - 1);
        A(i, i - 1) += 0.5 * h;
        A(i, i) += 0.5 * h;
    }
    return A;
}

double tv_objective(const Eigen::MatrixXd& A, const Eigen::VectorXd& d,
                    const Eigen::VectorXd& u, double lambda, double eps) {
    double fit = (A * u - d).squaredNorm();
    double tv = 0.0;
    for (Eigen::Index i = 1; i < u.size(); ++i)
        tv += std::sqrt((u(i) - u(i - 1)) * (u(i) - u(i - 1)) + eps * eps);
    return fit + lambda * tv;
}

}  // namespace

Series tv_derivative(const Series& s, const TvOptions& opt) {
    validate(s);
    const Eigen::Index n = s.t.size();
    if (n < 3) throw std::invalid_argument("tv_derivative: need at least 3 samples");
    if (!is_uniform(s.t)) throw std::invalid_argument("tv_derivative: non-uniform grid");
    const double h = s.t(1) - s.t(0);

    double lambda = opt.reg_lambda;
    if (lambda < 0.0) lambda = 0.01 * (s.y.maxCoeff() - s.y.minCoeff());
    if (lambda <= 0.0) lambda = 1e-6;

    Eigen::MatrixXd A = integration_operator(n, h);
    Eigen::VectorXd d = s.y.array() - s.y(0);
    Eigen::MatrixXd AtA2 = 2.0 * A.transpose() * A;
    Eigen::VectorXd Atd2 = 2.0 * A.transpose() * d;

    Eigen::VectorXd u = fdm_derivative(s).y;

    double prev_obj = tv_objective(A, d, u, lambda, opt.eps);
    int rising = 0;
    for (int it = 0; it < opt.iters; ++it) {
        // lagged-diffusivity weights on first differences
        Eigen::MatrixXd M = AtA2;
        for (Eigen::Index i = 1; i < n; ++i) {
            double du = u(i) - u(i - 1);
            double w = lambda / std::sqrt(du * du + opt.eps * opt.eps);
            M(i - 1, i - 1) += w;
            M(i, i) += w;
            M(i - 1, i) -= w;
            M(i, i - 1) -= w;
        }
        Eigen::VectorXd u_new = M.ldlt().solve(Atd2);
        double obj = tv_objective(A, d, u_new, lambda, opt.eps);
        if (obj > prev_obj * (1.0 + 1e-12)) {
            if (++rising >= 5)
                throw std::runtime_error("tv_derivative: diverging (residual rose 5 times)");
        } else {
            rising = 0;
        }
        double delta = (u_new - u).norm() / std::max(1.0, u.norm());
        u = std::move(u_new);
        prev_obj = obj;
        if (delta < 1e-10) break;
    }
    return {s.t, std::move(u)};
}

Series smooth(const Series& s, SmoothMethod method, const SmoothParams& p) {
    if (method == SmoothMethod::SavGol) return savitzky_golay(s, p.window, p.degree, 0);
    // TV route: differentiate with TV regularization, integrate back
    Series u = tv_derivative(s, p.tv);
    const Eigen::Index n = s.t.size();
    Eigen::VectorXd y(n);
    y(0) = s.y(0);
    for (Eigen::Index i = 1; i < n; ++i)
        y(i) = y(i - 1) + 0.5 * (s.t(i) - s.t(i - 1)) * (u.y(i) + u.y(i - 1));
    return {s.t, std::move(y)};
}

}  // namespace symident::signal
