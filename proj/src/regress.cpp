#include "symident/regress.hpp"

#include <algorithm>
#include <cmath>

namespace symident::regress {

LibraryMatrix build_library(expr::Individual& ind, const Dataset& data, double rank_tol) {
    if (ind.terms.empty()) throw EmptyLibrary();
    const Eigen::Index m = data.rows();

    std::vector<Eigen::VectorXd> cols;
    std::vector<Eigen::VectorXd> basis;  // orthonormalized kept columns
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(ind.terms.size()); ++k) {
        Eigen::VectorXd col;
        try {
            col = expr::evaluate_column(ind.terms[static_cast<size_t>(k)], data);
        } catch (const expr::DomainViolation&) {
            continue;  // term dropped
        }
        double nrm = col.norm();
        if (nrm < rank_tol * std::sqrt(static_cast<double>(m))) continue;  // numerically zero

        // modified Gram-Schmidt against the orthonormal basis of the kept
        // columns: drops duplicates and linearly dependent columns, keeping
        // the earlier one
        Eigen::VectorXd r = col;
        for (const Eigen::VectorXd& q : basis) r -= q.dot(r) * q;
        for (const Eigen::VectorXd& q : basis) r -= q.dot(r) * q;  // reorthogonalize
        if (r.norm() <= rank_tol * nrm) continue;  // dependent on earlier columns
        basis.push_back(r / r.norm());
        cols.push_back(std::move(col));
        keep.push_back(k);
    }
    if (cols.empty()) {
        ind.terms.clear();
        ind.coefficients.resize(0, 0);
        throw EmptyLibrary();
    }

    if (keep.size() != ind.terms.size()) {
        std::vector<expr::ExprTree> kept_terms;
        kept_terms.reserve(keep.size());
        for (Eigen::Index k : keep) kept_terms.push_back(ind.terms[static_cast<size_t>(k)]);
        ind.terms = std::move(kept_terms);
        ind.coefficients.resize(0, 0);
    }

    LibraryMatrix lib;
    lib.columns.resize(m, static_cast<Eigen::Index>(cols.size()));
    lib.term_index.resize(cols.size());
    for (size_t j = 0; j < cols.size(); ++j) {
        lib.columns.col(static_cast<Eigen::Index>(j)) = cols[j];
        lib.term_index[j] = static_cast<Eigen::Index>(j);
    }
    return lib;
}

Eigen::MatrixXd evaluate_terms(const expr::Individual& ind, const Dataset& data) {
    Eigen::MatrixXd theta(data.rows(), ind.term_count());
    for (Eigen::Index k = 0; k < ind.term_count(); ++k)
        theta.col(k) = expr::evaluate_column(ind.terms[static_cast<size_t>(k)], data);
    return theta;
}

Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& theta, const Eigen::VectorXd& target,
                          double reg_lambda) {
    if (reg_lambda < 0.0) throw std::invalid_argument("ridge_fit: negative lambda");
    const Eigen::Index T = theta.cols();
    Eigen::MatrixXd gram = theta.transpose() * theta;
    gram.diagonal().array() += reg_lambda;
    if (reg_lambda == 0.0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
        if (!lu.isInvertible())
            throw std::runtime_error("ridge_fit: singular normal equations at lambda = 0");
        return lu.solve(theta.transpose() * target);
    }
    (void)T;
    return gram.ldlt().solve(theta.transpose() * target);
}

Eigen::VectorXd lasso_fit(const Eigen::MatrixXd& theta, const Eigen::VectorXd& target,
                          double reg_lambda, const LassoOptions& opt) {
    if (reg_lambda <= 0.0) throw std::invalid_argument("lasso_fit: lambda must be > 0");
    const Eigen::Index T = theta.cols();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(theta);
    const double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    if (smax == 0.0) return Eigen::VectorXd::Zero(T);
    const double step = 1.0 / (2.0 * smax * smax);  // gradient of the fit term is 2*Theta^T r
    const double shrink = step * reg_lambda;

    Eigen::MatrixXd gram = theta.transpose() * theta;
    Eigen::VectorXd tty = theta.transpose() * target;

    Eigen::VectorXd xi = Eigen::VectorXd::Zero(T);
    Eigen::VectorXd best = xi;
    auto objective = [&](const Eigen::VectorXd& x) {
        return (theta * x - target).squaredNorm() + reg_lambda * x.lpNorm<1>();
    };
    double best_obj = objective(xi);
    for (int it = 0; it < opt.max_iters; ++it) {
        Eigen::VectorXd grad = 2.0 * (gram * xi - tty);
        Eigen::VectorXd next = xi - step * grad;
        for (Eigen::Index k = 0; k < T; ++k) {
            double v = next(k);
            next(k) = std::copysign(std::max(0.0, std::abs(v) - shrink), v);
        }
        double change = (next - xi).lpNorm<Eigen::Infinity>();
        xi = std::move(next);
        double obj = objective(xi);
        if (obj < best_obj) {
            best_obj = obj;
            best = xi;
        }
        if (change < opt.tol) break;
    }
    return best;
}

Eigen::VectorXd elastic_net_fit(const Eigen::MatrixXd& theta, const Eigen::VectorXd& target,
                                double lambda1, double lambda2, const LassoOptions& opt) {
    if (lambda1 <= 0.0 && lambda2 <= 0.0)
        throw std::invalid_argument("elastic_net_fit: need lambda1 > 0 or lambda2 > 0");
    if (lambda2 == 0.0) return lasso_fit(theta, target, lambda1, opt);
    const Eigen::Index m = theta.rows();
    const Eigen::Index T = theta.cols();
    Eigen::MatrixXd aug(m + T, T);
    aug.topRows(m) = theta;
    aug.bottomRows(T) = std::sqrt(lambda2) * Eigen::MatrixXd::Identity(T, T);
    Eigen::VectorXd tgt = Eigen::VectorXd::Zero(m + T);
    tgt.head(m) = target;
    if (lambda1 <= 0.0) return ridge_fit(theta, target, lambda2);
    return lasso_fit(aug, tgt, lambda1, opt);
}

double default_ridge_lambda(const Eigen::MatrixXd& theta) {
    const Eigen::Index T = theta.cols();
    if (T == 0) return 0.0;
    return 1e-6 * theta.squaredNorm() / static_cast<double>(T);
}

Eigen::MatrixXd ridge_fit_states(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& zdot,
                                 double reg_lambda) {
    Eigen::MatrixXd gram = theta.transpose() * theta;
    gram.diagonal().array() += reg_lambda;
    Eigen::LDLT<Eigen::MatrixXd> solver(gram);
    Eigen::MatrixXd xi(theta.cols(), zdot.cols());
    for (Eigen::Index s = 0; s < zdot.cols(); ++s)
        xi.col(s) = solver.solve(theta.transpose() * zdot.col(s));
    return xi;
}

double rss(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& xi,
           const Eigen::MatrixXd& zdot) {
    return (zdot - theta * xi).squaredNorm();
}

void fit_individual(expr::Individual& ind, const Dataset& data, double reg_lambda) {
    LibraryMatrix lib = build_library(ind, data);
    double lambda = reg_lambda >= 0.0 ? reg_lambda : default_ridge_lambda(lib.columns);
    ind.coefficients = ridge_fit_states(lib.columns, data.Zdot, lambda);
    ind.rss = rss(lib.columns, ind.coefficients, data.Zdot);
}

namespace {

// refit on a subset of terms; returns resulting RSS
double refit_subset(const expr::Individual& ind, const Eigen::MatrixXd& theta,
                    const Dataset& data, const std::vector<bool>& active, double lambda,
                    Eigen::MatrixXd* xi_out) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index k = 0; k < ind.term_count(); ++k)
        if (active[static_cast<size_t>(k)]) idx.push_back(k);
    Eigen::MatrixXd sub(theta.rows(), static_cast<Eigen::Index>(idx.size()));
    for (size_t j = 0; j < idx.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = theta.col(idx[j]);
    Eigen::MatrixXd xi = ridge_fit_states(sub, data.Zdot, lambda);
    if (xi_out) *xi_out = xi;
    return rss(sub, xi, data.Zdot);
}

}  // namespace

void hard_threshold(expr::Individual& ind, const Dataset& data, const ThresholdOptions& opt) {
    if (ind.terms.empty()) return;
    LibraryMatrix lib = build_library(ind, data);
    const double lambda =
        opt.reg_lambda >= 0.0 ? opt.reg_lambda : default_ridge_lambda(lib.columns);
    Eigen::MatrixXd xi = ridge_fit_states(lib.columns, data.Zdot, lambda);
    double base_rss = rss(lib.columns, xi, data.Zdot);
    const Eigen::Index T = static_cast<Eigen::Index>(ind.terms.size());

    // candidate set: negligible coefficient in every state equation
    std::vector<Eigen::Index> candidates;
    for (Eigen::Index k = 0; k < T; ++k) {
        bool negligible = true;
        for (Eigen::Index s = 0; s < xi.cols(); ++s) {
            double mx = xi.col(s).cwiseAbs().maxCoeff();
            if (std::abs(xi(k, s)) > opt.sigma * mx) negligible = false;
        }
        if (negligible) candidates.push_back(k);
    }
    if (!candidates.empty() && static_cast<Eigen::Index>(candidates.size()) < T) {
        std::vector<bool> active(static_cast<size_t>(T), true);
        for (Eigen::Index k : candidates) active[static_cast<size_t>(k)] = false;
        double joint_rss = refit_subset(ind, lib.columns, data, active, lambda, nullptr);
        const double allowed = base_rss * (1.0 + opt.rss_slack) + 1e-15;
        if (joint_rss <= allowed) {
            // accept the joint removal
        } else {
            // one-by-one removal, keeping only neglectable removals
            std::fill(active.begin(), active.end(), true);
            for (Eigen::Index k : candidates) {
                active[static_cast<size_t>(k)] = false;
                double r = refit_subset(ind, lib.columns, data, active, lambda, nullptr);
                // guard against the pre-pruning fit, so accepted removals
                // never compound past the slack
                if (r > allowed) active[static_cast<size_t>(k)] = true;  // undo
            }
        }
        std::vector<expr::ExprTree> kept;
        for (Eigen::Index k = 0; k < T; ++k)
            if (active[static_cast<size_t>(k)]) kept.push_back(ind.terms[static_cast<size_t>(k)]);
        if (!kept.empty() && kept.size() < ind.terms.size()) {
            ind.terms = std::move(kept);
            lib = build_library(ind, data);
            xi = ridge_fit_states(lib.columns, data.Zdot, lambda);
            base_rss = rss(lib.columns, xi, data.Zdot);
        }
    }
    ind.coefficients = xi;
    ind.rss = base_rss;
}

}  // namespace symident::regress
