#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "symident/dataset.hpp"
#include "symident/expr.hpp"

namespace symident::regress {

struct EmptyLibrary : std::runtime_error {
    EmptyLibrary() : std::runtime_error("all candidate terms dropped") {}
};

// Candidate-term value matrix; column k holds term k evaluated at the
// sample times. Construction drops domain-violating, duplicate-valued and
// linearly dependent terms (the individual's term list is pruned to match).
struct LibraryMatrix {
    Eigen::MatrixXd columns;               // m x T
    std::vector<Eigen::Index> term_index;  // column -> index into Individual::terms
};

inline constexpr double kRankTol = 1e-8;

// Builds the library on `data`, removing dropped terms from `ind`.
LibraryMatrix build_library(expr::Individual& ind, const Dataset& data,
                            double rank_tol = kRankTol);

// Evaluates an already-pruned term set on another dataset (no pruning);
// throws DomainViolation if a term is undefined there.
Eigen::MatrixXd evaluate_terms(const expr::Individual& ind, const Dataset& data);

// Closed-form ridge solution of (Theta^T Theta + lambda I) xi = Theta^T y.
Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& theta, const Eigen::VectorXd& target,
                          double reg_lambda);

struct LassoOptions {
    int max_iters = 2000;
    double tol = 1e-10;
};

// Proximal-gradient (ISTA) minimizer of ||Theta xi - y||^2 + lambda ||xi||_1.
Eigen::VectorXd lasso_fit(const Eigen::MatrixXd& theta, const Eigen::VectorXd& target,
                          double reg_lambda, const LassoOptions& opt = {});

// Elastic net via the augmented-data lasso transformation:
// append sqrt(lambda2) I rows to Theta and zeros to the target.
Eigen::VectorXd elastic_net_fit(const Eigen::MatrixXd& theta, const Eigen::VectorXd& target,
                                double lambda1, double lambda2, const LassoOptions& opt = {});

// GP-inner-loop default: lambda = 1e-6 * trace(Theta^T Theta) / T.
double default_ridge_lambda(const Eigen::MatrixXd& theta);

// Fits one coefficient column per state equation with a shared library.
Eigen::MatrixXd ridge_fit_states(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& zdot,
                                 double reg_lambda);

double rss(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& xi,
           const Eigen::MatrixXd& zdot);

struct ThresholdOptions {
    double sigma = 1e-4;      // coefficient-magnitude cutoff relative to max
    double rss_slack = 0.05;  // tolerated relative RSS increase
    double reg_lambda = -1.0; // < 0: default_ridge_lambda
};

// Removes terms whose coefficients are negligible in every state equation,
// guarded by the relative RSS increase; falls back to one-at-a-time removal
// when the joint removal costs too much. Refits ind.coefficients and ind.rss.
void hard_threshold(expr::Individual& ind, const Dataset& data,
                    const ThresholdOptions& opt = {});

// Builds the library, ridge-fits every state equation and stores
// coefficients + rss on the individual. Throws EmptyLibrary.
void fit_individual(expr::Individual& ind, const Dataset& data, double reg_lambda = -1.0);

}  // namespace symident::regress
