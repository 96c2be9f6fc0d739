#pragma once

#include <limits>

#include "symident/expr.hpp"

namespace symident::fitness {

enum class Measure { Adaptive, Aic, Bic };

// Per-generation state of the adaptive parsimony schedule.
struct FitnessState {
    int generation = 1;
    double alpha = 0.0;
    double alpha_increment = 0.05;
    double alpha_cap = 2.0;
    int n_threshold = 50;
    double e_threshold = 1e-3;  // scaled-RSS level enabling alpha growth
    double tau = 0.05;
    double abrupt_factor = 2.0;

    // maxima over the previous generation's best set, for normalization
    double prev_best_max_rss = 0.0;
    int prev_best_max_gamma = 0;
    double prev_best_max_opcount = 0.0;

    bool alpha_growing = false;
};

struct Score {
    double rss = 0.0;
    int gamma = 0;
    double opcount_mean = 0.0;
    double value = std::numeric_limits<double>::infinity();  // lower is better
    Measure measure = Measure::Adaptive;
};

// Adaptive measure: generation 1 scores by RSS alone; afterwards
// value = (RSS/maxRSS_b) * (Gamma/maxGamma_b)^alpha * (opmean/maxOp_b)^tau.
Score adaptive_fitness(double rss_value, const expr::Complexity& cx, const FitnessState& st);

// Advances the schedule between generations: alpha stays 0 before
// n_threshold, snaps to 1 at it, then grows by alpha_increment once the best
// scaled RSS dips under e_threshold; an abrupt RSS increase halves the
// increment.
FitnessState update_alpha(const FitnessState& st, double best_scaled_rss_now,
                          double best_rss_now, double best_rss_prev);

double aic(double rss_value, int n_obs, int d);
double bic(double rss_value, int n_obs, int d);

Score score_individual(const expr::Individual& ind, Measure measure, const FitnessState& st,
                       int n_obs);

}  // namespace symident::fitness
