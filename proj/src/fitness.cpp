#include "symident/fitness.hpp"

#include <cmath>

namespace symident::fitness {

Score adaptive_fitness(double rss_value, const expr::Complexity& cx, const FitnessState& st) {
    Score s;
    s.rss = rss_value;
    s.gamma = cx.gamma;
    s.opcount_mean = cx.mean_ops;
    s.measure = Measure::Adaptive;
    if (st.generation <= 1 || st.prev_best_max_rss <= 0.0) {
        s.value = rss_value;
        return s;
    }
    double norm_rss = rss_value / st.prev_best_max_rss;
    double norm_gamma = static_cast<double>(cx.gamma) / std::max(1, st.prev_best_max_gamma);
    double norm_ops = st.prev_best_max_opcount > 0.0 ? cx.mean_ops / st.prev_best_max_opcount
                                                     : 1.0;
    // zero mean_ops with tau > 0 would zero the whole product and make
    // terminal-only models unbeatable regardless of RSS; floor the ratio
    norm_ops = std::max(norm_ops, 1.0 / 16.0);
    s.value = norm_rss * std::pow(norm_gamma, st.alpha) * std::pow(norm_ops, st.tau);
    return s;
}

FitnessState update_alpha(const FitnessState& st, double best_scaled_rss_now,
                          double best_rss_now, double best_rss_prev) {
    FitnessState next = st;
    next.generation = st.generation + 1;
    if (best_rss_prev > 0.0 && best_rss_now > st.abrupt_factor * best_rss_prev)
        next.alpha_increment = st.alpha_increment * 0.5;
    if (next.generation < st.n_threshold) {
        next.alpha = 0.0;
        return next;
    }
    if (st.generation < st.n_threshold) {
        next.alpha = 1.0;  // first generation at/over the threshold
        return next;
    }
    if (best_scaled_rss_now < st.e_threshold) next.alpha_growing = true;
    if (next.alpha_growing)
        next.alpha = std::min(st.alpha + next.alpha_increment, st.alpha_cap);
    return next;
}

double aic(double rss_value, int n_obs, int d) {
    if (n_obs <= 0 || d < 1) throw std::invalid_argument("aic: bad arguments");
    if (rss_value <= 0.0) return -std::numeric_limits<double>::infinity();  // exact fit
    return n_obs * std::log(rss_value / n_obs) + 2.0 * d;
}

double bic(double rss_value, int n_obs, int d) {
    if (n_obs <= 0 || d < 1) throw std::invalid_argument("bic: bad arguments");
    if (rss_value <= 0.0) return -std::numeric_limits<double>::infinity();
    return n_obs * std::log(rss_value / n_obs) + d * std::log(static_cast<double>(n_obs));
}

Score score_individual(const expr::Individual& ind, Measure measure, const FitnessState& st,
                       int n_obs) {
    expr::Complexity cx = expr::complexity_measures(ind);
    if (measure == Measure::Adaptive) return adaptive_fitness(ind.rss, cx, st);
    Score s;
    s.rss = ind.rss;
    s.gamma = cx.gamma;
    s.opcount_mean = cx.mean_ops;
    s.measure = measure;
    s.value = measure == Measure::Aic ? aic(ind.rss, n_obs, cx.gamma)
                                      : bic(ind.rss, n_obs, cx.gamma);
    return s;
}

}  // namespace symident::fitness
