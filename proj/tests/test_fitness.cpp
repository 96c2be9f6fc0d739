#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "symident/fitness.hpp"

using namespace symident;
using namespace symident::fitness;

namespace {

FitnessState later_generation_state(double max_rss, int max_gamma, double max_ops) {
    FitnessState st;
    st.generation = 60;
    st.prev_best_max_rss = max_rss;
    st.prev_best_max_gamma = max_gamma;
    st.prev_best_max_opcount = max_ops;
    return st;
}

expr::Complexity cx(int gamma, double mean_ops) {
    expr::Complexity c;
    c.gamma = gamma;
    c.mean_ops = mean_ops;
    return c;
}

}  // namespace

TEST_CASE("first generation scores by residual alone") {
    FitnessState st;
    st.generation = 1;
    Score s = adaptive_fitness(123.5, cx(9, 4.0), st);
    CHECK(s.value == doctest::Approx(123.5));
}

TEST_CASE("zero exponents reduce the measure to normalized residual") {
    FitnessState st = later_generation_state(10.0, 8, 3.0);
    st.alpha = 0.0;
    st.tau = 0.0;
    Score s = adaptive_fitness(2.5, cx(4, 1.0), st);
    CHECK(s.value == doctest::Approx(0.25));
}

TEST_CASE("linear complexity factor at alpha one") {
    FitnessState st = later_generation_state(10.0, 12, 4.0);
    st.alpha = 1.0;
    st.tau = 0.0;
    Score lean = adaptive_fitness(5.0, cx(6, 2.0), st);
    Score fat = adaptive_fitness(5.0, cx(12, 2.0), st);
    CHECK(lean.value == doctest::Approx(0.5 * fat.value));
}

TEST_CASE("parsimony pressure flips the winner as alpha rises") {
    // 7-term individual with half the residual of the 6-term one; the
    // preference flips at alpha = ln 2 / ln(7/6) ~ 4.4966
    const double flip = std::log(2.0) / std::log(7.0 / 6.0);
    for (double alpha : {0.0, 1.0, 2.0, flip - 0.05, flip + 0.05, 6.0}) {
        FitnessState st = later_generation_state(10.0, 7, 4.0);
        st.alpha = alpha;
        st.alpha_cap = 10.0;
        st.tau = 0.0;
        Score six = adaptive_fitness(2.0, cx(6, 2.0), st);
        Score seven = adaptive_fitness(1.0, cx(7, 2.0), st);
        if (alpha < flip)
            CHECK(seven.value < six.value);
        else
            CHECK(six.value < seven.value);
    }
}

TEST_CASE("fitness is monotone in complexity for fixed residual") {
    FitnessState st = later_generation_state(10.0, 16, 8.0);
    st.alpha = 1.5;
    st.tau = 0.05;
    double prev = 0.0;
    for (int gamma = 1; gamma <= 16; ++gamma) {
        Score s = adaptive_fitness(4.0, cx(gamma, 4.0), st);
        CHECK(s.value >= prev);
        prev = s.value;
    }
    // operator-count factor: monotone above the floor of the ratio
    double prev_ops = 0.0;
    for (double ops = 1.0; ops <= 8.0; ops += 0.5) {
        Score s = adaptive_fitness(4.0, cx(8, ops), st);
        CHECK(s.value >= prev_ops);
        prev_ops = s.value;
    }
}

TEST_CASE("alpha stays zero before the threshold and snaps to one at it") {
    FitnessState st;
    st.generation = 1;
    for (int j = 1; j < 70; ++j) {
        st = update_alpha(st, 1.0 /* scaled rss, above e_threshold */, 5.0, 5.0);
        CHECK(st.generation == j + 1);
        if (st.generation < 50)
            CHECK(st.alpha == 0.0);
        else
            CHECK(st.alpha == 1.0);  // no growth while scaled RSS is high
    }
}

TEST_CASE("alpha grows by the increment once the residual is small, capped at two") {
    FitnessState st;
    st.generation = 55;
    st.alpha = 1.0;
    for (int i = 0; i < 40; ++i) {
        double before = st.alpha;
        st = update_alpha(st, 1e-5 /* below e_threshold */, 5.0, 5.0);
        CHECK(st.alpha == doctest::Approx(std::min(before + 0.05, 2.0)));
    }
    CHECK(st.alpha == doctest::Approx(2.0));
}

TEST_CASE("an abrupt residual increase halves the increment") {
    FitnessState st;
    st.generation = 60;
    st.alpha = 1.0;
    CHECK(st.alpha_increment == doctest::Approx(0.05));
    st = update_alpha(st, 1.0, 11.0, 5.0);  // more than 2x the previous best
    CHECK(st.alpha_increment == doctest::Approx(0.025));
    st = update_alpha(st, 1.0, 30.0, 11.0);
    CHECK(st.alpha_increment == doctest::Approx(0.0125));
    st = update_alpha(st, 1.0, 30.0, 30.0);  // no abrupt event
    CHECK(st.alpha_increment == doctest::Approx(0.0125));
}

TEST_CASE("information criteria match direct evaluation") {
    CHECK(aic(1.0, 100, 6) == doctest::Approx(100.0 * std::log(0.01) + 12.0));
    CHECK(aic(1.0, 100, 7) == doctest::Approx(aic(1.0, 100, 6) + 2.0));
    // BIC - AIC = d (ln N - 2)
    for (int d : {1, 4, 9})
        CHECK(bic(2.5, 50, d) - aic(2.5, 50, d) ==
              doctest::Approx(d * (std::log(50.0) - 2.0)));
}

TEST_CASE("exact fits score negative infinity under the information criteria") {
    CHECK(aic(0.0, 100, 3) == -std::numeric_limits<double>::infinity());
    CHECK(bic(0.0, 100, 3) == -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(aic(1.0, 0, 3), std::invalid_argument);
    CHECK_THROWS_AS(bic(1.0, 10, 0), std::invalid_argument);
}

TEST_CASE("selection under zero exponents equals selection by residual") {
    FitnessState st = later_generation_state(8.0, 10, 5.0);
    st.alpha = 0.0;
    st.tau = 0.0;
    std::vector<double> rss_values = {3.0, 1.5, 7.0, 2.2};
    std::vector<int> gammas = {2, 9, 1, 5};
    int best_by_rss = 1, best_by_fitness = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < rss_values.size(); ++i) {
        Score s = adaptive_fitness(rss_values[i], cx(gammas[i], 2.0), st);
        if (s.value < best_val) {
            best_val = s.value;
            best_by_fitness = static_cast<int>(i);
        }
    }
    CHECK(best_by_fitness == best_by_rss);
}
