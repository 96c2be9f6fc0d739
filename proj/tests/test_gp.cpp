#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "symident/gp.hpp"
#include "symident/sim.hpp"

using namespace symident;

namespace {

gp::GpConfig small_config(const Dataset& data, int pop, int gens) {
    gp::GpConfig cfg;
    cfg.population_size = pop;
    cfg.max_generations = gens;
    cfg.seed = 7;
    cfg.context = expr::TermContext::standard(static_cast<int>(data.n_states()),
                                              static_cast<int>(data.n_inputs()));
    return cfg;
}

expr::Individual from_strings(std::initializer_list<const char*> terms) {
    expr::Individual ind;
    for (const char* s : terms) ind.terms.push_back(expr::parse(s));
    return ind;
}

}  // namespace

TEST_CASE("tournament selection from a single-member pool") {
    std::mt19937_64 rng(1);
    std::vector<fitness::Score> scores(1);
    scores[0].value = 4.0;
    std::vector<int> pool = {0};
    for (int i = 0; i < 20; ++i) CHECK(gp::tournament_select(pool, scores, 2, rng) == 0);
}

TEST_CASE("best-of-two frequency on three candidates") {
    // two uniform draws with replacement from three members: the best wins
    // a trial unless both draws miss it, so with probability 1 - (2/3)^2 = 5/9
    std::mt19937_64 rng(42);
    std::vector<fitness::Score> scores(3);
    scores[0].value = 1.0;
    scores[1].value = 2.0;
    scores[2].value = 3.0;
    std::vector<int> pool = {0, 1, 2};
    int wins = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i)
        if (gp::tournament_select(pool, scores, 2, rng) == 0) ++wins;
    CHECK(static_cast<double>(wins) / trials == doctest::Approx(5.0 / 9.0).epsilon(0.036));
}

TEST_CASE("large tournaments converge on the global best") {
    std::mt19937_64 rng(3);
    std::vector<fitness::Score> scores(4);
    for (int i = 0; i < 4; ++i) scores[i].value = 1.0 + i;
    std::vector<int> pool = {0, 1, 2, 3};
    for (int i = 0; i < 50; ++i) CHECK(gp::tournament_select(pool, scores, 64, rng) == 0);
}

TEST_CASE("constant mutation stays inside the shrinking bound") {
    std::mt19937_64 rng(11);
    const double theta = 5.0;
    double lo = 0.0, hi = 0.0;
    for (int i = 0; i < 20000; ++i) {
        double d = gp::mutate_constant(1.0, 1, rng, theta) - 1.0;
        CHECK(d >= -theta / 7.0);
        CHECK(d < theta / 7.0);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    // the admissible interval is essentially filled
    CHECK(lo < -0.69);
    CHECK(hi > 0.69);
    // late generations perturb by less than theta / (theta + 2j)
    for (int i = 0; i < 2000; ++i) {
        double d = gp::mutate_constant(0.0, 100, rng, theta);
        CHECK(std::abs(d) < 5.0 / 205.0);
        CHECK(std::abs(d) < 0.025);
    }
}

TEST_CASE("constant mutation of an individual changes exactly the constants") {
    gp::GpConfig cfg;
    cfg.context = expr::TermContext::standard(2);
    std::mt19937_64 rng(5);

    expr::Individual with_c = from_strings({"+z1c3.5", "sin+tt"});
    expr::Individual out = gp::mutate_constants(with_c, 10, rng, cfg);
    REQUIRE(out.term_count() == 2);
    // structure preserved, one constant nudged
    CHECK(out.terms[1].str() == "sin+tt");
    CHECK(out.terms[0].str() != with_c.terms[0].str());

    expr::Individual no_c = from_strings({"z1", "sin+tt"});
    expr::Individual same = gp::mutate_constants(no_c, 10, rng, cfg);
    REQUIRE(same.term_count() == 2);
    CHECK(same.terms[0].str() == "z1");
    CHECK(same.terms[1].str() == "sin+tt");
}

TEST_CASE("crossover can reproduce the canonical subtree swap") {
    // parents sin(c t) and z1 + sqrt(t z3): swapping the fragments (c t) and
    // z1 must yield sin(z1) and c t + sqrt(t z3) under some draw
    gp::GpConfig cfg;
    cfg.context = expr::TermContext::standard(4);
    expr::Individual pa = from_strings({"sin*c2.5t"});
    expr::Individual pb = from_strings({"+z1sqr*tz3"});
    const std::string want_a = expr::parse("sinz1").canonical_key();
    const std::string want_b = expr::parse("+*c2.5tsqr*tz3").canonical_key();
    bool seen = false;
    std::mt19937_64 rng(17);
    for (int i = 0; i < 500 && !seen; ++i) {
        auto [ca, cb] = gp::crossover(pa, pb, rng, cfg);
        REQUIRE(ca.term_count() == 1);
        REQUIRE(cb.term_count() == 1);
        seen = ca.terms[0].canonical_key() == want_a && cb.terms[0].canonical_key() == want_b;
    }
    CHECK(seen);
}

TEST_CASE("crossover rejects terminal-terminal draws") {
    gp::GpConfig cfg;
    cfg.context = expr::TermContext::standard(2);
    expr::Individual pa = from_strings({"z1"});
    expr::Individual pb = from_strings({"t"});
    std::mt19937_64 rng(23);
    for (int i = 0; i < 100; ++i) {
        auto [ca, cb] = gp::crossover(pa, pb, rng, cfg);
        CHECK(ca.terms[0].str() == "z1");
        CHECK(cb.terms[0].str() == "t");
    }
}

TEST_CASE("crossover never emits an oversized term") {
    gp::GpConfig cfg;
    cfg.context = expr::TermContext::standard(4);
    // both parents sit just under the cap, so most swaps would overflow
    expr::Individual pa = from_strings({"+*z1z2+*z3z4+*tz1+z2z3"});
    expr::Individual pb = from_strings({"+sin+tt+*c2.0z4+sqrz1*z2t"});
    REQUIRE(pa.terms[0].size() <= cfg.crossover_size_cap);
    REQUIRE(pb.terms[0].size() <= cfg.crossover_size_cap);
    std::mt19937_64 rng(31);
    for (int i = 0; i < 2000; ++i) {
        auto [ca, cb] = gp::crossover(pa, pb, rng, cfg);
        for (const auto& t : ca.terms) CHECK(t.size() <= cfg.crossover_size_cap);
        for (const auto& t : cb.terms) CHECK(t.size() <= cfg.crossover_size_cap);
    }
}

TEST_CASE("subtree mutation respects size and depth caps") {
    gp::GpConfig cfg;
    cfg.context = expr::TermContext::standard(4);
    std::mt19937_64 rng(47);
    expr::Individual base =
        from_strings({"+z1z2", "sin+tt", "*c3.0t", "sqr*tz3", "+*z1z2+z3z4"});
    for (int i = 0; i < 10000; ++i) {
        expr::Individual out = gp::mutate_subtree(base, rng, cfg);
        CHECK(out.term_count() <= base.term_count());
        CHECK(out.term_count() >= base.term_count() - 1);  // dedupe may drop one
        for (const auto& t : out.terms) {
            CHECK(t.size() <= cfg.crossover_size_cap);
            CHECK(t.depth() <= cfg.max_tree_depth);
        }
    }
}

TEST_CASE("mutating a single-terminal term replaces the whole term") {
    gp::GpConfig cfg;
    cfg.context = expr::TermContext::standard(2);
    std::mt19937_64 rng(53);
    expr::Individual base = from_strings({"z1"});
    bool changed = false;
    for (int i = 0; i < 200 && !changed; ++i) {
        expr::Individual out = gp::mutate_subtree(base, rng, cfg);
        REQUIRE(out.term_count() == 1);
        changed = out.terms[0].str() != "z1";
    }
    CHECK(changed);
}

TEST_CASE("population size is constant across generations") {
    sim::BenchmarkSpec spec;
    spec.samples = 150;
    sim::Benchmark b = sim::make_benchmark("two_dof", spec);
    gp::GpConfig cfg = small_config(b.training, 40, 5);
    gp::Population pop = gp::init_population(cfg, b.training);
    CHECK(pop.individuals.size() == 40);
    for (int g = 0; g < 4; ++g) {
        pop = gp::evolve_generation(std::move(pop), b.training, nullptr, cfg);
        CHECK(pop.individuals.size() == 40);
        for (const auto& ind : pop.individuals) {
            CHECK(ind.term_count() <= cfg.max_terms);
            for (const auto& t : ind.terms) CHECK(t.size() <= cfg.crossover_size_cap);
        }
    }
}

TEST_CASE("runs are deterministic under a fixed seed") {
    sim::BenchmarkSpec spec;
    spec.samples = 150;
    sim::Benchmark b = sim::make_benchmark("two_dof", spec);
    gp::GpConfig cfg = small_config(b.training, 40, 8);
    gp::DiscoveredModel a = gp::run(cfg, b.training, &b.validation);
    gp::DiscoveredModel c = gp::run(cfg, b.training, &b.validation);
    CHECK(a.training_rss == c.training_rss);
    CHECK(a.validation_rss == c.validation_rss);
    REQUIRE(a.terms.size() == c.terms.size());
    for (size_t i = 0; i < a.terms.size(); ++i) CHECK(a.terms[i] == c.terms[i]);
    CHECK(a.coefficients == c.coefficients);
}

TEST_CASE("a planted exact model dominates immediately") {
    sim::BenchmarkSpec spec;
    spec.samples = 300;
    sim::Benchmark b = sim::make_benchmark("two_dof", spec);
    gp::GpConfig cfg = small_config(b.training, 40, 2);
    expr::Individual truth = from_strings(
        {"z1", "z2", "z3", "z4", "sin+tt", "sin+*c5tc1.0471975511965976"});
    gp::DiscoveredModel m = gp::run(cfg, b.training, &b.validation, nullptr, {truth});
    // the default ridge penalty leaves a small bias floor; the planted model
    // still dominates anything two generations can assemble
    expr::Individual ref = from_strings(
        {"z1", "z2", "z3", "z4", "sin+tt", "sin+*c5tc1.0471975511965976"});
    regress::fit_individual(ref, b.training, -1.0);
    CHECK(m.training_rss <= ref.rss * (1.0 + 1e-9));
    CHECK(m.terms.size() == 6);
}

TEST_CASE("elitism keeps the best information-criterion score non-increasing") {
    sim::BenchmarkSpec spec;
    spec.samples = 150;
    sim::Benchmark b = sim::make_benchmark("two_dof", spec);
    gp::GpConfig cfg = small_config(b.training, 40, 25);
    cfg.measure = fitness::Measure::Aic;
    gp::DiscoveredModel m = gp::run(cfg, b.training);
    REQUIRE(m.trace.size() >= 2);
    for (size_t g = 1; g < m.trace.size(); ++g)
        CHECK(m.trace[g].best_fitness <= m.trace[g - 1].best_fitness + 1e-9);
}

TEST_CASE("restart controller stops early once the target is met") {
    sim::BenchmarkSpec spec;
    spec.samples = 300;
    sim::Benchmark b = sim::make_benchmark("two_dof", spec);
    gp::GpConfig cfg = small_config(b.training, 40, 2);
    gp::RestartOptions ro;
    ro.max_restarts = 5;
    ro.rss_target = 1e-3;
    // accept() sees the planted model already on the first run
    expr::Individual truth = from_strings(
        {"z1", "z2", "z3", "z4", "sin+tt", "sin+*c5tc1.0471975511965976"});
    gp::GpConfig seeded = cfg;
    gp::RestartResult direct = gp::run_restarts(seeded, b.training, nullptr, ro);
    CHECK(direct.restarts_used <= 5);
    CHECK(direct.run_rss.size() == static_cast<size_t>(direct.restarts_used));
    // the best-so-far RSS over the chain is non-increasing
    double best = std::numeric_limits<double>::infinity();
    for (double r : direct.run_rss) best = std::min(best, r);
    CHECK(direct.best.training_rss == doctest::Approx(best));
}
