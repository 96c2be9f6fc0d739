// Compares the serial reference path of the population evaluation against
// the OpenMP path on a realistic workload and checks they agree exactly.
#include <chrono>
#include <cmath>
#include <cstdio>

#include "symident/gp.hpp"
#include "symident/sim.hpp"

using namespace symident;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    int population = argc > 1 ? std::atoi(argv[1]) : 600;
    int repeats = argc > 2 ? std::atoi(argv[2]) : 3;

    sim::BenchmarkSpec spec;
    spec.samples = 1000;
    sim::Benchmark bench = sim::make_benchmark("two_dof", spec);

    gp::GpConfig cfg;
    cfg.population_size = population;
    cfg.context = expr::TermContext::standard(static_cast<int>(bench.training.n_states()));

    gp::Population pop = gp::init_population(cfg, bench.training);

    double t_serial = 0.0, t_parallel = 0.0;
    bool identical = true;
    for (int r = 0; r < repeats; ++r) {
        std::vector<expr::Individual> serial = pop.individuals;
        std::vector<expr::Individual> parallel = pop.individuals;

        auto t0 = std::chrono::steady_clock::now();
        gp::evaluate_population(serial, bench.training, &bench.validation, cfg, false);
        t_serial += seconds_since(t0);

        t0 = std::chrono::steady_clock::now();
        gp::evaluate_population(parallel, bench.training, &bench.validation, cfg, true);
        t_parallel += seconds_since(t0);

        for (size_t i = 0; i < serial.size(); ++i) {
            const auto& a = serial[i];
            const auto& b = parallel[i];
            if (a.terms.size() != b.terms.size() || a.rss != b.rss ||
                a.validation_rss != b.validation_rss ||
                a.coefficients.rows() != b.coefficients.rows() ||
                a.coefficients.cols() != b.coefficients.cols() ||
                (a.coefficients.size() > 0 && a.coefficients != b.coefficients)) {
                identical = false;
            }
        }
    }

    t_serial /= repeats;
    t_parallel /= repeats;
    std::printf("population %d, %d repeats\n", population, repeats);
    std::printf("serial    %.3f s/eval\n", t_serial);
    std::printf("parallel  %.3f s/eval (speedup %.2fx)\n", t_parallel, t_serial / t_parallel);
    std::printf("results identical: %s\n", identical ? "yes" : "NO");
    return identical ? 0 : 1;
}
