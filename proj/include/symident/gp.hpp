#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "symident/dataset.hpp"
#include "symident/expr.hpp"
#include "symident/fitness.hpp"
#include "symident/regress.hpp"

namespace symident::gp {

struct GpConfig {
    int population_size = 600;
    int first_population_size = -1;  // < 0: same as population_size
    int max_generations = 100;
    double epsilon_best_pct = 10.0;   // share forming the best set G_b
    double epsilon_repro_pct = 10.0;  // share filled by reproduction
    int tournament_size = 2;          // 2 or 3
    int crossover_size_cap = 15;
    int retry_cap = 10;               // crossover size-cancel retries
    double mutation_theta = 5.0;      // constant-mutation bound
    int max_terms = 20;
    int initial_tree_depth = 5;
    int max_tree_depth = 15;
    std::uint64_t seed = 1;

    // operator mix for the slots not filled by elitism/reproduction
    double frac_crossover = 0.7;
    double frac_mutation = 0.2;
    double frac_constant = 0.1;

    double ridge_lambda = -1.0;  // < 0: trace-based default per fit
    regress::ThresholdOptions threshold;

    fitness::Measure measure = fitness::Measure::Adaptive;
    fitness::FitnessState fitness_init;
    bool fitness_on_validation = false;

    // stopping: not before min_generations AND scaled mean RSS at most
    // stop_scaled_rss AND best fitness converged over conv_window generations
    int min_generations = 50;
    double stop_scaled_rss = 1e-3;
    double conv_tol = 1e-4;
    int conv_window = 10;

    expr::TermContext context;
    bool parallel = true;  // OpenMP population evaluation
};

struct Population {
    std::vector<expr::Individual> individuals;
    std::vector<fitness::Score> scores;       // parallel to individuals
    std::vector<int> order;                   // indices sorted by score value
    std::vector<expr::Individual> best_set;   // G_b, sorted ascending by fitness
    std::vector<expr::ExprTree> function_memory;
    std::vector<double> constant_memory;
    fitness::FitnessState state;
    int generation = 1;
    double prev_best_rss = -1.0;  // best scoring RSS of the previous generation
    expr::Individual champion;  // lowest-training-RSS individual seen so far
};

struct GenerationStats {
    int generation = 0;
    double best_rss = 0.0;
    double best_fitness = 0.0;
    int best_gamma = 0;
    double best_mean_ops = 0.0;
    double mean_rss = 0.0;  // over the population (finite entries)
    int mean_gamma = 0;
};

struct DiscoveredModel {
    std::vector<std::string> terms;  // prefix strings
    Eigen::MatrixXd coefficients;    // term_count x n_states
    double training_rss = 0.0;
    double validation_rss = std::numeric_limits<double>::quiet_NaN();
    int generations = 0;
    int gamma = 0;
    double mean_ops = 0.0;
    std::vector<GenerationStats> trace;
};

// ---------------------------------------------------------------------------

expr::Individual random_individual(std::mt19937_64& rng, const GpConfig& cfg,
                                   const Dataset& data);

Population init_population(const GpConfig& cfg, const Dataset& data);

// Best-of-k selection, k uniform draws with replacement from pool (indices
// into scores). Pool must be nonempty.
int tournament_select(const std::vector<int>& pool, const std::vector<fitness::Score>& scores,
                      int k, std::mt19937_64& rng);

// Subtree crossover between one random term of each parent; oversized
// outputs are cancelled and retried (or, when a function memory is
// available, replaced by a random memory feature). Returns the parents
// unchanged when retries are exhausted.
std::pair<expr::Individual, expr::Individual> crossover(
    const expr::Individual& pa, const expr::Individual& pb, std::mt19937_64& rng,
    const GpConfig& cfg, const std::vector<expr::ExprTree>& function_memory = {});

// Replaces one random constant node by a term drawn from the best set (or a
// constant-memory value); nullopt when the individual has no constants.
std::optional<expr::Individual> constant_crossover(
    const expr::Individual& ind, const std::vector<expr::Individual>& best_set,
    const std::vector<double>& constant_memory, std::mt19937_64& rng, const GpConfig& cfg);

// c_new = c_old + (2*kappa - theta)/(theta + 2j), kappa uniform on [0, theta)
double mutate_constant(double c_old, int generation, std::mt19937_64& rng, double theta);

// Applies mutate_constant to one random constant node of one random term;
// returns the individual unchanged when it has no constants.
expr::Individual mutate_constants(const expr::Individual& ind, int generation,
                                  std::mt19937_64& rng, const GpConfig& cfg);

// Replaces a random subtree of a random term with a freshly drawn tree,
// respecting the size cap and generation depth cap.
expr::Individual mutate_subtree(const expr::Individual& ind, std::mt19937_64& rng,
                                const GpConfig& cfg);

// Library build + per-state ridge fit + scoring for every individual.
// Serial reference and OpenMP paths produce identical results.
void evaluate_population(std::vector<expr::Individual>& individuals, const Dataset& training,
                         const Dataset* validation, const GpConfig& cfg, bool parallel);

// One full generation: evaluate, score, sort, threshold G_b, breed.
Population evolve_generation(Population pop, const Dataset& training,
                             const Dataset* validation, const GpConfig& cfg);

// dimensionless mean RSS, scaled by the squared data magnitude
double scaled_mean_rss(double rss_value, const Dataset& data);

using ProgressCallback = std::function<void(const GenerationStats&)>;

DiscoveredModel run(const GpConfig& cfg, const Dataset& training,
                    const Dataset* validation = nullptr,
                    const ProgressCallback& progress = nullptr,
                    const std::vector<expr::Individual>& seeded_individuals = {},
                    std::vector<expr::ExprTree>* function_memory = nullptr,
                    std::vector<double>* constant_memory = nullptr);

struct RestartOptions {
    int max_restarts = 10;
    double rss_target = 0.01;     // stop once a run reaches this training RSS
    bool carry_memory = true;     // function/constant memories persist across runs
    bool seed_best = true;        // best model so far seeds the next population
    // optional custom stop test; overrides rss_target when set
    std::function<bool(const DiscoveredModel&)> accept;
};

struct RestartResult {
    DiscoveredModel best;
    int restarts_used = 0;        // runs actually executed
    bool accepted = false;        // a run satisfied the stop test
    std::vector<double> run_rss;  // training RSS per run
};

// Repeated seeded runs: run r uses seed cfg.seed + r. Memories persist and
// the incumbent best model is planted into each later initial population.
RestartResult run_restarts(const GpConfig& cfg, const Dataset& training,
                           const Dataset* validation = nullptr,
                           const RestartOptions& opts = {},
                           const ProgressCallback& progress = nullptr);

}  // namespace symident::gp
