#include "symident/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace symident::gp {

using expr::ExprTree;
using expr::Individual;
using expr::Node;
using expr::NodePtr;

namespace {

// splitmix64 finalizer, used to derive independent deterministic streams
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::mt19937_64 derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return std::mt19937_64(mix64(mix64(seed ^ mix64(a)) ^ mix64(b ^ 0x5bf03d9ull)));
}

// --- preorder node addressing on immutable trees ---

NodePtr get_node(const NodePtr& root, int target, int& counter) {
    if (counter == target) return root;
    ++counter;
    for (const NodePtr* c : {&root->a, &root->b}) {
        if (!*c) continue;
        NodePtr found = get_node(*c, target, counter);
        if (found) return found;
    }
    return nullptr;
}

NodePtr node_at(const NodePtr& root, int index) {
    int counter = 0;
    NodePtr n = get_node(root, index, counter);
    if (!n) throw std::out_of_range("node_at: index past tree size");
    return n;
}

NodePtr replace_impl(const NodePtr& root, int target, const NodePtr& repl, int& counter) {
    if (counter == target) {
        ++counter;
        return repl;
    }
    ++counter;
    NodePtr a = root->a;
    NodePtr b = root->b;
    if (a) a = replace_impl(a, target, repl, counter);
    if (b) b = replace_impl(b, target, repl, counter);
    if (a == root->a && b == root->b) return root;
    return std::make_shared<Node>(Node{root->op, root->value, root->index, a, b});
}

NodePtr replace_node(const NodePtr& root, int index, const NodePtr& repl) {
    int counter = 0;
    return replace_impl(root, index, repl, counter);
}

int subtree_size(const NodePtr& n) {
    int s = 1;
    if (n->a) s += subtree_size(n->a);
    if (n->b) s += subtree_size(n->b);
    return s;
}

void collect_constant_indices(const NodePtr& n, int& counter, std::vector<int>& out) {
    if (n->op == expr::Op::Const) out.push_back(counter);
    ++counter;
    if (n->a) collect_constant_indices(n->a, counter, out);
    if (n->b) collect_constant_indices(n->b, counter, out);
}

std::vector<int> constant_indices(const ExprTree& tree) {
    std::vector<int> out;
    int counter = 0;
    collect_constant_indices(tree.root(), counter, out);
    return out;
}

// small probe subset of the data; keeps per-breed editing cheap while the
// full-data domain rules are enforced again in build_library
Dataset probe_subset(const Dataset& data, Eigen::Index max_rows = 16) {
    if (data.rows() <= max_rows) return data;
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < max_rows; ++i)
        idx.push_back(i * (data.rows() - 1) / (max_rows - 1));
    return data.rows_subset(idx);
}

// structural edit of every term; drops domain-violating terms, dedupes,
// replaces a fully emptied individual with a single fresh random term
void post_edit(Individual& ind, const Dataset& probe, std::mt19937_64& rng,
               const GpConfig& cfg) {
    std::vector<ExprTree> kept;
    for (const ExprTree& t : ind.terms) {
        auto edited = expr::edit(t, probe);
        if (edited && edited->size() <= cfg.crossover_size_cap) kept.push_back(*edited);
    }
    ind.terms = std::move(kept);
    ind.coefficients.resize(0, 0);
    ind.rss = std::numeric_limits<double>::infinity();
    expr::dedupe_terms(ind);
    if (ind.term_count() > cfg.max_terms)
        ind.terms.resize(static_cast<size_t>(cfg.max_terms), ind.terms.front());
    while (ind.terms.empty()) {
        auto edited = expr::edit(expr::random_tree(rng, cfg.initial_tree_depth, cfg.context),
                                 probe);
        if (edited) ind.terms.push_back(*edited);
    }
}

double scoring_rss(const Individual& ind, const GpConfig& cfg, bool has_validation) {
    if (cfg.fitness_on_validation && has_validation) return ind.validation_rss;
    return ind.rss;
}

fitness::Score make_score(const Individual& ind, double rss_value, const GpConfig& cfg,
                          const fitness::FitnessState& st, int n_obs) {
    fitness::Score s;
    if (!std::isfinite(rss_value) || ind.terms.empty()) {
        s.value = std::numeric_limits<double>::max();  // worst-fitness sentinel
        s.rss = rss_value;
        return s;
    }
    expr::Complexity cx = expr::complexity_measures(ind);
    switch (cfg.measure) {
        case fitness::Measure::Adaptive:
            s = fitness::adaptive_fitness(rss_value, cx, st);
            break;
        case fitness::Measure::Aic:
            s.value = fitness::aic(rss_value, n_obs, cx.gamma);
            break;
        case fitness::Measure::Bic:
            s.value = fitness::bic(rss_value, n_obs, cx.gamma);
            break;
    }
    s.rss = rss_value;
    s.gamma = cx.gamma;
    s.opcount_mean = cx.mean_ops;
    s.measure = cfg.measure;
    return s;
}

}  // namespace

Individual random_individual(std::mt19937_64& rng, const GpConfig& cfg, const Dataset& data) {
    Individual ind;
    std::uniform_int_distribution<int> n_terms(1, cfg.max_terms);
    int count = n_terms(rng);
    Dataset probe = probe_subset(data);
    for (int i = 0; i < count; ++i) {
        auto edited = expr::edit(expr::random_tree(rng, cfg.initial_tree_depth, cfg.context),
                                 probe);
        if (edited) ind.terms.push_back(*edited);
    }
    expr::dedupe_terms(ind);
    while (ind.terms.empty()) {
        auto edited = expr::edit(expr::random_tree(rng, cfg.initial_tree_depth, cfg.context),
                                 probe);
        if (edited) ind.terms.push_back(*edited);
    }
    return ind;
}

Population init_population(const GpConfig& cfg, const Dataset& data) {
    Population pop;
    pop.state = cfg.fitness_init;
    pop.state.generation = 1;
    const int n = cfg.first_population_size > 0 ? cfg.first_population_size
                                                : cfg.population_size;
    pop.individuals.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::mt19937_64 rng = derive_rng(cfg.seed, 0, static_cast<std::uint64_t>(i));
        pop.individuals.push_back(random_individual(rng, cfg, data));
    }
    return pop;
}

int tournament_select(const std::vector<int>& pool, const std::vector<fitness::Score>& scores,
                      int k, std::mt19937_64& rng) {
    if (pool.empty()) throw std::invalid_argument("tournament_select: empty pool");
    std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
    int best = pool[pick(rng)];
    for (int i = 1; i < k; ++i) {
        int cand = pool[pick(rng)];
        if (scores[static_cast<size_t>(cand)].value < scores[static_cast<size_t>(best)].value)
            best = cand;
    }
    return best;
}

std::pair<Individual, Individual> crossover(const Individual& pa, const Individual& pb,
                                            std::mt19937_64& rng, const GpConfig& cfg,
                                            const std::vector<ExprTree>& function_memory) {
    if (pa.terms.empty() || pb.terms.empty()) return {pa, pb};
    for (int attempt = 0; attempt < cfg.retry_cap; ++attempt) {
        std::uniform_int_distribution<size_t> pick_a(0, pa.terms.size() - 1);
        std::uniform_int_distribution<size_t> pick_b(0, pb.terms.size() - 1);
        const size_t term_a = pick_a(rng);
        const size_t term_b = pick_b(rng);
        const ExprTree& ta = pa.terms[term_a];
        const ExprTree& tb = pb.terms[term_b];

        std::uniform_int_distribution<int> node_a(0, ta.size() - 1);
        std::uniform_int_distribution<int> node_b(0, tb.size() - 1);
        int ia = node_a(rng);
        int ib = node_b(rng);
        NodePtr sub_a = node_at(ta.root(), ia);
        NodePtr sub_b = node_at(tb.root(), ib);
        // both crossover points must not be terminals simultaneously
        if (expr::is_terminal(sub_a->op) && expr::is_terminal(sub_b->op)) continue;

        ExprTree child_a(replace_node(ta.root(), ia, sub_b));
        ExprTree child_b(replace_node(tb.root(), ib, sub_a));

        auto fix_oversize = [&](ExprTree& t) -> bool {
            if (t.size() <= cfg.crossover_size_cap) return true;
            if (!function_memory.empty()) {
                std::bernoulli_distribution use_memory(0.5);
                if (use_memory(rng)) {
                    std::uniform_int_distribution<size_t> pick(0, function_memory.size() - 1);
                    t = function_memory[pick(rng)];
                    return true;
                }
            }
            return false;
        };
        if (!fix_oversize(child_a) || !fix_oversize(child_b)) continue;  // cancel and redo

        Individual ca = pa;
        Individual cb = pb;
        ca.terms[term_a] = child_a;
        cb.terms[term_b] = child_b;
        ca.coefficients.resize(0, 0);
        cb.coefficients.resize(0, 0);
        ca.rss = cb.rss = std::numeric_limits<double>::infinity();
        return {std::move(ca), std::move(cb)};
    }
    return {pa, pb};  // retries exhausted
}

std::optional<Individual> constant_crossover(const Individual& ind,
                                             const std::vector<Individual>& best_set,
                                             const std::vector<double>& constant_memory,
                                             std::mt19937_64& rng, const GpConfig& cfg) {
    // collect (term, node) addresses of all constants
    std::vector<std::pair<size_t, int>> spots;
    for (size_t ti = 0; ti < ind.terms.size(); ++ti)
        for (int ni : constant_indices(ind.terms[ti])) spots.emplace_back(ti, ni);
    if (spots.empty()) return std::nullopt;

    for (int attempt = 0; attempt < cfg.retry_cap; ++attempt) {
        std::uniform_int_distribution<size_t> pick_spot(0, spots.size() - 1);
        auto [ti, ni] = spots[pick_spot(rng)];
        const ExprTree& term = ind.terms[ti];

        NodePtr replacement;
        const bool have_memory = !constant_memory.empty();
        std::bernoulli_distribution from_memory(have_memory ? 0.5 : 0.0);
        if (from_memory(rng)) {
            std::uniform_int_distribution<size_t> pick(0, constant_memory.size() - 1);
            replacement = expr::make_const(constant_memory[pick(rng)]);
        } else {
            // a candidate term drawn from the best set
            std::vector<const ExprTree*> donors;
            for (const Individual& b : best_set)
                for (const ExprTree& t : b.terms) donors.push_back(&t);
            if (donors.empty()) return std::nullopt;
            std::uniform_int_distribution<size_t> pick(0, donors.size() - 1);
            replacement = donors[pick(rng)]->root();
        }
        ExprTree candidate(replace_node(term.root(), ni, replacement));
        if (candidate.size() > cfg.crossover_size_cap) continue;  // rejected, new draw
        Individual out = ind;
        out.terms[ti] = candidate;
        out.coefficients.resize(0, 0);
        out.rss = std::numeric_limits<double>::infinity();
        return out;
    }
    return std::nullopt;
}

double mutate_constant(double c_old, int generation, std::mt19937_64& rng, double theta) {
    std::uniform_real_distribution<double> kappa(0.0, theta);
    return c_old + (2.0 * kappa(rng) - theta) / (theta + 2.0 * generation);
}

Individual mutate_constants(const Individual& ind, int generation, std::mt19937_64& rng,
                            const GpConfig& cfg) {
    std::vector<std::pair<size_t, int>> spots;
    for (size_t ti = 0; ti < ind.terms.size(); ++ti)
        for (int ni : constant_indices(ind.terms[ti])) spots.emplace_back(ti, ni);
    if (spots.empty()) return ind;
    std::uniform_int_distribution<size_t> pick(0, spots.size() - 1);
    auto [ti, ni] = spots[pick(rng)];
    NodePtr old = node_at(ind.terms[ti].root(), ni);
    double c_new = mutate_constant(old->value, generation, rng, cfg.mutation_theta);
    Individual out = ind;
    out.terms[ti] = ExprTree(replace_node(ind.terms[ti].root(), ni, expr::make_const(c_new)));
    out.coefficients.resize(0, 0);
    out.rss = std::numeric_limits<double>::infinity();
    return out;
}

namespace {

// combine the picked node with a random terminal under a random binary op,
// keeping the subtree intact (point insertion: x -> x+c, x*c, x/z1, ...)
NodePtr wrap_node(const NodePtr& old, std::mt19937_64& rng, const expr::TermContext& ctx) {
    std::vector<expr::Op> binaries;
    for (expr::Op op : ctx.functions)
        if (expr::is_binary(op)) binaries.push_back(op);
    if (binaries.empty()) return old;
    std::uniform_int_distribution<size_t> pick(0, binaries.size() - 1);
    expr::Op op = binaries[pick(rng)];
    NodePtr mate = expr::random_tree(rng, 1, ctx).root();
    std::bernoulli_distribution left(0.5);
    return left(rng) ? expr::make_binary(op, mate, old) : expr::make_binary(op, old, mate);
}

}  // namespace

Individual mutate_subtree(const Individual& ind, std::mt19937_64& rng, const GpConfig& cfg) {
    if (ind.terms.empty()) return ind;
    std::uniform_int_distribution<size_t> pick_term(0, ind.terms.size() - 1);
    size_t ti = pick_term(rng);
    const ExprTree& term = ind.terms[ti];
    std::uniform_int_distribution<int> pick_node(0, term.size() - 1);
    int ni = pick_node(rng);
    NodePtr old = node_at(term.root(), ni);

    // insertion variant: graft a function above the node so tuned content
    // (for example a fitted frequency constant) survives the mutation
    std::bernoulli_distribution insert(1.0 / 3.0);
    if (insert(rng) && term.size() + 2 <= cfg.crossover_size_cap) {
        NodePtr wrapped = wrap_node(old, rng, cfg.context);
        if (wrapped != old) {
            Individual out = ind;
            out.terms[ti] = ExprTree(replace_node(term.root(), ni, wrapped));
            out.coefficients.resize(0, 0);
            out.rss = std::numeric_limits<double>::infinity();
            return out;
        }
    }

    int budget = cfg.crossover_size_cap - (term.size() - subtree_size(old));
    if (budget < 1) {
        ni = 0;  // replace the whole term
        budget = cfg.crossover_size_cap;
    }
    expr::TermContext ctx = cfg.context;
    ctx.max_size = budget;
    ExprTree fresh = expr::random_tree(rng, cfg.initial_tree_depth, ctx);
    Individual out = ind;
    out.terms[ti] = ExprTree(replace_node(term.root(), ni, fresh.root()));
    out.coefficients.resize(0, 0);
    out.rss = std::numeric_limits<double>::infinity();
    return out;
}

void evaluate_population(std::vector<Individual>& individuals, const Dataset& training,
                         const Dataset* validation, const GpConfig& cfg, bool parallel) {
    const auto n = static_cast<std::int64_t>(individuals.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
    for (std::int64_t i = 0; i < n; ++i) {
        Individual& ind = individuals[static_cast<size_t>(i)];
        if (ind.fitted()) continue;  // elites keep their fit
        expr::dedupe_terms(ind);
        try {
            regress::fit_individual(ind, training, cfg.ridge_lambda);
        } catch (const regress::EmptyLibrary&) {
            ind.rss = std::numeric_limits<double>::infinity();
            continue;
        }
        if (validation) {
            try {
                Eigen::MatrixXd theta_v = regress::evaluate_terms(ind, *validation);
                ind.validation_rss = regress::rss(theta_v, ind.coefficients, validation->Zdot);
            } catch (const expr::DomainViolation&) {
                ind.validation_rss = std::numeric_limits<double>::infinity();
            }
        }
    }
    (void)parallel;
}

double scaled_mean_rss(double rss_value, const Dataset& data) {
    const double n_obs = static_cast<double>(data.rows() * data.Zdot.cols());
    double scale = data.Zdot.cwiseAbs().mean();
    scale = std::max(scale, 1e-12);
    return (rss_value / n_obs) / (scale * scale);
}

Population evolve_generation(Population pop, const Dataset& training,
                             const Dataset* validation, const GpConfig& cfg) {
    const bool has_val = validation != nullptr;
    const int n_obs = static_cast<int>(training.rows() * training.Zdot.cols());

    evaluate_population(pop.individuals, training, validation, cfg, cfg.parallel);

    // score + sort
    const size_t n = pop.individuals.size();
    pop.scores.resize(n);
    for (size_t i = 0; i < n; ++i)
        pop.scores[i] = make_score(pop.individuals[i], scoring_rss(pop.individuals[i], cfg, has_val),
                                   cfg, pop.state, n_obs);
    pop.order.resize(n);
    std::iota(pop.order.begin(), pop.order.end(), 0);
    std::stable_sort(pop.order.begin(), pop.order.end(), [&](int a, int b) {
        const auto& sa = pop.scores[static_cast<size_t>(a)];
        const auto& sb = pop.scores[static_cast<size_t>(b)];
        if (sa.value != sb.value) return sa.value < sb.value;
        if (sa.gamma != sb.gamma) return sa.gamma < sb.gamma;
        return sa.rss < sb.rss;
    });

    const int pop_target = cfg.population_size;
    const int n_best = std::max(1, static_cast<int>(std::lround(
                                       pop_target * cfg.epsilon_best_pct / 100.0)));

    // G_b: thresholded copies of the top individuals
    pop.best_set.clear();
    for (int i = 0; i < n_best && i < static_cast<int>(n); ++i)
        pop.best_set.push_back(pop.individuals[static_cast<size_t>(pop.order[static_cast<size_t>(i)])]);
    {
        const auto nb = static_cast<std::int64_t>(pop.best_set.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (cfg.parallel)
#endif
        for (std::int64_t i = 0; i < nb; ++i) {
            Individual& b = pop.best_set[static_cast<size_t>(i)];
            if (!b.fitted()) continue;
            regress::ThresholdOptions topt = cfg.threshold;
            if (topt.reg_lambda < 0.0) topt.reg_lambda = cfg.ridge_lambda;
            try {
                regress::hard_threshold(b, training, topt);
                if (has_val) {
                    Eigen::MatrixXd theta_v = regress::evaluate_terms(b, *validation);
                    b.validation_rss = regress::rss(theta_v, b.coefficients, validation->Zdot);
                }
            } catch (const regress::EmptyLibrary&) {
                b.rss = std::numeric_limits<double>::infinity();
            } catch (const expr::DomainViolation&) {
                b.validation_rss = std::numeric_limits<double>::infinity();
            }
        }
    }
    std::vector<fitness::Score> best_scores(pop.best_set.size());
    for (size_t i = 0; i < pop.best_set.size(); ++i)
        best_scores[i] = make_score(pop.best_set[i], scoring_rss(pop.best_set[i], cfg, has_val),
                                    cfg, pop.state, n_obs);
    {
        std::vector<int> idx(pop.best_set.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
            return best_scores[static_cast<size_t>(a)].value <
                   best_scores[static_cast<size_t>(b)].value;
        });
        std::vector<Individual> sorted;
        std::vector<fitness::Score> sorted_scores;
        for (int i : idx) {
            sorted.push_back(std::move(pop.best_set[static_cast<size_t>(i)]));
            sorted_scores.push_back(best_scores[static_cast<size_t>(i)]);
        }
        pop.best_set = std::move(sorted);
        best_scores = std::move(sorted_scores);
    }

    // champion: lowest training RSS ever seen
    for (const Individual& b : pop.best_set)
        if (b.fitted() && b.rss < pop.champion.rss) pop.champion = b;
    for (int i = 0; i < std::min<int>(n_best, static_cast<int>(n)); ++i) {
        const Individual& c = pop.individuals[static_cast<size_t>(pop.order[static_cast<size_t>(i)])];
        if (c.fitted() && c.rss < pop.champion.rss) pop.champion = c;
    }

    // fitness-state update for the next generation
    double best_rss_now = pop.best_set.empty() ? std::numeric_limits<double>::infinity()
                                               : best_scores[0].rss;
    double prev_rss = pop.prev_best_rss;
    fitness::FitnessState next_state =
        fitness::update_alpha(pop.state, scaled_mean_rss(best_rss_now, training), best_rss_now,
                              prev_rss);
    double max_rss = 0.0, max_ops = 0.0;
    int max_gamma = 0;
    for (const auto& s : best_scores) {
        if (!std::isfinite(s.rss)) continue;
        max_rss = std::max(max_rss, s.rss);
        max_gamma = std::max(max_gamma, s.gamma);
        max_ops = std::max(max_ops, s.opcount_mean);
    }
    next_state.prev_best_max_rss = max_rss > 0.0 ? max_rss : 1.0;
    next_state.prev_best_max_gamma = max_gamma > 0 ? max_gamma : 1;
    next_state.prev_best_max_opcount = max_ops;

    // --- breeding ---
    std::mt19937_64 rng = derive_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(pop.generation));
    Dataset probe = probe_subset(training);

    std::vector<Individual> next;
    next.reserve(static_cast<size_t>(pop_target));
    for (const Individual& b : pop.best_set) next.push_back(b);  // elitism
    if (pop.champion.fitted()) next.push_back(pop.champion);

    std::vector<int> all_pool(pop.order.begin(), pop.order.end());
    std::vector<int> repro_pool(pop.order.begin() + std::min<size_t>(pop.order.size(),
                                                                    static_cast<size_t>(n_best)),
                                pop.order.end());
    if (repro_pool.empty()) repro_pool = all_pool;
    std::vector<int> best_pool(pop.best_set.size());
    std::iota(best_pool.begin(), best_pool.end(), 0);

    const int n_repro = std::max(0, static_cast<int>(std::lround(
                                        pop_target * cfg.epsilon_repro_pct / 100.0)));
    int remaining = pop_target - static_cast<int>(next.size()) - n_repro;
    if (remaining < 0) remaining = 0;
    const int n_cross_pairs = static_cast<int>(std::lround(remaining * cfg.frac_crossover / 2.0));
    const int n_mut = static_cast<int>(std::lround(remaining * cfg.frac_mutation));
    const int n_const = static_cast<int>(std::lround(remaining * cfg.frac_constant));

    auto select_parent = [&](const std::vector<int>& pool) -> const Individual& {
        int idx = tournament_select(pool, pop.scores, cfg.tournament_size, rng);
        return pop.individuals[static_cast<size_t>(idx)];
    };
    auto select_best = [&]() -> const Individual& {
        int idx = tournament_select(best_pool, best_scores, cfg.tournament_size, rng);
        return pop.best_set[static_cast<size_t>(idx)];
    };
    auto push = [&](Individual ind) {
        post_edit(ind, probe, rng, cfg);
        next.push_back(std::move(ind));
    };

    // reproduction: tournament over the population excluding G_b, unchanged
    for (int i = 0; i < n_repro && static_cast<int>(next.size()) < pop_target; ++i)
        next.push_back(pop.individuals[static_cast<size_t>(
            tournament_select(repro_pool, pop.scores, cfg.tournament_size, rng))]);

    for (int i = 0; i < n_cross_pairs && static_cast<int>(next.size()) < pop_target; ++i) {
        auto [ca, cb] = crossover(select_parent(all_pool), select_parent(all_pool), rng, cfg,
                                  pop.function_memory);
        push(std::move(ca));
        if (static_cast<int>(next.size()) < pop_target) push(std::move(cb));
    }
    for (int i = 0; i < n_mut && static_cast<int>(next.size()) < pop_target; ++i)
        push(mutate_subtree(select_best(), rng, cfg));
    for (int i = 0; i < n_const && static_cast<int>(next.size()) < pop_target; ++i) {
        const Individual& parent = select_best();
        std::bernoulli_distribution use_ccx(0.5);
        if (use_ccx(rng)) {
            auto out = constant_crossover(parent, pop.best_set, pop.constant_memory, rng, cfg);
            push(out ? std::move(*out)
                     : mutate_constants(parent, pop.generation, rng, cfg));
        } else {
            push(mutate_constants(parent, pop.generation, rng, cfg));
        }
    }
    // fill any rounding gap with reproduction
    while (static_cast<int>(next.size()) < pop_target)
        next.push_back(pop.individuals[static_cast<size_t>(
            tournament_select(repro_pool, pop.scores, cfg.tournament_size, rng))]);
    next.resize(static_cast<size_t>(pop_target));

    pop.prev_best_rss = best_rss_now;
    pop.state = next_state;
    pop.individuals = std::move(next);
    pop.generation += 1;
    return pop;
}

DiscoveredModel run(const GpConfig& cfg, const Dataset& training, const Dataset* validation,
                    const ProgressCallback& progress,
                    const std::vector<Individual>& seeded_individuals,
                    std::vector<ExprTree>* function_memory,
                    std::vector<double>* constant_memory) {
    Population pop = init_population(cfg, training);
    if (function_memory) pop.function_memory = *function_memory;
    if (constant_memory) pop.constant_memory = *constant_memory;
    for (size_t i = 0; i < seeded_individuals.size() && i < pop.individuals.size(); ++i)
        pop.individuals[i] = seeded_individuals[i];

    DiscoveredModel model;
    std::vector<double> fitness_history;
    for (int gen = 1; gen <= cfg.max_generations; ++gen) {
        pop = evolve_generation(std::move(pop), training, validation, cfg);

        GenerationStats st;
        st.generation = gen;
        if (!pop.best_set.empty() && pop.best_set[0].fitted()) {
            const Individual& b = pop.best_set[0];
            expr::Complexity cx = expr::complexity_measures(b);
            st.best_rss = b.rss;
            st.best_gamma = cx.gamma;
            st.best_mean_ops = cx.mean_ops;
        }
        double sum_rss = 0.0;
        long cnt = 0, gsum = 0;
        for (const Individual& ind : pop.individuals) {
            if (!std::isfinite(ind.rss)) continue;
            sum_rss += ind.rss;
            gsum += ind.term_count();
            ++cnt;
        }
        st.mean_rss = cnt ? sum_rss / cnt : 0.0;
        st.mean_gamma = cnt ? static_cast<int>(gsum / cnt) : 0;
        st.best_fitness = pop.prev_best_rss;
        model.trace.push_back(st);
        if (progress) progress(st);

        fitness_history.push_back(pop.prev_best_rss);
        model.generations = gen;

        if (gen >= cfg.min_generations &&
            scaled_mean_rss(pop.prev_best_rss, training) <= cfg.stop_scaled_rss &&
            static_cast<int>(fitness_history.size()) > cfg.conv_window) {
            double now = fitness_history.back();
            double before = fitness_history[fitness_history.size() - 1 -
                                            static_cast<size_t>(cfg.conv_window)];
            if (std::abs(before - now) <= cfg.conv_tol * std::max(1e-300, std::abs(before)))
                break;
        }
    }

    // final model: head of the last best set
    const Individual* best = nullptr;
    for (const Individual& b : pop.best_set)
        if (b.fitted()) {
            best = &b;
            break;
        }
    if (!best && pop.champion.fitted()) best = &pop.champion;
    if (!best) throw std::runtime_error("gp::run: no fitted individual survived");

    for (const ExprTree& t : best->terms) model.terms.push_back(t.str());
    model.coefficients = best->coefficients;
    model.training_rss = best->rss;
    expr::Complexity cx = expr::complexity_measures(*best);
    model.gamma = cx.gamma;
    model.mean_ops = cx.mean_ops;
    if (validation) {
        try {
            Eigen::MatrixXd theta_v = regress::evaluate_terms(*best, *validation);
            model.validation_rss = regress::rss(theta_v, best->coefficients, validation->Zdot);
        } catch (const expr::DomainViolation&) {
            model.validation_rss = std::numeric_limits<double>::quiet_NaN();
        }
    }

    if (function_memory) {
        // append novel best-model terms for reuse by later runs
        std::vector<std::string> keys;
        for (const ExprTree& t : *function_memory) keys.push_back(t.canonical_key());
        for (const ExprTree& t : best->terms) {
            std::string k = t.canonical_key();
            if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
                function_memory->push_back(t);
                keys.push_back(std::move(k));
            }
        }
        pop.function_memory = *function_memory;
    }
    if (constant_memory) {
        for (const ExprTree& t : best->terms)
            for (int ni : constant_indices(t)) {
                double v = node_at(t.root(), ni)->value;
                if (std::find_if(constant_memory->begin(), constant_memory->end(),
                                 [&](double c) { return std::abs(c - v) < 1e-12; }) ==
                    constant_memory->end())
                    constant_memory->push_back(v);
            }
    }
    return model;
}

RestartResult run_restarts(const GpConfig& cfg, const Dataset& training,
                           const Dataset* validation, const RestartOptions& opts,
                           const ProgressCallback& progress) {
    RestartResult result;
    result.best.training_rss = std::numeric_limits<double>::infinity();
    std::vector<ExprTree> function_memory;
    std::vector<double> constant_memory;
    auto accepted = [&](const DiscoveredModel& m) {
        if (opts.accept) return opts.accept(m);
        return m.training_rss <= opts.rss_target;
    };
    for (int r = 0; r < opts.max_restarts; ++r) {
        GpConfig run_cfg = cfg;
        run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(r);
        std::vector<Individual> seeds;
        if (opts.seed_best && !result.best.terms.empty()) {
            Individual inc;
            for (const std::string& s : result.best.terms) inc.terms.push_back(expr::parse(s));
            seeds.push_back(std::move(inc));
        }
        DiscoveredModel m = run(run_cfg, training, validation, progress, seeds,
                                opts.carry_memory ? &function_memory : nullptr,
                                opts.carry_memory ? &constant_memory : nullptr);
        result.run_rss.push_back(m.training_rss);
        result.restarts_used = r + 1;
        const bool better = m.training_rss < result.best.training_rss;
        const bool done = accepted(m);
        if (better) result.best = std::move(m);
        if (done) {
            result.accepted = true;
            break;
        }
    }
    return result;
}

}  // namespace symident::gp
