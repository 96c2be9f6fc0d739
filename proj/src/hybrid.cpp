#include "symident/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "symident/regress.hpp"

namespace symident::hybrid {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

CoordSpec CoordSpec::time_only() {
    CoordSpec s;
    s.with_time = true;
    s.name = "time";
    return s;
}

CoordSpec CoordSpec::full_state(Eigen::Index n_states) {
    CoordSpec s;
    s.name = "state";
    for (Eigen::Index i = 0; i < n_states; ++i) s.state_columns.push_back(static_cast<int>(i));
    return s;
}

CoordSpec CoordSpec::displacement(Eigen::Index n_states) {
    CoordSpec s;
    s.name = "displacement";
    for (Eigen::Index i = 0; i < n_states / 2; ++i)
        s.state_columns.push_back(static_cast<int>(i));
    if (s.state_columns.empty()) s.state_columns.push_back(0);
    return s;
}

CoordSpec CoordSpec::velocity(Eigen::Index n_states) {
    CoordSpec s;
    s.name = "velocity";
    for (Eigen::Index i = n_states / 2; i < n_states; ++i)
        s.state_columns.push_back(static_cast<int>(i));
    if (s.state_columns.empty()) s.state_columns.push_back(static_cast<int>(n_states - 1));
    return s;
}

CoordSpec CoordSpec::speed(Eigen::Index n_states) {
    CoordSpec s = velocity(n_states);
    s.magnitude = true;
    s.name = "speed";
    return s;
}

Eigen::MatrixXd coords(const Dataset& data, const CoordSpec& spec) {
    Eigen::Index cols = (spec.with_time ? 1 : 0) +
                        static_cast<Eigen::Index>(spec.state_columns.size());
    if (cols == 0) throw std::invalid_argument("coords: empty coordinate spec");
    Eigen::MatrixXd out(data.rows(), cols);
    Eigen::Index c = 0;
    if (spec.with_time) out.col(c++) = data.t;
    for (int sc : spec.state_columns) {
        if (sc < 0 || sc >= data.n_states())
            throw std::invalid_argument("coords: state column out of range");
        out.col(c) = data.Z.col(sc);
        if (spec.magnitude) out.col(c) = out.col(c).cwiseAbs();
        ++c;
    }
    return out;
}

namespace {

std::vector<Eigen::Index> nearest_rows(const Eigen::MatrixXd& pts,
                                       const Eigen::VectorXd& center, int k) {
    std::vector<std::pair<double, Eigen::Index>> dist;
    dist.reserve(static_cast<size_t>(pts.rows()));
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
        dist.emplace_back((pts.row(i).transpose() - center).squaredNorm(), i);
    std::sort(dist.begin(), dist.end());
    std::vector<Eigen::Index> idx;
    Eigen::Index take = std::min<Eigen::Index>(k, pts.rows());
    for (Eigen::Index i = 0; i < take; ++i) idx.push_back(dist[static_cast<size_t>(i)].second);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

std::vector<Cluster> build_clusters(const Dataset& training, const Dataset& validation,
                                    const CoordSpec& spec, int k) {
    if (k < 1 || k > training.rows())
        throw std::invalid_argument("build_clusters: K exceeds training rows");

    Eigen::MatrixXd tc = coords(training, spec);
    Eigen::MatrixXd vc = validation.rows() > 0 ? coords(validation, spec) : Eigen::MatrixXd();

    // one cluster per distinct sample time
    std::vector<double> times(training.t.data(), training.t.data() + training.t.size());
    std::sort(times.begin(), times.end());
    double span = times.back() - times.front();
    double tol = std::max(1e-12, 1e-9 * std::max(1.0, std::abs(span)));
    std::vector<double> unique_times;
    for (double tv : times)
        if (unique_times.empty() || tv - unique_times.back() > tol) unique_times.push_back(tv);

    std::vector<Cluster> clusters;
    clusters.reserve(unique_times.size());
    for (size_t ci = 0; ci < unique_times.size(); ++ci) {
        Cluster cl;
        cl.index = static_cast<int>(ci);
        cl.time = unique_times[ci];
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(tc.cols());
        int count = 0;
        for (Eigen::Index r = 0; r < training.rows(); ++r) {
            if (std::abs(training.t(r) - cl.time) <= tol) {
                centroid += tc.row(r).transpose();
                ++count;
            }
        }
        centroid /= static_cast<double>(count);
        cl.centroid = centroid;
        cl.members = training.rows_subset(nearest_rows(tc, centroid, k));
        cl.members.role = DataRole::Training;
        if (vc.rows() > 0) {
            cl.validation_members = validation.rows_subset(nearest_rows(vc, centroid, k));
            cl.validation_members.role = DataRole::Validation;
        }
        clusters.push_back(std::move(cl));
    }
    return clusters;
}

double submodel_error(const expr::Individual& model, const Dataset& data) {
    if (!model.fitted() || model.terms.empty() || data.rows() == 0) return kInf;
    Eigen::MatrixXd theta;
    try {
        theta = regress::evaluate_terms(model, data);
    } catch (const expr::DomainViolation&) {
        return kInf;
    }
    Eigen::MatrixXd resid = data.Zdot - theta * model.coefficients;
    double denom = static_cast<double>(data.rows() * data.n_states());
    return resid.squaredNorm() / denom;
}

double validate_submodel(const expr::Individual& model, const Dataset& validation) {
    return submodel_error(model, validation);
}

double validate_submodel_kfold(const expr::Individual& model, const Dataset& data,
                               int folds, double reg_lambda) {
    if (folds < 2 || folds > data.rows())
        throw std::invalid_argument("validate_submodel_kfold: bad fold count");
    double total = 0.0;
    for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> train_idx, test_idx;
        for (Eigen::Index r = 0; r < data.rows(); ++r) {
            if (r % folds == f)
                test_idx.push_back(r);
            else
                train_idx.push_back(r);
        }
        Dataset train = data.rows_subset(train_idx);
        Dataset test = data.rows_subset(test_idx);
        expr::Individual refit = model;
        refit.coefficients.resize(0, 0);
        try {
            regress::fit_individual(refit, train, reg_lambda);
            total += submodel_error(refit, test);
        } catch (const regress::EmptyLibrary&) {
            total += kInf;
        }
    }
    return total / static_cast<double>(folds);
}

std::optional<ExistingFit> try_existing(const Cluster& cluster,
                                        const std::vector<expr::Individual>& submodels,
                                        double fit_tol) {
    std::optional<ExistingFit> best;
    for (size_t j = 0; j < submodels.size(); ++j) {
        double e = submodel_error(submodels[j], cluster.members);
        if (cluster.validation_members.rows() > 0)
            e += submodel_error(submodels[j], cluster.validation_members);
        if (!std::isfinite(e)) continue;
        if (!best || e < best->error) best = ExistingFit{static_cast<int>(j), e};
    }
    if (best && best->error <= fit_tol) return best;
    return std::nullopt;
}

std::optional<SwitchPoint> detect_switch_index(const Eigen::VectorXd& residuals,
                                               const Eigen::VectorXd& coordinate,
                                               double switch_gain) {
    Eigen::Index n = residuals.size();
    if (n < 4 || coordinate.size() != n)
        throw std::invalid_argument("detect_switch_index: need >= 4 members");

    std::vector<Eigen::Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return coordinate(a) < coordinate(b); });

    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = residuals(order[static_cast<size_t>(i)]);

    Eigen::VectorXd ps = Eigen::VectorXd::Zero(n + 1);   // prefix sums
    Eigen::VectorXd ps2 = Eigen::VectorXd::Zero(n + 1);  // prefix sums of squares
    for (Eigen::Index i = 0; i < n; ++i) {
        ps(i + 1) = ps(i) + y(i);
        ps2(i + 1) = ps2(i) + y(i) * y(i);
    }
    auto sse = [&](Eigen::Index lo, Eigen::Index hi) {  // [lo, hi)
        double cnt = static_cast<double>(hi - lo);
        double s = ps(hi) - ps(lo);
        return std::max(0.0, ps2(hi) - ps2(lo) - s * s / cnt);
    };

    double no_split = sse(0, n);
    SwitchPoint best;
    best.cost = kInf;
    // pi = first right element, 1-based; left = [1, pi-1], right = [pi, n]
    for (Eigen::Index pi = 2; pi <= n - 1; ++pi) {
        double c = sse(0, pi - 1) + sse(pi - 1, n);
        if (c < best.cost) {
            best.cost = c;
            best.pi = static_cast<int>(pi);
        }
    }
    best.no_split_cost = no_split;
    if (best.cost >= (1.0 - switch_gain) * no_split) return std::nullopt;
    Eigen::Index right0 = best.pi - 1;  // 0-based first right element
    best.boundary = 0.5 * (coordinate(order[static_cast<size_t>(right0 - 1)]) +
                           coordinate(order[static_cast<size_t>(right0)]));
    return best;
}

namespace {

expr::Individual to_individual(const gp::DiscoveredModel& model) {
    expr::Individual ind;
    for (const std::string& s : model.terms) ind.terms.push_back(expr::parse(s));
    ind.coefficients = model.coefficients;
    ind.rss = model.training_rss;
    ind.validation_rss = model.validation_rss;
    return ind;
}

double scale_power(const Dataset& data) {
    if (data.rows() == 0) return 1.0;
    double p = data.Zdot.squaredNorm() / static_cast<double>(data.rows() * data.n_states());
    return std::max(p, 1e-12);
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool same_term_multiset(const expr::Individual& a, const expr::Individual& b) {
    if (a.terms.size() != b.terms.size()) return false;
    std::multiset<std::string> ka, kb;
    for (const auto& t : a.terms) ka.insert(t.canonical_key());
    for (const auto& t : b.terms) kb.insert(t.canonical_key());
    return ka == kb;
}

}  // namespace

HybridModel identify(const Dataset& training, const Dataset& validation,
                     const HybridConfig& cfg) {
    HybridConfig conf = cfg;
    if (conf.coord_specs.empty())
        conf.coord_specs.push_back(CoordSpec::velocity(training.n_states()));
    const CoordSpec& metric = conf.coord_specs.front();

    int k = std::min<int>(conf.knn, static_cast<int>(training.rows()));
    std::vector<Cluster> clusters = build_clusters(training, validation, metric, k);
    const int m = static_cast<int>(clusters.size());

    HybridModel hm;
    hm.sequence.assign(static_cast<size_t>(m), 0);
    std::vector<double> assigned_error(static_cast<size_t>(m), kInf);
    std::vector<double> accepted_errors;
    std::vector<int> home_cluster;  // per submodel, 0-based cluster id

    auto fit_tol_for = [&](const Cluster& cl) {
        double tol = conf.fit_tol_floor * scale_power(cl.members);
        if (!accepted_errors.empty())
            tol = std::max(tol, conf.fit_tol_factor * median_of(accepted_errors));
        return tol;
    };

    auto cluster_error = [&](const expr::Individual& sm, const Cluster& cl) {
        double e = submodel_error(sm, cl.members);
        if (cl.validation_members.rows() > 0) e += submodel_error(sm, cl.validation_members);
        return e;
    };

    auto discover = [&](const Cluster& cl, bool first) {
        gp::GpConfig g = conf.gp;
        g.population_size = first ? conf.first_population : conf.later_population;
        g.first_population_size = -1;
        g.seed = conf.gp.seed + 7919ULL * static_cast<std::uint64_t>(hm.submodels.size()) +
                 static_cast<std::uint64_t>(cl.index);
        if (g.context.n_states == 0)
            g.context = expr::TermContext::standard(training.n_states(), training.n_inputs());
        const Dataset* val =
            cl.validation_members.rows() > 0 ? &cl.validation_members : nullptr;
        gp::DiscoveredModel dm = gp::run(g, cl.members, val, nullptr, hm.submodels,
                                         &hm.feature_set, &hm.constant_memory);
        return to_individual(dm);
    };

    auto accept_new = [&](expr::Individual sm, int cluster_id) {
        hm.submodels.push_back(std::move(sm));
        home_cluster.push_back(cluster_id);
        return static_cast<int>(hm.submodels.size()) - 1;
    };

    // first submodel: probe the leading clusters and anchor at the best fit
    {
        expr::Individual best_model;
        double best_err = kInf;
        int best_cluster = 0;
        int probes = std::min(conf.first_probe, m);
        for (int p = 0; p < probes; ++p) {
            expr::Individual cand = discover(clusters[static_cast<size_t>(p)], true);
            double e = cluster_error(cand, clusters[static_cast<size_t>(p)]);
            if (e < best_err) {
                best_err = e;
                best_model = cand;
                best_cluster = p;
            }
            if (e <= fit_tol_for(clusters[static_cast<size_t>(p)])) break;
        }
        int id = accept_new(std::move(best_model), best_cluster);
        hm.sequence[static_cast<size_t>(best_cluster)] = id + 1;
        assigned_error[static_cast<size_t>(best_cluster)] = best_err;
        accepted_errors.push_back(best_err);
    }

    auto split_cluster = [&](const Cluster& cl, const CoordSpec& spec, Eigen::Index col,
                             double boundary) {
        Eigen::MatrixXd mc = coords(cl.members, spec);
        std::vector<Eigen::Index> lo, hi;
        for (Eigen::Index r = 0; r < cl.members.rows(); ++r)
            (mc(r, col) <= boundary ? lo : hi).push_back(r);
        Cluster a = cl, b = cl;
        a.members = cl.members.rows_subset(lo);
        b.members = cl.members.rows_subset(hi);
        if (cl.validation_members.rows() > 0) {
            Eigen::MatrixXd vcd = coords(cl.validation_members, spec);
            std::vector<Eigen::Index> vlo, vhi;
            for (Eigen::Index r = 0; r < cl.validation_members.rows(); ++r)
                (vcd(r, col) <= boundary ? vlo : vhi).push_back(r);
            a.validation_members = cl.validation_members.rows_subset(vlo);
            b.validation_members = cl.validation_members.rows_subset(vhi);
        }
        return std::make_pair(a, b);
    };

    auto resolve_half = [&](const Cluster& half, double tol) -> std::pair<int, double> {
        if (half.members.rows() == 0) return {-1, kInf};
        if (auto fit = try_existing(half, hm.submodels, tol))
            return {fit->submodel, fit->error};
        if (half.members.rows() >= 4) {
            expr::Individual cand = discover(half, false);
            double e = cluster_error(cand, half);
            if (e <= tol) return {accept_new(std::move(cand), half.index), e};
        }
        // below tolerance nowhere: report the least-bad existing submodel
        std::pair<int, double> best{-1, kInf};
        for (size_t j = 0; j < hm.submodels.size(); ++j) {
            double e = cluster_error(hm.submodels[j], half);
            if (e < best.second) best = {static_cast<int>(j), e};
        }
        return best;
    };

    for (int ci = 0; ci < m; ++ci) {
        Cluster& cl = clusters[static_cast<size_t>(ci)];
        if (hm.sequence[static_cast<size_t>(ci)] != 0) continue;
        double tol = fit_tol_for(cl);

        if (auto fit = try_existing(cl, hm.submodels, tol)) {
            hm.sequence[static_cast<size_t>(ci)] = fit->submodel + 1;
            assigned_error[static_cast<size_t>(ci)] = fit->error;
            accepted_errors.push_back(fit->error);
            continue;
        }

        expr::Individual cand = discover(cl, false);
        double cand_err = cluster_error(cand, cl);
        if (cand_err <= tol) {
            int id = accept_new(std::move(cand), ci);
            hm.sequence[static_cast<size_t>(ci)] = id + 1;
            assigned_error[static_cast<size_t>(ci)] = cand_err;
            accepted_errors.push_back(cand_err);
            continue;
        }

        // mixed-mode suspicion: locate a switching point in the residuals of
        // the best available model for this cluster
        int ref = -1;
        double ref_err = cand_err;
        for (size_t j = 0; j < hm.submodels.size(); ++j) {
            double e = submodel_error(hm.submodels[j], cl.members);
            if (e < ref_err) {
                ref_err = e;
                ref = static_cast<int>(j);
            }
        }
        const expr::Individual& ref_model = ref >= 0 ? hm.submodels[static_cast<size_t>(ref)]
                                                     : cand;
        Eigen::VectorXd resid = Eigen::VectorXd::Constant(cl.members.rows(), kInf);
        try {
            Eigen::MatrixXd theta = regress::evaluate_terms(ref_model, cl.members);
            resid = (cl.members.Zdot - theta * ref_model.coefficients).rowwise().squaredNorm();
        } catch (const expr::DomainViolation&) {
        }

        std::optional<SwitchPoint> best_sw;
        const CoordSpec* best_spec = nullptr;
        Eigen::Index best_col = 0;
        if (resid.allFinite() && cl.members.rows() >= 4) {
            for (const CoordSpec& spec : conf.coord_specs) {
                Eigen::MatrixXd sc = coords(cl.members, spec);
                for (Eigen::Index col = 0; col < sc.cols(); ++col) {
                    auto sw = detect_switch_index(resid, sc.col(col), conf.switch_gain);
                    if (sw && (!best_sw || sw->cost / std::max(sw->no_split_cost, 1e-300) <
                                               best_sw->cost /
                                                   std::max(best_sw->no_split_cost, 1e-300))) {
                        best_sw = sw;
                        best_spec = &spec;
                        best_col = col;
                    }
                }
            }
        }

        if (best_sw) {
            auto [lo, hi] = split_cluster(cl, *best_spec, best_col, best_sw->boundary);
            auto ra = resolve_half(lo, tol);
            auto rb = resolve_half(hi, tol);
            hm.boundaries.push_back({ci + 1, best_spec->name, best_sw->boundary});
            // the cluster's sequence entry follows its majority side
            bool a_major = lo.members.rows() >= hi.members.rows();
            auto major = a_major ? ra : rb;
            auto minor = a_major ? rb : ra;
            int pick = major.first >= 0 ? major.first : minor.first;
            double pick_err = major.first >= 0 ? major.second : minor.second;
            if (pick >= 0) {
                hm.sequence[static_cast<size_t>(ci)] = pick + 1;
                assigned_error[static_cast<size_t>(ci)] = pick_err;
                if (std::isfinite(pick_err) && pick_err <= tol)
                    accepted_errors.push_back(pick_err);
                else
                    hm.unresolved.push_back(ci + 1);
                continue;
            }
        }

        // nothing reached tolerance: keep the least-bad model and flag it
        int pick = ref;
        double pick_err = ref >= 0 ? cluster_error(hm.submodels[static_cast<size_t>(ref)], cl)
                                   : cand_err;
        if (pick < 0) pick = accept_new(std::move(cand), ci);
        hm.sequence[static_cast<size_t>(ci)] = pick + 1;
        assigned_error[static_cast<size_t>(ci)] = pick_err;
        hm.unresolved.push_back(ci + 1);
    }

    // postprocess: re-test every submodel against every cluster, keep the
    // smallest-validation-error assignment with a complexity tie-break
    auto post_error = [&](const expr::Individual& sm, const Cluster& cl) {
        if (cl.validation_members.rows() > 0) {
            double e = submodel_error(sm, cl.validation_members);
            if (std::isfinite(e)) return e;
        }
        return submodel_error(sm, cl.members);
    };
    for (int ci = 0; ci < m; ++ci) {
        const Cluster& cl = clusters[static_cast<size_t>(ci)];
        int best = hm.sequence[static_cast<size_t>(ci)] - 1;
        double best_err = best >= 0 ? post_error(hm.submodels[static_cast<size_t>(best)], cl)
                                    : kInf;
        for (size_t j = 0; j < hm.submodels.size(); ++j) {
            double e = post_error(hm.submodels[j], cl);
            if (e < best_err * (1.0 - 1e-6)) {
                best = static_cast<int>(j);
                best_err = e;
            } else if (best >= 0 && std::abs(e - best_err) <= 1e-6 * std::max(e, best_err)) {
                auto cj = expr::complexity_measures(hm.submodels[j]);
                auto cb = expr::complexity_measures(hm.submodels[static_cast<size_t>(best)]);
                if (cj.mean_ops < cb.mean_ops ||
                    (cj.mean_ops == cb.mean_ops && cj.gamma < cb.gamma)) {
                    best = static_cast<int>(j);
                    best_err = e;
                }
            }
        }
        hm.sequence[static_cast<size_t>(ci)] = best + 1;
        assigned_error[static_cast<size_t>(ci)] = cluster_error(
            hm.submodels[static_cast<size_t>(best)], cl);
    }

    // merge equivalent submodels: identical term multisets or mutual
    // cross-prediction within tolerance on each other's home clusters
    {
        std::vector<int> remap(hm.submodels.size());
        std::iota(remap.begin(), remap.end(), 0);
        for (size_t a = 0; a < hm.submodels.size(); ++a) {
            if (remap[a] != static_cast<int>(a)) continue;
            for (size_t b = a + 1; b < hm.submodels.size(); ++b) {
                if (remap[b] != static_cast<int>(b)) continue;
                const Cluster& ca = clusters[static_cast<size_t>(home_cluster[a])];
                const Cluster& cb = clusters[static_cast<size_t>(home_cluster[b])];
                bool equivalent = same_term_multiset(hm.submodels[a], hm.submodels[b]);
                if (!equivalent) {
                    double tol_a = fit_tol_for(ca);
                    double tol_b = fit_tol_for(cb);
                    equivalent = cluster_error(hm.submodels[b], ca) <= tol_a &&
                                 cluster_error(hm.submodels[a], cb) <= tol_b;
                }
                if (equivalent) {
                    auto xa = expr::complexity_measures(hm.submodels[a]);
                    auto xb = expr::complexity_measures(hm.submodels[b]);
                    if (xb.mean_ops < xa.mean_ops) {
                        remap[a] = static_cast<int>(b);
                        break;
                    }
                    remap[b] = static_cast<int>(a);
                }
            }
        }
        for (int& s : hm.sequence) s = remap[static_cast<size_t>(s - 1)] + 1;
    }

    // drop unreferenced submodels and renumber the sequence
    {
        std::vector<int> used(hm.submodels.size(), 0);
        for (int s : hm.sequence) used[static_cast<size_t>(s - 1)] = 1;
        std::vector<int> newid(hm.submodels.size(), -1);
        std::vector<expr::Individual> kept;
        for (size_t j = 0; j < hm.submodels.size(); ++j) {
            if (used[j]) {
                newid[j] = static_cast<int>(kept.size());
                kept.push_back(hm.submodels[j]);
            }
        }
        hm.submodels = std::move(kept);
        for (int& s : hm.sequence) s = newid[static_cast<size_t>(s - 1)] + 1;
    }

    // per-cluster report in the sort coordinate
    for (int ci = 0; ci < m; ++ci) {
        const Cluster& cl = clusters[static_cast<size_t>(ci)];
        const expr::Individual& sm =
            hm.submodels[static_cast<size_t>(hm.sequence[static_cast<size_t>(ci)] - 1)];
        expr::Complexity cx = expr::complexity_measures(sm);
        Eigen::MatrixXd sc = coords(cl.members, metric);
        ClusterReport row;
        row.cluster = ci + 1;
        row.submodel = hm.sequence[static_cast<size_t>(ci)];
        row.error = assigned_error[static_cast<size_t>(ci)];
        row.terms = cx.gamma;
        row.complexity = cx.mean_ops;
        row.coord_min = sc.col(0).minCoeff();
        row.coord_max = sc.col(0).maxCoeff();
        hm.report.push_back(row);
    }
    return hm;
}

}  // namespace symident::hybrid
