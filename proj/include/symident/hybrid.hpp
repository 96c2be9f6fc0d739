#pragma once

#include <optional>
#include <string>
#include <vector>

#include "symident/dataset.hpp"
#include "symident/expr.hpp"
#include "symident/gp.hpp"

namespace symident::hybrid {

// Coordinate subset the clustering metric lives in: optional time plus a
// selection of state columns. Convention for mechanical systems: the first
// half of the state vector holds displacements, the second half velocities.
struct CoordSpec {
    bool with_time = false;
    std::vector<int> state_columns;  // 0-based column indices into Z
    bool magnitude = false;          // use |z| for the state columns
    std::string name;

    static CoordSpec time_only();
    static CoordSpec full_state(Eigen::Index n_states);
    static CoordSpec displacement(Eigen::Index n_states);
    static CoordSpec velocity(Eigen::Index n_states);
    // |velocity|: the right metric when the dynamics are odd in the velocity
    // (e.g. friction), so that mirror-image regimes share one cluster
    static CoordSpec speed(Eigen::Index n_states);
};

// Rows of `data` projected onto the coordinate subset (one row per sample).
Eigen::MatrixXd coords(const Dataset& data, const CoordSpec& spec);

struct Cluster {
    int index = 0;                 // 0-based cluster id (one per time point)
    double time = 0.0;             // the time point the cluster is anchored at
    Eigen::VectorXd centroid;      // in coord-spec space
    Dataset members;               // K nearest training rows to the centroid
    Dataset validation_members;    // nearest validation rows (may be empty)
};

std::vector<Cluster> build_clusters(const Dataset& training, const Dataset& validation,
                                    const CoordSpec& spec, int k);

// Mean squared residual of a fitted model on a dataset, RSS/(rows*states);
// +inf when a term is undefined on the data.
double submodel_error(const expr::Individual& model, const Dataset& data);

// Mean squared residual on held-out data.
double validate_submodel(const expr::Individual& model, const Dataset& validation);

// K-fold alternative when no validation set exists: coefficients are refit
// on each train fold (term structure fixed) and scored on the held-out fold.
double validate_submodel_kfold(const expr::Individual& model, const Dataset& data,
                               int folds, double reg_lambda = -1.0);

struct ExistingFit {
    int submodel = -1;   // 0-based index into the submodel list
    double error = 0.0;  // e_T + e_V
};

// Best already-discovered submodel for the cluster, or nullopt when none
// reaches fit_tol.
std::optional<ExistingFit> try_existing(const Cluster& cluster,
                                        const std::vector<expr::Individual>& submodels,
                                        double fit_tol);

struct SwitchPoint {
    int pi = 0;              // first index of the right segment, 1-based
    double boundary = 0.0;   // sort-coordinate value at the split
    double cost = 0.0;       // two-segment residual cost
    double no_split_cost = 0.0;
};

// Two-segment split of residuals sorted by a scalar coordinate; nullopt
// when no split reduces the cost below (1 - switch_gain) * no-split cost.
std::optional<SwitchPoint> detect_switch_index(const Eigen::VectorXd& residuals,
                                               const Eigen::VectorXd& coordinate,
                                               double switch_gain);

struct SwitchBoundary {
    int cluster = 0;         // 1-based cluster id the switch was found in
    std::string coordinate;  // coord-spec name
    double value = 0.0;
};

struct ClusterReport {
    int cluster = 0;    // 1-based
    int submodel = 0;   // 1-based
    double error = 0.0; // e_T + e_V of the assigned submodel
    int terms = 0;
    double complexity = 0.0;  // mean operator count of the assigned submodel
    double coord_min = 0.0;   // member range in the sort coordinate
    double coord_max = 0.0;
};

struct HybridModel {
    std::vector<expr::Individual> submodels;
    std::vector<int> sequence;  // per-cluster submodel id, 1-based
    std::vector<SwitchBoundary> boundaries;
    std::vector<expr::ExprTree> feature_set;
    std::vector<double> constant_memory;
    std::vector<int> unresolved;  // 1-based ids of clusters above tolerance
    std::vector<ClusterReport> report;
};

struct HybridConfig {
    gp::GpConfig gp;
    int knn = 100;                  // cluster size K
    int first_probe = 3;            // clusters probed for the event-free start
    double fit_tol_factor = 10.0;   // gate vs median accepted error
    double fit_tol_floor = 1e-3;    // scaled mean-RSS floor of the gate
    double switch_gain = 0.5;
    int first_population = 800;     // first discovery run
    int later_population = 500;     // subsequent discovery runs
    std::vector<CoordSpec> coord_specs;  // [0] is the clustering/sort metric
};

// Full segmentation-and-identification pass over per-time-point clusters.
HybridModel identify(const Dataset& training, const Dataset& validation,
                     const HybridConfig& cfg);

}  // namespace symident::hybrid
