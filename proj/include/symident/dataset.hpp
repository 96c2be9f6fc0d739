#pragma once

#include <Eigen/Dense>

namespace symident {

enum class DataRole { Training, Validation };

// Sampled trajectory data: states Z, their time derivatives Zdot and
// optional exogenous inputs U, one row per sample time.
struct Dataset {
    Eigen::VectorXd t;     // sample times, seconds
    Eigen::MatrixXd Z;     // m x n states
    Eigen::MatrixXd Zdot;  // m x n state derivatives
    Eigen::MatrixXd U;     // m x p inputs (0 columns if unused)
    DataRole role = DataRole::Training;

    Eigen::Index rows() const { return Z.rows(); }
    Eigen::Index n_states() const { return Z.cols(); }
    Eigen::Index n_inputs() const { return U.cols(); }

    Dataset rows_subset(const std::vector<Eigen::Index>& idx) const {
        Dataset out;
        out.role = role;
        out.t.resize(static_cast<Eigen::Index>(idx.size()));
        out.Z.resize(static_cast<Eigen::Index>(idx.size()), Z.cols());
        out.Zdot.resize(static_cast<Eigen::Index>(idx.size()), Zdot.cols());
        out.U.resize(static_cast<Eigen::Index>(idx.size()), U.cols());
        for (Eigen::Index i = 0; i < out.t.size(); ++i) {
            out.t(i) = t(idx[static_cast<size_t>(i)]);
            out.Z.row(i) = Z.row(idx[static_cast<size_t>(i)]);
            out.Zdot.row(i) = Zdot.row(idx[static_cast<size_t>(i)]);
            if (U.cols() > 0) out.U.row(i) = U.row(idx[static_cast<size_t>(i)]);
        }
        return out;
    }
};

}  // namespace symident
