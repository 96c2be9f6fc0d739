#include "symident/sim.hpp"

#include <cmath>
#include <stdexcept>

namespace symident::sim {

Dataset rk4_integrate(const Rhs& rhs, const Eigen::VectorXd& z0, double t0, double t1,
                      double dt) {
    if (dt <= 0.0 || t1 <= t0) throw std::invalid_argument("rk4_integrate: bad time span");
    const auto steps = static_cast<Eigen::Index>(std::llround((t1 - t0) / dt));
    const Eigen::Index n = z0.size();

    Dataset out;
    out.t.resize(steps + 1);
    out.Z.resize(steps + 1, n);
    out.Zdot.resize(steps + 1, n);
    out.U.resize(steps + 1, 0);

    Eigen::VectorXd z = z0;
    for (Eigen::Index i = 0; i <= steps; ++i) {
        double t = t0 + static_cast<double>(i) * dt;
        out.t(i) = t;
        out.Z.row(i) = z.transpose();
        out.Zdot.row(i) = rhs(t, z).transpose();
        if (!out.Z.row(i).allFinite() || !out.Zdot.row(i).allFinite())
            throw std::runtime_error("rk4_integrate: trajectory diverged");
        if (i == steps) break;
        Eigen::VectorXd k1 = rhs(t, z);
        Eigen::VectorXd k2 = rhs(t + 0.5 * dt, z + 0.5 * dt * k1);
        Eigen::VectorXd k3 = rhs(t + 0.5 * dt, z + 0.5 * dt * k2);
        Eigen::VectorXd k4 = rhs(t + dt, z + dt * k3);
        z += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return out;
}

Eigen::VectorXd two_dof_rhs(const Eigen::VectorXd& z, double t, const TwoDofParams& p) {
    Eigen::VectorXd dz(4);
    dz(0) = z(2);
    dz(1) = z(3);
    dz(2) = (p.f1_amp / p.m1) * std::sin(p.f1_freq * t + p.f1_phase) -
            ((p.k1 + p.k2) / p.m1) * z(0) + (p.k2 / p.m1) * z(1);
    dz(3) = (p.f2_amp / p.m2) * std::sin(p.f2_freq * t + p.f2_phase) +
            (p.k2 / p.m2) * z(0) - ((p.k2 + p.k3) / p.m2) * z(1);
    return dz;
}

double crank_slider_position(double t, const CrankSliderParams& p) {
    if (p.l2 <= p.l1) throw std::invalid_argument("crank_slider: requires l2 > l1");
    double s = std::sin(p.omega * t);
    return p.l1 * std::cos(p.omega * t) + std::sqrt(p.l2 * p.l2 - p.l1 * p.l1 * s * s);
}

double crank_slider_velocity(double t, const CrankSliderParams& p) {
    if (p.l2 <= p.l1) throw std::invalid_argument("crank_slider: requires l2 > l1");
    double s = std::sin(p.omega * t);
    double c = std::cos(p.omega * t);
    return -p.l1 * p.omega * s -
           p.l1 * p.l1 * p.omega * s * c / std::sqrt(p.l2 * p.l2 - p.l1 * p.l1 * s * s);
}

double friction_mu(double v_rel, const FrictionParams& p) {
    double av = std::abs(v_rel);
    double sgn = v_rel > 0.0 ? 1.0 : (v_rel < 0.0 ? -1.0 : 0.0);
    if (av > p.v0)
        return (p.c_d + (p.c_f - p.c_d) * std::exp(-p.exponent * (av - p.v0))) * sgn;
    double d = av - p.v0;
    return (p.c_f - (p.c_f / (p.v0 * p.v0)) * d * d) * sgn;
}

Eigen::VectorXd sliding_mass_rhs(const Eigen::VectorXd& z, double t, const FrictionParams& p) {
    Eigen::VectorXd dz(2);
    dz(0) = z(1);
    dz(1) = (p.force_amp / p.m) * std::sin(p.force_freq * t) - (p.k / p.m) * z(0) -
            friction_mu(z(1), p) * p.g;
    return dz;
}

Dataset add_noise(const Dataset& data, double snr_db, std::mt19937_64& rng) {
    if (std::isinf(snr_db)) return data;
    Dataset out = data;
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto corrupt = [&](Eigen::MatrixXd& M) {
        for (Eigen::Index c = 0; c < M.cols(); ++c) {
            double power = M.col(c).squaredNorm() / static_cast<double>(M.rows());
            if (power <= 0.0) throw std::runtime_error("add_noise: zero-power column");
            double sigma = std::sqrt(power) * std::pow(10.0, -snr_db / 20.0);
            for (Eigen::Index r = 0; r < M.rows(); ++r) M(r, c) += sigma * gauss(rng);
        }
    };
    corrupt(out.Z);
    corrupt(out.Zdot);
    return out;
}

namespace {

std::vector<Eigen::Index> even_indices(Eigen::Index total, Eigen::Index wanted) {
    wanted = std::min(wanted, total);
    std::vector<Eigen::Index> idx;
    if (wanted <= 1) {
        idx.push_back(0);
        return idx;
    }
    for (Eigen::Index i = 0; i < wanted; ++i)
        idx.push_back(i * (total - 1) / (wanted - 1));
    return idx;
}

Dataset concat(const std::vector<Dataset>& parts) {
    Eigen::Index rows = 0;
    for (const Dataset& d : parts) rows += d.rows();
    Dataset out;
    out.t.resize(rows);
    out.Z.resize(rows, parts.front().Z.cols());
    out.Zdot.resize(rows, parts.front().Zdot.cols());
    out.U.resize(rows, parts.front().U.cols());
    Eigen::Index at = 0;
    for (const Dataset& d : parts) {
        out.t.segment(at, d.rows()) = d.t;
        out.Z.middleRows(at, d.rows()) = d.Z;
        out.Zdot.middleRows(at, d.rows()) = d.Zdot;
        if (out.U.cols() > 0) out.U.middleRows(at, d.rows()) = d.U;
        at += d.rows();
    }
    return out;
}

void attach_two_dof_input(Dataset& d, const TwoDofParams& p) {
    d.U.resize(d.rows(), 1);
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        d.U(i, 0) = p.f2_amp * std::sin(p.f2_freq * d.t(i) + p.f2_phase);
}

Benchmark make_two_dof(const BenchmarkSpec& spec) {
    TwoDofParams p;
    auto rhs = [&p](double t, const Eigen::VectorXd& z) { return two_dof_rhs(z, t, p); };

    std::vector<Eigen::Vector4d> train_ics = {{0.0, 0.0, 0.0, 0.0}, {1.0, -0.2, 0.0, 0.0}};
    std::vector<Dataset> parts;
    const Eigen::Index n_ics = static_cast<Eigen::Index>(train_ics.size());
    Eigen::Index per_ic = std::max<Eigen::Index>(spec.samples / n_ics, 5);
    Eigen::Index remainder = std::max<Eigen::Index>(spec.samples - per_ic * n_ics, 0);
    for (const auto& ic : train_ics) {
        Eigen::Index count = per_ic + (remainder > 0 ? 1 : 0);
        if (remainder > 0) --remainder;
        Dataset full = rk4_integrate(rhs, ic, 0.0, 10.0, spec.dt);
        parts.push_back(full.rows_subset(even_indices(full.rows(), count)));
    }
    Benchmark b;
    b.training = concat(parts);
    b.training.role = DataRole::Training;

    // validation: unseen initial condition and a longer time window
    Dataset vfull = rk4_integrate(rhs, Eigen::Vector4d{0.5, 0.1, 0.0, 0.0}, 0.0, 12.0, spec.dt);
    b.validation = vfull.rows_subset(even_indices(vfull.rows(), std::max<Eigen::Index>(per_ic, 100)));
    b.validation.role = DataRole::Validation;

    if (spec.with_input) {
        attach_two_dof_input(b.training, p);
        attach_two_dof_input(b.validation, p);
    }
    if (!std::isinf(spec.snr_db)) {
        std::mt19937_64 rng(spec.seed);
        b.training = add_noise(b.training, spec.snr_db, rng);
    }
    return b;
}

Benchmark make_crank_slider(const BenchmarkSpec& spec) {
    CrankSliderParams p;
    auto sample = [&](double t0, double t1, Eigen::Index count) {
        Dataset d;
        d.t.resize(count);
        d.Z.resize(count, 1);
        d.Zdot.resize(count, 1);
        d.U.resize(count, 0);
        for (Eigen::Index i = 0; i < count; ++i) {
            double t = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(count - 1);
            d.t(i) = t;
            d.Z(i, 0) = crank_slider_position(t, p);
            d.Zdot(i, 0) = crank_slider_velocity(t, p);
        }
        return d;
    };
    Benchmark b;
    b.training = sample(0.0, 1.0, std::max(spec.samples, 10));  // ~3 crank periods
    b.training.role = DataRole::Training;
    b.validation = sample(0.0, 2.0, std::max(spec.samples / 2, 10));
    b.validation.role = DataRole::Validation;
    if (!std::isinf(spec.snr_db)) {
        std::mt19937_64 rng(spec.seed);
        b.training = add_noise(b.training, spec.snr_db, rng);
    }
    return b;
}

Benchmark make_friction(const BenchmarkSpec& spec) {
    FrictionParams p;
    auto rhs = [&p](double t, const Eigen::VectorXd& z) { return sliding_mass_rhs(z, t, p); };

    const Eigen::Index grid = spec.samples > 0 ? spec.samples : 250;
    std::vector<Eigen::Vector2d> train_ics = {{0.0, 0.0}, {0.001, 0.0}, {-0.001, 0.0}};
    std::vector<Eigen::Vector2d> val_ics = {{0.0, 0.15}, {-0.01, 0.02}};

    std::vector<Dataset> tparts;
    for (const auto& ic : train_ics) {
        Dataset full = rk4_integrate(rhs, ic, 0.0, 5.0, spec.dt);
        tparts.push_back(full.rows_subset(even_indices(full.rows(), grid)));
    }
    std::vector<Dataset> vparts;
    for (const auto& ic : val_ics) {
        Dataset full = rk4_integrate(rhs, ic, 0.0, 10.0, spec.dt);
        vparts.push_back(full.rows_subset(even_indices(full.rows(), 2 * grid)));
    }
    Benchmark b;
    b.training = concat(tparts);
    b.training.role = DataRole::Training;
    b.validation = concat(vparts);
    b.validation.role = DataRole::Validation;
    if (!std::isinf(spec.snr_db)) {
        std::mt19937_64 rng(spec.seed);
        b.training = add_noise(b.training, spec.snr_db, rng);
    }
    return b;
}

}  // namespace

Benchmark make_benchmark(const std::string& name, const BenchmarkSpec& spec) {
    if (name == "two_dof") return make_two_dof(spec);
    if (name == "crank_slider") return make_crank_slider(spec);
    if (name == "friction") return make_friction(spec);
    throw std::invalid_argument("make_benchmark: unknown benchmark '" + name + "'");
}

}  // namespace symident::sim
