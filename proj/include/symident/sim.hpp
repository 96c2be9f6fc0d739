#pragma once

#include <functional>
#include <random>
#include <string>

#include "symident/dataset.hpp"

namespace symident::sim {

// Two-DoF spring-mass chain under harmonic forcing.
struct TwoDofParams {
    double m1 = 10.0, m2 = 5.0;          // kg
    double k1 = 200.0, k2 = 300.0, k3 = 200.0;  // N/m
    double f1_amp = 200.0, f1_freq = 2.0, f1_phase = 0.0;
    double f2_amp = 100.0, f2_freq = 5.0, f2_phase = M_PI / 3.0;
};

// Crank-slider closure: crank AB of length l1, rod BC of length l2.
struct CrankSliderParams {
    double l1 = 1.0;    // m
    double l2 = 1.5;    // m
    double omega = 20.0;  // rad/s
};

// Sliding mass with Stribeck friction.
struct FrictionParams {
    double m = 10.0;       // kg
    double k = 2000.0;     // N/m
    double force_amp = 200.0, force_freq = 2.0;
    double c_f = 0.15, c_d = 0.065;
    double g = 9.81;
    double v0 = 0.1;       // m/s
    double exponent = 3.0;  // decay rate of the Stribeck branch
};

using Rhs = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& z)>;

// Classical fixed-step RK4; Zdot is filled by re-evaluating the rhs at the
// stored states. Throws on non-finite states.
Dataset rk4_integrate(const Rhs& rhs, const Eigen::VectorXd& z0, double t0, double t1,
                      double dt);

Eigen::VectorXd two_dof_rhs(const Eigen::VectorXd& z, double t, const TwoDofParams& p);

double crank_slider_position(double t, const CrankSliderParams& p);
double crank_slider_velocity(double t, const CrankSliderParams& p);

double friction_mu(double v_rel, const FrictionParams& p);
Eigen::VectorXd sliding_mass_rhs(const Eigen::VectorXd& z, double t, const FrictionParams& p);

// Additive white Gaussian noise per column at the requested SNR;
// snr_db = +inf leaves the data unchanged.
Dataset add_noise(const Dataset& data, double snr_db, std::mt19937_64& rng);

struct BenchmarkSpec {
    int samples = 1000;       // training rows (per-benchmark defaults apply)
    double snr_db = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 1;
    bool with_input = false;  // two_dof: expose f2 as exogenous input u1
    double dt = 1e-3;
};

struct Benchmark {
    Dataset training;
    Dataset validation;
};

// name in {two_dof, crank_slider, friction}
Benchmark make_benchmark(const std::string& name, const BenchmarkSpec& spec);

}  // namespace symident::sim
