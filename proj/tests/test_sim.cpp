#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "symident/sim.hpp"

using namespace symident;

TEST_CASE("rk4 solves a linear decay to high accuracy") {
    sim::Rhs rhs = [](double, const Eigen::VectorXd& z) { return (-z).eval(); };
    Eigen::VectorXd z0(1);
    z0 << 1.0;
    Dataset d = sim::rk4_integrate(rhs, z0, 0.0, 1.0, 1e-3);
    CHECK(d.Z(d.rows() - 1, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
    // Zdot is the rhs evaluated at the stored states
    for (Eigen::Index i = 0; i < d.rows(); i += 100)
        CHECK(d.Zdot(i, 0) == doctest::Approx(-d.Z(i, 0)).epsilon(1e-12));
}

TEST_CASE("rk4 keeps a fixed point exactly") {
    sim::Rhs rhs = [](double, const Eigen::VectorXd& z) {
        return Eigen::VectorXd::Zero(z.size()).eval();
    };
    Eigen::VectorXd z0(2);
    z0 << 0.3, -1.5;
    Dataset d = sim::rk4_integrate(rhs, z0, 0.0, 2.0, 1e-2);
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        CHECK(d.Z(i, 0) == 0.3);
        CHECK(d.Z(i, 1) == -1.5);
    }
}

TEST_CASE("rk4 reports divergence") {
    sim::Rhs rhs = [](double, const Eigen::VectorXd& z) { return (z.array().square() + 1.0).matrix().eval(); };
    Eigen::VectorXd z0(1);
    z0 << 10.0;
    CHECK_THROWS(sim::rk4_integrate(rhs, z0, 0.0, 10.0, 1e-2));
}

TEST_CASE("undriven spring chain conserves energy") {
    sim::TwoDofParams p;
    p.f1_amp = 0.0;
    p.f2_amp = 0.0;
    sim::Rhs rhs = [&](double t, const Eigen::VectorXd& z) { return sim::two_dof_rhs(z, t, p); };
    Eigen::VectorXd z0(4);
    z0 << 1.0, -0.2, 0.0, 0.0;
    Dataset d = sim::rk4_integrate(rhs, z0, 0.0, 10.0, 1e-3);
    auto energy = [&](const Eigen::VectorXd& z) {
        double kin = 0.5 * p.m1 * z(2) * z(2) + 0.5 * p.m2 * z(3) * z(3);
        double pot = 0.5 * p.k1 * z(0) * z(0) + 0.5 * p.k2 * (z(1) - z(0)) * (z(1) - z(0)) +
                     0.5 * p.k3 * z(1) * z(1);
        return kin + pot;
    };
    const double e0 = energy(d.Z.row(0).transpose());
    for (Eigen::Index i = 0; i < d.rows(); i += 50)
        CHECK(energy(d.Z.row(i).transpose()) == doctest::Approx(e0).epsilon(1e-6));
}

TEST_CASE("spring chain vector field matches its closed form") {
    sim::TwoDofParams p;
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
    Eigen::VectorXd dz = sim::two_dof_rhs(zero, 0.0, p);
    CHECK(dz(0) == 0.0);
    CHECK(dz(1) == 0.0);
    CHECK(dz(2) == doctest::Approx(0.0));
    CHECK(dz(3) == doctest::Approx(20.0 * std::sin(M_PI / 3.0)));

    // general point: [z3, z4, 20 sin 2t + 30 z2 - 50 z1, 20 sin(5t + pi/3) + 60 z1 - 100 z2]
    Eigen::VectorXd z(4);
    z << 0.3, -0.1, 2.0, -4.0;
    const double t = 1.7;
    Eigen::VectorXd r = sim::two_dof_rhs(z, t, p);
    CHECK(r(0) == doctest::Approx(2.0));
    CHECK(r(1) == doctest::Approx(-4.0));
    CHECK(r(2) == doctest::Approx(20.0 * std::sin(2.0 * t) + 30.0 * z(1) - 50.0 * z(0)));
    CHECK(r(3) == doctest::Approx(20.0 * std::sin(5.0 * t + M_PI / 3.0) + 60.0 * z(0) - 100.0 * z(1)));
}

TEST_CASE("spring chain is linear in state about the forcing") {
    sim::TwoDofParams p;
    const double t = 0.42;
    Eigen::VectorXd f = sim::two_dof_rhs(Eigen::VectorXd::Zero(4), t, p);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd a(4), b(4);
        for (int i = 0; i < 4; ++i) {
            a(i) = n(rng);
            b(i) = n(rng);
        }
        Eigen::VectorXd lhs = sim::two_dof_rhs(2.0 * a - 3.0 * b, t, p) - f;
        Eigen::VectorXd rhs = 2.0 * (sim::two_dof_rhs(a, t, p) - f) -
                              3.0 * (sim::two_dof_rhs(b, t, p) - f);
        CHECK((lhs - rhs).norm() < 1e-10);
    }
}

TEST_CASE("spring chain eigenfrequencies match the stiffness matrix") {
    // squared natural frequencies are the eigenvalues of [[50, -30], [-60, 100]]
    sim::TwoDofParams p;
    p.f1_amp = 0.0;
    p.f2_amp = 0.0;
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(4), e2 = Eigen::VectorXd::Zero(4);
    e1(0) = 1.0;
    e2(1) = 1.0;
    Eigen::Matrix2d K;
    K(0, 0) = -sim::two_dof_rhs(e1, 0.0, p)(2);
    K(0, 1) = -sim::two_dof_rhs(e2, 0.0, p)(2);
    K(1, 0) = -sim::two_dof_rhs(e1, 0.0, p)(3);
    K(1, 1) = -sim::two_dof_rhs(e2, 0.0, p)(3);
    Eigen::Matrix2d expected;
    expected << 50.0, -30.0, -60.0, 100.0;
    CHECK((K - expected).norm() < 1e-12);
    Eigen::EigenSolver<Eigen::Matrix2d> eig(K);
    double w1 = eig.eigenvalues()(0).real(), w2 = eig.eigenvalues()(1).real();
    if (w1 > w2) std::swap(w1, w2);
    // characteristic polynomial w^2 - 150 w + 3200
    CHECK(w1 == doctest::Approx((150.0 - std::sqrt(9700.0)) / 2.0));
    CHECK(w2 == doctest::Approx((150.0 + std::sqrt(9700.0)) / 2.0));
}

TEST_CASE("crank closure position and velocity") {
    sim::CrankSliderParams p;
    CHECK(sim::crank_slider_position(0.0, p) == doctest::Approx(2.5));
    CHECK(sim::crank_slider_velocity(0.0, p) == doctest::Approx(0.0));
    // quarter turn: cos term vanishes, velocity is -L1 omega
    CHECK(sim::crank_slider_velocity(M_PI / (2.0 * p.omega), p) == doctest::Approx(-20.0));
    // finite differences of the closure match the analytic velocity
    const double h = 1e-5;
    for (double t = 0.0; t < 2.0 * M_PI / p.omega; t += 0.01) {
        double fd = (sim::crank_slider_position(t + h, p) - sim::crank_slider_position(t - h, p)) /
                    (2.0 * h);
        CHECK(fd == doctest::Approx(sim::crank_slider_velocity(t, p)).epsilon(1e-6));
    }
}

TEST_CASE("crank velocity integrates back to the position") {
    sim::CrankSliderParams p;
    const double T = 2.0 * M_PI / p.omega;
    const int n = 20000;
    const double h = T / n;
    double x = sim::crank_slider_position(0.0, p);
    for (int i = 0; i < n; ++i) {
        double t = i * h;
        x += 0.5 * h * (sim::crank_slider_velocity(t, p) + sim::crank_slider_velocity(t + h, p));
        CHECK(x == doctest::Approx(sim::crank_slider_position(t + h, p)).epsilon(1e-5));
    }
}

TEST_CASE("friction law is continuous odd and asymptotically dynamic") {
    sim::FrictionParams p;
    CHECK(sim::friction_mu(0.0, p) == doctest::Approx(0.0));
    // continuity at the branch switch
    CHECK(sim::friction_mu(p.v0 - 1e-12, p) == doctest::Approx(p.c_f).epsilon(1e-9));
    CHECK(sim::friction_mu(p.v0 + 1e-12, p) == doctest::Approx(p.c_f).epsilon(1e-9));
    // odd symmetry on a dense grid
    for (int i = 0; i < 10000; ++i) {
        double v = -2.0 + 4.0 * i / 9999.0;
        CHECK(sim::friction_mu(-v, p) == doctest::Approx(-sim::friction_mu(v, p)).epsilon(1e-12));
    }
    CHECK(sim::friction_mu(1e3, p) == doctest::Approx(p.c_d));
}

TEST_CASE("friction branches expand to the expected polynomials") {
    sim::FrictionParams p;
    const double g = p.g;
    // below v0: g mu(v) = (2 g c_f / v0) v - (g c_f / v0^2) v^2 = 29.43 v - 147.15 v^2
    for (double v = 0.005; v <= p.v0; v += 0.005) {
        double expect = 29.43 * v - 147.15 * v * v;
        CHECK(g * sim::friction_mu(v, p) == doctest::Approx(expect).epsilon(1e-9));
    }
    // above v0: g mu(v) = g c_d + g (c_f - c_d) e^{3 v0} e^{-3 v} = 0.63765 + 1.12558 e^{-3 v}
    const double a = g * p.c_d;
    const double b = g * (p.c_f - p.c_d) * std::exp(3.0 * p.v0);
    CHECK(a == doctest::Approx(0.63765));
    CHECK(b == doctest::Approx(1.1255687).epsilon(1e-5));
    for (double v = 0.15; v <= 2.0; v += 0.05)
        CHECK(g * sim::friction_mu(v, p) == doctest::Approx(a + b * std::exp(-3.0 * v)).epsilon(1e-9));
}

TEST_CASE("sliding mass vector field") {
    sim::FrictionParams p;
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
    Eigen::VectorXd dz = sim::sliding_mass_rhs(zero, 0.0, p);
    CHECK(dz(0) == doctest::Approx(0.0));
    CHECK(dz(1) == doctest::Approx(0.0));
    Eigen::VectorXd z(2);
    z << 0.05, 0.3;
    const double t = 0.9;
    Eigen::VectorXd r = sim::sliding_mass_rhs(z, t, p);
    CHECK(r(0) == doctest::Approx(0.3));
    CHECK(r(1) == doctest::Approx(20.0 * std::sin(2.0 * t) - 200.0 * z(0) -
                                  sim::friction_mu(z(1), p) * p.g));
}

TEST_CASE("noise injection hits the requested snr") {
    Dataset d;
    const int m = 10000;
    d.t.resize(m);
    d.Z.resize(m, 2);
    d.Zdot.resize(m, 2);
    d.U.resize(m, 0);
    for (int i = 0; i < m; ++i) {
        double t = 0.001 * i;
        d.t(i) = t;
        d.Z(i, 0) = std::sin(2.0 * t);
        d.Z(i, 1) = 3.0 * std::cos(5.0 * t);
        d.Zdot(i, 0) = 2.0 * std::cos(2.0 * t);
        d.Zdot(i, 1) = -15.0 * std::sin(5.0 * t);
    }
    std::mt19937_64 rng(77);
    Dataset clean = sim::add_noise(d, std::numeric_limits<double>::infinity(), rng);
    CHECK((clean.Z - d.Z).norm() == 0.0);
    CHECK((clean.Zdot - d.Zdot).norm() == 0.0);

    for (double snr_db : {15.0, 25.0, 40.0}) {
        Dataset noisy = sim::add_noise(d, snr_db, rng);
        for (int c = 0; c < 2; ++c) {
            double ps = d.Z.col(c).squaredNorm();
            double pn = (noisy.Z.col(c) - d.Z.col(c)).squaredNorm();
            double measured = 10.0 * std::log10(ps / pn);
            CHECK(measured == doctest::Approx(snr_db).epsilon(0.5 / snr_db));
        }
    }
}

TEST_CASE("benchmark assembly row counts and spans") {
    for (int n : {20, 100, 167, 250, 500, 1000}) {
        sim::BenchmarkSpec spec;
        spec.samples = n;
        sim::Benchmark b = sim::make_benchmark("two_dof", spec);
        CHECK(b.training.rows() == n);
    }
    sim::BenchmarkSpec spec;
    sim::Benchmark two = sim::make_benchmark("two_dof", spec);
    CHECK(two.validation.t.maxCoeff() > two.training.t.maxCoeff());

    sim::BenchmarkSpec fr;
    sim::Benchmark friction = sim::make_benchmark("friction", fr);
    CHECK(friction.training.n_states() == 2);
    CHECK(friction.training.t.maxCoeff() <= 5.0 + 1e-9);
    CHECK(friction.validation.t.maxCoeff() <= 10.0 + 1e-9);
    CHECK(friction.validation.t.maxCoeff() > 5.0);

    CHECK_THROWS_AS(sim::make_benchmark("pendulum", spec), std::invalid_argument);
}
