#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "symident/io.hpp"
#include "symident/sim.hpp"

using namespace symident;

namespace {

std::string tmp_path(const std::string& name) {
    return std::string("/tmp/symident_test_") + name;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("csv round-trip preserves the dataset") {
    sim::BenchmarkSpec spec;
    spec.samples = 60;
    sim::Benchmark b = sim::make_benchmark("two_dof", spec);
    const std::string path = tmp_path("roundtrip.csv");
    io::write_csv(path, b.training);
    io::CsvData back = io::read_csv(path);
    CHECK(back.has_derivatives);
    REQUIRE(back.data.rows() == b.training.rows());
    REQUIRE(back.data.n_states() == 4);
    CHECK((back.data.t - b.training.t).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((back.data.Z - b.training.Z).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((back.data.Zdot - b.training.Zdot).lpNorm<Eigen::Infinity>() < 1e-12);
    std::remove(path.c_str());
}

TEST_CASE("csv writing is byte-deterministic") {
    sim::BenchmarkSpec spec;
    spec.samples = 40;
    sim::Benchmark b = sim::make_benchmark("friction", spec);
    const std::string p1 = tmp_path("det1.csv"), p2 = tmp_path("det2.csv");
    io::write_csv(p1, b.training);
    io::write_csv(p2, b.training);
    CHECK(slurp(p1) == slurp(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("csv reader handles optional columns and bad input") {
    const std::string path = tmp_path("partial.csv");
    spit(path, "t,z1,u1\n0.0,1.0,0.5\n0.1,0.9,0.4\n0.2,0.8,0.3\n");
    io::CsvData d = io::read_csv(path);
    CHECK(!d.has_derivatives);
    CHECK(d.data.rows() == 3);
    CHECK(d.data.n_states() == 1);
    CHECK(d.data.n_inputs() == 1);
    CHECK(d.data.U(1, 0) == doctest::Approx(0.4));

    spit(path, "z1,dz1\n1.0,2.0\n");
    CHECK_THROWS_WITH_AS(io::read_csv(path), doctest::Contains("t"), io::IoError);

    spit(path, "t,z1\n0.0\n");
    CHECK_THROWS_AS(io::read_csv(path), io::IoError);
    std::remove(path.c_str());

    CHECK_THROWS_AS(io::read_csv(tmp_path("does_not_exist.csv")), io::IoError);
}

TEST_CASE("model json round-trip reproduces the stored fit") {
    sim::BenchmarkSpec spec;
    spec.samples = 200;
    sim::Benchmark b = sim::make_benchmark("two_dof", spec);
    expr::Individual truth;
    for (const char* s :
         {"z1", "z2", "z3", "z4", "sin+tt", "sin+*c5tc1.0471975511965976"})
        truth.terms.push_back(expr::parse(s));
    regress::fit_individual(truth, b.training, -1.0);

    gp::DiscoveredModel model = io::from_individual(truth);
    const std::string path = tmp_path("model.json");
    io::save_model(path, model, io::Json{{"note", "round-trip"}});
    gp::DiscoveredModel loaded = io::load_model(path);
    REQUIRE(loaded.terms == model.terms);
    CHECK(loaded.training_rss == doctest::Approx(model.training_rss).epsilon(1e-12));

    // re-evaluating the deserialized model reproduces the stored rss
    expr::Individual back = io::to_individual(loaded);
    Eigen::MatrixXd theta = regress::evaluate_terms(back, b.training);
    double rss = regress::rss(theta, back.coefficients, b.training.Zdot);
    CHECK(rss == doctest::Approx(loaded.training_rss).epsilon(1e-9));
    std::remove(path.c_str());
}

TEST_CASE("model json is stable across identical saves") {
    expr::Individual ind;
    ind.terms.push_back(expr::parse("+z1c3.25"));
    ind.coefficients.resize(1, 1);
    ind.coefficients(0, 0) = -2.0;
    ind.rss = 0.125;
    gp::DiscoveredModel m = io::from_individual(ind);
    const std::string p1 = tmp_path("m1.json"), p2 = tmp_path("m2.json");
    io::save_model(p1, m);
    io::save_model(p2, m);
    CHECK(slurp(p1) == slurp(p2));
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("hybrid json round-trip") {
    hybrid::HybridModel hm;
    expr::Individual a, b2;
    a.terms.push_back(expr::parse("z1"));
    a.coefficients.resize(1, 1);
    a.coefficients(0, 0) = -2.0;
    a.rss = 1e-8;
    b2.terms.push_back(expr::parse("sin+tt"));
    b2.terms.push_back(expr::parse("z2"));
    b2.coefficients.resize(2, 1);
    b2.coefficients << 20.0, -29.43;
    b2.rss = 2e-6;
    hm.submodels = {a, b2};
    hm.sequence = {1, 1, 2, 2, 1};
    hm.boundaries.push_back({3, "velocity", 0.104});
    hm.feature_set.push_back(expr::parse("sin+tt"));
    hm.constant_memory = {0.104, -2.99};
    hm.report.push_back({1, 1, 1.1e-5, 1, 1.0, 0.0, 0.1});

    const std::string path = tmp_path("hybrid.json");
    io::save_hybrid(path, hm);
    hybrid::HybridModel back = io::load_hybrid(path);
    REQUIRE(back.submodels.size() == 2);
    CHECK(back.sequence == hm.sequence);
    REQUIRE(back.boundaries.size() == 1);
    CHECK(back.boundaries[0].cluster == 3);
    CHECK(back.boundaries[0].coordinate == "velocity");
    CHECK(back.boundaries[0].value == doctest::Approx(0.104));
    REQUIRE(back.feature_set.size() == 1);
    CHECK(back.feature_set[0].str() == "sin+tt");
    CHECK(back.constant_memory == hm.constant_memory);
    CHECK(back.submodels[1].terms[0].str() == "sin+tt");
    CHECK(back.submodels[1].coefficients(1, 0) == doctest::Approx(-29.43));
    std::remove(path.c_str());
}

TEST_CASE("trace and report csv sidecars") {
    std::vector<gp::GenerationStats> trace(3);
    for (int g = 0; g < 3; ++g) {
        trace[g].generation = g + 1;
        trace[g].best_rss = 10.0 / (g + 1);
        trace[g].best_fitness = 1.0 / (g + 1);
        trace[g].best_gamma = 6 + g;
        trace[g].mean_rss = 20.0 / (g + 1);
    }
    const std::string path = tmp_path("trace.csv");
    io::write_trace_csv(path, trace);
    std::string text = slurp(path);
    CHECK(text.find("generation") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);  // header + 3 rows
    std::remove(path.c_str());

    hybrid::HybridModel hm;
    hm.report.push_back({1, 1, 1.1e-5, 4, 1.25, 0.161, 0.289});
    hm.report.push_back({2, 1, 1.3e-5, 4, 1.25, 0.10, 0.30});
    const std::string rpath = tmp_path("report.csv");
    io::write_hybrid_report_csv(rpath, hm);
    std::string rtext = slurp(rpath);
    CHECK(std::count(rtext.begin(), rtext.end(), '\n') == 3);
    CHECK(rtext.find("cluster") != std::string::npos);
    std::remove(rpath.c_str());
}
