#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <string>

#include "symident/io.hpp"
#include "symident/regress.hpp"
#include "symident/signal.hpp"
#include "symident/sim.hpp"

namespace {

using symident::Dataset;
namespace io = symident::io;
namespace expr = symident::expr;
namespace gp = symident::gp;
namespace hybrid = symident::hybrid;
namespace signal = symident::signal;
namespace sim = symident::sim;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitUnresolved = 3;
constexpr int kExitIo = 4;

// fills options the user did not pass from a JSON config document
void apply_config(CLI::App* cmd, const std::string& config_path) {
    if (config_path.empty()) return;
    std::ifstream in(config_path);
    if (!in) throw io::IoError("cannot open config '" + config_path + "'");
    io::Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw io::IoError("invalid JSON config '" + config_path + "': " + e.what());
    }
    for (auto& [key, value] : j.items()) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (!opt || opt->count() > 0) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) opt->add_result("true");
        } else {
            opt->add_result(value.dump());
        }
    }
}

struct GpFlags {
    std::uint64_t seed = 0;
    int population = 600;
    int generations = 100;
    int min_generations = 50;
    int tournament = 2;
    int max_terms = 20;
    double lambda = -1.0;
    double sigma = 1e-4;
    std::string fitness = "adaptive";
    std::string fitness_on = "training";
    bool with_cos = false;
    bool serial = false;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--seed", seed, "RNG seed (reproducibility)")->required();
        cmd->add_option("--population", population, "population size");
        cmd->add_option("--generations", generations, "maximum generations");
        cmd->add_option("--min-generations", min_generations, "earliest allowed stop");
        cmd->add_option("--tournament", tournament, "tournament size (2 or 3)");
        cmd->add_option("--max-terms", max_terms, "maximum terms per individual");
        cmd->add_option("--lambda", lambda, "ridge regularization (<0: automatic)");
        cmd->add_option("--sigma", sigma, "hard-threshold coefficient cutoff");
        cmd->add_option("--fitness", fitness, "fitness measure")
            ->check(CLI::IsMember({"adaptive", "aic", "bic"}));
        cmd->add_option("--fitness-on", fitness_on, "dataset the fitness is computed on")
            ->check(CLI::IsMember({"training", "validation"}));
        cmd->add_flag("--with-cos", with_cos, "add cos to the function set");
        cmd->add_flag("--serial", serial, "disable parallel population evaluation");
    }

    gp::GpConfig build(const Dataset& data) const {
        gp::GpConfig cfg;
        cfg.seed = seed;
        cfg.population_size = population;
        cfg.max_generations = generations;
        cfg.min_generations = min_generations;
        cfg.tournament_size = tournament;
        cfg.max_terms = max_terms;
        cfg.ridge_lambda = lambda;
        cfg.threshold.sigma = sigma;
        cfg.measure = fitness == "aic"   ? symident::fitness::Measure::Aic
                      : fitness == "bic" ? symident::fitness::Measure::Bic
                                         : symident::fitness::Measure::Adaptive;
        cfg.fitness_on_validation = fitness_on == "validation";
        cfg.parallel = !serial;
        cfg.context = expr::TermContext::standard(static_cast<int>(data.n_states()),
                                                  static_cast<int>(data.n_inputs()));
        if (with_cos) cfg.context.functions.push_back(expr::Op::Cos);
        return cfg;
    }

    io::Json echo() const {
        io::Json j;
        j["seed"] = seed;
        j["population"] = population;
        j["generations"] = generations;
        j["min_generations"] = min_generations;
        j["tournament"] = tournament;
        j["max_terms"] = max_terms;
        j["lambda"] = lambda;
        j["sigma"] = sigma;
        j["fitness"] = fitness;
        j["fitness_on"] = fitness_on;
        j["with_cos"] = with_cos;
        return j;
    }
};

Dataset load_with_derivatives(const std::string& path, const std::string& method, int window,
                              int degree, double tv_lambda) {
    io::CsvData csv = io::read_csv(path);
    if (csv.has_derivatives) return csv.data;
    Dataset& d = csv.data;
    for (Eigen::Index c = 0; c < d.n_states(); ++c) {
        signal::Series s{d.t, d.Z.col(c)};
        signal::Series ds;
        if (method == "savgol") {
            ds = signal::savitzky_golay(s, window, degree, 1);
        } else if (method == "tv") {
            signal::TvOptions tv;
            tv.reg_lambda = tv_lambda;
            ds = signal::tv_derivative(s, tv);
        } else {
            ds = signal::fdm_derivative(s);
        }
        d.Zdot.col(c) = ds.y;
    }
    return d;
}

int cmd_simulate(const std::string& name, const sim::BenchmarkSpec& spec,
                 const std::string& out, const std::string& validation_out) {
    sim::Benchmark b = sim::make_benchmark(name, spec);
    io::write_csv(out, b.training);
    if (!validation_out.empty()) io::write_csv(validation_out, b.validation);
    std::cout << "wrote " << b.training.rows() << " training rows to " << out;
    if (!validation_out.empty())
        std::cout << " and " << b.validation.rows() << " validation rows to " << validation_out;
    std::cout << "\n";
    return kExitOk;
}

int main_impl(int argc, char** argv) {
    CLI::App app{"symbolic system identification toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* sc_sim = app.add_subcommand("simulate", "generate a benchmark dataset");
    std::string sim_name, sim_out = "train.csv", sim_val_out;
    sim::BenchmarkSpec spec;
    sc_sim->add_option("benchmark", sim_name, "two_dof | crank_slider | friction")->required();
    sc_sim->add_option("--samples", spec.samples, "training sample count");
    sc_sim->add_option("--snr-db", spec.snr_db, "additive noise SNR in dB (default: none)");
    sc_sim->add_option("--seed", spec.seed, "noise RNG seed");
    sc_sim->add_option("--dt", spec.dt, "integration step");
    sc_sim->add_flag("--with-input", spec.with_input, "expose the second force as input u1");
    sc_sim->add_option("--out", sim_out, "training CSV path");
    sc_sim->add_option("--validation-out", sim_val_out, "validation CSV path");

    // differentiate
    auto* sc_diff = app.add_subcommand("differentiate", "append derivative columns to a CSV");
    std::string diff_in, diff_out, diff_method = "fdm";
    int diff_window = 21, diff_degree = 3;
    double diff_lambda = -1.0;
    bool diff_smooth = false;
    sc_diff->add_option("--in", diff_in, "input CSV")->required();
    sc_diff->add_option("--out", diff_out, "output CSV")->required();
    sc_diff->add_option("--method", diff_method, "fdm | savgol | tv")
        ->check(CLI::IsMember({"fdm", "savgol", "tv"}));
    sc_diff->add_option("--window", diff_window, "savgol window (odd)");
    sc_diff->add_option("--degree", diff_degree, "savgol polynomial degree");
    sc_diff->add_option("--lambda", diff_lambda, "tv regularization (<0: automatic)");
    sc_diff->add_flag("--smooth", diff_smooth, "also replace states by their smoothed values");

    // discover
    auto* sc_disc = app.add_subcommand("discover", "identify a model from data");
    std::string disc_train, disc_val, disc_out = "model.json", disc_report, disc_config;
    std::string disc_dmethod = "fdm";
    GpFlags disc_flags;
    int disc_restarts = 1;
    double disc_rss_target = 0.01;
    sc_disc->add_option("--train", disc_train, "training CSV")->required();
    sc_disc->add_option("--restarts", disc_restarts, "maximum seeded restarts");
    sc_disc->add_option("--rss-target", disc_rss_target, "training RSS that stops restarting");
    sc_disc->add_option("--validation", disc_val, "validation CSV");
    sc_disc->add_option("--out", disc_out, "model JSON path");
    sc_disc->add_option("--report", disc_report, "per-generation trace CSV path");
    sc_disc->add_option("--config", disc_config, "JSON config supplying unset flags");
    sc_disc->add_option("--derivative-method", disc_dmethod,
                        "differentiation when dz columns are missing")
        ->check(CLI::IsMember({"fdm", "savgol", "tv"}));
    disc_flags.add_to(sc_disc);

    // discover-hybrid
    auto* sc_hyb = app.add_subcommand("discover-hybrid", "identify a hybrid (switching) model");
    std::string hyb_train, hyb_val, hyb_out = "hybrid.json", hyb_report, hyb_config;
    std::vector<std::string> hyb_coords;
    GpFlags hyb_flags;
    int hyb_knn = 100, hyb_kfold = 0;
    sc_hyb->add_option("--train", hyb_train, "training CSV")->required();
    sc_hyb->add_option("--validation", hyb_val, "validation CSV");
    sc_hyb->add_option("--kfold", hyb_kfold, "K-fold validation when no validation CSV");
    sc_hyb->add_option("--out", hyb_out, "hybrid model JSON path");
    sc_hyb->add_option("--report", hyb_report, "per-cluster report CSV path");
    sc_hyb->add_option("--config", hyb_config, "JSON config supplying unset flags");
    sc_hyb->add_option("--knn", hyb_knn, "cluster size K");
    sc_hyb->add_option("--coord", hyb_coords,
                       "clustering coordinates: velocity | displacement | time | state");
    hyb_flags.add_to(sc_hyb);

    // validate
    auto* sc_val = app.add_subcommand("validate", "evaluate a model JSON on a dataset");
    std::string val_model, val_data;
    sc_val->add_option("--model", val_model, "model JSON")->required();
    sc_val->add_option("--data", val_data, "dataset CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    if (sc_sim->parsed()) return cmd_simulate(sim_name, spec, sim_out, sim_val_out);

    if (sc_diff->parsed()) {
        io::CsvData csv = io::read_csv(diff_in);
        Dataset& d = csv.data;
        for (Eigen::Index c = 0; c < d.n_states(); ++c) {
            signal::Series s{d.t, d.Z.col(c)};
            if (diff_method == "savgol") {
                d.Zdot.col(c) = signal::savitzky_golay(s, diff_window, diff_degree, 1).y;
                if (diff_smooth)
                    d.Z.col(c) = signal::savitzky_golay(s, diff_window, diff_degree, 0).y;
            } else if (diff_method == "tv") {
                signal::SmoothParams sp;
                sp.tv.reg_lambda = diff_lambda;
                d.Zdot.col(c) = signal::tv_derivative(s, sp.tv).y;
                if (diff_smooth)
                    d.Z.col(c) = signal::smooth(s, signal::SmoothMethod::Tv, sp).y;
            } else {
                d.Zdot.col(c) = signal::fdm_derivative(s).y;
            }
        }
        io::write_csv(diff_out, d);
        std::cout << "wrote " << d.rows() << " rows to " << diff_out << "\n";
        return kExitOk;
    }

    if (sc_disc->parsed()) {
        apply_config(sc_disc, disc_config);
        Dataset train = load_with_derivatives(disc_train, disc_dmethod, 21, 3, -1.0);
        Dataset validation;
        bool have_val = !disc_val.empty();
        if (have_val) validation = load_with_derivatives(disc_val, disc_dmethod, 21, 3, -1.0);
        if (disc_flags.fitness_on == "validation" && !have_val)
            throw CLI::ValidationError("--fitness-on validation requires --validation");
        gp::GpConfig cfg = disc_flags.build(train);
        std::vector<gp::GenerationStats> trace;
        auto record = [&trace](const gp::GenerationStats& g) { trace.push_back(g); };
        gp::DiscoveredModel model;
        if (disc_restarts > 1) {
            gp::RestartOptions ro;
            ro.max_restarts = disc_restarts;
            ro.rss_target = disc_rss_target;
            gp::RestartResult res =
                gp::run_restarts(cfg, train, have_val ? &validation : nullptr, ro, record);
            model = res.best;
            std::cout << "restarts: " << res.restarts_used << " ("
                      << (res.accepted ? "target reached" : "budget exhausted") << ")\n";
        } else {
            model = gp::run(cfg, train, have_val ? &validation : nullptr, record);
        }
        io::save_model(disc_out, model, disc_flags.echo());
        if (!disc_report.empty()) io::write_trace_csv(disc_report, trace);
        std::cout << "model: " << model.terms.size() << " terms, training rss "
                  << model.training_rss << ", " << model.generations << " generations -> "
                  << disc_out << "\n";
        return kExitOk;
    }

    if (sc_hyb->parsed()) {
        apply_config(sc_hyb, hyb_config);
        if (hyb_val.empty() && hyb_kfold < 2)
            throw CLI::ValidationError(
                "discover-hybrid needs --validation or --kfold N (N >= 2)");
        Dataset train = load_with_derivatives(hyb_train, "fdm", 21, 3, -1.0);
        Dataset validation;
        if (!hyb_val.empty()) validation = load_with_derivatives(hyb_val, "fdm", 21, 3, -1.0);
        hybrid::HybridConfig cfg;
        cfg.gp = hyb_flags.build(train);
        cfg.knn = hyb_knn;
        for (const std::string& c : hyb_coords) {
            if (c == "velocity")
                cfg.coord_specs.push_back(hybrid::CoordSpec::velocity(train.n_states()));
            else if (c == "displacement")
                cfg.coord_specs.push_back(hybrid::CoordSpec::displacement(train.n_states()));
            else if (c == "time")
                cfg.coord_specs.push_back(hybrid::CoordSpec::time_only());
            else if (c == "state")
                cfg.coord_specs.push_back(hybrid::CoordSpec::full_state(train.n_states()));
            else
                throw CLI::ValidationError("unknown --coord '" + c + "'");
        }
        hybrid::HybridModel model = hybrid::identify(train, validation, cfg);
        io::save_hybrid(hyb_out, model);
        if (!hyb_report.empty()) io::write_hybrid_report_csv(hyb_report, model);
        std::cout << "hybrid model: " << model.submodels.size() << " submodels, "
                  << model.boundaries.size() << " switch boundaries -> " << hyb_out << "\n";
        if (!model.unresolved.empty()) {
            std::cerr << "unresolved clusters:";
            for (int c : model.unresolved) std::cerr << " " << c;
            std::cerr << "\n";
            return kExitUnresolved;
        }
        return kExitOk;
    }

    if (sc_val->parsed()) {
        gp::DiscoveredModel model = io::load_model(val_model);
        Dataset data = load_with_derivatives(val_data, "fdm", 21, 3, -1.0);
        expr::Individual ind = io::to_individual(model);
        Eigen::MatrixXd theta = symident::regress::evaluate_terms(ind, data);
        double rss = (data.Zdot - theta * ind.coefficients).squaredNorm();
        double n0 = static_cast<double>(data.rows() * data.n_states());
        std::cout << "rss " << rss << "\n";
        std::cout << "e = rss/N " << rss / static_cast<double>(data.rows()) << "\n";
        std::cout << "sqrt(rss/N0) " << std::sqrt(rss / n0) << "\n";
        return kExitOk;
    }

    return kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return main_impl(argc, argv);
    } catch (const io::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}
