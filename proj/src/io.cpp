#include "symident/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace symident::io {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_number(const std::string& s, const std::string& where) {
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError("bad numeric value '" + s + "' in " + where);
    }
}

// expects names base1..baseN starting at `at`; returns N
int count_indexed(const std::vector<std::string>& header, size_t at, const std::string& base) {
    int n = 0;
    while (at + static_cast<size_t>(n) < header.size() &&
           header[at + static_cast<size_t>(n)] == base + std::to_string(n + 1))
        ++n;
    return n;
}

}  // namespace

CsvData read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty file '" + path + "'");
    std::vector<std::string> header = split_line(line);
    if (header.empty() || header[0] != "t")
        throw IoError("missing required column 't' in '" + path + "'");

    size_t at = 1;
    int n = count_indexed(header, at, "z");
    if (n == 0) throw IoError("missing state columns z1.. in '" + path + "'");
    at += static_cast<size_t>(n);
    int p = count_indexed(header, at, "u");
    at += static_cast<size_t>(p);
    int nd = count_indexed(header, at, "dz");
    at += static_cast<size_t>(nd);
    if (at != header.size()) throw IoError("unrecognized column '" + header[at] + "' in '" + path + "'");
    if (nd != 0 && nd != n)
        throw IoError("derivative column count does not match state count in '" + path + "'");

    std::vector<std::vector<double>> rows;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size())
            throw IoError("row " + std::to_string(lineno) + " has " +
                          std::to_string(cells.size()) + " cells, expected " +
                          std::to_string(header.size()) + " in '" + path + "'");
        std::vector<double> row;
        row.reserve(cells.size());
        for (size_t c = 0; c < cells.size(); ++c)
            row.push_back(parse_number(cells[c], "row " + std::to_string(lineno) + " column " +
                                                     header[c]));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError("no data rows in '" + path + "'");

    CsvData out;
    out.has_derivatives = nd == n;
    Eigen::Index m = static_cast<Eigen::Index>(rows.size());
    out.data.t.resize(m);
    out.data.Z.resize(m, n);
    out.data.Zdot = Eigen::MatrixXd::Zero(m, n);
    out.data.U.resize(m, p);
    for (Eigen::Index r = 0; r < m; ++r) {
        const auto& row = rows[static_cast<size_t>(r)];
        size_t c = 0;
        out.data.t(r) = row[c++];
        for (int i = 0; i < n; ++i) out.data.Z(r, i) = row[c++];
        for (int i = 0; i < p; ++i) out.data.U(r, i) = row[c++];
        for (int i = 0; i < nd; ++i) out.data.Zdot(r, i) = row[c++];
    }
    return out;
}

void write_csv(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "t";
    for (Eigen::Index i = 1; i <= data.n_states(); ++i) out << ",z" << i;
    for (Eigen::Index i = 1; i <= data.n_inputs(); ++i) out << ",u" << i;
    for (Eigen::Index i = 1; i <= data.n_states(); ++i) out << ",dz" << i;
    out << "\n";
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        out << fmt(data.t(r));
        for (Eigen::Index i = 0; i < data.n_states(); ++i) out << "," << fmt(data.Z(r, i));
        for (Eigen::Index i = 0; i < data.n_inputs(); ++i) out << "," << fmt(data.U(r, i));
        for (Eigen::Index i = 0; i < data.n_states(); ++i) out << "," << fmt(data.Zdot(r, i));
        out << "\n";
    }
    if (!out) throw IoError("write failure on '" + path + "'");
}

Json model_to_json(const gp::DiscoveredModel& model, const Json& config_echo) {
    Json j;
    j["terms"] = model.terms;
    Json states = Json::array();
    for (Eigen::Index s = 0; s < model.coefficients.cols(); ++s) {
        Json eq = Json::array();
        for (size_t k = 0; k < model.terms.size(); ++k) {
            Json entry;
            entry["term"] = model.terms[k];
            entry["coefficient"] = model.coefficients(static_cast<Eigen::Index>(k), s);
            eq.push_back(entry);
        }
        Json st;
        st["equation"] = "dz" + std::to_string(s + 1);
        st["terms"] = eq;
        states.push_back(st);
    }
    j["states"] = states;
    j["training_rss"] = model.training_rss;
    if (std::isfinite(model.validation_rss)) j["validation_rss"] = model.validation_rss;
    j["term_count"] = model.gamma;
    j["mean_operator_count"] = model.mean_ops;
    j["generations"] = model.generations;
    if (!config_echo.empty()) j["config"] = config_echo;
    return j;
}

gp::DiscoveredModel model_from_json(const Json& j) {
    gp::DiscoveredModel model;
    model.terms = j.at("terms").get<std::vector<std::string>>();
    const Json& states = j.at("states");
    model.coefficients.resize(static_cast<Eigen::Index>(model.terms.size()),
                              static_cast<Eigen::Index>(states.size()));
    for (size_t s = 0; s < states.size(); ++s) {
        const Json& eq = states[s].at("terms");
        if (eq.size() != model.terms.size())
            throw IoError("state equation term list does not match the shared term list");
        for (size_t k = 0; k < eq.size(); ++k) {
            if (eq[k].at("term").get<std::string>() != model.terms[k])
                throw IoError("state equation term order mismatch");
            model.coefficients(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s)) =
                eq[k].at("coefficient").get<double>();
        }
    }
    model.training_rss = j.at("training_rss").get<double>();
    model.validation_rss = j.contains("validation_rss")
                               ? j["validation_rss"].get<double>()
                               : std::numeric_limits<double>::quiet_NaN();
    model.gamma = j.value("term_count", static_cast<int>(model.terms.size()));
    model.mean_ops = j.value("mean_operator_count", 0.0);
    model.generations = j.value("generations", 0);
    return model;
}

gp::DiscoveredModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError("invalid JSON in '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

void save_model(const std::string& path, const gp::DiscoveredModel& model,
                const Json& config_echo) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << model_to_json(model, config_echo).dump(2) << "\n";
    if (!out) throw IoError("write failure on '" + path + "'");
}

expr::Individual to_individual(const gp::DiscoveredModel& model) {
    expr::Individual ind;
    for (const std::string& s : model.terms) ind.terms.push_back(expr::parse(s));
    ind.coefficients = model.coefficients;
    ind.rss = model.training_rss;
    ind.validation_rss = model.validation_rss;
    return ind;
}

gp::DiscoveredModel from_individual(const expr::Individual& ind) {
    gp::DiscoveredModel model;
    for (const auto& t : ind.terms) model.terms.push_back(t.str());
    model.coefficients = ind.coefficients;
    model.training_rss = ind.rss;
    model.validation_rss = ind.validation_rss;
    expr::Complexity cx = expr::complexity_measures(ind);
    model.gamma = cx.gamma;
    model.mean_ops = cx.mean_ops;
    return model;
}

Json hybrid_to_json(const hybrid::HybridModel& model) {
    Json j;
    Json subs = Json::array();
    for (const auto& sm : model.submodels) subs.push_back(model_to_json(from_individual(sm)));
    j["submodels"] = subs;
    j["sequence"] = model.sequence;
    Json bounds = Json::array();
    for (const auto& b : model.boundaries) {
        Json jb;
        jb["cluster"] = b.cluster;
        jb["coordinate"] = b.coordinate;
        jb["value"] = b.value;
        bounds.push_back(jb);
    }
    j["boundaries"] = bounds;
    Json feats = Json::array();
    for (const auto& f : model.feature_set) feats.push_back(f.str());
    j["feature_set"] = feats;
    j["constant_memory"] = model.constant_memory;
    j["unresolved_clusters"] = model.unresolved;
    return j;
}

hybrid::HybridModel hybrid_from_json(const Json& j) {
    hybrid::HybridModel model;
    for (const Json& js : j.at("submodels"))
        model.submodels.push_back(to_individual(model_from_json(js)));
    model.sequence = j.at("sequence").get<std::vector<int>>();
    for (const Json& jb : j.at("boundaries"))
        model.boundaries.push_back({jb.at("cluster").get<int>(),
                                    jb.at("coordinate").get<std::string>(),
                                    jb.at("value").get<double>()});
    for (const Json& jf : j.value("feature_set", Json::array()))
        model.feature_set.push_back(expr::parse(jf.get<std::string>()));
    model.constant_memory = j.value("constant_memory", std::vector<double>{});
    model.unresolved = j.value("unresolved_clusters", std::vector<int>{});
    return model;
}

hybrid::HybridModel load_hybrid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError("invalid JSON in '" + path + "': " + e.what());
    }
    return hybrid_from_json(j);
}

void save_hybrid(const std::string& path, const hybrid::HybridModel& model) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << hybrid_to_json(model).dump(2) << "\n";
    if (!out) throw IoError("write failure on '" + path + "'");
}

void write_trace_csv(const std::string& path, const std::vector<gp::GenerationStats>& trace) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "generation,best_rss,best_fitness,best_term_count,best_mean_ops,mean_rss,mean_term_count\n";
    for (const auto& g : trace)
        out << g.generation << "," << fmt(g.best_rss) << "," << fmt(g.best_fitness) << ","
            << g.best_gamma << "," << fmt(g.best_mean_ops) << "," << fmt(g.mean_rss) << ","
            << g.mean_gamma << "\n";
    if (!out) throw IoError("write failure on '" + path + "'");
}

void write_hybrid_report_csv(const std::string& path, const hybrid::HybridModel& model) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "cluster,submodel,error,term_count,complexity,coord_min,coord_max\n";
    for (const auto& r : model.report)
        out << r.cluster << "," << r.submodel << "," << fmt(r.error) << "," << r.terms << ","
            << fmt(r.complexity) << "," << fmt(r.coord_min) << "," << fmt(r.coord_max) << "\n";
    if (!out) throw IoError("write failure on '" + path + "'");
}

}  // namespace symident::io
