#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "symident/dataset.hpp"
#include "symident/gp.hpp"
#include "symident/hybrid.hpp"

namespace symident::io {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// CSV format: header `t,z1,...,zn[,u1,...,up][,dz1,...,dzn]`, comma
// separated, '.' decimal, no quoting. Derivative columns are optional on
// input; has_derivatives reports whether they were present.
struct CsvData {
    Dataset data;
    bool has_derivatives = false;
};

CsvData read_csv(const std::string& path);
void write_csv(const std::string& path, const Dataset& data);

using Json = nlohmann::ordered_json;

Json model_to_json(const gp::DiscoveredModel& model, const Json& config_echo = Json::object());
gp::DiscoveredModel model_from_json(const Json& j);

gp::DiscoveredModel load_model(const std::string& path);
void save_model(const std::string& path, const gp::DiscoveredModel& model,
                const Json& config_echo = Json::object());

// fitted working form of a serialized model
expr::Individual to_individual(const gp::DiscoveredModel& model);
gp::DiscoveredModel from_individual(const expr::Individual& ind);

Json hybrid_to_json(const hybrid::HybridModel& model);
hybrid::HybridModel hybrid_from_json(const Json& j);
hybrid::HybridModel load_hybrid(const std::string& path);
void save_hybrid(const std::string& path, const hybrid::HybridModel& model);

// per-generation best-individual trajectory (complexity vs error curve)
void write_trace_csv(const std::string& path, const std::vector<gp::GenerationStats>& trace);

// per-cluster table: submodel, error, term count, complexity, coordinate range
void write_hybrid_report_csv(const std::string& path, const hybrid::HybridModel& model);

}  // namespace symident::io
