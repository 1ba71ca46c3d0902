#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pairstab/core.hpp"

namespace pairstab {

// Field-level configuration error (unknown key, missing key, bad value).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct ResultRow {
    std::string experiment;
    std::string params;  // "k=v;k=v" detail columns, no commas
    std::string metric;
    double value = 0.0;
    double se = std::numeric_limits<double>::quiet_NaN();
    double bound = std::numeric_limits<double>::quiet_NaN();
    bool pass = false;
    std::uint64_t seed = 0;
};

// The six experiment names accepted in configs, in listing order.
const std::vector<std::string>& experiment_names();

// Parses and strictly validates a JSON config (unknown keys rejected),
// then runs the experiment. Deterministic given the config contents.
std::vector<ResultRow> run_experiment_json(const std::string& json_text);

// Applies command-line overrides before validation; empty strings mean
// "no override".
std::vector<ResultRow> run_experiment_json(const std::string& json_text,
                                           const std::string& experiment_override,
                                           const std::string& seed_override);

enum class EmitFormat { Csv, Json };

// CSV header: experiment,params,metric,value,stderr,bound,pass,seed
// Values in shortest round-trip decimal. Rows are sorted by
// (experiment, params, metric) before writing, so emission is byte-stable
// regardless of production order.
void emit(std::vector<ResultRow> rows, EmitFormat format, std::ostream& out);
void emit_to_file(std::vector<ResultRow> rows, EmitFormat format, const std::string& path);

bool all_pass(const std::vector<ResultRow>& rows);

}  // namespace pairstab
