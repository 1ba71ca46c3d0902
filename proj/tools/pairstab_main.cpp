#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "pairstab/experiments.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw pairstab::ConfigError("cannot read config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pairwise-SGD stability laboratory"};
    std::string config_path;
    std::string seed_override;
    std::string out_path;
    std::string format = "csv";
    std::string experiment_override;
    bool list = false;
    app.add_option("--config", config_path, "JSON experiment config");
    app.add_option("--seed", seed_override, "master seed override (u64)");
    app.add_option("--out", out_path, "output file (default stdout)");
    app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--experiment", experiment_override, "experiment name override");
    app.add_flag("--list", list, "list available experiments");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    if (list) {
        for (const std::string& name : pairstab::experiment_names()) std::cout << name << '\n';
        return 0;
    }
    if (config_path.empty()) {
        std::cerr << "error: --config is required (or use --list)\n";
        return 1;
    }

    try {
        const std::string text = read_file(config_path);
        std::vector<pairstab::ResultRow> rows =
            pairstab::run_experiment_json(text, experiment_override, seed_override);
        const bool ok = pairstab::all_pass(rows);
        const pairstab::EmitFormat fmt =
            format == "json" ? pairstab::EmitFormat::Json : pairstab::EmitFormat::Csv;
        if (out_path.empty())
            pairstab::emit(std::move(rows), fmt, std::cout);
        else
            pairstab::emit_to_file(std::move(rows), fmt, out_path);
        return ok ? 0 : 2;
    } catch (const pairstab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
