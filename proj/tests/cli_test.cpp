#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pairstab/experiments.hpp"

using namespace pairstab;

namespace {

std::string emit_string(std::vector<ResultRow> rows, EmitFormat format) {
    std::ostringstream out;
    emit(std::move(rows), format, out);
    return out.str();
}

ResultRow sample_row() {
    ResultRow row;
    row.experiment = "expansiveness";
    row.params = "loss=auc;t=2";
    row.metric = "ratio";
    row.value = 0.125;
    row.se = std::numeric_limits<double>::quiet_NaN();
    row.bound = 1.0;
    row.pass = true;
    row.seed = 42;
    return row;
}

std::string write_temp(const std::string& name, const std::string& contents) {
    const std::string path = name;
    std::ofstream out(path, std::ios::binary);
    out << contents;
    return path;
}

int run_cli(const std::string& args, const std::string& out_capture = "") {
    const char* cli = std::getenv("PAIRSTAB_CLI");
    REQUIRE(cli != nullptr);
    std::string cmd = std::string(cli) + " " + args;
    if (!out_capture.empty()) cmd += " > " + out_capture + " 2>/dev/null";
    else cmd += " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("strict config validation yields field-level errors") {
    CHECK_THROWS_WITH_AS(run_experiment_json("{\"experiment\":\"nope\"}"),
                         doctest::Contains("unknown experiment"), ConfigError);
    CHECK_THROWS_WITH_AS(run_experiment_json("{\"experiment\":\"minimax\",\"bogus\":1}"),
                         doctest::Contains("config.bogus"), ConfigError);
    CHECK_THROWS_WITH_AS(
        run_experiment_json(
            "{\"experiment\":\"expansiveness\",\"loss\":{\"name\":\"auc-squared\",\"mu\":2.0,"
            "\"B1\":1.0,\"oops\":3}}"),
        doctest::Contains("config.loss.oops"), ConfigError);
    CHECK_THROWS_AS(run_experiment_json("not json at all"), ConfigError);
    CHECK_THROWS_WITH_AS(
        run_experiment_json(
            "{\"experiment\":\"stability-sweep\",\"loss\":{\"name\":\"auc-squared\",\"mu\":2.0,"
            "\"B1\":1.0},\"n\":10,\"T\":20,\"rule\":\"sideways\",\"schedule\":{\"kind\":"
            "\"constant\",\"alpha\":0.01},\"bound\":\"convex\"}"),
        doctest::Contains("sideways"), ConfigError);
}

TEST_CASE("csv emission format") {
    CHECK(emit_string({}, EmitFormat::Csv) == "experiment,params,metric,value,stderr,bound,pass,seed\n");

    const std::string one = emit_string({sample_row()}, EmitFormat::Csv);
    CHECK(one ==
          "experiment,params,metric,value,stderr,bound,pass,seed\n"
          "expansiveness,loss=auc;t=2,ratio,0.125,nan,1,true,42\n");

    // byte-identical re-emission
    std::vector<ResultRow> rows = {sample_row(), sample_row()};
    rows[1].metric = "aaa";
    rows[1].value = 1.0 / 3.0;
    CHECK(emit_string(rows, EmitFormat::Csv) == emit_string(rows, EmitFormat::Csv));

    // sorted by (experiment, params, metric): "aaa" precedes "ratio"
    const std::string two = emit_string(rows, EmitFormat::Csv);
    CHECK(two.find(",aaa,") < two.find(",ratio,"));
    // shortest round-trip decimal
    CHECK(two.find("0.3333333333333333,") != std::string::npos);
}

TEST_CASE("json emission carries the same keys") {
    const std::string text = emit_string({sample_row()}, EmitFormat::Json);
    const nlohmann::json arr = nlohmann::json::parse(text);
    REQUIRE(arr.is_array());
    REQUIRE(arr.size() == 1);
    for (const char* key : {"experiment", "params", "metric", "value", "stderr", "bound", "pass", "seed"})
        CHECK(arr[0].contains(key));
    CHECK(arr[0]["value"] == 0.125);
    CHECK(arr[0]["stderr"].is_null());  // NaN serializes as null
    CHECK(emit_string({sample_row()}, EmitFormat::Json) == text);
}

TEST_CASE("small experiments run deterministically through the library") {
    const std::string cfg =
        "{\"experiment\":\"expansiveness\",\"seed\":7,\"loss\":{\"name\":\"auc-squared\","
        "\"mu\":2.0,\"B1\":1.0},\"n\":10,\"T\":12,\"trials\":100,\"t_grid\":[2,12]}";
    const auto rows1 = run_experiment_json(cfg);
    const auto rows2 = run_experiment_json(cfg);
    REQUIRE(!rows1.empty());
    CHECK(emit_string(rows1, EmitFormat::Csv) == emit_string(rows2, EmitFormat::Csv));
    CHECK(all_pass(rows1));
    // 3 regimes x 2 probe steps
    CHECK(rows1.size() == 6);

    // seed override changes values but not the schema
    const auto rows3 = run_experiment_json(cfg, "", "8");
    CHECK(rows3.size() == rows1.size());
    CHECK(emit_string(rows3, EmitFormat::Csv) != emit_string(rows1, EmitFormat::Csv));
}

TEST_CASE("two-point data generator is reachable from configs") {
    const std::string cfg =
        "{\"experiment\":\"stability-sweep\",\"seed\":21,"
        "\"loss\":{\"name\":\"synthetic-convex\",\"beta\":1.0,\"r\":1.0,\"n_construction\":6},"
        "\"data\":{\"name\":\"two-point\",\"kind\":\"convex\",\"beta\":1.0,\"r\":1.0,"
        "\"n_construction\":6,\"which\":1},"
        "\"n\":6,\"T\":20,\"rule\":\"selection\","
        "\"schedule\":{\"kind\":\"power\",\"c\":0.5,\"a\":0.5},"
        "\"replicates\":100,\"neighbor_pairs\":2,\"probes\":50,\"bound\":\"convex\"}";
    const auto rows = run_experiment_json(cfg);
    REQUIRE(rows.size() == 2);
    CHECK(all_pass(rows));
}

TEST_CASE("experiment override replaces the configured name") {
    // a config holding only a seed runs any experiment with its defaults
    const auto rows = run_experiment_json("{\"seed\":11}", "gradient-audit", "");
    REQUIRE(!rows.empty());
    CHECK(rows[0].experiment == "gradient-audit");
    CHECK(rows[0].seed == 11);
}

TEST_CASE("cli binary: listing, usage errors, exit codes, determinism") {
    CHECK(run_cli("--list", "list.txt") == 0);
    {
        const std::string listing = slurp("list.txt");
        for (const std::string& name : experiment_names())
            CHECK(listing.find(name) != std::string::npos);
    }
    CHECK(run_cli("") == 1);                      // missing --config
    CHECK(run_cli("--config does_not_exist.json") == 1);

    const std::string pass_cfg = write_temp(
        "cfg_pass.json",
        "{\"experiment\":\"gradient-audit\",\"seed\":3,\"trials\":40,\"constants_trials\":200,"
        "\"losses\":[{\"name\":\"auc-squared\",\"mu\":2.0,\"B1\":1.0}]}");
    CHECK(run_cli("--config " + pass_cfg + " --out pass_a.csv") == 0);
    CHECK(run_cli("--config " + pass_cfg + " --out pass_b.csv") == 0);
    CHECK(slurp("pass_a.csv") == slurp("pass_b.csv"));
    CHECK(slurp("pass_a.csv").rfind("experiment,params,metric,value,stderr,bound,pass,seed\n", 0) == 0);

    // an impossible tolerance forces a failed bound check -> exit 2
    const std::string fail_cfg = write_temp(
        "cfg_fail.json",
        "{\"experiment\":\"gradient-audit\",\"seed\":3,\"trials\":40,\"constants_trials\":200,"
        "\"fd_tolerance\":1e-30,"
        "\"losses\":[{\"name\":\"auc-squared\",\"mu\":2.0,\"B1\":1.0}]}");
    CHECK(run_cli("--config " + fail_cfg + " --out fail.csv") == 2);

    // malformed config -> exit 1
    const std::string bad_cfg = write_temp("cfg_bad.json", "{\"experiment\":\"minimax\",\"x\":1}");
    CHECK(run_cli("--config " + bad_cfg) == 1);

    // json format emits parseable output
    CHECK(run_cli("--config " + pass_cfg + " --format json --out pass.json") == 0);
    const nlohmann::json parsed = nlohmann::json::parse(slurp("pass.json"));
    CHECK(parsed.is_array());
}
