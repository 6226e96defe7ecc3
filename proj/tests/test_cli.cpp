#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "bvcl/cli.hpp"
#include "bvcl/error.hpp"

using namespace bvcl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kWork = "/tmp/bvcl_cli_work";

int run_cmd(const std::string& args) {
    const std::string cmd =
        "BVCL_LOG=quiet " + std::string(BVCL_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE_MESSAGE(in.good(), "missing file: ", path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

// Small two-task experiment, sized for plumbing checks (not learning quality).
json base_config(const std::string& out_dir) {
    return json{
        {"tasks",
         {{{"name", "t1"},
           {"synthetic",
            {{"num_classes", 2}, {"samples_per_class", 40}, {"feature_dim", 2},
             {"cluster_separation", 6.0}, {"cluster_scale", 1.0}, {"seed", 1}}}},
          {{"name", "t2"},
           {"synthetic",
            {{"num_classes", 2}, {"samples_per_class", 40}, {"feature_dim", 2},
             {"cluster_separation", 6.0}, {"cluster_scale", 1.0}, {"seed", 2}}}}}},
        {"architecture", {{"hidden", {8}}}},
        {"hyper",
         {{"learning_rate", 0.01}, {"beta", 0.1}, {"epochs", 4}, {"batch_size", 32},
          {"s_train", 2}, {"s_test", 10}}},
        {"grid", {{"learning_rates", {0.01}}, {"betas", {0.1}}}},
        {"seeds", {7}},
        {"output_dir", out_dir}};
}

struct Workspace {
    Workspace() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
    }
};

}  // namespace

TEST_CASE("config parsing rejects unknown keys and bad fields") {
    CHECK_THROWS_WITH_AS(parse_config_text("{\"bogus\": 1}"), doctest::Contains("bogus"),
                         ConfigError);
    CHECK_THROWS_AS(parse_config_text("not json"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("{}"), ConfigError);  // tasks required

    json bad = base_config("x");
    bad["tasks"][0]["synthetic"]["num_classes"] = 0;
    CHECK_THROWS_WITH_AS(parse_config_text(bad.dump()), doctest::Contains("num_classes"),
                         ConfigError);

    json dup = base_config("x");
    dup["tasks"][1]["name"] = "t1";
    CHECK_THROWS_WITH_AS(parse_config_text(dup.dump()), doctest::Contains("duplicate"),
                         ConfigError);

    json bad_order = base_config("x");
    bad_order["orders"] = {{"t1", "t1"}};
    CHECK_THROWS_AS(parse_config_text(bad_order.dump()), ConfigError);

    // defaults fill in
    const auto cfg = parse_config_text(base_config("x").dump());
    CHECK(cfg.orders.size() == 1);
    CHECK(cfg.orders[0] == std::vector<std::string>{"t1", "t2"});
    CHECK(cfg.hyper.prior_sigma == 1.0);
    CHECK(cfg.split_ratios[0] == 0.8);
}

TEST_CASE("effective config round-trips through the parser") {
    const auto cfg = parse_config_text(base_config("somewhere").dump());
    const auto cfg2 = parse_config_text(effective_config_json(cfg));
    CHECK(effective_config_json(cfg) == effective_config_json(cfg2));
}

TEST_CASE("gen writes deterministic csvs and invalid configs exit 1") {
    Workspace ws;
    const std::string cfg_path = kWork + "/gen.json";
    write_file(cfg_path, base_config(kWork + "/out_gen").dump());

    REQUIRE(run_cmd("gen --config " + cfg_path) == 0);
    const std::string t1_first = read_file(kWork + "/out_gen/t1.csv");
    const std::string t2_first = read_file(kWork + "/out_gen/t2.csv");
    CHECK(t1_first.substr(0, 11) == "label,x0,x1");

    REQUIRE(run_cmd("gen --config " + cfg_path) == 0);
    CHECK(read_file(kWork + "/out_gen/t1.csv") == t1_first);
    CHECK(read_file(kWork + "/out_gen/t2.csv") == t2_first);

    json bad = base_config(kWork + "/out_gen");
    bad["tasks"][0]["synthetic"]["num_classes"] = 0;
    write_file(kWork + "/bad.json", bad.dump());
    CHECK(run_cmd("gen --config " + kWork + "/bad.json") == 1);

    CHECK(run_cmd("gen --config " + kWork + "/does_not_exist.json") == 1);
    CHECK(run_cmd("definitely-not-a-command") == 1);
}

TEST_CASE("run produces deterministic documents and reruns from its own config") {
    Workspace ws;
    const std::string cfg_path = kWork + "/run.json";
    write_file(cfg_path, base_config(kWork + "/out_run").dump());

    REQUIRE(run_cmd("run --config " + cfg_path) == 0);
    const std::string doc_path = kWork + "/out_run/run_t1-t2_seed7.json";
    const std::string first = read_file(doc_path);
    const std::string ckpt_first = read_file(kWork + "/out_run/run_t1-t2_seed7_ckpt.json");

    REQUIRE(run_cmd("run --config " + cfg_path) == 0);
    CHECK(read_file(doc_path) == first);
    CHECK(read_file(kWork + "/out_run/run_t1-t2_seed7_ckpt.json") == ckpt_first);

    // the embedded effective config reproduces the document
    const json doc = json::parse(first);
    REQUIRE(doc.contains("config"));
    write_file(kWork + "/extracted.json", doc.at("config").dump());
    REQUIRE(run_cmd("run --config " + kWork + "/extracted.json") == 0);
    CHECK(read_file(doc_path) == first);

    // structure: 2x2 lower-triangular matrices and per-k metrics
    CHECK(doc.at("val_accuracy").size() == 2);
    CHECK(doc.at("val_accuracy")[1].size() == 2);
    CHECK(doc.at("metrics").at("val").at("average_accuracy").size() == 2);
    CHECK(doc.at("references").size() == 2);
}

TEST_CASE("run with --keep-checkpoints retains per-task posteriors") {
    Workspace ws;
    const std::string cfg_path = kWork + "/keep.json";
    write_file(cfg_path, base_config(kWork + "/out_keep").dump());
    REQUIRE(run_cmd("run --config " + cfg_path + " --keep-checkpoints") == 0);
    CHECK(fs::exists(kWork + "/out_keep/run_t1-t2_seed7_ckpt.json"));
    CHECK(fs::exists(kWork + "/out_keep/run_t1-t2_seed7_ckpt_k1.json"));
    CHECK(fs::exists(kWork + "/out_keep/run_t1-t2_seed7_ckpt_k2.json"));

    // the k=2 checkpoint is the final posterior
    CHECK(read_file(kWork + "/out_keep/run_t1-t2_seed7_ckpt_k2.json") ==
          read_file(kWork + "/out_keep/run_t1-t2_seed7_ckpt.json"));
}

TEST_CASE("run with a missing dataset file exits 2") {
    Workspace ws;
    json cfg = base_config(kWork + "/out_miss");
    cfg["tasks"][0] = {{"name", "t1"}, {"path", kWork + "/no_such.csv"}};
    write_file(kWork + "/miss.json", cfg.dump());
    CHECK(run_cmd("run --config " + kWork + "/miss.json") == 2);
}

TEST_CASE("numeric blow-up exits 3 and bad stats input exits 2") {
    Workspace ws;
    json cfg = base_config(kWork + "/out_num");
    cfg["hyper"]["learning_rate"] = 1000.0;  // drives sigma to overflow
    write_file(kWork + "/num.json", cfg.dump());
    CHECK(run_cmd("run --config " + kWork + "/num.json") == 3);

    json ok_cfg = base_config(kWork + "/out_num");
    write_file(kWork + "/ok.json", ok_cfg.dump());
    CHECK(run_cmd("stats --config " + kWork + "/ok.json --input " + kWork +
                  "/missing.csv") == 2);
}

TEST_CASE("singleton grid equals the plain run") {
    Workspace ws;
    const std::string cfg_path = kWork + "/single.json";
    write_file(cfg_path, base_config(kWork + "/out_single").dump());

    REQUIRE(run_cmd("run --config " + cfg_path) == 0);
    REQUIRE(run_cmd("grid --config " + cfg_path) == 0);

    const json run_doc = json::parse(read_file(kWork + "/out_single/run_t1-t2_seed7.json"));
    const json grid_doc = json::parse(read_file(kWork + "/out_single/grid_t1-t2_seed7.json"));

    CHECK(grid_doc.at("cells").size() == 1);
    CHECK(grid_doc.at("cells")[0].at("val_accuracy") == run_doc.at("val_accuracy"));
    CHECK(grid_doc.at("cells")[0].at("test_accuracy") == run_doc.at("test_accuracy"));
    CHECK(grid_doc.at("references") == run_doc.at("references"));

    const auto& best = grid_doc.at("best");
    const auto& val_metrics = run_doc.at("metrics").at("val");
    REQUIRE(best.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(best[k].at("average_accuracy").get<double>() ==
              val_metrics.at("average_accuracy")[k].get<double>());
        CHECK(best[k].at("combined").get<double>() ==
              val_metrics.at("combined")[k].get<double>());
    }
}

TEST_CASE("grid outputs are identical across thread counts") {
    Workspace ws;
    json cfg = base_config(kWork + "/out_thr");
    cfg["grid"] = {{"learning_rates", {0.005, 0.01}}, {"betas", {0.01, 0.5}}};
    write_file(kWork + "/thr.json", cfg.dump());

    REQUIRE(run_cmd("grid --config " + kWork + "/thr.json --threads 1") == 0);
    const std::string doc = read_file(kWork + "/out_thr/grid_t1-t2_seed7.json");
    const std::string cells = read_file(kWork + "/out_thr/grid_t1-t2_seed7_cells.csv");

    REQUIRE(run_cmd("grid --config " + kWork + "/thr.json --threads 2") == 0);
    CHECK(read_file(kWork + "/out_thr/grid_t1-t2_seed7.json") == doc);
    CHECK(read_file(kWork + "/out_thr/grid_t1-t2_seed7_cells.csv") == cells);

    // per-cell CSV cardinality: 4 cells x 2 splits x 2 k-rows, plus the header
    std::size_t lines = 0;
    for (char c : cells)
        if (c == '\n') ++lines;
    CHECK(lines == 1 + 4 * 2 * 2);
}

TEST_CASE("uncertainty and stats pipeline") {
    Workspace ws;
    json cfg = base_config(kWork + "/out_unc");
    // train long enough that the separable tasks are classified confidently
    cfg["hyper"]["epochs"] = 60;
    cfg["hyper"]["batch_size"] = 16;
    cfg["hyper"]["s_test"] = 25;
    const std::string cfg_path = kWork + "/unc.json";
    write_file(cfg_path, cfg.dump());

    REQUIRE(run_cmd("run --config " + cfg_path) == 0);
    const std::string ckpt = kWork + "/out_unc/run_t1-t2_seed7_ckpt.json";

    REQUIRE(run_cmd("uncertainty --config " + cfg_path + " --checkpoint " + ckpt) == 0);
    const std::string csv_path = kWork + "/out_unc/uncertainty_run_t1-t2_seed7_ckpt.csv";
    const std::string csv = read_file(csv_path);
    CHECK(csv.substr(0, 9) == "sample_id");
    // 2 tasks x 8 test samples each (40 per class x 2 -> 80 total, 10% test)
    std::size_t lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == 1 + 2 * 8);

    // a no-op gate accepts everything; a zero gate rejects everything
    REQUIRE(run_cmd("uncertainty --config " + cfg_path + " --checkpoint " + ckpt +
                    " --entropy-threshold 1e9") == 0);
    const json all_in = json::parse(
        read_file(kWork + "/out_unc/uncertainty_run_t1-t2_seed7_ckpt_summary.json"));
    for (const auto& task : all_in.at("per_task")) {
        CHECK(task.at("rejected").get<int>() == 0);
        CHECK(task.at("accuracy_accepted").get<double>() ==
              task.at("accuracy_all").get<double>());
    }

    REQUIRE(run_cmd("uncertainty --config " + cfg_path + " --checkpoint " + ckpt +
                    " --entropy-threshold 0") == 0);
    const json none_in = json::parse(
        read_file(kWork + "/out_unc/uncertainty_run_t1-t2_seed7_ckpt_summary.json"));
    for (const auto& task : none_in.at("per_task")) {
        CHECK(task.at("accepted").get<int>() == 0);
        CHECK(task.at("accuracy_accepted").is_null());
    }

    // stats table over the csv; idempotent
    REQUIRE(run_cmd("stats --config " + cfg_path + " --input " + csv_path +
                    " --order t1-t2") == 0);
    const std::string stats_csv =
        read_file(kWork + "/out_unc/stats_uncertainty_run_t1-t2_seed7_ckpt.csv");
    CHECK(stats_csv.find("entropy") != std::string::npos);
    REQUIRE(run_cmd("stats --config " + cfg_path + " --input " + csv_path +
                    " --order t1-t2") == 0);
    CHECK(read_file(kWork + "/out_unc/stats_uncertainty_run_t1-t2_seed7_ckpt.csv") ==
          stats_csv);

    // with such separable tasks everything is usually correct -> rows surface
    // insufficient-data instead of a p-value
    const json stats_doc = json::parse(
        read_file(kWork + "/out_unc/stats_uncertainty_run_t1-t2_seed7_ckpt.json"));
    CHECK(stats_doc.at("rows").size() == 4);  // 2 tasks x 2 measures
    bool any_rows = false;
    for (const auto& row : stats_doc.at("rows")) {
        any_rows = true;
        CHECK((row.at("note") == "" || row.at("note") == "insufficient-data" ||
               row.at("note") == "degenerate-input"));
    }
    CHECK(any_rows);
}
