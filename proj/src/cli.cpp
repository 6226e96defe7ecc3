#include "bvcl/cli.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include "bvcl/checkpoint.hpp"
#include "bvcl/error.hpp"
#include "bvcl/inference.hpp"
#include "bvcl/stats.hpp"

namespace bvcl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int log_level() {
    static const int level = [] {
        const char* env = std::getenv("BVCL_LOG");
        if (!env) return 1;
        const std::string v = env;
        if (v == "quiet") return 0;
        if (v == "debug") return 2;
        return 1;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::fprintf(stderr, "[bvcl] %s\n", msg.c_str());
}

void log_debug(const std::string& msg) {
    if (log_level() >= 2) std::fprintf(stderr, "[bvcl] %s\n", msg.c_str());
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!allowed.contains(key))
            throw ConfigError("config: unknown key '" + key + "' in " + where);
    }
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
    return true;
}

SyntheticTaskSpec parse_synthetic(const json& j, const std::string& name,
                                  const std::string& where) {
    check_keys(j, {"num_classes", "samples_per_class", "feature_dim", "cluster_separation",
                   "cluster_scale", "seed"},
               where);
    SyntheticTaskSpec spec;
    spec.name = name;
    try {
        spec.num_classes = j.at("num_classes").get<std::size_t>();
        spec.samples_per_class = j.at("samples_per_class").get<std::size_t>();
        spec.feature_dim = j.at("feature_dim").get<std::size_t>();
        spec.cluster_separation = j.at("cluster_separation").get<double>();
        spec.cluster_scale = j.at("cluster_scale").get<double>();
        spec.seed = j.value("seed", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw ConfigError("config: " + where + ": " + e.what());
    }
    if (spec.num_classes < 1) throw ConfigError("config: " + where + ".num_classes must be >= 1");
    if (spec.samples_per_class < 1)
        throw ConfigError("config: " + where + ".samples_per_class must be >= 1");
    if (spec.feature_dim < 1) throw ConfigError("config: " + where + ".feature_dim must be >= 1");
    if (!(spec.cluster_scale > 0))
        throw ConfigError("config: " + where + ".cluster_scale must be > 0");
    if (!(spec.cluster_separation >= 0))
        throw ConfigError("config: " + where + ".cluster_separation must be >= 0");
    return spec;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    check_keys(j, {"tasks", "orders", "architecture", "hyper", "grid", "seeds", "split_ratios",
                   "split_seed", "threads", "output_dir", "keep_checkpoints"},
               "top level");

    ExperimentConfig cfg;
    try {
        if (!j.contains("tasks") || !j.at("tasks").is_array() || j.at("tasks").empty())
            throw ConfigError("config: tasks must be a non-empty array");
        std::set<std::string> names;
        for (std::size_t i = 0; i < j.at("tasks").size(); ++i) {
            const auto& tj = j.at("tasks")[i];
            const std::string where = "tasks[" + std::to_string(i) + "]";
            check_keys(tj, {"name", "path", "synthetic"}, where);
            TaskSource src;
            src.name = tj.value("name", std::string());
            if (!valid_name(src.name))
                throw ConfigError("config: " + where +
                                  ".name must be non-empty [A-Za-z0-9_-]");
            if (!names.insert(src.name).second)
                throw ConfigError("config: duplicate task name '" + src.name + "'");
            const bool has_path = tj.contains("path");
            const bool has_syn = tj.contains("synthetic");
            if (has_path == has_syn)
                throw ConfigError("config: " + where +
                                  " needs exactly one of 'path' or 'synthetic'");
            if (has_path) {
                src.path = tj.at("path").get<std::string>();
                if (src.path.empty()) throw ConfigError("config: " + where + ".path is empty");
            } else {
                src.synthetic =
                    parse_synthetic(tj.at("synthetic"), src.name, where + ".synthetic");
            }
            cfg.tasks.push_back(std::move(src));
        }

        if (j.contains("orders")) {
            if (!j.at("orders").is_array() || j.at("orders").empty())
                throw ConfigError("config: orders must be a non-empty array of name arrays");
            for (const auto& oj : j.at("orders")) {
                auto order = oj.get<std::vector<std::string>>();
                if (order.size() != cfg.tasks.size())
                    throw ConfigError("config: each order must list every task exactly once");
                std::set<std::string> seen;
                for (const auto& n : order) {
                    if (!names.contains(n))
                        throw ConfigError("config: order references unknown task '" + n + "'");
                    if (!seen.insert(n).second)
                        throw ConfigError("config: order repeats task '" + n + "'");
                }
                cfg.orders.push_back(std::move(order));
            }
        } else {
            std::vector<std::string> order;
            for (const auto& t : cfg.tasks) order.push_back(t.name);
            cfg.orders.push_back(std::move(order));
        }

        if (j.contains("architecture")) {
            check_keys(j.at("architecture"), {"hidden"}, "architecture");
            cfg.hidden = j.at("architecture").at("hidden").get<std::vector<std::size_t>>();
            if (cfg.hidden.empty())
                throw ConfigError("config: architecture.hidden must be non-empty");
            for (std::size_t h : cfg.hidden)
                if (h == 0) throw ConfigError("config: architecture.hidden entries must be > 0");
        }

        if (j.contains("hyper")) {
            const auto& hj = j.at("hyper");
            check_keys(hj, {"learning_rate", "beta", "epochs", "batch_size", "s_train", "s_test",
                            "prior_sigma", "init_log_sigma", "adam_beta1", "adam_beta2",
                            "adam_epsilon"},
                       "hyper");
            HyperParams& h = cfg.hyper;
            h.learning_rate = hj.value("learning_rate", h.learning_rate);
            h.beta = hj.value("beta", h.beta);
            h.epochs = hj.value("epochs", h.epochs);
            h.batch_size = hj.value("batch_size", h.batch_size);
            h.s_train = hj.value("s_train", h.s_train);
            h.s_test = hj.value("s_test", h.s_test);
            h.prior_sigma = hj.value("prior_sigma", h.prior_sigma);
            h.init_log_sigma = hj.value("init_log_sigma", h.init_log_sigma);
            h.adam_beta1 = hj.value("adam_beta1", h.adam_beta1);
            h.adam_beta2 = hj.value("adam_beta2", h.adam_beta2);
            h.adam_epsilon = hj.value("adam_epsilon", h.adam_epsilon);
            try {
                h.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("config: ") + e.what());
            }
        }

        if (j.contains("grid")) {
            check_keys(j.at("grid"), {"learning_rates", "betas"}, "grid");
            cfg.grid.learning_rates =
                j.at("grid").at("learning_rates").get<std::vector<double>>();
            cfg.grid.betas = j.at("grid").at("betas").get<std::vector<double>>();
            try {
                cfg.grid.validate();
            } catch (const std::invalid_argument& e) {
                throw ConfigError(std::string("config: ") + e.what());
            }
        }

        if (j.contains("seeds")) {
            cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
            if (cfg.seeds.empty()) throw ConfigError("config: seeds must be non-empty");
        }
        if (j.contains("split_ratios")) {
            const auto r = j.at("split_ratios").get<std::vector<double>>();
            if (r.size() != 3) throw ConfigError("config: split_ratios needs 3 entries");
            cfg.split_ratios = {r[0], r[1], r[2]};
            const double sum = r[0] + r[1] + r[2];
            if (!(r[0] > 0 && r[1] > 0 && r[2] > 0) || std::fabs(sum - 1.0) > 1e-9)
                throw ConfigError("config: split_ratios must be positive and sum to 1");
        }
        cfg.split_seed = j.value("split_seed", cfg.split_seed);
        cfg.threads = j.value("threads", cfg.threads);
        if (cfg.threads < 0) throw ConfigError("config: threads must be >= 0");
        cfg.output_dir = j.value("output_dir", cfg.output_dir);
        if (cfg.output_dir.empty()) throw ConfigError("config: output_dir is empty");
        cfg.keep_checkpoints = j.value("keep_checkpoints", cfg.keep_checkpoints);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

namespace {

json hyper_json(const HyperParams& h) {
    return json{{"learning_rate", h.learning_rate},
                {"beta", h.beta},
                {"epochs", h.epochs},
                {"batch_size", h.batch_size},
                {"s_train", h.s_train},
                {"s_test", h.s_test},
                {"prior_sigma", h.prior_sigma},
                {"init_log_sigma", h.init_log_sigma},
                {"adam_beta1", h.adam_beta1},
                {"adam_beta2", h.adam_beta2},
                {"adam_epsilon", h.adam_epsilon}};
}

json config_json(const ExperimentConfig& cfg) {
    json tasks = json::array();
    for (const auto& t : cfg.tasks) {
        json tj{{"name", t.name}};
        if (t.synthetic) {
            tj["synthetic"] = {{"num_classes", t.synthetic->num_classes},
                               {"samples_per_class", t.synthetic->samples_per_class},
                               {"feature_dim", t.synthetic->feature_dim},
                               {"cluster_separation", t.synthetic->cluster_separation},
                               {"cluster_scale", t.synthetic->cluster_scale},
                               {"seed", t.synthetic->seed}};
        } else {
            tj["path"] = t.path;
        }
        tasks.push_back(tj);
    }
    // threads is normalized to 0 (auto): results never depend on it, and
    // output documents must be byte-identical across thread counts.
    return json{{"tasks", tasks},
                {"orders", cfg.orders},
                {"architecture", {{"hidden", cfg.hidden}}},
                {"hyper", hyper_json(cfg.hyper)},
                {"grid", {{"learning_rates", cfg.grid.learning_rates},
                          {"betas", cfg.grid.betas}}},
                {"seeds", cfg.seeds},
                {"split_ratios", {cfg.split_ratios[0], cfg.split_ratios[1], cfg.split_ratios[2]}},
                {"split_seed", cfg.split_seed},
                {"threads", 0},
                {"output_dir", cfg.output_dir},
                {"keep_checkpoints", cfg.keep_checkpoints}};
}

json matrix_json(const AccuracyMatrix& m) {
    json rows = json::array();
    for (const auto& r : m.rows) rows.push_back(r);
    return rows;
}

json references_json(const std::vector<ReferenceResult>& refs) {
    json out = json::array();
    for (const auto& r : refs)
        out.push_back(json{{"val_accuracy", r.val_accuracy},
                           {"test_accuracy", r.test_accuracy},
                           {"learning_rate", r.learning_rate},
                           {"beta", r.beta}});
    return out;
}

json report_json(const MetricsReport& rep) {
    return json{{"average_accuracy", rep.average_acc},
                {"forget", rep.forget_avg},
                {"intransigence", rep.intransig},
                {"combined", rep.combined},
                {"aggregate_forget", rep.aggregate_f}};
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write output file: " + path);
    out << text;
}

}  // namespace

std::string effective_config_json(const ExperimentConfig& cfg) {
    return config_json(cfg).dump(2);
}

std::vector<SplitDataset> prepare_tasks(const ExperimentConfig& cfg) {
    std::vector<SplitDataset> splits;
    const RandomStream split_base(cfg.split_seed, 0xda7a);
    for (std::size_t i = 0; i < cfg.tasks.size(); ++i) {
        const auto& src = cfg.tasks[i];
        TaskDataset ds = src.synthetic ? gen_synthetic_task(*src.synthetic)
                                       : load_dataset(src.path, src.name);
        RandomStream rs = split_base.derive(i);
        SplitDataset split = split_dataset(ds, cfg.split_ratios, rs.next_u64());
        splits.push_back(standardize_split(split));
        log_debug("task " + src.name + ": n=" + std::to_string(ds.size()) +
                  " d=" + std::to_string(ds.dim()) +
                  " classes=" + std::to_string(ds.num_classes));
    }
    return splits;
}

TaskSequence sequence_for_order(const ExperimentConfig& cfg,
                                const std::vector<SplitDataset>& splits,
                                const std::vector<std::string>& order) {
    std::vector<std::size_t> idx;
    for (const auto& name : order) {
        for (std::size_t i = 0; i < cfg.tasks.size(); ++i)
            if (cfg.tasks[i].name == name) {
                idx.push_back(i);
                break;
            }
    }
    return make_sequence(splits, idx);
}

namespace {

void cmd_gen(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    std::size_t written = 0;
    for (const auto& t : cfg.tasks) {
        if (!t.synthetic) continue;
        const TaskDataset ds = gen_synthetic_task(*t.synthetic);
        const std::string path = cfg.output_dir + "/" + t.name + ".csv";
        write_dataset_csv(ds, path);
        log_info("wrote " + path);
        ++written;
    }
    if (written == 0) log_info("gen: no synthetic tasks in config, nothing to do");
}

void cmd_run(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    const auto splits = prepare_tasks(cfg);
    const GridSpec singleton{{cfg.hyper.learning_rate}, {cfg.hyper.beta}};
    for (const auto& order : cfg.orders) {
        const TaskSequence seq = sequence_for_order(cfg, splits, order);
        for (const std::uint64_t seed : cfg.seeds) {
            log_info("run: order " + seq.label + " seed " + std::to_string(seed));
            // Salt 1 matches the first cell of a grid run, so a singleton grid
            // reproduces this record exactly.
            RunRecord rec = run_vcl(seq, cfg.hidden, cfg.hyper, seed, 1,
                                    cfg.keep_checkpoints);
            const auto refs = train_references(seq, cfg.hidden, singleton, cfg.hyper, seed);
            std::vector<double> a_star_val, a_star_test;
            for (const auto& r : refs) {
                a_star_val.push_back(r.val_accuracy);
                a_star_test.push_back(r.test_accuracy);
            }
            json doc{{"command", "run"},
                     {"order", rec.order_label},
                     {"seed", seed},
                     {"task_names", rec.task_names},
                     {"hyper", hyper_json(cfg.hyper)},
                     {"val_accuracy", matrix_json(rec.val_acc)},
                     {"test_accuracy", matrix_json(rec.test_acc)},
                     {"references", references_json(refs)},
                     {"metrics",
                      {{"val", report_json(build_report(rec.val_acc, a_star_val))},
                       {"test", report_json(build_report(rec.test_acc, a_star_test))}}},
                     {"config", config_json(cfg)}};
            const std::string stem =
                cfg.output_dir + "/run_" + rec.order_label + "_seed" + std::to_string(seed);
            write_text(stem + ".json", doc.dump(2) + "\n");
            save_checkpoint({rec.final_posterior, cfg.hyper, rec.task_names},
                            stem + "_ckpt.json");
            if (cfg.keep_checkpoints) {
                for (std::size_t k = 0; k < rec.checkpoints.size(); ++k)
                    save_checkpoint({rec.checkpoints[k], cfg.hyper, rec.task_names},
                                    stem + "_ckpt_k" + std::to_string(k + 1) + ".json");
            }
            log_info("wrote " + stem + ".json");
        }
    }
}

void cmd_grid(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    const auto splits = prepare_tasks(cfg);
    for (const auto& order : cfg.orders) {
        const TaskSequence seq = sequence_for_order(cfg, splits, order);
        for (const std::uint64_t seed : cfg.seeds) {
            log_info("grid: order " + seq.label + " seed " + std::to_string(seed) + " (" +
                     std::to_string(cfg.grid.learning_rates.size() * cfg.grid.betas.size()) +
                     " cells)");
            const GridResult result = grid_search(seq, cfg.hidden, cfg.grid, cfg.hyper, seed);

            json best = json::array();
            for (const auto& row : result.best)
                best.push_back(json{{"k", row.k},
                                    {"learning_rate", row.learning_rate},
                                    {"beta", row.beta},
                                    {"average_accuracy", row.average_acc},
                                    {"forget", row.forget_avg},
                                    {"intransigence", row.intransig},
                                    {"combined", row.combined}});
            std::vector<double> a_star_val, a_star_test;
            for (const auto& r : result.references) {
                a_star_val.push_back(r.val_accuracy);
                a_star_test.push_back(r.test_accuracy);
            }
            json cells = json::array();
            for (const auto& cell : result.cells)
                cells.push_back(json{
                    {"learning_rate", cell.learning_rate},
                    {"beta", cell.beta},
                    {"val_accuracy", matrix_json(cell.val_acc)},
                    {"test_accuracy", matrix_json(cell.test_acc)},
                    {"metrics",
                     {{"val", report_json(build_report(cell.val_acc, a_star_val))},
                      {"test", report_json(build_report(cell.test_acc, a_star_test))}}}});
            json doc{{"command", "grid"},   {"order", seq.label},
                     {"seed", seed},        {"references", references_json(result.references)},
                     {"best", best},        {"cells", cells},
                     {"config", config_json(cfg)}};
            const std::string stem =
                cfg.output_dir + "/grid_" + seq.label + "_seed" + std::to_string(seed);
            write_text(stem + ".json", doc.dump(2) + "\n");

            // Flat per-k rows per cell for beta-sweep plots.
            std::string csv =
                "order,seed,learning_rate,beta,split,k,average_accuracy,forget,"
                "intransigence,combined\n";
            for (const auto& cell : result.cells) {
                for (int split = 0; split < 2; ++split) {
                    const AccuracyMatrix& m = split == 0 ? cell.val_acc : cell.test_acc;
                    for (std::size_t k = 1; k <= m.tasks_seen(); ++k) {
                        const double ref = split == 0
                                               ? result.references[k - 1].val_accuracy
                                               : result.references[k - 1].test_accuracy;
                        const double a = average_accuracy(m, k);
                        const double f = forget(m, k).average;
                        const double i = intransigence(ref, m, k);
                        csv += seq.label + "," + std::to_string(seed) + "," +
                               fmt_double(cell.learning_rate) + "," + fmt_double(cell.beta) +
                               "," + (split == 0 ? "val" : "test") + "," + std::to_string(k) +
                               "," + fmt_double(a) + "," + fmt_double(f) + "," +
                               fmt_double(i) + "," + fmt_double(combined_metric(a, f, i)) +
                               "\n";
                    }
                }
            }
            write_text(stem + "_cells.csv", csv);

            std::string best_csv =
                "order,seed,k,learning_rate,beta,average_accuracy,forget,intransigence,"
                "combined\n";
            for (const auto& row : result.best)
                best_csv += seq.label + "," + std::to_string(seed) + "," +
                            std::to_string(row.k) + "," + fmt_double(row.learning_rate) + "," +
                            fmt_double(row.beta) + "," + fmt_double(row.average_acc) + "," +
                            fmt_double(row.forget_avg) + "," + fmt_double(row.intransig) + "," +
                            fmt_double(row.combined) + "\n";
            write_text(stem + "_best.csv", best_csv);
            log_info("wrote " + stem + ".json");
        }
    }
}

void cmd_uncertainty(const ExperimentConfig& cfg, const std::string& ckpt_path,
                     std::size_t samples, std::optional<double> entropy_threshold,
                     std::optional<double> mi_threshold) {
    fs::create_directories(cfg.output_dir);
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const auto splits = prepare_tasks(cfg);
    const std::size_t s = samples > 0 ? samples : ckpt.hyper.s_test;

    std::map<std::string, std::size_t> split_by_name;
    for (std::size_t i = 0; i < cfg.tasks.size(); ++i) split_by_name[cfg.tasks[i].name] = i;

    const std::size_t k_trained = ckpt.posterior.trained_heads.size();
    // evaluation noise keyed by the first configured seed
    const RandomStream noise_base(cfg.seeds.front(), 0x5eed);

    std::string csv =
        "sample_id,task,k_trained,true_label,predicted,correct,entropy_nats,"
        "mutual_information_nats\n";
    struct TaskSummary {
        std::size_t n = 0, accepted = 0, correct_all = 0, correct_accepted = 0;
    };
    std::map<std::string, TaskSummary> summaries;

    for (std::size_t head = 0; head < ckpt.task_names.size(); ++head) {
        if (!ckpt.posterior.trained_heads.contains(head)) continue;
        const std::string& task_name = ckpt.task_names[head];
        auto it = split_by_name.find(task_name);
        if (it == split_by_name.end())
            throw DataError("uncertainty: checkpoint task '" + task_name +
                            "' is not in the config");
        const TaskDataset& test = splits[it->second].test;
        if (test.dim() != ckpt.posterior.arch.input_dim)
            throw DataError("uncertainty: test set dimension does not match checkpoint");
        const auto records =
            uncertainty_report(ckpt.posterior, head, test, s, noise_base.derive(head));
        TaskSummary& sum = summaries[task_name];
        for (const auto& rec : records) {
            csv += std::to_string(rec.sample_index) + "," + task_name + "," +
                   std::to_string(k_trained) + "," + std::to_string(rec.true_label) + "," +
                   std::to_string(rec.predicted) + "," + (rec.correct ? "1" : "0") + "," +
                   fmt_double(rec.entropy) + "," + fmt_double(rec.mutual_information) + "\n";
            ++sum.n;
            if (rec.correct) ++sum.correct_all;
            const bool accept = (!entropy_threshold || rec.entropy <= *entropy_threshold) &&
                                (!mi_threshold || rec.mutual_information <= *mi_threshold);
            if (accept) {
                ++sum.accepted;
                if (rec.correct) ++sum.correct_accepted;
            }
        }
    }

    const std::string stem_name = fs::path(ckpt_path).stem().string();
    const std::string csv_path = cfg.output_dir + "/uncertainty_" + stem_name + ".csv";
    write_text(csv_path, csv);
    log_info("wrote " + csv_path);

    if (entropy_threshold || mi_threshold) {
        json per_task = json::array();
        for (const auto& [name, sum] : summaries) {
            json tj{{"task", name},
                    {"n", sum.n},
                    {"accepted", sum.accepted},
                    {"rejected", sum.n - sum.accepted},
                    {"accuracy_all",
                     sum.n ? static_cast<double>(sum.correct_all) / sum.n : 0.0}};
            if (sum.accepted > 0)
                tj["accuracy_accepted"] =
                    static_cast<double>(sum.correct_accepted) / sum.accepted;
            else
                tj["accuracy_accepted"] = nullptr;
            per_task.push_back(tj);
        }
        json doc{{"command", "uncertainty"},
                 {"checkpoint", ckpt_path},
                 {"samples", s},
                 {"per_task", per_task},
                 {"config", config_json(cfg)}};
        if (entropy_threshold) doc["entropy_threshold"] = *entropy_threshold;
        if (mi_threshold) doc["mi_threshold"] = *mi_threshold;
        const std::string sum_path =
            cfg.output_dir + "/uncertainty_" + stem_name + "_summary.json";
        write_text(sum_path, doc.dump(2) + "\n");
        log_info("wrote " + sum_path);
    }
}

struct UncertaintyRow {
    std::string task;
    std::size_t k_trained = 0;
    bool correct = false;
    double entropy = 0.0;
    double mi = 0.0;
};

std::vector<UncertaintyRow> read_uncertainty_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open uncertainty CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty uncertainty CSV: " + path);
    std::map<std::string, std::size_t> col;
    {
        std::stringstream ss(line);
        std::string tok;
        std::size_t i = 0;
        while (std::getline(ss, tok, ',')) col[tok] = i++;
    }
    for (const char* need : {"task", "k_trained", "correct", "entropy_nats",
                             "mutual_information_nats"})
        if (!col.contains(need))
            throw DataError(path + ": missing column '" + std::string(need) + "'");

    std::vector<UncertaintyRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++line_no;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) cells.push_back(tok);
        if (cells.size() < col.size())
            throw DataError(path + ": line " + std::to_string(line_no) + ": short row");
        UncertaintyRow row;
        try {
            row.task = cells[col["task"]];
            row.k_trained = std::stoul(cells[col["k_trained"]]);
            row.correct = cells[col["correct"]] == "1";
            row.entropy = std::stod(cells[col["entropy_nats"]]);
            row.mi = std::stod(cells[col["mutual_information_nats"]]);
        } catch (const std::exception&) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": malformed value");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void cmd_stats(const ExperimentConfig& cfg, const std::string& input_csv,
               const std::string& order) {
    fs::create_directories(cfg.output_dir);
    const auto rows = read_uncertainty_csv(input_csv);

    std::map<std::pair<std::size_t, std::string>, std::vector<UncertaintyRow>> groups;
    for (const auto& row : rows) groups[{row.k_trained, row.task}].push_back(row);

    std::string csv =
        "order,k,task,measure,n_correct,n_wrong,median_correct,median_wrong,H,p,note\n";
    json jrows = json::array();
    for (const auto& [key, group] : groups) {
        for (const auto measure :
             {UncertaintyMeasure::Entropy, UncertaintyMeasure::MutualInformation}) {
            const std::string mname =
                measure == UncertaintyMeasure::Entropy ? "entropy" : "mutual_information";
            std::vector<UncertaintyRecord> recs(group.size());
            for (std::size_t i = 0; i < group.size(); ++i) {
                recs[i].correct = group[i].correct;
                recs[i].entropy = group[i].entropy;
                recs[i].mutual_information = group[i].mi;
            }
            std::string note;
            json jrow{{"order", order},  {"k", key.first},       {"task", key.second},
                      {"measure", mname}};
            std::string csv_tail;
            try {
                const SeparationResult sep = uncertainty_separation(recs, measure);
                jrow["n_correct"] = sep.n_correct;
                jrow["n_wrong"] = sep.n_wrong;
                jrow["median_correct"] = sep.median_correct;
                jrow["median_wrong"] = sep.median_wrong;
                jrow["H"] = sep.kw.statistic;
                jrow["p"] = sep.kw.p_value;
                if (sep.ks_correct) jrow["ks_p_correct"] = sep.ks_correct->p_value;
                if (sep.ks_wrong) jrow["ks_p_wrong"] = sep.ks_wrong->p_value;
                csv_tail = std::to_string(sep.n_correct) + "," + std::to_string(sep.n_wrong) +
                           "," + fmt_double(sep.median_correct) + "," +
                           fmt_double(sep.median_wrong) + "," + fmt_double(sep.kw.statistic) +
                           "," + fmt_double(sep.kw.p_value) + ",";
            } catch (const DataError& e) {
                note = "insufficient-data";
                jrow["error"] = e.what();
                csv_tail = ",,,,,," + note;
            } catch (const DegenerateInputError& e) {
                note = "degenerate-input";
                jrow["error"] = e.what();
                csv_tail = ",,,,,," + note;
            }
            if (note.empty()) csv_tail += note;
            jrow["note"] = note;
            jrows.push_back(jrow);
            csv += order + "," + std::to_string(key.first) + "," + key.second + "," + mname +
                   "," + csv_tail + "\n";
        }
    }

    json doc{{"command", "stats"},
             {"input", input_csv},
             {"order", order},
             {"rows", jrows},
             {"method",
              {{"ks",
                "Kolmogorov-Smirnov vs normal with sample-estimated mean/std; asymptotic p at "
                "sqrt(n)*D (anti-conservative with estimated parameters; gate only)"},
               {"kw", "two-group Kruskal-Wallis, mid-ranks, tie-corrected, chi-squared df=1"}}}};
    const std::string stem_name = fs::path(input_csv).stem().string();
    const std::string csv_path = cfg.output_dir + "/stats_" + stem_name + ".csv";
    write_text(csv_path, csv);
    write_text(cfg.output_dir + "/stats_" + stem_name + ".json", doc.dump(2) + "\n");
    log_info("wrote " + csv_path);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"beta-weighted variational continual learning engine"};
    app.require_subcommand(1);

    std::string config_path, out_override, ckpt_path, stats_input, stats_order = "-";
    std::uint64_t seed_override = 0;
    bool has_seed_override = false;
    int threads_override = -1;
    bool keep_ckpt_flag = false;
    std::size_t samples = 0;
    double entropy_threshold = 0.0, mi_threshold = 0.0;
    bool has_eth = false, has_mth = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", config_path, "experiment config JSON");
        if (needs_config) opt->required();
        cmd->add_option("--out", out_override, "output directory override");
        cmd->add_option("--seed", seed_override, "single-seed override")
            ->each([&](const std::string&) { has_seed_override = true; });
        cmd->add_option("--threads", threads_override, "worker thread count (0 = all cores)");
        cmd->add_flag("--keep-checkpoints", keep_ckpt_flag, "retain per-task checkpoints");
    };

    CLI::App* gen = app.add_subcommand("gen", "write synthetic task CSVs");
    add_common(gen, true);
    CLI::App* run = app.add_subcommand("run", "single continual-learning run per order/seed");
    add_common(run, true);
    CLI::App* grid = app.add_subcommand("grid", "hyperparameter grid search");
    add_common(grid, true);
    CLI::App* unc = app.add_subcommand("uncertainty", "per-sample uncertainty report");
    add_common(unc, true);
    unc->add_option("--checkpoint", ckpt_path, "posterior checkpoint")->required();
    unc->add_option("--samples", samples, "MC draws (default: checkpoint s_test)");
    unc->add_option("--entropy-threshold", entropy_threshold, "accept if entropy <= t")
        ->each([&](const std::string&) { has_eth = true; });
    unc->add_option("--mi-threshold", mi_threshold, "accept if mutual information <= t")
        ->each([&](const std::string&) { has_mth = true; });
    CLI::App* stats = app.add_subcommand("stats", "uncertainty separation tests");
    add_common(stats, true);
    stats->add_option("--input", stats_input, "uncertainty CSV")->required();
    stats->add_option("--order", stats_order, "order label for the output table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        ExperimentConfig cfg = parse_config_file(config_path);
        if (!out_override.empty()) cfg.output_dir = out_override;
        if (has_seed_override) cfg.seeds = {seed_override};
        if (threads_override >= 0) cfg.threads = threads_override;
        if (keep_ckpt_flag) cfg.keep_checkpoints = true;
#ifdef _OPENMP
        if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif
        if (gen->parsed()) cmd_gen(cfg);
        if (run->parsed()) cmd_run(cfg);
        if (grid->parsed()) cmd_grid(cfg);
        if (unc->parsed())
            cmd_uncertainty(cfg, ckpt_path, samples,
                            has_eth ? std::optional<double>(entropy_threshold) : std::nullopt,
                            has_mth ? std::optional<double>(mi_threshold) : std::nullopt);
        if (stats->parsed()) cmd_stats(cfg, stats_input, stats_order);
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace bvcl
