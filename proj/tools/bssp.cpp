// bssp — design analysis, balance subsampling, and stability experiments on
// binary-featured data.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bssp/bssp.hpp"
#include "bssp/json_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// temp file + rename, so readers never observe a half-written file
void write_file_atomic(const std::string& path, const std::string& contents) {
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw bssp::io_error("cannot open '" + tmp.string() + "' for writing");
        out << contents;
        if (!out) throw bssp::io_error("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

std::vector<std::vector<std::size_t>> parse_words(const std::string& spec) {
    std::vector<std::vector<std::size_t>> words;
    std::stringstream groups(spec);
    std::string group;
    while (std::getline(groups, group, ';')) {
        std::vector<std::size_t> word;
        std::stringstream items(group);
        std::string item;
        while (std::getline(items, item, ','))
            if (!item.empty()) word.push_back(std::stoul(item));
        words.push_back(word);
    }
    return words;
}

std::size_t thread_cap() {
    if (const char* env = std::getenv("BSSP_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void print_config(const json& config) {
    std::cout << "config " << config.dump() << '\n';
}

int cmd_design_gen(std::size_t full_d, std::size_t base, const std::string& words_spec, bool use_template,
                   const std::string& encoding, const std::string& out_path) {
    bssp::Design design;
    json config{{"command", "design gen"}, {"encoding", encoding}, {"out", out_path}, {"version", bssp::kVersion}};
    if (use_template) {
        design = bssp::reference_template_128();
        config["template"] = "reference-128";
    } else if (full_d > 0) {
        design = bssp::full_factorial(full_d);
        config["full"] = full_d;
    } else {
        if (base == 0) throw bssp::validation_error("need --full, --base/--words, or --reference-template");
        const auto words = parse_words(words_spec);
        design = bssp::regular_ffd(base, words);
        config["base"] = base;
        config["words"] = words_spec;
    }
    print_config(config);
    std::ostringstream buf;
    bssp::write_design(buf, design, encoding);
    write_file_atomic(out_path, buf.str());
    std::cout << "wrote " << design.runs() << "x" << design.factors() << " design to " << out_path << '\n';
    return 0;
}

int cmd_design_analyze(const std::string& path) {
    print_config({{"command", "design analyze"}, {"file", path}, {"version", bssp::kVersion}});
    const bssp::Design design = bssp::read_design_file(path);
    std::cout << bssp::design_analysis_json(design).dump(2) << '\n';
    return 0;
}

int cmd_subsample(const std::string& data_path, const std::string& design_path, const std::string& outcome_column,
                  const std::string& strategy, std::size_t budget, std::uint64_t seed, double rho,
                  const std::string& out_prefix) {
    bssp::SearchConfig search;
    search.budget = budget;
    search.seed = seed;
    if (strategy == "exhaustive-lexicographic") search.strategy = bssp::SearchStrategy::exhaustive_lexicographic;
    else if (strategy == "random-shuffle") search.strategy = bssp::SearchStrategy::random_shuffle;
    else throw bssp::validation_error("unknown strategy '" + strategy + "'");
    bssp::BalanceConfig balance;
    balance.rho = rho;

    print_config({{"command", "subsample"},
                  {"data", data_path},
                  {"design", design_path},
                  {"strategy", strategy},
                  {"budget", budget},
                  {"seed", seed},
                  {"rho", rho},
                  {"out", out_prefix},
                  {"version", bssp::kVersion}});

    std::ifstream data_in(data_path);
    if (!data_in) throw bssp::error("ingestion", "cannot open '" + data_path + "'");
    const bssp::Dataset data = bssp::read_binary_dataset_csv(data_in, outcome_column);
    if (data.size() == 0) throw bssp::error("ingestion", "'" + data_path + "' has no data rows");
    const bssp::Design tmpl = bssp::read_design_file(design_path);

    const bssp::SubsampleResult result = bssp::ffd_subsample(data.x, tmpl, search, balance);

    json meta = bssp::to_json(result);
    meta["seed"] = seed;
    meta["version"] = bssp::kVersion;
    write_file_atomic(out_prefix + ".json", meta.dump(2) + "\n");

    bssp::Dataset subdata;
    subdata.x = data.x.select_rows(result.selected_indices);
    subdata.feature_names = data.feature_names;
    subdata.binary_outcome = data.binary_outcome;
    for (std::size_t idx : result.selected_indices) subdata.y.push_back(data.y[idx]);
    std::ostringstream csv;
    bssp::write_dataset_csv(csv, subdata);
    write_file_atomic(out_prefix + ".csv", csv.str());

    std::cout << "matched " << result.matched_count << "/" << tmpl.runs() << " design rows, psi = " << result.psi
              << '\n';
    return 0;
}

int cmd_data_gen(const std::string& task, std::size_t n, double r, std::uint64_t seed, const std::string& out_prefix) {
    json config{{"command", "data gen"}, {"task", task}, {"n", n}, {"r", r}, {"seed", seed},
                {"out", out_prefix}, {"version", bssp::kVersion}};
    print_config(config);
    bssp::Dataset data;
    if (task == "regression") {
        bssp::RegressionGenConfig cfg;
        cfg.n = n;
        cfg.bias_rate = r;
        cfg.seed = seed;
        data = bssp::gen_regression(cfg);
    } else if (task == "classification") {
        bssp::ClassificationGenConfig cfg;
        cfg.n = n;
        cfg.bias_rate = r;
        cfg.seed = seed;
        data = bssp::gen_classification(cfg);
    } else {
        throw bssp::validation_error("unknown task '" + task + "'");
    }
    std::ostringstream csv;
    bssp::write_dataset_csv(csv, data);
    write_file_atomic(out_prefix + ".csv", csv.str());
    write_file_atomic(out_prefix + ".json", bssp::dataset_metadata_json(data, config).dump(2) + "\n");
    std::cout << "wrote " << data.size() << " rows to " << out_prefix << ".csv\n";
    return 0;
}

int cmd_data_ingest(const std::string& csv_path, const std::string& outcome, const std::string& environment,
                    const std::string& out_prefix) {
    json config{{"command", "data ingest"}, {"csv", csv_path}, {"outcome", outcome},
                {"environment", environment}, {"out", out_prefix}, {"version", bssp::kVersion}};
    print_config(config);
    bssp::IngestConfig cfg;
    cfg.outcome_column = outcome;
    if (!environment.empty()) cfg.environment_column = environment;
    const bssp::IngestResult result = bssp::ingest_csv_file(csv_path, cfg);
    for (const auto& env : result.environments) {
        const std::string tag = env.environment_label ? "." + *env.environment_label : "";
        std::ostringstream csv;
        bssp::write_dataset_csv(csv, env, outcome);
        write_file_atomic(out_prefix + tag + ".csv", csv.str());
        write_file_atomic(out_prefix + tag + ".json",
                          bssp::dataset_metadata_json(env, config, &result.report).dump(2) + "\n");
    }
    std::cout << "wrote " << result.environments.size() << " environment file(s); kept "
              << result.report.kept_features.size() << " features, dropped "
              << result.report.dropped_features.size() << " features and " << result.report.dropped_rows
              << " rows\n";
    return 0;
}

struct ExperimentArgs {
    std::string task = "regression";
    bool paper_regression = false;
    bool paper_classification = false;
    double r_train = 2.0;
    std::vector<double> r_tests;
    std::size_t reps = 50;
    std::size_t n = 2000;
    std::uint64_t seed = 0;
    std::vector<std::string> methods = {"baseline", "gbr", "bssp"};
    std::string template_path;
    double rho = 0.9;
    std::size_t budget = 10000;
    std::string strategy = "random-shuffle";
    std::optional<double> fixed_lambda;
    std::string out_dir = "bssp-out";
};

int cmd_experiment(const ExperimentArgs& args) {
    bssp::ExperimentConfig cfg;
    cfg.seed = args.seed;
    cfg.replications = args.reps;
    cfg.n = args.n;
    cfg.threads = thread_cap();
    cfg.balance.rho = args.rho;
    cfg.search.budget = args.budget;
    if (args.strategy == "exhaustive-lexicographic") cfg.search.strategy = bssp::SearchStrategy::exhaustive_lexicographic;
    else if (args.strategy == "random-shuffle") cfg.search.strategy = bssp::SearchStrategy::random_shuffle;
    else throw bssp::validation_error("unknown strategy '" + args.strategy + "'");
    cfg.fixed_lambda = args.fixed_lambda;

    std::string task = args.task;
    if (args.paper_regression) task = "regression";
    if (args.paper_classification) task = "classification";
    if (task == "regression") cfg.task = bssp::Task::regression;
    else if (task == "classification") cfg.task = bssp::Task::classification;
    else throw bssp::validation_error("unknown task '" + task + "'");

    if (args.paper_regression) {
        cfg.r_train = 2.0;
        cfg.r_tests = {-3.0, -2.0, -1.7, -1.5, -1.3, 1.3, 1.5, 1.7, 2.0, 3.0};
    } else if (args.paper_classification) {
        cfg.r_train = 0.85;
        cfg.r_tests = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0 - 1e-9};
    }
    if (!args.paper_regression && !args.paper_classification) cfg.r_train = args.r_train;
    else if (args.r_train != 2.0) cfg.r_train = args.r_train;  // explicit override of a preset
    if (!args.r_tests.empty()) cfg.r_tests = args.r_tests;
    if (cfg.r_tests.empty()) throw bssp::validation_error("no test environments; pass --r-test or a preset");

    cfg.methods.clear();
    for (const std::string& name : args.methods) {
        if (name == "baseline" || name == "ols" || name == "lr") cfg.methods.push_back(bssp::Method::baseline);
        else if (name == "gbr") cfg.methods.push_back(bssp::Method::gbr);
        else if (name == "bssp") cfg.methods.push_back(bssp::Method::bssp);
        else throw bssp::validation_error("unknown method '" + name + "'");
    }
    if (!args.template_path.empty()) cfg.matching_template = bssp::read_design_file(args.template_path);

    json config{{"command", "experiment"},
                {"task", task},
                {"r_train", cfg.r_train},
                {"r_tests", cfg.r_tests},
                {"replications", cfg.replications},
                {"n", cfg.n},
                {"seed", cfg.seed},
                {"methods", args.methods},
                {"strategy", args.strategy},
                {"budget", cfg.search.budget},
                {"rho", cfg.balance.rho},
                {"lambda", args.fixed_lambda ? json(*args.fixed_lambda) : json("cv")},
                {"threads", cfg.threads},
                {"out", args.out_dir},
                {"version", bssp::kVersion}};
    print_config(config);

    const bssp::ExperimentReport report = bssp::run_experiment(cfg);

    std::ostringstream csv;
    bssp::write_report_csv(csv, report);
    write_file_atomic(args.out_dir + "/report.csv", csv.str());
    json summary = bssp::report_summary_json(report);
    summary["config"] = config;
    write_file_atomic(args.out_dir + "/summary.json", summary.dump(2) + "\n");

    for (const auto& [name, s] : report.summaries) {
        std::cout << name << ": average_error = " << s.average_error;
        if (s.stability) std::cout << ", stability_error = " << *s.stability;
        if (s.mean_beta_error_noisy) std::cout << ", beta_error_V = " << *s.mean_beta_error_noisy;
        std::cout << '\n';
    }
    if (!report.failures.empty()) std::cout << report.failures.size() << " failed replication(s), see report.csv\n";
    std::cout << "wrote " << args.out_dir << "/report.csv and summary.json\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"balance-subsampled stable prediction toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", bssp::kVersion);

    // design gen / analyze
    auto* design = app.add_subcommand("design", "construct and analyze two-level designs");
    design->require_subcommand(1);
    auto* gen = design->add_subcommand("gen", "write a design file");
    std::size_t full_d = 0, base = 0;
    std::string words_spec, encoding = "pm1", design_out = "design.txt";
    bool use_template = false;
    gen->add_option("--full", full_d, "full factorial with this many factors");
    gen->add_option("--base", base, "base factors of a regular fraction");
    gen->add_option("--words", words_spec, "generator words, e.g. '1,2,3,4;1,2,5,6;1,3,5,7'");
    gen->add_flag("--reference-template", use_template, "bundled 128-run resolution-5 template");
    gen->add_option("--encoding", encoding, "pm1 or zeroone")->check(CLI::IsMember({"pm1", "zeroone"}));
    gen->add_option("--out", design_out, "output path");

    auto* analyze = design->add_subcommand("analyze", "print m, d, word-length pattern, resolution, strength");
    std::string analyze_path;
    analyze->add_option("file", analyze_path, "design file")->required();

    // data gen / ingest
    auto* data = app.add_subcommand("data", "generate synthetic datasets or ingest CSVs");
    data->require_subcommand(1);
    auto* data_gen = data->add_subcommand("gen", "synthetic biased-selection dataset");
    std::string data_task = "regression", data_out = "data";
    std::size_t data_n = 2000;
    double data_r = 2.0;
    std::uint64_t data_seed = 0;
    data_gen->add_option("--task", data_task, "regression or classification");
    data_gen->add_option("--n", data_n, "post-selection sample size");
    data_gen->add_option("--r", data_r, "bias rate");
    data_gen->add_option("--seed", data_seed, "generator seed");
    data_gen->add_option("--out", data_out, "output prefix (.csv and .json)");
    auto* data_ingest = data->add_subcommand("ingest", "dichotomize a raw CSV into environment datasets");
    std::string ingest_csv_path, ingest_outcome, ingest_env, ingest_out = "ingested";
    data_ingest->add_option("--csv", ingest_csv_path, "input CSV with a header")->required();
    data_ingest->add_option("--outcome", ingest_outcome, "outcome column name")->required();
    data_ingest->add_option("--environment", ingest_env, "environment column name");
    data_ingest->add_option("--out", ingest_out, "output prefix");

    // subsample
    auto* subsample = app.add_subcommand("subsample", "match data rows onto a design template");
    std::string data_path, design_path, outcome_column, out_prefix = "subsample", strategy = "random-shuffle";
    std::size_t budget = 10000;
    std::uint64_t seed = 0;
    double rho = 0.9;
    subsample->add_option("--data", data_path, "binary-feature CSV with outcome column")->required();
    subsample->add_option("--design", design_path, "design template file")->required();
    subsample->add_option("--outcome", outcome_column, "outcome column name (default: last column)");
    subsample->add_option("--strategy", strategy, "exhaustive-lexicographic or random-shuffle");
    subsample->add_option("--budget", budget, "max permutations to evaluate");
    subsample->add_option("--seed", seed, "stream seed");
    subsample->add_option("--rho", rho, "confounding-measure weight");
    subsample->add_option("--out", out_prefix, "output prefix (.json and .csv)");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "multi-environment stability comparison");
    ExperimentArgs args;
    experiment->add_option("--task", args.task, "regression or classification");
    experiment->add_flag("--paper-regression", args.paper_regression, "preset: regression benchmark grid");
    experiment->add_flag("--paper-classification", args.paper_classification, "preset: classification benchmark grid");
    experiment->add_option("--r-train", args.r_train, "training bias rate");
    experiment->add_option("--r-test", args.r_tests, "test bias rates (repeatable)");
    experiment->add_option("--reps", args.reps, "replications");
    experiment->add_option("--n", args.n, "post-selection sample size");
    experiment->add_option("--seed", args.seed, "base seed");
    experiment->add_option("--methods", args.methods, "subset of baseline,gbr,bssp");
    experiment->add_option("--template", args.template_path, "design template file (default: bundled 128-run)");
    experiment->add_option("--rho", args.rho, "confounding-measure weight");
    experiment->add_option("--budget", args.budget, "permutation search budget");
    experiment->add_option("--strategy", args.strategy, "permutation search strategy");
    double lambda_value = -1.0;
    auto* lambda_opt = experiment->add_option("--lambda", lambda_value, "fixed L1 penalty (default: 5-fold CV)");
    bool force_cv = false;
    experiment->add_flag("--cv", force_cv, "select lambda by cross-validation (the default)");
    experiment->add_option("--out", args.out_dir, "output directory");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_design_gen(full_d, base, words_spec, use_template, encoding, design_out);
        if (analyze->parsed()) return cmd_design_analyze(analyze_path);
        if (data_gen->parsed()) return cmd_data_gen(data_task, data_n, data_r, data_seed, data_out);
        if (data_ingest->parsed()) return cmd_data_ingest(ingest_csv_path, ingest_outcome, ingest_env, ingest_out);
        if (subsample->parsed())
            return cmd_subsample(data_path, design_path, outcome_column, strategy, budget, seed, rho, out_prefix);
        if (experiment->parsed()) {
            if (lambda_opt->count() > 0) {
                if (force_cv) throw bssp::validation_error("--lambda and --cv are mutually exclusive");
                if (lambda_value < 0) throw bssp::validation_error("--lambda must be nonnegative");
                args.fixed_lambda = lambda_value;
            }
            return cmd_experiment(args);
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const bssp::error& e) {
        std::cerr << "error " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
