#pragma once

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <qcard/analysis.hpp>
#include <qcard/errors.hpp>
#include <qcard/trainer.hpp>
#include <qcard/workload.hpp>

// Command-line front end: one binary with ingest / train / eval / hist /
// synth subcommands. Exit codes: 0 success, 1 usage or configuration,
// 2 data or parse failure, 3 numeric failure.
namespace qcard::cli {

namespace detail {

inline bool use_color(FILE* stream) {
    return ::isatty(::fileno(stream)) != 0 &&
           std::getenv("NO_COLOR") == nullptr;
}

inline void print_error(const std::string& message) {
    if (use_color(stderr)) {
        std::cerr << "\033[31merror:\033[0m " << message << '\n';
    } else {
        std::cerr << "error: " << message << '\n';
    }
}

inline void print_warning(const std::string& message) {
    if (use_color(stderr)) {
        std::cerr << "\033[33mwarning:\033[0m " << message << '\n';
    } else {
        std::cerr << "warning: " << message << '\n';
    }
}

inline int default_workers() {
    const unsigned cores = std::thread::hardware_concurrency();
    return cores == 0 ? 1 : static_cast<int>(cores);
}

inline std::string fmt(double v) { return analysis::detail::format_double(v); }

struct LayerFlags {
    std::string kind = "threshold";
    int width = 0; // 0 picks the layer's natural width
    double d = 0.1;
    double epsilon = 1e-6;
    double base = 2.0;
    bool tie_scalars = false;
    bool base_given = false;
};

inline postproc::PostLayer build_layer(const LayerFlags& flags) {
    const auto kind = postproc::parse_kind(flags.kind);
    if (flags.tie_scalars && kind != postproc::LayerKind::ThresholdRatio) {
        throw UsageError("--tie-scalars only applies to threshold_ratio");
    }
    auto layer = postproc::make_layer(kind, flags.width, flags.tie_scalars);
    layer.d = flags.d;
    layer.epsilon = flags.epsilon;
    if (flags.base_given) {
        if (kind != postproc::LayerKind::PlaceValue &&
            kind != postproc::LayerKind::PlaceValueNeg) {
            throw UsageError("--base only applies to place-value layers");
        }
        layer.scalars[0] = flags.base;
    }
    postproc::validate(layer);
    return layer;
}

// Histogram panel spec: "kind" or "kind:width".
inline postproc::PostLayer parse_panel(const std::string& spec, double d,
                                       double epsilon) {
    std::string name = spec;
    int width = 0;
    if (const auto colon = spec.find(':'); colon != std::string::npos) {
        name = spec.substr(0, colon);
        const std::string digits = spec.substr(colon + 1);
        try {
            width = std::stoi(digits);
        } catch (const std::exception&) {
            throw UsageError("bad layer width in '" + spec + "'");
        }
    }
    auto layer = postproc::make_layer(postproc::parse_kind(name), width);
    layer.d = d;
    layer.epsilon = epsilon;
    postproc::validate(layer);
    return layer;
}

inline std::string describe_written(const analysis::ReportFiles& files) {
    std::string out = "wrote";
    for (std::size_t i = 0; i < files.written.size(); ++i) {
        out += i == 0 ? " " : ", ";
        out += files.written[i].string();
    }
    return out;
}

inline std::string describe_report(const trainer::RunReport& report) {
    std::string out =
        "mean abs log error " + fmt(report.mean_abs_log_error);
    if (report.baseline_mean_abs_log_error) {
        out += " (baseline " + fmt(*report.baseline_mean_abs_log_error) +
               ", improvement ";
        if (report.exact_model) {
            out += "exact";
        } else if (report.improvement_factor) {
            out += fmt(*report.improvement_factor) + "x";
        }
        out += ")";
    }
    return out;
}

// Baseline log-cardinalities when every query carries a classical estimate.
inline std::optional<std::vector<double>> optional_baseline(
    const workload::Workload& workload) {
    std::vector<double> logs;
    for (const auto& q : workload.queries) {
        if (!q.classical_card) return std::nullopt;
        logs.push_back(std::log(static_cast<double>(*q.classical_card)));
    }
    return logs;
}

// ---------------------------------------------------------------------------
// Subcommand argument bundles

struct IngestArgs {
    std::string data_dir;
    std::string out;
    std::string rejects; // empty: <out>.rejects
};

struct TrainArgs {
    std::string workload_path;
    std::string out_dir = "qcard_run";
    std::string mode = "estimate";
    LayerFlags layer;
    int qubits = 6;
    int layers = 16;
    trainer::TrainConfig train;
    std::uint64_t seed = 1;
};

struct EvalArgs {
    std::string workload_path;
    std::string checkpoint;
    std::string out_dir = "qcard_eval";
};

struct HistArgs {
    std::vector<std::string> panels;
    std::string out_dir = "qcard_hist";
    std::uint64_t samples = analysis::kDefaultSamples;
    std::size_t bins = analysis::kDefaultBins;
    std::uint64_t seed = 1;
    int qubits = 0; // 0: per-panel default register
    int workers = 1;
    double d = 0.1;
    double epsilon = 1e-6;
};

struct SynthArgs {
    std::string out;
    workload::SynthSpec spec;
    double bias = 0.0;
    bool bias_given = false;
};

inline int cmd_ingest(const IngestArgs& args) {
    auto result = workload::ingest_sql_dir(args.data_dir);
    for (const auto& table : result.empty_tables) {
        print_warning("table " + table +
                      " has no rows; filters on it select everything");
    }
    if (result.workload.queries.empty()) {
        for (const auto& reject : result.rejects) {
            print_error("reject " + reject);
        }
        throw WorkloadError("no queries ingested (" +
                            std::to_string(result.rejects.size()) +
                            " rejected)");
    }
    workload::save_digested(result.workload, args.out);
    std::cout << "ingested " << result.workload.queries.size() << " of "
              << result.workload.queries.size() + result.rejects.size()
              << " queries over " << result.workload.schema_table_count
              << " tables\n";
    for (const auto& q : result.workload.queries) {
        std::cout << q.query_id << ":";
        for (const auto& slot : q.slots) {
            std::cout << " table " << slot.table_id << " sel "
                      << fmt(slot.selectivity) << " |";
        }
        std::cout << " true " << q.true_card;
        if (q.classical_card) std::cout << " classical " << *q.classical_card;
        std::cout << '\n';
    }
    std::cout << "wrote " << args.out << '\n';
    if (result.rejects.empty()) return 0;

    const std::string rejects_path =
        args.rejects.empty() ? args.out + ".rejects" : args.rejects;
    std::string report;
    for (const auto& reject : result.rejects) {
        print_error("reject " + reject);
        report += reject + '\n';
    }
    analysis::detail::write_text_file(rejects_path, report);
    print_error(std::to_string(result.rejects.size()) +
                " queries rejected; report written to " + rejects_path);
    return 2;
}

inline int cmd_train(const TrainArgs& args) {
    auto workload = workload::load_digested(args.workload_path);
    trainer::ModelConfig config;
    config.mode = trainer::parse_mode(args.mode);
    config.encoding.n_qubits = args.qubits;
    config.ansatz.n_qubits = args.qubits;
    config.ansatz.n_layers = args.layers;
    config.layer = build_layer(args.layer);
    config.seed = args.seed;

    auto model = trainer::init_model(config, workload);
    std::cout << "training " << trainer::mode_name(config.mode) << "/"
              << postproc::kind_name(config.layer.kind) << " model: "
              << args.qubits << " qubits, " << args.layers << " layers, "
              << vqc::param_count(config.ansatz) << " circuit parameters, "
              << workload.queries.size() << " queries\n";

    auto outcome = trainer::train(model, workload, args.train);
    std::filesystem::create_directories(args.out_dir);
    const auto checkpoint_path =
        std::filesystem::path(args.out_dir) / "checkpoint.json";
    trainer::save_checkpoint(model, checkpoint_path);
    auto files =
        analysis::emit_report(outcome.report, outcome.loss_curve, {}, args.out_dir);
    files.written.insert(files.written.begin(), checkpoint_path);

    std::cout << "trained " << outcome.train_ids.size() << " queries for "
              << args.train.episodes << " episodes";
    if (!outcome.loss_curve.empty()) {
        std::cout << "; mean loss " << fmt(outcome.loss_curve.front())
                  << " -> " << fmt(outcome.loss_curve.back());
    }
    std::cout << '\n';
    std::cout << "eval on " << outcome.eval_ids.size() << " queries: "
              << describe_report(outcome.report) << '\n';
    std::cout << describe_written(files) << '\n';
    return 0;
}

inline int cmd_eval(const EvalArgs& args) {
    auto model = trainer::load_checkpoint(args.checkpoint);
    auto workload = workload::load_digested(args.workload_path);
    trainer::check_compat(model, workload);
    auto report = trainer::evaluate(model, workload.queries,
                                    optional_baseline(workload));
    auto files = analysis::emit_report(report, {}, {}, args.out_dir);
    std::cout << "evaluated " << report.queries.size() << " queries: "
              << describe_report(report) << '\n';
    std::cout << describe_written(files) << '\n';
    return 0;
}

inline int cmd_hist(const HistArgs& args) {
    static const std::vector<std::string> kFigurePanels = {
        "linear",        "rational",          "threshold",
        "threshold_ratio", "place_value:4",   "place_value_neg:4",
        "place_value:8", "place_value_neg:8"};
    const auto& specs = args.panels.empty() ? kFigurePanels : args.panels;

    std::vector<analysis::Histogram> histograms;
    for (const auto& spec : specs) {
        const auto layer = parse_panel(spec, args.d, args.epsilon);
        const int qubits =
            args.qubits == 0 ? analysis::default_hist_qubits(layer) : args.qubits;
        histograms.push_back(analysis::value_distribution(
            layer, qubits, args.samples, args.seed, args.bins,
            static_cast<unsigned>(std::max(1, args.workers))));
        const auto& hist = histograms.back();
        std::cout << hist.label << ": " << hist.total_samples
                  << " samples on " << qubits << " qubits, range ["
                  << fmt(hist.edges.front()) << ", " << fmt(hist.edges.back())
                  << "]\n";
    }
    auto files = analysis::emit_histograms(histograms, args.out_dir);
    std::cout << describe_written(files) << '\n';
    return 0;
}

inline int cmd_synth(const SynthArgs& args) {
    workload::SynthSpec spec = args.spec;
    if (args.bias_given || spec.jitter > 0.0) spec.bias = args.bias;
    auto workload = workload::synth_workload(spec);
    workload::save_digested(workload, args.out);
    std::cout << "wrote " << workload.queries.size()
              << " synthetic queries over " << workload.schema_table_count
              << " tables to " << args.out;
    if (spec.bias) {
        std::cout << " (classical estimates biased by e^" << fmt(*spec.bias);
        if (spec.jitter > 0.0) std::cout << " with jitter " << fmt(spec.jitter);
        std::cout << ")";
    }
    std::cout << '\n';
    return 0;
}

}  // namespace detail

// Parses `args` (no program name, natural order) and runs one subcommand.
inline int run(std::vector<std::string> args) {
    CLI::App app{"variational quantum circuits for SQL cardinality estimation"};
    app.name("qcard");
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.set_config("--config", "",
                   "read options from a key=value file; flags win on conflict");
    app.set_version_flag("--version", "qcard 0.1.0");

    detail::IngestArgs ingest_args;
    auto* ingest = app.add_subcommand(
        "ingest", "scan CSV tables and digest a SQL workload");
    ingest->add_option("--data", ingest_args.data_dir,
                       "directory with <table>.csv files, queries.sql, truths.csv")
        ->required();
    ingest->add_option("--out", ingest_args.out, "digested workload to write")
        ->required();
    ingest->add_option("--rejects", ingest_args.rejects,
                       "rejected-query report path (default <out>.rejects)");

    detail::TrainArgs train_args;
    train_args.train.workers = detail::default_workers();
    auto* train = app.add_subcommand("train", "train a model on a workload");
    train->add_option("--workload", train_args.workload_path,
                      "digested workload file")
        ->required();
    train->add_option("--out", train_args.out_dir,
                      "directory for checkpoint and reports");
    train->add_option("--mode", train_args.mode, "estimate or correct")
        ->check(CLI::IsMember({"estimate", "correct"}));
    train->add_option("--layer", train_args.layer.kind, "output layer kind")
        ->check(CLI::IsMember({"linear", "rational", "rational_log", "threshold",
                               "threshold_ratio", "place_value",
                               "place_value_neg"}));
    train->add_option("--width", train_args.layer.width,
                      "probability entries read by the layer (0: natural width)");
    train->add_option("--d", train_args.layer.d, "threshold activation cutoff");
    train->add_option("--epsilon", train_args.layer.epsilon,
                      "rational layer smoothing constant");
    auto* base_opt = train->add_option("--base", train_args.layer.base,
                                       "place-value base (must stay above 1)");
    train->add_flag("--tie-scalars", train_args.layer.tie_scalars,
                    "threshold_ratio shares one scalar across both terms");
    train->add_option("--qubits", train_args.qubits, "circuit width");
    train->add_option("--layers", train_args.layers, "ansatz layers");
    train->add_option("--episodes", train_args.train.episodes,
                      "training episodes");
    train->add_option("--lr", train_args.train.lr_initial,
                      "initial learning rate");
    train->add_option("--decay", train_args.train.lr_decay,
                      "per-episode learning-rate factor");
    train->add_option("--split", train_args.train.split,
                      "training fraction; 1.0 trains and evaluates on all");
    train->add_option("--seed", train_args.seed, "parameter init seed");
    train->add_option("--workers", train_args.train.workers,
                      "gradient worker threads")
        ->envname("QCARD_WORKERS");

    detail::EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a workload");
    eval->add_option("--workload", eval_args.workload_path,
                     "digested workload file")
        ->required();
    eval->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint")
        ->required();
    eval->add_option("--out", eval_args.out_dir, "directory for reports");

    detail::HistArgs hist_args;
    hist_args.workers = detail::default_workers();
    auto* hist = app.add_subcommand(
        "hist", "sample output-value histograms over Haar-random states");
    hist->add_option("--layer", hist_args.panels,
                     "layer panels as kind or kind:width; default is the "
                     "eight-panel study set");
    hist->add_option("--out", hist_args.out_dir, "directory for histograms");
    hist->add_option("--samples", hist_args.samples, "Haar samples per panel");
    hist->add_option("--bins", hist_args.bins, "histogram bins");
    hist->add_option("--seed", hist_args.seed, "sampling seed");
    hist->add_option("--qubits", hist_args.qubits,
                     "force one register size for every panel (0: per-panel "
                     "default, 4 or 8 by width)");
    hist->add_option("--d", hist_args.d, "threshold activation cutoff");
    hist->add_option("--epsilon", hist_args.epsilon,
                     "rational layer smoothing constant");
    hist->add_option("--workers", hist_args.workers, "sampling worker threads")
        ->envname("QCARD_WORKERS");

    detail::SynthArgs synth_args;
    auto* synth = app.add_subcommand(
        "synth", "generate a synthetic digested workload");
    synth->add_option("--out", synth_args.out, "digested workload to write")
        ->required();
    synth->add_option("--queries", synth_args.spec.queries, "query count");
    synth->add_option("--tables", synth_args.spec.tables, "schema table count");
    synth->add_option("--max-slots", synth_args.spec.max_slots,
                      "max tables joined per query (0: min(tables, 6))");
    synth->add_option("--min-card", synth_args.spec.min_card,
                      "smallest true cardinality");
    synth->add_option("--max-card", synth_args.spec.max_card,
                      "largest true cardinality");
    auto* bias_opt = synth->add_option(
        "--bias", synth_args.bias,
        "log-space offset of classical estimates; enables the baseline column");
    synth->add_option("--jitter", synth_args.spec.jitter,
                      "uniform log-space half-width around the bias");
    synth->add_option("--seed", synth_args.spec.seed, "generation seed");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }
    train_args.layer.base_given = base_opt->count() > 0;
    synth_args.bias_given = bias_opt->count() > 0;

    try {
        if (app.got_subcommand(ingest)) return detail::cmd_ingest(ingest_args);
        if (app.got_subcommand(train)) return detail::cmd_train(train_args);
        if (app.got_subcommand(eval)) return detail::cmd_eval(eval_args);
        if (app.got_subcommand(hist)) return detail::cmd_hist(hist_args);
        if (app.got_subcommand(synth)) return detail::cmd_synth(synth_args);
    } catch (const NumericError& e) {
        detail::print_error(std::string("numeric failure: ") + e.what());
        return 3;
    } catch (const WorkloadError& e) {
        detail::print_error(e.what());
        return 2;
    } catch (const ConfigError& e) {
        detail::print_error(e.what());
        return 1;
    } catch (const UsageError& e) {
        detail::print_error(e.what());
        return 1;
    } catch (const Error& e) {
        detail::print_error(e.what());
        return 1;
    } catch (const std::exception& e) {
        detail::print_error(e.what());
        return 1;
    }
    return 0;
}

}  // namespace qcard::cli
