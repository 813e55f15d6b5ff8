#pragma once

// Command-line front end. dispatch() parses arguments, runs one subcommand and
// returns the process exit code: 0 success, 1 input error, 2 numeric or
// verification failure. Reports go to `out`; logs and errors go to `err`.
// Every run emits a RunManifest (see Run::finish).

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "emap/dataset.hpp"
#include "emap/error.hpp"
#include "emap/grid.hpp"
#include "emap/grid_io.hpp"
#include "emap/io.hpp"
#include "emap/logic.hpp"
#include "emap/logic_fit.hpp"
#include "emap/metrics.hpp"
#include "emap/models/model.hpp"
#include "emap/oracle.hpp"
#include "emap/synthgen.hpp"

#ifndef EMAP_VERSION
#define EMAP_VERSION "0.0.0"
#endif

namespace emap::cli {

inline std::string sha256_hex(std::string_view bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw NumericError("sha256 digest failed");
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

struct FileRecord {
    std::string path;
    std::string sha256;
    std::size_t bytes = 0;
};

struct RunManifest {
    std::string command;
    io::json config = io::json::object();
    std::uint64_t seed = 0;
    std::vector<FileRecord> inputs;
    std::vector<FileRecord> outputs;
    std::string tool_version = EMAP_VERSION;
    unsigned threads = 1;
    double wall_time_seconds = 0.0;
    int exit_code = 0;

    io::json to_json() const {
        auto files = [](const std::vector<FileRecord>& fs) {
            io::json a = io::json::array();
            for (const auto& f : fs) a.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
            return a;
        };
        return {{"format", "emap-run-manifest"},
                {"command", command},
                {"config", config},
                {"seed", seed},
                {"inputs", files(inputs)},
                {"outputs", files(outputs)},
                {"tool_version", tool_version},
                {"threads", threads},
                {"wall_time_seconds", wall_time_seconds},
                {"exit_code", exit_code}};
    }
};

/// Per-run context: records every file read or written.
class Run {
public:
    Run(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

    RunManifest manifest;
    std::string manifest_path;  // explicit --manifest
    std::string primary_output;  // default manifest goes next to it

    std::ostream& out() { return out_; }
    void log(const std::string& msg) { err_ << "emap: " << msg << "\n"; }

    /// Reads a file once; the digest is of exactly these bytes.
    std::string read(const std::string& path) {
        std::string bytes = io::read_file(path);
        manifest.inputs.push_back({path, sha256_hex(bytes), bytes.size()});
        return bytes;
    }

    void write(const std::string& path, std::string_view bytes) {
        io::write_file(path, bytes);
        manifest.outputs.push_back({path, sha256_hex(bytes), bytes.size()});
        if (primary_output.empty()) primary_output = path;
    }

    /// Writes to `path`, or to `out` when path is empty or "-".
    void emit(const std::string& path, std::string_view bytes) {
        if (path.empty() || path == "-") out_ << bytes;
        else write(path, bytes);
    }

    void finish(int code, double seconds) {
        manifest.exit_code = code;
        manifest.wall_time_seconds = seconds;
        const std::string text = io::dump(manifest.to_json());
        std::string target = manifest_path;
        if (target.empty() && !primary_output.empty()) target = primary_output + ".manifest.json";
        if (target.empty()) {
            err_ << "emap: manifest " << manifest.to_json().dump() << "\n";
            return;
        }
        try {
            io::write_file(target, text);
        } catch (const InputError& e) {
            err_ << "emap: " << e.what() << "\n";
        }
    }

private:
    std::ostream& out_;
    std::ostream& err_;
};

// ---- argument helpers --------------------------------------------------------

/// Parses "k=v,k=v" into JSON. Values are read as JSON scalars when they
/// parse as such (numbers, true/false, null), else as strings; a value with
/// ':' becomes an array of its ':'-separated parts.
inline io::json parse_key_values(const std::string& text) {
    io::json j = io::json::object();
    auto scalar = [](const std::string& v) -> io::json {
        const io::json parsed = io::json::parse(v, nullptr, false);
        if (!parsed.is_discarded() && !parsed.is_object() && !parsed.is_array() && !parsed.is_string()) return parsed;
        return v;
    };
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw InputError("expected key=value, got '" + item + "'");
        const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
        if (value.find(':') != std::string::npos) {
            io::json arr = io::json::array();
            std::stringstream parts(value);
            std::string part;
            while (std::getline(parts, part, ':')) arr.push_back(scalar(part));
            j[key] = arr;
        } else {
            j[key] = scalar(value);
        }
    }
    return j;
}

/// A settings argument: a JSON file path (if it names an existing file or ends
/// in .json) or an inline key=value list.
inline io::json load_settings(Run& run, const std::string& arg) {
    if (arg.empty()) return io::json::object();
    if (arg.ends_with(".json") || std::filesystem::is_regular_file(arg)) {
        io::json j = io::parse_json(run.read(arg), arg);
        if (!j.is_object()) throw InputError(arg + ": settings must be a JSON object");
        return j;
    }
    return parse_key_values(arg);
}

inline ScoreGrid load_grid(Run& run, const std::string& path) {
    const std::string bytes = run.read(path);
    if (io::has_magic(bytes, kGridMagic)) return grid_from_binary(bytes);
    return grid_from_json(io::parse_json(bytes, path));
}

inline PairedDataset load_dataset(Run& run, const std::string& path) {
    const std::string bytes = run.read(path);
    if (io::has_magic(bytes, kDatasetMagic)) return dataset_from_binary(bytes);
    return dataset_from_json(io::parse_json(bytes, path));
}

inline models::Model load_model(Run& run, const std::string& path) {
    return models::model_from_json(io::parse_json(run.read(path), path));
}

inline std::pair<int, int> parse_range(const std::string& s) {
    int a = 0, b = 0;
    char tail = 0;
    bool ok = std::sscanf(s.c_str(), "%d..%d%c", &a, &b, &tail) == 2;
    if (!ok && s.find('.') == std::string::npos && std::sscanf(s.c_str(), "%d%c", &a, &tail) == 1) {
        b = a;
        ok = true;
    }
    if (!ok || a > b) throw InputError("expected a range A..B with A <= B, got '" + s + "'");
    return {a, b};
}

inline std::pair<std::size_t, std::size_t> parse_subsample(const std::string& s) {
    const auto comma = s.find(',');
    try {
        if (comma == std::string::npos) throw InputError("");
        const long k = std::stol(s.substr(0, comma)), m = std::stol(s.substr(comma + 1));
        if (k < 1 || m < 1) throw InputError("");
        return {static_cast<std::size_t>(k), static_cast<std::size_t>(m)};
    } catch (const std::exception&) {
        throw InputError("expected --subsample k,m with positive integers, got '" + s + "'");
    }
}

inline std::string table_text(const logic::BooleanTable& t) {
    std::string s = "[";
    for (std::size_t i = 0; i < t.side(); ++i) {
        s += i ? ",[" : "[";
        for (std::size_t j = 0; j < t.side(); ++j) s += (j ? "," : "") + std::to_string(t.at(i, j));
        s += "]";
    }
    return s + "]";
}

// ---- subcommands -------------------------------------------------------------

struct Options {
    unsigned threads = 0;  // 0: EMAP_THREADS or 1
    std::string manifest;

    std::string grid, out, data, model, report, params, config, formula, n_range = "1..4", subsample, split = "test",
                                                                              metric = "accuracy", sampler = "table";
    double tolerance = 1e-6;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool with_emap = false;
    int n = 1;
    std::size_t samples = 2000;
    std::size_t hessian_samples = 100;
};

inline int cmd_project(Run& run, const Options& o) {
    const ScoreGrid grid = load_grid(run, o.grid);
    const auto t0 = std::chrono::steady_clock::now();
    const AdditiveDecomposition dec = emap_decompose(grid);
    run.log("projected " + std::to_string(grid.n_text) + "x" + std::to_string(grid.n_visual) + "x" +
            std::to_string(grid.d) + " grid in " +
            std::to_string(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()) + " s");
    if (!o.out.empty() && io::is_binary_path(o.out)) {
        run.write(o.out, decomposition_to_binary(dec));
        return 0;
    }
    io::json j = decomposition_to_json(dec);
    j["projection_loss"] = projection_loss(grid, dec);
    if (grid.square()) j["predictions"] = detail::matrix_to_json(emap_predictions(dec));
    run.emit(o.out, io::dump(j));
    return 0;
}

inline int cmd_verify(Run& run, const Options& o) {
    const ScoreGrid grid = load_grid(run, o.grid);
    const StationarityReport rep = verify_grid(grid, o.hessian_samples, o.seed);
    const double tol = o.tolerance;
    const bool passed = rep.max_pred_diff <= tol && rep.grad_inf_norm <= tol && rep.fd_max_gap <= tol &&
                        rep.hessian_identity_rel_err <= tol && rep.nullspace_residual == 0.0 &&
                        rep.alg_loss <= rep.oracle_loss + tol * (1.0 + rep.oracle_loss);
    io::json j = report_to_json(rep);
    j["tolerance"] = tol;
    j["passed"] = passed;
    run.emit(o.out, io::dump(j));
    if (!passed) run.log("verification failed at tolerance " + metrics::detail::fmt(tol));
    return passed ? 0 : 2;
}

inline int cmd_synth(Run& run, const Options& o) {
    const io::json settings = load_settings(run, o.params);
    SynthParams p = SynthParams::from_json(settings);
    for (const auto& [key, value] : settings.items())
        if (!p.to_json().contains(key)) throw InputError("unknown synth parameter: " + key);
    if (o.seed_set) p.seed = o.seed;
    p.validate();
    run.manifest.config["synth"] = p.to_json();
    run.manifest.seed = p.seed;
    const PairedDataset ds = generate_synthetic(p);
    std::size_t pos = 0;
    for (int y : ds.labels) pos += y == 1;
    run.log("generated " + std::to_string(ds.size()) + " items, positive fraction " +
            metrics::detail::fmt(static_cast<double>(pos) / static_cast<double>(ds.size())));
    if (o.out.empty()) throw InputError("synth requires --out");
    run.write(o.out, io::is_binary_path(o.out) ? dataset_to_binary(ds) : io::dump(dataset_to_json(ds)));
    return 0;
}

inline int cmd_train(Run& run, const Options& o) {
    const PairedDataset data = load_dataset(run, o.data);
    io::json cfg = load_settings(run, o.config);
    if (o.seed_set) cfg["seed"] = o.seed;
    const auto t0 = std::chrono::steady_clock::now();
    const models::Model m = models::train_model(o.model, data, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    run.manifest.config["model"] = models::config_json(m);
    run.manifest.seed = models::config_json(m).value("seed", std::uint64_t{0});
    const PairedDataset train = data.split(Split::train);
    run.log("trained " + models::kind_name(m) + " in " + metrics::detail::fmt(secs) + " s, train accuracy " +
            metrics::detail::fmt(metrics::accuracy(models::predict_paired(m, train.t, train.v), train.labels)));
    if (o.out.empty()) throw InputError("train requires --out");
    run.write(o.out, io::dump(models::model_to_json(m)));
    return 0;
}

inline int cmd_eval(Run& run, const Options& o, unsigned threads) {
    const PairedDataset all = load_dataset(run, o.data);
    const models::Model m = load_model(run, o.model);
    const PairedDataset data = o.split == "all" ? all : all.split(parse_split(o.split));
    if (data.size() == 0) throw InputError("split '" + o.split + "' is empty");
    metrics::EvalReport r = metrics::evaluate_model(m, data, o.split, o.with_emap, threads);
    run.manifest.seed = o.seed;
    if (!o.subsample.empty()) {
        const auto [k, mm] = parse_subsample(o.subsample);
        r.subsample = metrics::subsampled_emap_metric(m, data, k, mm, metrics::parse_metric(o.metric), o.seed, threads);
    }
    const std::string text = o.report.ends_with(".csv") ? metrics::report_to_csv(r) : io::dump(metrics::report_to_json(r));
    run.emit(o.report, text);
    return 0;
}

inline int cmd_logic_census(Run& run, const Options& o) {
    const logic::Census c = logic::representability_census(o.n);
    run.out() << c.representable << "/" << c.total << " representable\n";
    if (o.n == 1)
        for (auto code : c.failures)
            run.out() << "not representable: " << table_text(logic::BooleanTable::from_code(1, code)) << "\n";
    return 0;
}

inline int cmd_logic_check(Run& run, const Options& o) {
    std::string text = o.formula;
    if (text.starts_with("@")) text = run.read(text.substr(1));
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    const logic::FormulaAst ast = logic::parse_formula(text, o.n);
    const logic::BooleanTable t = logic::table_from_formula(ast, o.n);
    io::json j = {{"formula", ast.to_string()},
                  {"n", o.n},
                  {"table", io::json::parse(table_text(t))},
                  {"representable", logic::is_representable(t)}};
    if (t.side() <= logic::kOracleMaxSide) {
        const auto w = logic::representable_witness(t);
        j["oracle_representable"] = w.has_value();
        if (w) j["witness"] = {{"tau", w->tau}, {"phi", w->phi}, {"theta", w->theta}};
    }
    if (!t.constant()) {
        for (auto method : logic::kFitMethods) j["auc"][logic::method_name(method)] = logic::additive_fit_auc(t, method);
    }
    run.emit(o.out, io::dump(j));
    return 0;
}

inline int cmd_logic_fig2(Run& run, const Options& o, unsigned threads) {
    logic::Fig2Options f;
    std::tie(f.n_min, f.n_max) = parse_range(o.n_range);
    f.samples = o.samples;
    f.seed = o.seed;
    f.threads = threads;
    if (o.sampler == "table") f.sampler = logic::Sampler::truth_table;
    else if (o.sampler == "circuit") f.sampler = logic::Sampler::circuit;
    else throw InputError("unknown sampler: " + o.sampler + " (expected table or circuit)");
    run.manifest.config["fig2"] = {{"n_min", f.n_min},
                                   {"n_max", f.n_max},
                                   {"samples", f.samples},
                                   {"sampler", logic::sampler_name(f.sampler)},
                                   {"stages", f.fit.stages},
                                   {"max_depth", f.fit.max_depth}};
    run.manifest.seed = f.seed;
    const auto rows = logic::run_fig2(f);
    run.emit(o.out, logic::fig2_csv(rows));
    return 0;
}

/// Runs one command line (without the program name).
inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    Options o;
    CLI::App app{"EMAP: additive projections of two-input classifiers", "emap"};
    app.fallthrough();  // global options may follow the subcommand
    app.set_version_flag("--version", std::string(EMAP_VERSION));
    app.require_subcommand(1);
    app.add_option("--threads", o.threads, "Worker threads (default: EMAP_THREADS or 1)")->check(CLI::PositiveNumber);
    app.add_option("--manifest", o.manifest, "Run manifest path (default: <output>.manifest.json)");

    auto* project = app.add_subcommand("project", "Project a score grid onto additive functions");
    project->add_option("--grid", o.grid, "Grid file (.json or binary)")->required();
    project->add_option("--out", o.out, "Decomposition output (.json or .bin; default stdout)");

    auto* verify = app.add_subcommand("verify", "Check a grid's projection against the exact solve");
    verify->add_option("--grid", o.grid, "Grid file")->required();
    verify->add_option("--tolerance", o.tolerance, "Pass threshold")->capture_default_str();
    verify->add_option("--hessian-samples", o.hessian_samples, "Random directions for the Hessian check")
        ->capture_default_str();
    verify->add_option("--out", o.out, "Report output (default stdout)");

    auto* synth = app.add_subcommand("synth", "Generate the synthetic paired dataset");
    synth->add_option("--params", o.params, "JSON file or k=v list (d, d1, d2, delta, n, split, seed, audit)");
    synth->add_option("--out", o.out, "Dataset output (.json or .bin)")->required();

    auto* train = app.add_subcommand("train", "Train a model on the train split");
    train->add_option("--data", o.data, "Dataset file")->required();
    train->add_option("--model", o.model, "linear | poly2 | mlp | adaboost")->required();
    train->add_option("--config", o.config, "JSON file or k=v list of model settings");
    train->add_option("--out", o.out, "Model output (.json)")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate a model (and its EMAP) on a split");
    eval->add_option("--data", o.data, "Dataset file")->required();
    eval->add_option("--model", o.model, "Model file")->required();
    eval->add_flag("--with-emap", o.with_emap, "Build the split's grid and compare against its EMAP");
    eval->add_option("--subsample", o.subsample, "k,m: k random m-item subsets");
    eval->add_option("--metric", o.metric, "Subsample metric: accuracy | auc | weighted_f1")->capture_default_str();
    eval->add_option("--split", o.split, "train | val | test | all")->capture_default_str();
    eval->add_option("--report", o.report, "Report output (.json or .csv; default stdout)");

    auto* logic_cmd = app.add_subcommand("logic", "Boolean function experiments");
    logic_cmd->require_subcommand(1);
    auto* census = logic_cmd->add_subcommand("census", "Count representable tables for n = 1 or 2");
    census->add_option("--n", o.n, "Bits per modality")->capture_default_str();
    auto* check = logic_cmd->add_subcommand("check", "Analyse one formula");
    check->add_option("--formula", o.formula, "Formula text, or @file")->required();
    check->add_option("--n", o.n, "Bits per modality")->required();
    check->add_option("--out", o.out, "Report output (default stdout)");
    auto* fig2 = logic_cmd->add_subcommand("fig2", "Additive-fit AUC versus n");
    fig2->add_option("--n-range", o.n_range, "A..B")->capture_default_str();
    fig2->add_option("--samples", o.samples, "Tables per n")->capture_default_str();
    fig2->add_option("--sampler", o.sampler, "table | circuit")->capture_default_str();
    fig2->add_option("--out", o.out, "CSV output (default stdout)");

    for (auto* sub : {synth, train, eval, fig2, verify})
        sub->add_option_function<std::uint64_t>(
            "--seed",
            [&o](const std::uint64_t& s) {
                o.seed = s;
                o.seed_set = true;
            },
            "Master seed");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << EMAP_VERSION << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "emap: " << e.what() << "\n";
        const CLI::App* failing = &app;
        for (auto* sub : app.get_subcommands()) {
            failing = sub;
            for (auto* inner : sub->get_subcommands()) failing = inner;
        }
        err << failing->help();
        return 1;
    }

    Run run(out, err);
    const unsigned threads = o.threads ? o.threads : default_threads();
    run.manifest_path = o.manifest;
    run.manifest.threads = threads;
    {
        std::string joined;
        for (const auto& a : args) joined += (joined.empty() ? "" : " ") + a;
        run.manifest.command = joined;
    }
    for (const CLI::App* sub = &app; sub;) {
        for (const auto* opt : sub->get_options()) {
            if (opt->get_name() == "--help" || opt->get_name() == "--version" || opt->count() == 0) continue;
            const auto& res = opt->results();
            run.manifest.config["options"][sub->get_name().empty() ? opt->get_name()
                                                                   : sub->get_name() + " " + opt->get_name()] =
                res.size() == 1 ? io::json(res.front()) : io::json(res);
        }
        const auto subs = sub->get_subcommands();
        sub = subs.empty() ? nullptr : subs.front();
    }

    int code = 0;
    try {
        if (project->parsed()) code = cmd_project(run, o);
        else if (verify->parsed()) code = cmd_verify(run, o);
        else if (synth->parsed()) code = cmd_synth(run, o);
        else if (train->parsed()) code = cmd_train(run, o);
        else if (eval->parsed()) code = cmd_eval(run, o, threads);
        else if (census->parsed()) code = cmd_logic_census(run, o);
        else if (check->parsed()) code = cmd_logic_check(run, o);
        else if (fig2->parsed()) code = cmd_logic_fig2(run, o, threads);
    } catch (const InputError& e) {
        err << "emap: error: " << e.what() << "\n";
        code = 1;
    } catch (const NumericError& e) {
        err << "emap: numeric error: " << e.what() << "\n";
        code = 2;
    } catch (const std::bad_alloc&) {
        err << "emap: out of memory\n";
        code = 2;
    }
    run.finish(code, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return code;
}

}  // namespace emap::cli
