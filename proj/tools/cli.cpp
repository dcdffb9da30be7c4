#include "hopon/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <future>

#include "hopon/engine.hpp"
#include "hopon/errors.hpp"
#include "hopon/scenario.hpp"

namespace hopon::cli {

namespace fs = std::filesystem;

namespace {

/// Scenario problems map to exit 1, failures while composing or simulating to 2.
struct Failure {
    int code;
    std::string message;
};

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Failure{runtime_error, "cannot write " + path.string()};
    f << content;
    if (!f) throw Failure{runtime_error, "cannot write " + path.string()};
}

Scenario load_valid(const std::string& path, std::ostream& err) {
    Scenario sc;
    try {
        sc = load_scenario(path);
    } catch (const Error& e) {
        const std::string what = e.what();
        throw Failure{scenario_error, what.rfind(path, 0) == 0 ? what : path + ": " + what};
    }
    const auto report = validate_scenario(sc);
    for (const auto& f : report.findings)
        if (f.severity == Severity::warning) err << "warning: " << f.location << ": " << f.message << '\n';
    if (report.has_errors()) {
        std::string msg = path + ": scenario is invalid";
        for (const auto& f : report.findings)
            if (f.severity == Severity::error) msg += "\n  " + f.location + ": " + f.message;
        throw Failure{scenario_error, msg};
    }
    return sc;
}

template <typename Fn>
auto guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const CompositionError& e) {
        throw Failure{e.stage() == Stage::validate ? scenario_error : runtime_error, e.what()};
    } catch (const Error& e) {
        throw Failure{runtime_error, e.what()};
    }
}

}  // namespace

CommandOutcome execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CommandOutcome outcome;
    CLI::App app{"Slice composition and hop-on simulation", "hopon"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_path;
    std::string metrics_path;
    std::string trace_path;

    auto* validate = app.add_subcommand("validate", "check a scenario file");
    validate->add_option("scenario", scenario_path, "scenario file")->required();

    auto* compose = app.add_subcommand("compose", "compose every slice and write its configuration documents");
    compose->add_option("scenario", scenario_path, "scenario file")->required();
    compose->add_option("--out", out_path, "output directory")->required();

    auto* run = app.add_subcommand("run", "simulate the scenario");
    run->add_option("scenario", scenario_path, "scenario file")->required();
    run->add_option("--metrics", metrics_path, "metrics JSON path")->required();
    run->add_option("--trace", trace_path, "packet trace CSV path");

    auto* compare = app.add_subcommand("compare", "run hop-on and session-baseline modes side by side");
    compare->add_option("scenario", scenario_path, "scenario file")->required();
    compare->add_option("--metrics", metrics_path, "comparison JSON path")->required();

    auto* dot = app.add_subcommand("export-dot", "write the logical VN graphs in DOT");
    dot->add_option("scenario", scenario_path, "scenario file")->required();
    dot->add_option("--out", out_path, "DOT output path")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return outcome;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return outcome;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        outcome.exit_code = usage_error;
        return outcome;
    }

    try {
        Scenario sc = load_valid(scenario_path, err);
        if (*validate) {
            out << scenario_path << ": ok\n";
        } else if (*compose) {
            const auto slices = guarded([&] { return compose_all(sc); });
            for (const auto& s : slices) {
                for (const auto& [rel, text] : render_slice_documents(s)) {
                    const fs::path p = fs::path(out_path) / rel;
                    write_file(p, text);
                    outcome.artifacts.push_back(p.string());
                }
            }
        } else if (*run) {
            std::vector<TraceRow> rows;
            const auto report = guarded([&] { return run_scenario(sc, trace_path.empty() ? nullptr : &rows); });
            write_file(metrics_path, dump_canonical(to_json(report)));
            outcome.artifacts.push_back(metrics_path);
            if (!trace_path.empty()) {
                write_file(trace_path, trace_csv(rows));
                outcome.artifacts.push_back(trace_path);
            }
        } else if (*compare) {
            Scenario hop_on = sc;
            hop_on.run.mode = RunMode::hop_on;
            auto baseline = std::async(std::launch::async, [&] { return guarded([&] { return run_baseline(sc); }); });
            const auto first = guarded([&] { return run_scenario(hop_on); });
            const auto second = baseline.get();
            write_file(metrics_path, dump_canonical(comparison_json(first, second)));
            outcome.artifacts.push_back(metrics_path);
        } else if (*dot) {
            std::string text;
            for (const auto& vn : sc.slices) text += export_dot(vn);
            write_file(out_path, text);
            outcome.artifacts.push_back(out_path);
        }
    } catch (const Failure& f) {
        err << "error: " << f.message << '\n';
        outcome.exit_code = f.code;
        outcome.artifacts.clear();
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        outcome.exit_code = runtime_error;
        outcome.artifacts.clear();
    }
    return outcome;
}

}  // namespace hopon::cli
