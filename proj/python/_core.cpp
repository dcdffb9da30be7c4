#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hopon/engine.hpp"
#include "hopon/errors.hpp"
#include "hopon/json_io.hpp"
#include "hopon/scenario.hpp"

namespace py = pybind11;
using namespace hopon;

namespace {

std::vector<std::tuple<std::string, std::string, std::string>> validate(const Scenario& sc) {
    std::vector<std::tuple<std::string, std::string, std::string>> out;
    for (const auto& f : validate_scenario(sc).findings) out.emplace_back(to_string(f.severity), f.location, f.message);
    return out;
}

std::map<std::string, std::string> compose(const Scenario& sc) {
    std::map<std::string, std::string> docs;
    for (const auto& slice : compose_all(sc))
        for (auto& [path, text] : render_slice_documents(slice)) docs.emplace(path, std::move(text));
    return docs;
}

std::pair<std::string, std::string> run(const Scenario& sc, bool trace) {
    MetricsReport m;
    std::string csv;
    {
        py::gil_scoped_release release;
        std::vector<TraceRow> rows;
        m = run_scenario(sc, trace ? &rows : nullptr);
        if (trace) csv = trace_csv(rows);
    }
    return {dump_canonical(to_json(m)), csv};
}

std::string compare(const Scenario& sc) {
    py::gil_scoped_release release;
    return dump_canonical(comparison_json(run_scenario(sc), run_baseline(sc)));
}

std::string dot(const Scenario& sc) {
    std::string out;
    for (const auto& vn : sc.slices) out += export_dot(vn);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Hop-on slicing simulator core";

    auto base = py::register_exception<Error>(m, "HopOnError", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<CompositionError>(m, "CompositionError", base.ptr());
    py::register_exception<EngineError>(m, "EngineError", base.ptr());

    py::class_<Scenario>(m, "Scenario")
        .def_static("load", &load_scenario, py::arg("path"))
        .def_static("from_text", &parse_scenario_text, py::arg("text"))
        .def_property(
            "duration_s", [](const Scenario& s) { return s.run.duration_s; },
            [](Scenario& s, double v) { s.run.duration_s = v; })
        .def_property(
            "seed", [](const Scenario& s) { return s.run.seed; }, [](Scenario& s, std::uint64_t v) { s.run.seed = v; })
        .def_property(
            "mode", [](const Scenario& s) { return std::string(to_string(s.run.mode)); },
            [](Scenario& s, const std::string& v) {
                if (v == "hop_on") s.run.mode = RunMode::hop_on;
                else if (v == "session_baseline") s.run.mode = RunMode::session_baseline;
                else throw Error("unknown mode " + v);
            })
        .def_property_readonly("devices",
                               [](const Scenario& s) {
                                   std::vector<std::string> names;
                                   for (const auto& d : s.devices) names.push_back(d.name);
                                   return names;
                               })
        .def_property_readonly("vns", [](const Scenario& s) {
            std::vector<std::int64_t> ids;
            for (const auto& vn : s.slices) ids.push_back(vn.id.value);
            return ids;
        });

    m.def("validate", &validate, py::arg("scenario"), "(severity, location, message) findings");
    m.def("compose", &compose, py::arg("scenario"), "Relative path -> canonical JSON document");
    m.def("run", &run, py::arg("scenario"), py::arg("trace") = false, "(metrics JSON, trace CSV)");
    m.def("compare", &compare, py::arg("scenario"));
    m.def("export_dot", &dot, py::arg("scenario"));
    m.def(
        "allocate_latency_budget",
        [](double budget_s, const std::vector<double>& delays, const std::string& split) {
            const auto s = parse_budget_split(split);
            if (!s) throw Error("unknown budget split " + split);
            return allocate_latency_budget(budget_s, delays, *s);
        },
        py::arg("budget_s"), py::arg("link_delays_s"), py::arg("split") = "delay_proportional");
}
