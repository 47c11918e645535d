#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hetnet/harness.hpp"
#include "hetnet/hungarian.hpp"
#include "hetnet/model.hpp"
#include "hetnet/oracle.hpp"

namespace py = pybind11;
using namespace hetnet;

namespace {

HarnessConfig config_from(const py::object& src) {
    if (py::isinstance<py::str>(src)) return load_config(src.cast<std::string>());
    auto dumps = py::module_::import("json").attr("dumps");
    return parse_config(nlohmann::json::parse(dumps(src).cast<std::string>()));
}

py::object to_python(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(hetnet, m) {
    m.doc() = "Cache-enabled HetNet PD-NOMA cost-minimization simulator";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<StructuralError>(m, "StructuralError", PyExc_ValueError);

    m.def("zipf_popularity", &zipf_popularity, py::arg("contents"), py::arg("alpha"));

    m.def(
        "solve_assignment",
        [](const Matrix& cost) {
            auto a = solve_rectangular(cost);
            return py::make_tuple(a.col_of_row, a.cost);
        },
        py::arg("cost"), "Minimum-cost assignment; returns (column of each row or -1, total cost).");

    m.def(
        "load_config", [](const py::object& src) { return to_python(config_to_json(config_from(src))); },
        py::arg("config"), "Validate a config (path or dict) and return it with defaults filled in.");

    m.attr("CSV_HEADER") = std::string(kCsvHeader);

    m.def(
        "run_sweep",
        [](const py::object& src, const std::string& parameter, const std::vector<double>& values,
           const std::vector<std::string>& policies, int runs, std::uint64_t seed, int threads) {
            HarnessConfig cfg = config_from(src);
            SweepSpec spec = cfg.sweep;
            if (!parameter.empty()) {
                spec.parameter = parameter;
                spec.values = values;
            }
            if (!policies.empty()) spec.policies = policies;
            if (runs > 0) spec.runs = runs;
            if (seed > 0) spec.seed = seed;
            SweepResult res;
            {
                py::gil_scoped_release nogil;
                res = run_sweep(cfg, spec, threads);
            }
            return rows_to_csv(res.rows);
        },
        py::arg("config"), py::arg("parameter") = "", py::arg("values") = std::vector<double>{},
        py::arg("policies") = std::vector<std::string>{}, py::arg("runs") = 0, py::arg("seed") = 0,
        py::arg("threads") = 1, "Monte Carlo sweep; returns the result CSV text.");

    m.def(
        "oracle_gap",
        [](const py::object& src, int instances, int levels, int threads) {
            HarnessConfig cfg = config_from(src);
            GapStudy st;
            {
                py::gil_scoped_release nogil;
                st = oracle_gap_study(cfg, instances, levels, threads);
            }
            py::list gaps;
            for (const auto& g : st.instances) gaps.append(g.gap);
            py::dict d;
            d["gaps"] = gaps;
            d["mean_gap"] = st.mean_gap;
            d["max_gap"] = st.max_gap;
            d["floor_violations"] = st.floor_violations;
            d["audit_violations"] = st.audit_violations;
            d["skipped"] = st.skipped;
            return d;
        },
        py::arg("config"), py::arg("instances") = 20, py::arg("levels") = 8, py::arg("threads") = 1);
}
