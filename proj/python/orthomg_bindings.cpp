#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "orthomg/async.hpp"
#include "orthomg/config.hpp"
#include "orthomg/harness.hpp"
#include "orthomg/resmin.hpp"

namespace py = pybind11;
using namespace orthomg;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Vector& v) { return Array(static_cast<py::ssize_t>(v.size()), v.data()); }

Vector from_numpy(const Array& a)
{
    if (a.ndim() != 1) {
        throw InvalidInput("expected a 1-d array");
    }
    return Vector(a.data(), a.data() + a.size());
}

py::tuple csr_tuple(const CsrMatrix& m)
{
    py::array_t<std::int64_t> indptr(static_cast<py::ssize_t>(m.row_offsets.size()));
    py::array_t<std::int64_t> indices(static_cast<py::ssize_t>(m.col_indices.size()));
    auto p = indptr.mutable_unchecked<1>();
    auto c = indices.mutable_unchecked<1>();
    for (std::size_t i = 0; i < m.row_offsets.size(); ++i) {
        p(i) = static_cast<std::int64_t>(m.row_offsets[i]);
    }
    for (std::size_t i = 0; i < m.col_indices.size(); ++i) {
        c(i) = static_cast<std::int64_t>(m.col_indices[i]);
    }
    return py::make_tuple(indptr, indices, to_numpy(m.values),
                          py::make_tuple(m.n_rows, m.n_cols));
}

CsrMatrix csr_from_tuple(const py::tuple& t)
{
    if (t.size() != 4) {
        throw InvalidInput("expected (indptr, indices, data, shape)");
    }
    CsrMatrix m;
    auto shape = t[3].cast<std::pair<std::size_t, std::size_t>>();
    m.n_rows = shape.first;
    m.n_cols = shape.second;
    m.row_offsets = t[0].cast<std::vector<std::size_t>>();
    m.col_indices = t[1].cast<std::vector<std::size_t>>();
    m.values = t[2].cast<std::vector<double>>();
    m.validate();
    return m;
}

py::dict result_dict(const SolveResult& r)
{
    py::list history;
    for (const auto& rec : r.history.records) {
        history.append(py::make_tuple(rec.step, rec.residual, std::string(to_string(rec.kind))));
    }
    py::dict d;
    d["x"] = to_numpy(r.x);
    d["r"] = to_numpy(r.r);
    d["iterations"] = r.iterations;
    d["converged"] = r.converged();
    d["initial_residual"] = r.initial_residual;
    d["final_residual"] = r.final_residual;
    d["breakdowns"] = r.breakdowns;
    d["sweeps_per_cycle"] = r.sweeps_per_cycle;
    d["history"] = history;
    return d;
}

class Solver {
public:
    explicit Solver(const std::string& config_text)
        : config_(parse_config(config_text)),
          problem_(prepare_problem(config_, config_.problem.cells_per_axis)),
          ctx_(problem_.hierarchy, config_.smoother)
    {
    }

    py::dict solve(const std::string& variant, std::size_t workers, std::optional<Array> rhs)
    {
        PreparedProblem p = problem_;
        if (rhs) {
            p.rhs = from_numpy(*rhs);
        }
        RunRecord rec;
        {
            py::gil_scoped_release release;
            rec = run_once(config_, p, ctx_, parse_variant(variant), workers);
        }
        if (rec.failed) {
            throw std::runtime_error(rec.error);
        }
        py::dict d = result_dict(rec.result);
        d["seconds"] = rec.seconds;
        d["variant"] = variant;
        d["workers"] = workers;
        return d;
    }

    std::size_t levels() const { return ctx_.levels(); }
    std::size_t dofs() const { return problem_.rhs.size(); }
    Array rhs() const { return to_numpy(problem_.rhs); }
    std::string config() const { return serialize(config_); }

private:
    RunConfig config_;
    PreparedProblem problem_;
    MultigridContext ctx_;
};

}  // namespace

PYBIND11_MODULE(_orthomg, m)
{
    m.doc() = "Orthonormalization multigrid (compiled core)";
    m.attr("__version__") = "0.1.0";

    py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
    py::register_exception<NumericalFailure>(m, "NumericalFailure", PyExc_ArithmeticError);
    py::register_exception<Timeout>(m, "Timeout", PyExc_TimeoutError);

    py::class_<ProblemSpec>(m, "ProblemSpec")
        .def(py::init<>())
        .def(py::init([](int dimension, std::size_t n, double half_width, double radius_factor,
                         double k_inner, double k_outer, double rhs) {
                 ProblemSpec s{dimension, half_width, n, radius_factor, k_inner, k_outer, rhs};
                 s.validate();
                 return s;
             }),
             py::arg("dimension") = 2, py::arg("cells_per_axis") = 64,
             py::arg("half_width") = 1.0, py::arg("radius_factor") = 0.7,
             py::arg("k_inner") = 1.0, py::arg("k_outer") = 1000.0, py::arg("rhs") = 1.0)
        .def_readwrite("dimension", &ProblemSpec::dimension)
        .def_readwrite("cells_per_axis", &ProblemSpec::cells_per_axis)
        .def_readwrite("half_width", &ProblemSpec::half_width)
        .def_readwrite("radius_factor", &ProblemSpec::radius_factor)
        .def_readwrite("k_inner", &ProblemSpec::k_inner)
        .def_readwrite("k_outer", &ProblemSpec::k_outer)
        .def_readwrite("rhs_constant", &ProblemSpec::rhs_constant)
        .def("validate", &ProblemSpec::validate)
        .def_property_readonly("spacing", &ProblemSpec::spacing);

    m.def(
        "assemble_poisson",
        [](const ProblemSpec& spec) {
            LinearSystem sys = assemble_poisson(spec);
            return py::make_tuple(csr_tuple(sys.matrix), to_numpy(sys.rhs));
        },
        py::arg("spec"), "Returns ((indptr, indices, data, shape), rhs).");

    m.def(
        "build_hierarchy",
        [](const ProblemSpec& spec, std::size_t min_coarse_dofs) {
            GridHierarchy h = build_hierarchy(spec, min_coarse_dofs);
            py::list levels;
            for (const auto& lvl : h.levels) {
                py::dict d;
                d["n_dofs"] = lvl.n_dofs();
                d["cells_per_axis"] = lvl.shape.cells_per_axis;
                d["matrix"] = csr_tuple(lvl.matrix);
                d["restriction"] = lvl.restriction ? py::object(csr_tuple(*lvl.restriction))
                                                   : py::none();
                d["prolongation"] = lvl.prolongation ? py::object(csr_tuple(*lvl.prolongation))
                                                     : py::none();
                levels.append(d);
            }
            return levels;
        },
        py::arg("spec"), py::arg("min_coarse_dofs") = kDefaultMinCoarseDofs);

    m.def(
        "partition_cells",
        [](int dimension, std::size_t cells_per_axis, std::size_t n_subdomains,
           std::size_t overlap) {
            Partition p = partition_cells({dimension, cells_per_axis}, n_subdomains, overlap);
            return py::make_tuple(p.core, p.extended);
        },
        py::arg("dimension"), py::arg("cells_per_axis"), py::arg("n_subdomains"),
        py::arg("overlap") = 1, "Returns (core, extended) index lists.");

    m.def(
        "assign_groups",
        [](const ProblemSpec& spec, std::size_t min_coarse_dofs, std::size_t workers,
           std::size_t coarsest) {
            GroupAssignment ga = assign_groups(build_hierarchy(spec, min_coarse_dofs), workers,
                                               coarsest);
            return py::make_tuple(ga.smoother_workers, ga.coarsest_workers);
        },
        py::arg("spec"), py::arg("min_coarse_dofs"), py::arg("workers"),
        py::arg("coarsest_workers") = 1);

    py::class_<SearchSpace>(m, "SearchSpace")
        .def(py::init([](const Array& x0, const Array& r0, std::size_t max_columns) {
                 return SearchSpace(from_numpy(x0), from_numpy(r0), max_columns);
             }),
             py::arg("x0"), py::arg("r0"), py::arg("max_columns") = SearchSpace::kDefaultMaxColumns)
        .def(
            "update",
            [](SearchSpace& s, const py::tuple& a, const Array& z) {
                return s.update(csr_from_tuple(a), from_numpy(z));
            },
            py::arg("matrix"), py::arg("z"), "Adds a direction; False on breakdown.")
        .def_property_readonly("x", [](const SearchSpace& s) { return to_numpy(s.solution()); })
        .def_property_readonly("r", [](const SearchSpace& s) { return to_numpy(s.residual()); })
        .def_property_readonly("residual_norm", &SearchSpace::residual_norm)
        .def_property_readonly("size", &SearchSpace::size)
        .def_property_readonly("breakdowns", &SearchSpace::breakdown_count);

    py::class_<Solver>(m, "Solver")
        .def(py::init<const std::string&>(), py::arg("config") = "",
             "Parses config text, assembles the problem and sets up the smoothers.")
        .def("solve", &Solver::solve, py::arg("variant") = "multiplicative_sync",
             py::arg("workers") = 1, py::arg("rhs") = py::none())
        .def_property_readonly("levels", &Solver::levels)
        .def_property_readonly("dofs", &Solver::dofs)
        .def_property_readonly("rhs", &Solver::rhs)
        .def_property_readonly("config", &Solver::config);

    m.def(
        "normalize_config", [](const std::string& text) { return serialize(parse_config(text)); },
        py::arg("text"));
    m.def(
        "config_digest", [](const std::string& text) { return digest_hex(parse_config(text)); },
        py::arg("text"));

    m.def(
        "run_command",
        [](const std::string& command, const std::string& config_text,
           const std::string& output) {
            const RunConfig cfg = parse_config(config_text);
            std::ostringstream log;
            int code = 0;
            {
                py::gil_scoped_release release;
                if (command == "solve") {
                    code = cmd_solve(cfg, output, log);
                } else if (command == "compare") {
                    code = cmd_compare(cfg, output, log);
                } else if (command == "scaling") {
                    code = cmd_scaling(cfg, output, log);
                } else {
                    throw InvalidInput("unknown command '" + command + "'");
                }
            }
            return py::make_tuple(code, log.str());
        },
        py::arg("command"), py::arg("config"), py::arg("output"),
        "Runs solve, compare or scaling; returns (exit_code, log).");
}
