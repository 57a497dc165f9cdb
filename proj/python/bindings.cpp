#include "mrlab/cli.hpp"
#include "mrlab/discrete_lw.hpp"
#include "mrlab/experiments.hpp"
#include "mrlab/geometry.hpp"
#include "mrlab/lattice.hpp"
#include "mrlab/sparse.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace mrlab;

namespace {

std::vector<Vec> to_points(const std::vector<std::vector<double>>& pts) {
    std::vector<Vec> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(Eigen::Map<const Vec>(p.data(), static_cast<Eigen::Index>(p.size())));
    return out;
}

std::vector<std::vector<double>> from_points(const std::vector<Vec>& pts) {
    std::vector<std::vector<double>> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.emplace_back(p.data(), p.data() + p.size());
    return out;
}

HypersurfacePatch make_preset(const std::string& name, std::size_t n, std::size_t normal_axis, double half_width,
                              double delta_geom, double param) {
    if (name == "flat") return HypersurfacePatch::flat(n, normal_axis, half_width, delta_geom);
    if (name == "paraboloid") return HypersurfacePatch::paraboloid(n, normal_axis, half_width, delta_geom);
    if (name == "monomial")
        return HypersurfacePatch::monomial(n, normal_axis, static_cast<int>(param), half_width, delta_geom);
    if (name == "sphere-cap") return HypersurfacePatch::sphere_cap(n, normal_axis, param, half_width, delta_geom);
    throw InvalidArgument("unknown surface preset: " + name);
}

}  // namespace

PYBIND11_MODULE(_mrlab, m) {
    m.doc() = "Multilinear restriction numerics";

    auto invalid = py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    auto resolution = py::register_exception<ResolutionError>(m, "ResolutionError", PyExc_RuntimeError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
    (void)invalid;
    (void)resolution;

    m.def("fit_line", [](const std::vector<double>& x, const std::vector<double>& y) {
        const LineFit f = fit_line(x, y);
        return py::make_tuple(f.slope, f.intercept, f.residual);
    }, py::arg("x"), py::arg("y"), "Least-squares line: (slope, intercept, residual).");

    py::class_<TypeResult>(m, "TypeResult")
        .def_readonly("finite", &TypeResult::finite)
        .def_readonly("order", &TypeResult::order)
        .def_readonly("max_order", &TypeResult::max_order);

    py::class_<HypersurfacePatch>(m, "HypersurfacePatch")
        .def_static("preset", &make_preset, py::arg("name"), py::arg("n"), py::arg("normal_axis") = 0,
                    py::arg("half_width") = 1.0, py::arg("delta_geom") = 0.25, py::arg("param") = 0.0,
                    "flat | paraboloid | monomial (param = l) | sphere-cap (param = rho)")
        .def_readonly("n", &HypersurfacePatch::n)
        .def_readonly("normal_axis", &HypersurfacePatch::normal_axis)
        .def("embed", [](const HypersurfacePatch& p, const std::vector<double>& xi) {
            const Vec v = p.embed(xi);
            return std::vector<double>(v.data(), v.data() + v.size());
        })
        .def("unit_normal", [](const HypersurfacePatch& p, const std::vector<double>& xi) {
            const Vec v = p.unit_normal(xi);
            return std::vector<double>(v.data(), v.data() + v.size());
        })
        .def("finite_type_order", [](const HypersurfacePatch& p, const std::vector<double>& x0, int max_order) {
            return finite_type_order(p, x0, max_order);
        }, py::arg("x0"), py::arg("max_order") = 8);

    m.def("check_transversality", [](const std::vector<HypersurfacePatch>& family, std::size_t samples) {
        return check_transversality(std::span<const HypersurfacePatch>(family), samples);
    }, py::arg("family"), py::arg("samples_per_surface") = 4);

    py::class_<PartitionReport>(m, "PartitionReport")
        .def_readonly("max_deviation", &PartitionReport::max_deviation)
        .def_readonly("truncation", &PartitionReport::truncation);

    m.def("partition_check", [](std::size_t dim, double scale, int order, std::size_t grid, double T) {
        const BumpFamily fam(CubeLattice(dim, scale), order);
        return partition_check(fam, Box::centered(dim, scale), grid, T);
    }, py::arg("dim"), py::arg("scale"), py::arg("order") = 8, py::arg("grid") = 16, py::arg("truncation") = 20.0);

    py::class_<LWResult>(m, "LWResult")
        .def_readonly("lhs", &LWResult::lhs)
        .def_readonly("rhs", &LWResult::rhs)
        .def_readonly("ratio", &LWResult::ratio);

    m.def("lw_random_ratio", [](const std::vector<std::size_t>& box, std::size_t k,
                                const std::vector<std::vector<std::size_t>>& splits, std::uint64_t seed) {
        const LWConfig cfg = LWConfig::standard(box, k);
        std::vector<std::vector<std::size_t>> sp = splits;
        if (sp.empty()) sp.assign(k, {});
        const auto g = random_lw_instance(cfg, sp, seed);
        return lw_refined_ratio(g, cfg);
    }, py::arg("box"), py::arg("k"), py::arg("splits") = std::vector<std::vector<std::size_t>>{},
       py::arg("seed") = 1, "Discrete Loomis-Whitney ratio of one random instance.");

    py::class_<SparseCollection>(m, "SparseCollection")
        .def_readonly("radius", &SparseCollection::radius)
        .def_readonly("separation", &SparseCollection::separation)
        .def_property_readonly("centers", [](const SparseCollection& c) { return from_points(c.centers); });

    py::class_<SparseCollectionSet>(m, "SparseCollectionSet")
        .def_readonly("N", &SparseCollectionSet::N)
        .def_readonly("C", &SparseCollectionSet::C)
        .def_readonly("collections", &SparseCollectionSet::collections)
        .def_readonly("measure", &SparseCollectionSet::measure)
        .def_readonly("radius_cap", &SparseCollectionSet::radius_cap)
        .def_readonly("kappa_cover", &SparseCollectionSet::kappa_cover)
        .def_readonly("radii_within_cap", &SparseCollectionSet::radii_within_cap);

    m.def("sparse_cover", [](const std::vector<std::vector<double>>& centers, std::size_t N, double C) {
        const auto pts = to_points(centers);
        return sparse_cover(pts, N, C);
    }, py::arg("centers"), py::arg("N"), py::arg("C") = 2.0);
    m.def("covers", [](const SparseCollectionSet& set, const std::vector<std::vector<double>>& centers) {
        const auto pts = to_points(centers);
        return covers(set, pts);
    });
    m.def("is_sparse", [](const std::vector<std::vector<double>>& centers, double R, std::size_t N, double C) {
        const auto pts = to_points(centers);
        return is_sparse(pts, R, N, C).sparse;
    });

    py::class_<EpsRemovalPlan>(m, "EpsRemovalPlan")
        .def_readonly("p", &EpsRemovalPlan::p)
        .def_readonly("n", &EpsRemovalPlan::n)
        .def_readonly("eps", &EpsRemovalPlan::eps)
        .def_readonly("C", &EpsRemovalPlan::C)
        .def_readonly("N", &EpsRemovalPlan::N)
        .def_readonly("beta", &EpsRemovalPlan::beta)
        .def_readonly("q_bound", &EpsRemovalPlan::q_bound)
        .def_readonly("q_bound_statement", &EpsRemovalPlan::q_bound_statement)
        .def_readonly("beta_in_range", &EpsRemovalPlan::beta_in_range)
        .def_readonly("chain_holds", &EpsRemovalPlan::chain_holds)
        .def_readonly("diagnostic", &EpsRemovalPlan::diagnostic);
    m.def("eps_removal_exponent", &eps_removal_exponent, py::arg("p"), py::arg("n"), py::arg("eps"), py::arg("C"));
    m.def("chain_inequality", &chain_inequality, py::arg("p"), py::arg("n"), py::arg("beta"));
    m.def("c_factor", &c_factor, py::arg("mu"), py::arg("delta"), py::arg("R"), py::arg("c"));

    m.def("experiment_kinds", &experiment_kinds);
    // Parameters and summary cross the boundary as JSON text; the Python wrapper converts.
    m.def("_run_experiment", [](const std::string& kind, const std::string& params_json, std::uint64_t seed,
                                std::size_t jobs) {
        const ExperimentConfig cfg = make_config(kind, Json::parse(params_json),
                                                 Json{{"seed", seed}, {"jobs", jobs}});
        ExperimentOutput out;
        {
            py::gil_scoped_release release;
            out = run_experiment(cfg);
        }
        py::dict tables;
        for (const auto& [suffix, t] : out.tables) tables[py::str(suffix)] = py::make_tuple(t.header, t.rows);
        return py::make_tuple(cfg.run_id(), tables, out.summary.dump());
    });
    m.attr("__version__") = MRLAB_VERSION;
}
