#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "rvm/cli.hpp"
#include "rvm/config.hpp"
#include "rvm/fields.hpp"
#include "rvm/io.hpp"
#include "rvm/kernels.hpp"
#include "rvm/solver.hpp"
#include "rvm/validation.hpp"

namespace py = pybind11;
using namespace rvm;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Vec3 to_vec3(const Array& a) {
    if (a.size() != 3) throw py::value_error("expected 3 components");
    const double* p = a.data();
    return {p[0], p[1], p[2]};
}

std::vector<Vec3> to_points(const Array& a) {
    if (a.ndim() != 2 || a.shape(1) != 3) throw py::value_error("expected an (n, 3) array");
    std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
    const double* p = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {p[3 * i], p[3 * i + 1], p[3 * i + 2]};
    return out;
}

Array from_vec3(const Vec3& v) {
    Array out(3);
    double* p = out.mutable_data();
    p[0] = v.x;
    p[1] = v.y;
    p[2] = v.z;
    return out;
}

Array from_mat3(const Mat3& m) {
    Array out({3, 3});
    std::copy(m.m.begin(), m.m.end(), out.mutable_data());
    return out;
}

Array from_points(const std::vector<Vec3>& v) {
    Array out({static_cast<py::ssize_t>(v.size()), py::ssize_t{3}});
    double* p = out.mutable_data();
    for (std::size_t i = 0; i < v.size(); ++i) {
        p[3 * i] = v[i].x;
        p[3 * i + 1] = v[i].y;
        p[3 * i + 2] = v[i].z;
    }
    return out;
}

Array trajectories_array(const TrajectoryEnsemble& X) {
    const auto l = static_cast<py::ssize_t>(X.levels()), n = static_cast<py::ssize_t>(X.particles()),
               c = static_cast<py::ssize_t>(X.copies());
    Array out({l, n, c, py::ssize_t{3}});
    double* p = out.mutable_data();
    for (const Vec3& v : X.raw()) {
        *p++ = v.x;
        *p++ = v.y;
        *p++ = v.z;
    }
    return out;
}

Array gauges_array(const GaugeEnsemble& G) {
    const auto l = static_cast<py::ssize_t>(G.levels()), n = static_cast<py::ssize_t>(G.particles()),
               c = static_cast<py::ssize_t>(G.copies());
    Array out({l, n, c, py::ssize_t{3}, py::ssize_t{3}});
    double* p = out.mutable_data();
    for (const Mat3& g : G.raw()) p = std::copy(g.m.begin(), g.m.end(), p);
    return out;
}

}  // namespace

PYBIND11_MODULE(_rvm, m) {
    m.doc() = "Random vortex particle solver";
    m.attr("__version__") = software_version();

    py::enum_<NoiseScheme>(m, "NoiseScheme")
        .value("shared", NoiseScheme::Shared)
        .value("independent", NoiseScheme::Independent);
    py::enum_<SelfInteraction>(m, "SelfInteraction")
        .value("include_all", SelfInteraction::IncludeAll)
        .value("exclude_self", SelfInteraction::ExcludeSelf);

    m.def("biot_savart_kernel", [](const Array& z, double delta) { return from_mat3(biot_savart_kernel(to_vec3(z), {delta})); },
          py::arg("z"), py::arg("delta") = 0.0);
    m.def(
        "strain_kernel",
        [](const Array& z, double delta) {
            const Tensor333 h = strain_kernel(to_vec3(z), {delta});
            Array out({3, 3, 3});
            std::copy(h.h.begin(), h.h.end(), out.mutable_data());
            return out;
        },
        py::arg("z"), py::arg("delta") = 0.0, "H[k, j, i] with S(k, j) = sum_i H[k, j, i] w_i");

    py::class_<ParticleSet>(m, "ParticleSet")
        .def(py::init([](const Array& pos, const Array& w, double h) {
                 return particles_from_raw(to_points(pos), to_points(w), h);
             }),
             py::arg("positions"), py::arg("weights"), py::arg("h") = 1.0)
        .def_property_readonly("positions", [](const ParticleSet& p) { return from_points(p.positions); })
        .def_property_readonly("weights", [](const ParticleSet& p) { return from_points(p.weights); })
        .def_readonly("h", &ParticleSet::h)
        .def("__len__", &ParticleSet::size);
    m.def("lamb_oseen_particles", &lamb_oseen_particles);
    m.def(
        "lattice_particles",
        [](const std::string& initializer, int per_pi) {
            std::istringstream is("initializer = " + initializer + "\nlattice_per_pi = " + std::to_string(per_pi) + "\n");
            return make_particles(parse_config(is));
        },
        py::arg("initializer"), py::arg("per_pi"), "taylor_green or isotropic lattice particles at spacing pi / per_pi");

    py::class_<SolverConfig>(m, "SolverConfig")
        .def(py::init([](double nu, double delta, double tol, int max_iters, NoiseScheme scheme,
                         SelfInteraction self_interaction, int threads) {
                 SolverConfig c;
                 c.nu = nu;
                 c.moll.delta = delta;
                 c.tol = tol;
                 c.max_iters = max_iters;
                 c.scheme = scheme;
                 c.self_interaction = self_interaction;
                 c.threads = threads;
                 return c;
             }),
             py::arg("nu") = 0.5, py::arg("delta") = 0.1, py::arg("tol") = 1e-7, py::arg("max_iters") = 200,
             py::arg("scheme") = NoiseScheme::Shared, py::arg("self_interaction") = SelfInteraction::IncludeAll,
             py::arg("threads") = 0)
        .def_readwrite("nu", &SolverConfig::nu)
        .def_property(
            "delta", [](const SolverConfig& c) { return c.moll.delta; },
            [](SolverConfig& c, double d) { c.moll.delta = d; })
        .def_readwrite("tol", &SolverConfig::tol)
        .def_readwrite("max_iters", &SolverConfig::max_iters)
        .def_readwrite("scheme", &SolverConfig::scheme)
        .def_readwrite("self_interaction", &SolverConfig::self_interaction)
        .def_readwrite("threads", &SolverConfig::threads);

    py::class_<Solution>(m, "Solution")
        .def_property_readonly("trajectories", [](const Solution& s) { return trajectories_array(s.trajectories); },
                               "(m+1, n, N, 3) positions")
        .def_property_readonly("gauges", [](const Solution& s) { return gauges_array(s.gauges); },
                               "(m+1, n, N, 3, 3) gauges G(t_r, 0)")
        .def_property_readonly("times", [](const Solution& s) {
            std::vector<double> t;
            for (std::size_t r = 0; r <= s.grid.m; ++r) t.push_back(s.grid.t(r));
            return t;
        })
        .def_readonly("iterations_used", &Solution::iterations_used)
        .def_readonly("final_update_norm", &Solution::final_update_norm)
        .def_readonly("converged", &Solution::converged)
        .def_readonly("norm_history", &Solution::norm_history);

    m.def(
        "solve",
        [](const ParticleSet& p, double T, std::size_t steps, std::size_t copies, const SolverConfig& cfg,
           std::uint64_t seed) {
            py::gil_scoped_release release;
            return solve(p, TimeGrid(T, steps), copies, cfg, seed);
        },
        py::arg("particles"), py::arg("T"), py::arg("steps"), py::arg("copies"), py::arg("config"),
        py::arg("seed") = 0);

    m.def(
        "reconstruct_velocity",
        [](const Array& points, std::size_t r, const Solution& sol, const ParticleSet& p, const SolverConfig& cfg) {
            const auto pts = to_points(points);
            std::vector<Vec3> v;
            {
                py::gil_scoped_release release;
                v = probe_velocity(sol, p, cfg, pts, r);
            }
            return from_points(v);
        },
        py::arg("points"), py::arg("r"), py::arg("solution"), py::arg("particles"), py::arg("config"));
    m.def(
        "reconstruct_strain",
        [](const Array& x, std::size_t r, const Solution& sol, const ParticleSet& p, const SolverConfig& cfg) {
            return from_mat3(reconstruct_strain(to_vec3(x), r, sol, p, cfg));
        },
        py::arg("x"), py::arg("r"), py::arg("solution"), py::arg("particles"), py::arg("config"));

    m.def("lamb_oseen_exact", [](const Array& x, double t, double nu) { return from_vec3(lamb_oseen_exact(to_vec3(x), t, nu)); },
          py::arg("x"), py::arg("t"), py::arg("nu") = 0.5);
    m.def("taylor_green_initial", [](const Array& x) { return from_vec3(taylor_green_initial(to_vec3(x)).velocity); });
    m.def(
        "lamb_oseen_l1_error",
        [](const Solution& sol, const ParticleSet& p, const SolverConfig& cfg) {
            const LatticeSpec lat = lamb_oseen_error_lattice(sol.grid.m);
            const auto pts = lat.points();
            py::gil_scoped_release release;
            const auto approx = probe_velocity(sol, p, cfg, pts, sol.grid.m);
            std::vector<Vec3> exact;
            for (const Vec3& x : pts) exact.push_back(lamb_oseen_exact(x, sol.grid.T, cfg.nu));
            return l1_error(approx, exact, lat.cell_volume());
        },
        "Discrete L1 error over the 20^3 lattice of spacing 0.1 on [-1, 0.9]^3 at the final time");

    m.def("matrix_exp", [](const Array& a) {
        if (a.size() != 9) throw py::value_error("expected a 3x3 matrix");
        Mat3 mm;
        std::copy(a.data(), a.data() + 9, mm.m.begin());
        return from_mat3(matrix_exp(mm));
    });

    m.def(
        "fk_oracle_check",
        [](const Array& strain, const Array& amplitude, const Array& wavevector, const Array& x, double nu, double T,
           double dt, std::size_t samples, std::uint64_t seed) {
            FkConfig c;
            if (strain.size() != 9) throw py::value_error("strain must be 3x3");
            std::copy(strain.data(), strain.data() + 9, c.strain.m.begin());
            c.f0 = PlaneWave{to_vec3(amplitude), to_vec3(wavevector)};
            c.x = to_vec3(x);
            c.nu = nu;
            c.T = T;
            c.dt = dt;
            c.samples = samples;
            c.seed = seed;
            FkResult r;
            {
                py::gil_scoped_release release;
                r = fk_oracle_check(c);
            }
            py::dict d;
            d["monte_carlo"] = from_vec3(r.monte_carlo);
            d["oracle"] = from_vec3(r.oracle);
            d["rel_error"] = r.rel_error;
            return d;
        },
        py::arg("strain"), py::arg("amplitude"), py::arg("wavevector"), py::arg("x"), py::arg("nu") = 0.5,
        py::arg("T") = 1.0, py::arg("dt") = 1e-3, py::arg("samples") = 100000, py::arg("seed") = 0);

    m.def(
        "duality_check",
        [](const Array& drift, const Array& xi, const Array& eta, double nu, double T, std::size_t samples,
           double bin_width, std::uint64_t seed) {
            DualityConfig c;
            c.drift = to_vec3(drift);
            c.xi = to_vec3(xi);
            c.eta = to_vec3(eta);
            c.nu = nu;
            c.T = T;
            c.samples = samples;
            c.bin_width = bin_width;
            c.seed = seed;
            DualityResult r;
            {
                py::gil_scoped_release release;
                r = duality_check(c);
            }
            py::dict d;
            d["lhs"] = from_vec3(r.lhs);
            d["rhs"] = from_vec3(r.rhs);
            d["std_err"] = r.std_err;
            d["agrees"] = r.agrees(3.0);
            return d;
        },
        py::arg("drift"), py::arg("xi"), py::arg("eta"), py::arg("nu") = 0.5, py::arg("T") = 1.0,
        py::arg("samples") = 100000, py::arg("bin_width") = 0.2, py::arg("seed") = 0);

    m.def(
        "run_command",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = run_command(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs an rvm subcommand in-process; returns (exit_code, stdout, stderr)");
}
