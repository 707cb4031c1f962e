#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mfdsm/commands.hpp"
#include "mfdsm/io.hpp"
#include "mfdsm/kernel.hpp"
#include "mfdsm/oracle.hpp"
#include "mfdsm/parallel.hpp"
#include "mfdsm/simulator.hpp"
#include "mfdsm/solver.hpp"

namespace py = pybind11;
using namespace mfdsm;

namespace {

py::array_t<double> to_array(std::span<const double> values) {
  py::array_t<double> out(static_cast<py::ssize_t>(values.size()));
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

// (states, n + 1) so that values[s] is the column for one trajectory state.
py::array_t<double> value_array(const ValueFunction& v) {
  py::array_t<double> out({v.states(), v.grid_size()});
  std::copy(v.raw().begin(), v.raw().end(), out.mutable_data());
  return out;
}

// (states, n + 1, 2) holding (reserve, demand) option indices.
py::array_t<std::int64_t> policy_array(const Policy& pol) {
  py::array_t<std::int64_t> out({pol.states(), pol.grid_size(), std::size_t{2}});
  auto r = out.mutable_unchecked<3>();
  for (std::size_t s = 0; s < pol.states(); ++s) {
    for (std::size_t m = 0; m < pol.grid_size(); ++m) {
      r(s, m, 0) = static_cast<std::int64_t>(pol.at(m, s).reserve);
      r(s, m, 1) = static_cast<std::int64_t>(pol.at(m, s).demand);
    }
  }
  return out;
}

Policy policy_from_array(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& arr,
                         const Scenario& scn) {
  if (arr.ndim() != 3 || arr.shape(2) != 2 ||
      static_cast<std::size_t>(arr.shape(0)) != scn.trajectory.size() ||
      static_cast<std::size_t>(arr.shape(1)) != scn.grid_size()) {
    throw Error(ErrorCode::InvalidParameter, "policy must have shape (states, n + 1, 2)");
  }
  Policy pol(scn.grid_size(), scn.trajectory.size());
  auto r = arr.unchecked<3>();
  for (std::size_t s = 0; s < pol.states(); ++s) {
    for (std::size_t m = 0; m < pol.grid_size(); ++m) {
      const auto g_r = r(s, m, 0);
      const auto g_d = r(s, m, 1);
      if (g_r < 0 || g_d < 0 || static_cast<std::size_t>(g_r) >= scn.k() ||
          static_cast<std::size_t>(g_d) >= scn.k()) {
        throw Error(ErrorCode::OptionOutOfRange, "policy entry outside 0..k-1");
      }
      pol.at(m, s) = {static_cast<std::size_t>(g_r), static_cast<std::size_t>(g_d)};
    }
  }
  return pol;
}

InitMode parse_init(const std::string& name) {
  if (name == "bernoulli") return InitMode::Bernoulli;
  if (name == "zero") return InitMode::AllZero;
  throw Error(ErrorCode::InvalidParameter, "init must be 'bernoulli' or 'zero'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mean-field demand-side management: kernel, solver, simulator and oracles";

  // Kept alive for the interpreter's lifetime; the translator needs it after
  // module init returns.
  static py::handle error_type =
      py::exception<Error>(m, "MfdsmError", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = error_type(std::string(to_string(e.code())) + ": " + e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  py::class_<Scenario>(m, "Scenario")
      .def_static("from_json", &scenario_from_json, py::arg("text"))
      .def_static("load", [](const std::string& path) { return load_scenario(path); },
                  py::arg("path"))
      .def_static("example1", &example1_scenario)
      .def_static("tiny", &tiny_scenario)
      .def("to_json", &scenario_to_json)
      .def_readwrite("n", &Scenario::n)
      .def_readwrite("p", &Scenario::p)
      .def_readwrite("beta", &Scenario::beta)
      .def_property_readonly("k", &Scenario::k)
      .def_property_readonly("states", [](const Scenario& s) { return s.trajectory.size(); })
      .def_property_readonly("theta", [](const Scenario& s) { return to_array(s.trajectory.thetas()); })
      .def("validate",
           [](const Scenario& s) {
             py::list out;
             for (const auto& issue : scenario_issues(s)) {
               out.append(py::make_tuple(to_string(issue.code), issue.field, issue.message));
             }
             return out;
           },
           "List of (code, field, message); empty when the scenario is valid.")
      .def("__repr__", [](const Scenario& s) {
        return "<Scenario n=" + std::to_string(s.n) + " k=" + std::to_string(s.k()) +
               " states=" + std::to_string(s.trajectory.size()) + ">";
      });

  m.def("binomial_pmf",
        [](double p, std::size_t trials) { return to_array(binomial_pmf(p, trials).weights()); },
        py::arg("p"), py::arg("trials"));
  m.def("convolve",
        [](const std::vector<double>& a, const std::vector<double>& b) {
          return to_array(convolve(Distribution(a), Distribution(b)).weights());
        },
        py::arg("a"), py::arg("b"));
  m.def("per_step_cost",
        [](const Scenario& scn, std::size_t m_count, std::size_t s, std::size_t g_r,
           std::size_t g_d) { return per_step_cost(m_count, s, {g_r, g_d}, scn); },
        py::arg("scenario"), py::arg("m_count"), py::arg("state"), py::arg("reserve"),
        py::arg("demand"));
  m.def("transition_row",
        [](const Scenario& scn, std::size_t m_count, std::size_t g_r, std::size_t g_d,
           std::optional<std::size_t> s) {
          return to_array(transition_row(m_count, {g_r, g_d}, scn, s).weights());
        },
        py::arg("scenario"), py::arg("m_count"), py::arg("reserve"), py::arg("demand"),
        py::arg("state") = py::none());
  m.def("enumerate_kernel_row",
        [](const Scenario& scn, std::size_t m_count, std::size_t g_r, std::size_t g_d) {
          return to_array(enumerate_kernel_row(scn, m_count, {g_r, g_d}).weights());
        },
        py::arg("scenario"), py::arg("m_count"), py::arg("reserve"), py::arg("demand"));

  py::class_<KernelTensor>(m, "Kernel")
      .def(py::init([](const Scenario& scn, bool state_dependent, unsigned threads) {
             return build_kernel(scn, state_dependent, resolve_threads(threads));
           }),
           py::arg("scenario"), py::arg("state_dependent") = false, py::arg("threads") = 1)
      .def_property_readonly("n", &KernelTensor::n)
      .def_property_readonly("k", &KernelTensor::k)
      .def_property_readonly("row_count", &KernelTensor::row_count)
      .def("row",
           [](const KernelTensor& k, std::size_t m_count, std::size_t g_r, std::size_t g_d,
              std::size_t s) {
             if (m_count > k.n() || g_r >= k.k() || g_d >= k.k()) {
               throw Error(ErrorCode::OptionOutOfRange, "row index out of range");
             }
             return to_array(k.row(m_count, {g_r, g_d}, s));
           },
           py::arg("m_count"), py::arg("reserve"), py::arg("demand"), py::arg("state") = 0);

  m.def("solve",
        [](const Scenario& scn, double epsilon, std::size_t max_iters, unsigned threads) {
          validate_scenario(scn);
          const unsigned t = resolve_threads(threads);
          SolveResult res;
          {
            py::gil_scoped_release release;
            const auto kernel = build_kernel(scn, scn.state_dependent(), t);
            res = value_iteration(scn, kernel, {epsilon, max_iters, t});
          }
          py::dict out;
          out["values"] = value_array(res.values);
          out["policy"] = policy_array(res.policy);
          out["iterations"] = res.report.iterations;
          out["final_residual"] = res.report.final_residual;
          out["threshold"] = res.report.threshold;
          out["elapsed"] = res.report.elapsed.count();
          out["residuals"] = to_array(res.report.residuals);
          return out;
        },
        py::arg("scenario"), py::arg("epsilon") = 0.01, py::arg("max_iters") = 100000,
        py::arg("threads") = 1,
        "Value iteration. Returns values (states, n+1), policy (states, n+1, 2) and the report.");

  m.def("evaluate_policy",
        [](const Scenario& scn, const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& policy) {
          validate_scenario(scn);
          const auto pol = policy_from_array(policy, scn);
          const auto kernel = build_kernel(scn, scn.state_dependent());
          return value_array(exact_policy_evaluation(pol, scn, kernel));
        },
        py::arg("scenario"), py::arg("policy"), "Exact discounted cost of a stationary policy.");

  m.def("simulate",
        [](const Scenario& scn, const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& policy,
           std::size_t horizon, std::uint64_t seed, const std::string& init) {
          validate_scenario(scn);
          const auto pol = policy_from_array(policy, scn);
          const auto trace = run_simulation(scn, pol, horizon, seed, parse_init(init));
          const std::size_t len = trace.steps.size();
          py::array_t<std::int64_t> t(len), s(len), m_count(len), g_r(len), g_d(len);
          py::array_t<double> theta(len), cost(len);
          for (std::size_t i = 0; i < len; ++i) {
            const auto& st = trace.steps[i];
            t.mutable_at(i) = static_cast<std::int64_t>(st.t);
            s.mutable_at(i) = static_cast<std::int64_t>(st.s);
            m_count.mutable_at(i) = static_cast<std::int64_t>(st.m_count);
            g_r.mutable_at(i) = static_cast<std::int64_t>(st.action.reserve);
            g_d.mutable_at(i) = static_cast<std::int64_t>(st.action.demand);
            theta.mutable_at(i) = st.theta;
            cost.mutable_at(i) = st.step_cost;
          }
          py::dict out;
          out["t"] = t;
          out["s"] = s;
          out["m_count"] = m_count;
          out["reserve"] = g_r;
          out["demand"] = g_d;
          out["theta"] = theta;
          out["step_cost"] = cost;
          out["discounted_total"] = trace.discounted_total;
          out["truncation_bound"] = trace.truncation_bound;
          return out;
        },
        py::arg("scenario"), py::arg("policy"), py::arg("horizon"), py::arg("seed") = 1,
        py::arg("init") = "bernoulli");

  m.def("estimate_cost",
        [](const Scenario& scn, const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& policy,
           std::size_t horizon, std::size_t replications, std::uint64_t seed,
           const std::string& init, unsigned threads) {
          validate_scenario(scn);
          const auto pol = policy_from_array(policy, scn);
          CostEstimate est;
          {
            py::gil_scoped_release release;
            est = estimate_cost(scn, pol, horizon, replications, seed, parse_init(init),
                                resolve_threads(threads));
          }
          return py::make_tuple(est.mean, est.std_error ? py::cast(*est.std_error) : py::none());
        },
        py::arg("scenario"), py::arg("policy"), py::arg("horizon"), py::arg("replications"),
        py::arg("seed") = 1, py::arg("init") = "bernoulli", py::arg("threads") = 1,
        "Returns (mean, standard error); the error is None for one replication.");

  m.def("verify",
        []() {
          py::list out;
          for (const auto& c : run_verification()) {
            py::dict row;
            row["name"] = c.name;
            row["passed"] = c.passed;
            row["max_deviation"] = c.max_deviation;
            row["tolerance"] = c.tolerance;
            row["detail"] = c.detail;
            out.append(row);
          }
          return out;
        },
        "Run the oracle checks; one dict per check.");

  m.def("replicate_example1",
        [](const std::string& out_dir, std::uint64_t seed, std::size_t horizon) {
          Example1Options opts;
          opts.out_dir = out_dir;
          opts.seed = seed;
          opts.horizon = horizon;
          const auto run = replicate_example1(opts);
          return run.manifest.outputs;
        },
        py::arg("out_dir"), py::arg("seed") = 1, py::arg("horizon") = 200,
        "Solve and simulate Example 1, writing CSVs; returns the written paths.");

  m.attr("__version__") = kToolVersion;
}
