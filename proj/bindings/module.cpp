#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ovb/chi2.hpp"
#include "ovb/diagnostics.hpp"
#include "ovb/engine.hpp"
#include "ovb/experiment.hpp"

namespace py = pybind11;
using namespace ovb;

PYBIND11_MODULE(_ovb, m) {
    m.doc() = "sequential Gaussian posterior updates: solvers, metrics, experiments";

    py::register_exception<DimensionMismatch>(m, "DimensionMismatchError", PyExc_ValueError);
    py::register_exception<NotPositiveDefinite>(m, "NotPositiveDefiniteError",
                                                PyExc_ArithmeticError);
    py::register_exception<InvalidAlpha>(m, "InvalidAlphaError", PyExc_ValueError);
    py::register_exception<SeparationDetected>(m, "SeparationDetectedError",
                                               PyExc_RuntimeError);
    py::register_exception<NoConvergence>(m, "NoConvergenceError", PyExc_RuntimeError);
    py::register_exception<MalformedCsv>(m, "MalformedCsvError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigErrorError", PyExc_ValueError);

    py::class_<GaussianState>(m, "GaussianState")
        .def(py::init([](const Eigen::VectorXd& mean, const Eigen::MatrixXd& precision) {
                 return GaussianState(mean, SpdMatrix(precision));
             }),
             py::arg("mean"), py::arg("precision"))
        .def_property_readonly("mean", [](const GaussianState& s) { return s.mean; })
        .def_property_readonly("precision",
                               [](const GaussianState& s) { return s.precision.matrix(); })
        .def_property_readonly("dim", &GaussianState::dim);

    py::class_<TvBounds>(m, "TvBounds")
        .def_readonly("lower", &TvBounds::lower)
        .def_readonly("upper", &TvBounds::upper)
        .def_readonly("delta", &TvBounds::delta);

    m.def("gaussian_kl", &gaussian_kl, py::arg("q1"), py::arg("q2"));
    m.def("gaussian_tv_1d", &gaussian_tv_1d, py::arg("q1"), py::arg("q2"));
    m.def("delta_metric", &delta_metric, py::arg("q1"), py::arg("q2"));
    m.def("tv_bounds", &tv_bounds, py::arg("q1"), py::arg("q2"));
    m.def(
        "sample",
        [](const GaussianState& q, std::uint64_t seed, int k) {
            const auto draws = sample(q, seed, k);
            Eigen::MatrixXd out(k, q.dim());
            for (int i = 0; i < k; ++i) out.row(i) = draws[static_cast<std::size_t>(i)];
            return out;
        },
        py::arg("q"), py::arg("seed"), py::arg("k"));
    m.def("chi2_quantile", &chi2_quantile, py::arg("p"), py::arg("alpha"));
    m.def("chi2_cdf", &chi2_cdf, py::arg("p"), py::arg("x"));

    py::class_<MiniBatch>(m, "MiniBatch")
        .def(py::init([](const Eigen::VectorXd& y) { return MiniBatch(y); }), py::arg("y"))
        .def(py::init([](const Eigen::VectorXd& y, const Eigen::MatrixXd& design) {
                 return MiniBatch(y, design);
             }),
             py::arg("y"), py::arg("design"))
        .def_property_readonly("y", [](const MiniBatch& b) { return b.y; })
        .def_property_readonly("design",
                               [](const MiniBatch& b) -> py::object {
                                   if (!b.design) return py::none();
                                   return py::cast(*b.design);
                               })
        .def_property_readonly("n", &MiniBatch::n)
        .def_property_readonly("param_dim", &MiniBatch::param_dim);

    py::class_<ModelKind>(m, "ModelKind")
        .def_static("logistic", &ModelKind::logistic)
        .def_static("bernoulli_intercept", &ModelKind::bernoulli_intercept)
        .def_static("gaussian_linear", &ModelKind::gaussian_linear, py::arg("noise_precision"));

    m.def("loglik", &loglik, py::arg("model"), py::arg("batch"), py::arg("theta"));
    m.def("grad", &grad, py::arg("model"), py::arg("batch"), py::arg("theta"));
    m.def("hessian", &hessian, py::arg("model"), py::arg("batch"), py::arg("theta"));
    m.def("deriv34_opnorm_bounds", &deriv34_opnorm_bounds, py::arg("model"), py::arg("batch"));
    m.def("conjugate_posterior", &conjugate_posterior, py::arg("noise_precision"),
          py::arg("batch"), py::arg("prior"));
    m.def("score_matrix_V", &score_matrix_V, py::arg("model"), py::arg("batch"));
    m.def("load_csv", &load_csv, py::arg("path"));

    py::class_<SolverReport>(m, "SolverReport")
        .def_readonly("iterations", &SolverReport::iterations)
        .def_readonly("grad_norm", &SolverReport::grad_norm)
        .def_readonly("step_halvings", &SolverReport::step_halvings)
        .def_readonly("converged", &SolverReport::converged);

    py::class_<VbConfig>(m, "VbConfig")
        .def(py::init<>())
        .def_readwrite("mc_draws", &VbConfig::mc_draws)
        .def_readwrite("max_iterations", &VbConfig::max_iterations)
        .def_readwrite("step_size", &VbConfig::step_size)
        .def_readwrite("step_decay", &VbConfig::step_decay)
        .def_readwrite("grad_tolerance", &VbConfig::grad_tolerance)
        .def_readwrite("seed", &VbConfig::seed);

    py::class_<PenalizedObjective>(m, "PenalizedObjective")
        .def(py::init<ModelKind, MiniBatch, GaussianState>(), py::arg("model"),
             py::arg("batch"), py::arg("prior"))
        .def("value", &PenalizedObjective::value, py::arg("theta"))
        .def("gradient", &PenalizedObjective::gradient, py::arg("theta"));

    m.def(
        "pmle",
        [](const PenalizedObjective& obj, const Eigen::VectorXd& init, double tol) {
            auto fit = pmle(obj, init, tol);
            return py::make_tuple(fit.theta, fit.precision.matrix(), fit.report);
        },
        py::arg("obj"), py::arg("init"), py::arg("tol") = 1e-10);
    m.def(
        "laplace",
        [](const Eigen::VectorXd& theta_hat, const Eigen::MatrixXd& precision_hat) {
            return laplace(theta_hat, SpdMatrix(precision_hat));
        },
        py::arg("theta_hat"), py::arg("precision_hat"));
    m.def("elbo", &elbo, py::arg("obj"), py::arg("q"), py::arg("draws"), py::arg("seed"));
    m.def("vb_fit", &vb_fit, py::arg("obj"), py::arg("cfg"), py::arg("init"));

    py::class_<UpdateMethod>(m, "UpdateMethod")
        .def_static("exact_conjugate", &UpdateMethod::exact_conjugate)
        .def_static("laplace", &UpdateMethod::laplace_update)
        .def_static("variational", &UpdateMethod::variational, py::arg("cfg"));

    py::class_<UpdateRecord>(m, "UpdateRecord")
        .def_readonly("t", &UpdateRecord::t)
        .def_property_readonly("posterior",
                               [](const UpdateRecord& r) { return r.posterior; })
        .def_property_readonly("pmle_theta",
                               [](const UpdateRecord& r) { return r.pmle_theta; })
        .def_property_readonly(
            "pmle_precision",
            [](const UpdateRecord& r) { return r.pmle_precision.matrix(); })
        .def_readonly("solver", &UpdateRecord::solver)
        .def_readonly("wall_ms", &UpdateRecord::wall_ms);

    m.def(
        "run_online",
        [](const ModelKind& model, const std::vector<MiniBatch>& batches,
           const GaussianState& prior0, const UpdateMethod& method) {
            return run_online(model, batches, prior0, method);
        },
        py::arg("model"), py::arg("batches"), py::arg("prior0"), py::arg("method"));

    py::class_<BatchBaselines>(m, "BatchBaselines")
        .def_property_readonly("pmle_theta",
                               [](const BatchBaselines& b) { return b.pmle_theta; })
        .def_property_readonly(
            "pmle_precision",
            [](const BatchBaselines& b) { return b.pmle_precision.matrix(); })
        .def_property_readonly("mle_theta", [](const BatchBaselines& b) { return b.mle_theta; })
        .def_property_readonly(
            "mle_precision",
            [](const BatchBaselines& b) { return b.mle_precision.matrix(); })
        .def_property_readonly("laplace_full",
                               [](const BatchBaselines& b) { return b.laplace_full; })
        .def_property_readonly("mle_normal",
                               [](const BatchBaselines& b) { return b.mle_normal; })
        .def_readonly("mle_normal_tag", &BatchBaselines::mle_normal_tag);

    m.def("batch_baselines", &batch_baselines, py::arg("model"), py::arg("all_data"),
          py::arg("prior0"), py::arg("theta0") = std::nullopt);
    m.def("eta_residual", &eta_residual, py::arg("model"), py::arg("batches"),
          py::arg("prior0"), py::arg("records"), py::arg("theta"));
    m.def("split_batches", &split_batches, py::arg("all_data"), py::arg("n"));

    py::class_<SmoothnessReport>(m, "SmoothnessReport")
        .def_readonly("tau3_hat", &SmoothnessReport::tau3_hat)
        .def_readonly("tau4_hat", &SmoothnessReport::tau4_hat)
        .def_readonly("r_la", &SmoothnessReport::r_la)
        .def_readonly("r_eff", &SmoothnessReport::r_eff)
        .def_readonly("p_eff", &SmoothnessReport::p_eff)
        .def_readonly("lambda_t", &SmoothnessReport::lambda_t)
        .def_readonly("p_star", &SmoothnessReport::p_star)
        .def_readonly("eps_tv", &SmoothnessReport::eps_tv)
        .def_readonly("eps_kl", &SmoothnessReport::eps_kl)
        .def_readonly("bounds_not_exact", &SmoothnessReport::bounds_not_exact);

    m.def(
        "smoothness_report",
        [](const ModelKind& model, const MiniBatch& batch, const GaussianState& prior,
           const Eigen::VectorXd& pmle_theta, const Eigen::MatrixXd& pmle_precision,
           int n_total, int t_total) {
            return smoothness_report(model, batch, prior, pmle_theta, SpdMatrix(pmle_precision),
                                     n_total, t_total);
        },
        py::arg("model"), py::arg("batch"), py::arg("prior"), py::arg("pmle_theta"),
        py::arg("pmle_precision"), py::arg("n_total"), py::arg("t_total"));

    py::class_<DiscrepancyReport>(m, "DiscrepancyReport")
        .def_readonly("mean_term", &DiscrepancyReport::mean_term)
        .def_readonly("frob_term", &DiscrepancyReport::frob_term)
        .def_readonly("tv", &DiscrepancyReport::tv)
        .def_readonly("kl_online_baseline", &DiscrepancyReport::kl_online_baseline)
        .def_readonly("kl_baseline_online", &DiscrepancyReport::kl_baseline_online)
        .def_readonly("baseline_tag", &DiscrepancyReport::baseline_tag);

    m.def("discrepancy", &discrepancy, py::arg("online"), py::arg("baseline"),
          py::arg("baseline_tag"));

    py::class_<WaldSet>(m, "WaldSet")
        .def_readonly("alpha", &WaldSet::alpha)
        .def_readonly("radius_sq", &WaldSet::radius_sq)
        .def_property_readonly("center", [](const WaldSet& w) { return w.center; });
    m.def("make_wald", &make_wald, py::arg("state"), py::arg("alpha"));
    m.def("wald_contains", &wald_contains, py::arg("set"), py::arg("theta"));
    m.def("wald_length_1d", &wald_length_1d, py::arg("set"));

    m.def("gen_bernoulli", &gen_bernoulli, py::arg("n_total"), py::arg("seed"));
    m.def("gen_logistic_gaussian", &gen_logistic_gaussian, py::arg("n_total"), py::arg("p"),
          py::arg("theta0"), py::arg("seed"));

    py::class_<Sec9Row>(m, "Sec9Row")
        .def_readonly("method", &Sec9Row::method)
        .def_readonly("n", &Sec9Row::n)
        .def_readonly("cp", &Sec9Row::cp)
        .def_readonly("cp_se", &Sec9Row::cp_se)
        .def_readonly("mean_length", &Sec9Row::mean_length);

    m.def(
        "run_sec9",
        [](const std::string& config_json) {
            const auto cfg = config_from_json_string(config_json);
            return run_sec9(cfg).coverage;
        },
        py::arg("config_json"), py::call_guard<py::gil_scoped_release>());
    m.def(
        "run_logistic_scaling",
        [](const std::string& config_json) {
            const auto cfg = config_from_json_string(config_json);
            const auto rows = run_logistic_scaling(cfg);
            py::gil_scoped_acquire gil;
            py::list out;
            for (const auto& r : rows) {
                py::dict d;
                d["model"] = r.model;
                d["method"] = r.method;
                d["baseline"] = r.baseline;
                d["n"] = r.n;
                d["tv_upper_median"] = r.tv_upper_median;
                d["mean_term_median"] = r.mean_term_median;
                d["frob_term_median"] = r.frob_term_median;
                out.append(d);
            }
            return out;
        },
        py::arg("config_json"), py::call_guard<py::gil_scoped_release>());
    m.def("emit_svg", &emit_svg, py::arg("csv_path"), py::arg("kind"), py::arg("out_path"));
}
