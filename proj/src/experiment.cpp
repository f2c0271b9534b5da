#include "ovb/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ovb/chi2.hpp"
#include "ovb/errors.hpp"
#include "ovb/json_util.hpp"
#include "ovb/rng.hpp"

namespace ovb {

namespace {

// Phase tags keep every (seed, rep, n, phase) stream disjoint.
constexpr std::uint64_t kPhaseData = 0x44415441ULL;
constexpr std::uint64_t kPhaseVb = 0x56424654ULL;

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t phase, std::uint64_t n,
                         std::uint64_t rep) {
    return RngStream::from_key({seed, phase, n, rep}).next_u64();
}

void parallel_for(int njobs, int threads, const std::function<void(int)>& fn) {
    threads = std::max(1, std::min(threads, njobs));
    if (threads == 1) {
        for (int i = 0; i < njobs; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const int i = next.fetch_add(1);
                if (i >= njobs) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                    next.store(njobs);
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

int effective_threads(const ExperimentConfig& cfg) {
    if (cfg.threads > 0) return cfg.threads;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

GaussianState scalar_prior(double mean, double sd) {
    Eigen::VectorXd mu(1);
    mu << mean;
    Eigen::MatrixXd omega(1, 1);
    omega << 1.0 / (sd * sd);
    return GaussianState(std::move(mu), SpdMatrix(omega));
}

GaussianState iso_prior(int p, double mean, double sd) {
    Eigen::VectorXd mu = Eigen::VectorXd::Constant(p, mean);
    Eigen::MatrixXd omega =
        Eigen::MatrixXd::Identity(p, p) * (1.0 / (sd * sd));
    return GaussianState(std::move(mu), SpdMatrix(omega));
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open for writing: " + path.string());
    }
    return out;
}

std::filesystem::path prepare_out_dir(const ExperimentConfig& cfg) {
    std::filesystem::path dir(cfg.out_dir.empty() ? "." : cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    return dir;
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size();
    if (m == 0) return std::numeric_limits<double>::quiet_NaN();
    if (m % 2 == 1) return v[m / 2];
    return 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

VbConfig solver_for(const ExperimentConfig& cfg) {
    return cfg.solver.value_or(VbConfig{});
}

// Intercept-only Bernoulli MLE; exact score-equation root.
double logit_mle(double successes, double count) {
    return std::log(successes / (count - successes));
}

}  // namespace

std::string csv_number(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 12);
    return std::string(buf, res.ptr);
}

void ExperimentConfig::validate() const {
    if (experiment != "bernoulli_sec9" && experiment != "logistic_gaussian" &&
        experiment != "diagnose") {
        throw ConfigError("unknown experiment '" + experiment + "'");
    }
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (!(prior_sd > 0.0)) throw ConfigError("prior_sd must be > 0");
    if (theta0.size() < 1) throw ConfigError("theta0 must be non-empty");
    if (batch_sizes.empty()) throw ConfigError("batch_sizes must be non-empty");
    if (experiment != "diagnose") {
        if (n_total < 1) throw ConfigError("n_total must be >= 1");
        for (int n : batch_sizes) {
            if (n < 1 || n_total % n != 0) {
                throw ConfigError("every batch size must divide n_total (offender: " +
                                  std::to_string(n) + ")");
            }
        }
    }
    if (method != "exact" && method != "laplace" && method != "vb") {
        throw ConfigError("method must be exact, laplace or vb");
    }
    if (model != "logistic" && model != "bernoulli_intercept" && model != "gaussian_linear") {
        throw ConfigError("model must be logistic, bernoulli_intercept or gaussian_linear");
    }
    if (!(noise_precision > 0.0)) throw ConfigError("noise_precision must be > 0");
}

namespace {

ExperimentConfig defaults_for(const std::string& experiment) {
    ExperimentConfig cfg;
    if (experiment == "logistic_gaussian") {
        cfg.experiment = experiment;
        cfg.n_total = 1024;
        cfg.batch_sizes = {16, 32, 64, 128};
        cfg.replications = 20;
    } else if (experiment == "diagnose") {
        cfg.experiment = experiment;
        cfg.batch_sizes = {1};
        cfg.replications = 1;
    }
    return cfg;
}

}  // namespace

ExperimentConfig config_from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    static const std::vector<std::string> known = {
        "experiment", "n_total",  "batch_sizes", "replications", "alpha",
        "prior_mean", "prior_sd", "theta0",      "seed",         "solver",
        "out_dir",    "threads",  "data_csv",    "method",       "model",
        "noise_precision"};
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }

    try {
        const std::string experiment = j.value("experiment", std::string("bernoulli_sec9"));
        ExperimentConfig cfg = defaults_for(experiment);
        cfg.experiment = experiment;
        if (j.contains("n_total")) cfg.n_total = j.at("n_total").get<int>();
        if (j.contains("batch_sizes")) cfg.batch_sizes = j.at("batch_sizes").get<std::vector<int>>();
        if (j.contains("replications")) cfg.replications = j.at("replications").get<int>();
        if (j.contains("alpha")) cfg.alpha = j.at("alpha").get<double>();
        if (j.contains("prior_mean")) cfg.prior_mean = j.at("prior_mean").get<double>();
        if (j.contains("prior_sd")) cfg.prior_sd = j.at("prior_sd").get<double>();
        if (j.contains("theta0")) {
            const auto v = j.at("theta0").get<std::vector<double>>();
            cfg.theta0 = Eigen::Map<const Eigen::VectorXd>(v.data(),
                                                           static_cast<Eigen::Index>(v.size()));
        }
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("solver")) {
            const auto& s = j.at("solver");
            VbConfig vb;
            vb.mc_draws = s.value("mc_draws", vb.mc_draws);
            vb.max_iterations = s.value("max_iterations", vb.max_iterations);
            vb.step_size = s.value("step_size", vb.step_size);
            vb.step_decay = s.value("step_decay", vb.step_decay);
            vb.grad_tolerance = s.value("gradient_tolerance", vb.grad_tolerance);
            cfg.solver = vb;
        }
        if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
        if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
        if (j.contains("data_csv")) cfg.data_csv = j.at("data_csv").get<std::string>();
        if (j.contains("method")) cfg.method = j.at("method").get<std::string>();
        if (j.contains("model")) cfg.model = j.at("model").get<std::string>();
        if (j.contains("noise_precision")) cfg.noise_precision = j.at("noise_precision").get<double>();
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config field: ") + e.what());
    }
}

ExperimentConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json_string(ss.str());
}

MiniBatch gen_bernoulli(int n_total, std::uint64_t seed) {
    RngStream rng(seed);
    Eigen::VectorXd y(n_total);
    for (int i = 0; i < n_total; ++i) y(i) = rng.next_uniform() <= 0.5 ? 1.0 : 0.0;
    return MiniBatch(std::move(y));
}

MiniBatch gen_logistic_gaussian(int n_total, int p, const Eigen::VectorXd& theta0,
                                std::uint64_t seed) {
    if (theta0.size() != p) {
        throw DimensionMismatch("gen_logistic_gaussian: theta0 length != p");
    }
    RngStream rng(seed);
    Eigen::MatrixXd x(n_total, p);
    Eigen::VectorXd y(n_total);
    for (int i = 0; i < n_total; ++i) {
        for (int j = 0; j < p; ++j) x(i, j) = rng.next_normal();
        const double rate = logistic_b1(x.row(i).dot(theta0));
        y(i) = rng.next_uniform() <= rate ? 1.0 : 0.0;
    }
    return MiniBatch(std::move(y), std::move(x));
}

namespace {

struct Sec9VbJob {
    char covered = 0;
    double length = 0.0;
    std::vector<double> mu_sq;   // per step, |mu_t - theta0|^2
    std::vector<double> mle_sq;  // per step, |mle_t - theta0|^2
    std::vector<char> mle_ok;    // per step, pooled MLE exists
};

struct Sec9MleJob {
    char covered = 0;
    double length = 0.0;
};

void write_coverage_csv(const std::filesystem::path& path, const std::vector<Sec9Row>& rows) {
    auto out = open_output(path);
    out << "method,n,cp,cp_se,mean_length\r\n";
    for (const auto& r : rows) {
        out << r.method << ',' << r.n << ',' << csv_number(r.cp) << ',' << csv_number(r.cp_se)
            << ',' << csv_number(r.mean_length) << "\r\n";
    }
}

void write_re_csv(const std::filesystem::path& path,
                  const std::vector<int>& batch_sizes,
                  const std::map<int, std::vector<double>>& re) {
    auto out = open_output(path);
    out << "n,t,re\r\n";
    for (int n : batch_sizes) {
        const auto& curve = re.at(n);
        for (std::size_t t = 0; t < curve.size(); ++t) {
            if (std::isnan(curve[t])) continue;
            out << n << ',' << (t + 1) << ',' << csv_number(curve[t]) << "\r\n";
        }
    }
}

}  // namespace

Sec9Result run_sec9(const ExperimentConfig& cfg) {
    if (cfg.experiment != "bernoulli_sec9") {
        throw ConfigError("run_sec9: experiment must be bernoulli_sec9");
    }
    cfg.validate();
    const auto dir = prepare_out_dir(cfg);
    const int m_reps = cfg.replications;
    const double theta0 = cfg.theta0(0);
    const ModelKind model = ModelKind::bernoulli_intercept();
    const GaussianState prior0 = scalar_prior(cfg.prior_mean, cfg.prior_sd);
    const double chi1 = chi2_quantile(1, cfg.alpha);
    const int num_sizes = static_cast<int>(cfg.batch_sizes.size());

    // VB jobs over (n, rep), then the dedicated MLE-row jobs.
    std::vector<Sec9VbJob> vb_jobs(static_cast<std::size_t>(num_sizes) * m_reps);
    std::vector<Sec9MleJob> mle_jobs(static_cast<std::size_t>(m_reps));
    const int total_jobs = num_sizes * m_reps + m_reps;

    parallel_for(total_jobs, effective_threads(cfg), [&](int job) {
        if (job < num_sizes * m_reps) {
            const int size_idx = job / m_reps;
            const int rep = job % m_reps;
            const int n = cfg.batch_sizes[static_cast<std::size_t>(size_idx)];
            const int t_count = cfg.n_total / n;

            const MiniBatch data = gen_bernoulli(
                cfg.n_total, stream_key(cfg.seed, kPhaseData, static_cast<std::uint64_t>(n),
                                        static_cast<std::uint64_t>(rep)));
            VbConfig vb = solver_for(cfg);
            vb.seed = stream_key(cfg.seed, kPhaseVb, static_cast<std::uint64_t>(n),
                                 static_cast<std::uint64_t>(rep));

            std::vector<UpdateRecord> records;
            try {
                records = run_online(model, split_batches(data, n), prior0,
                                     UpdateMethod::variational(vb));
            } catch (const std::exception& e) {
                throw NoConvergence("sec9 n=" + std::to_string(n) + " rep=" +
                                    std::to_string(rep) + ": " + e.what());
            }

            Sec9VbJob& res = vb_jobs[static_cast<std::size_t>(job)];
            const GaussianState& post = records.back().posterior;
            const WaldSet wald{post, cfg.alpha, chi1};
            Eigen::VectorXd truth(1);
            truth << theta0;
            res.covered = wald_contains(wald, truth) ? 1 : 0;
            res.length = wald_length_1d(wald);

            res.mu_sq.resize(static_cast<std::size_t>(t_count));
            res.mle_sq.resize(static_cast<std::size_t>(t_count));
            res.mle_ok.resize(static_cast<std::size_t>(t_count));
            double successes = 0.0;
            for (int t = 0; t < t_count; ++t) {
                successes += data.y.segment(t * n, n).sum();
                const double mu_t = records[static_cast<std::size_t>(t)].posterior.mean(0);
                res.mu_sq[static_cast<std::size_t>(t)] = (mu_t - theta0) * (mu_t - theta0);
                const double count = static_cast<double>((t + 1) * n);
                if (successes > 0.0 && successes < count) {
                    const double mle = logit_mle(successes, count);
                    res.mle_sq[static_cast<std::size_t>(t)] = (mle - theta0) * (mle - theta0);
                    res.mle_ok[static_cast<std::size_t>(t)] = 1;
                }
            }
        } else {
            const int rep = job - num_sizes * m_reps;
            const MiniBatch data =
                gen_bernoulli(cfg.n_total, stream_key(cfg.seed, kPhaseData, 0,
                                                      static_cast<std::uint64_t>(rep)));
            const double s = data.y_sum;
            const double count = static_cast<double>(cfg.n_total);
            if (!(s > 0.0 && s < count)) {
                throw SeparationDetected("sec9 MLE row rep " + std::to_string(rep) +
                                         ": all responses identical");
            }
            const double mle = logit_mle(s, count);
            const double info = count * logistic_b2(mle);
            Sec9MleJob& res = mle_jobs[static_cast<std::size_t>(rep)];
            res.covered = info * (theta0 - mle) * (theta0 - mle) <= chi1 ? 1 : 0;
            res.length = 2.0 * std::sqrt(chi1 / info);
        }
    });

    Sec9Result result;
    {
        double cover = 0.0, length = 0.0;
        for (const auto& jobres : mle_jobs) {
            cover += jobres.covered;
            length += jobres.length;
        }
        const double cp = cover / m_reps;
        result.coverage.push_back(Sec9Row{"mle", cfg.n_total, cp,
                                          std::sqrt(cp * (1.0 - cp) / m_reps), length / m_reps});
    }
    for (int size_idx = 0; size_idx < num_sizes; ++size_idx) {
        const int n = cfg.batch_sizes[static_cast<std::size_t>(size_idx)];
        const int t_count = cfg.n_total / n;
        double cover = 0.0, length = 0.0;
        std::vector<double> mu_sum(static_cast<std::size_t>(t_count), 0.0);
        std::vector<double> mle_sum(static_cast<std::size_t>(t_count), 0.0);
        std::vector<int> ok_count(static_cast<std::size_t>(t_count), 0);
        for (int rep = 0; rep < m_reps; ++rep) {
            const auto& jobres = vb_jobs[static_cast<std::size_t>(size_idx * m_reps + rep)];
            cover += jobres.covered;
            length += jobres.length;
            for (int t = 0; t < t_count; ++t) {
                mu_sum[static_cast<std::size_t>(t)] += jobres.mu_sq[static_cast<std::size_t>(t)];
                mle_sum[static_cast<std::size_t>(t)] += jobres.mle_sq[static_cast<std::size_t>(t)];
                ok_count[static_cast<std::size_t>(t)] += jobres.mle_ok[static_cast<std::size_t>(t)];
            }
        }
        const double cp = cover / m_reps;
        result.coverage.push_back(
            Sec9Row{"vb", n, cp, std::sqrt(cp * (1.0 - cp) / m_reps), length / m_reps});
        std::vector<double> curve(static_cast<std::size_t>(t_count),
                                  std::numeric_limits<double>::quiet_NaN());
        for (int t = 0; t < t_count; ++t) {
            // RE_t is reported once the pooled MLE exists in every replication.
            if (ok_count[static_cast<std::size_t>(t)] == m_reps &&
                mle_sum[static_cast<std::size_t>(t)] > 0.0) {
                curve[static_cast<std::size_t>(t)] =
                    mu_sum[static_cast<std::size_t>(t)] / mle_sum[static_cast<std::size_t>(t)];
            }
        }
        result.re[n] = std::move(curve);
    }

    write_coverage_csv(dir / "coverage.csv", result.coverage);
    write_re_csv(dir / "re_curve.csv", cfg.batch_sizes, result.re);
    return result;
}

namespace {

struct ScalingObservation {
    std::string model;
    std::string method;
    std::string baseline;
    int n = 0;
    int rep = 0;
    DiscrepancyReport report;
};

}  // namespace

std::vector<ScalingRow> run_logistic_scaling(const ExperimentConfig& cfg) {
    if (cfg.experiment != "logistic_gaussian") {
        throw ConfigError("run_logistic_scaling: experiment must be logistic_gaussian");
    }
    cfg.validate();
    const auto dir = prepare_out_dir(cfg);
    const int m_reps = cfg.replications;
    const int p = static_cast<int>(cfg.theta0.size());
    const int num_sizes = static_cast<int>(cfg.batch_sizes.size());
    const GaussianState prior0 = iso_prior(p, cfg.prior_mean, cfg.prior_sd);

    // Per (n, rep): logistic Laplace + VB runs against both batch baselines,
    // plus the exact-conjugate control on Gaussian-linear data.
    std::vector<std::vector<ScalingObservation>> job_obs(
        static_cast<std::size_t>(num_sizes) * m_reps);

    parallel_for(num_sizes * m_reps, effective_threads(cfg), [&](int job) {
        const int size_idx = job / m_reps;
        const int rep = job % m_reps;
        const int n = cfg.batch_sizes[static_cast<std::size_t>(size_idx)];
        auto& obs = job_obs[static_cast<std::size_t>(job)];

        const std::uint64_t data_seed = stream_key(cfg.seed, kPhaseData,
                                                   static_cast<std::uint64_t>(n),
                                                   static_cast<std::uint64_t>(rep));
        const MiniBatch data = gen_logistic_gaussian(cfg.n_total, p, cfg.theta0, data_seed);
        const auto batches = split_batches(data, n);
        const ModelKind logistic = ModelKind::logistic();
        const BatchBaselines base = batch_baselines(logistic, data, prior0, cfg.theta0);

        VbConfig vb = solver_for(cfg);
        vb.seed = stream_key(cfg.seed, kPhaseVb, static_cast<std::uint64_t>(n),
                             static_cast<std::uint64_t>(rep));
        const std::vector<std::pair<std::string, UpdateMethod>> methods = {
            {"laplace", UpdateMethod::laplace_update()},
            {"vb", UpdateMethod::variational(vb)},
        };
        for (const auto& [name, method] : methods) {
            const auto records = run_online(logistic, batches, prior0, method);
            const GaussianState& post = records.back().posterior;
            obs.push_back({"logistic", name, "batch_laplace", n, rep,
                           discrepancy(post, base.laplace_full, "batch_laplace")});
            obs.push_back({"logistic", name, base.mle_normal_tag, n, rep,
                           discrepancy(post, base.mle_normal, base.mle_normal_tag)});
        }

        // Exactness control: same design, Gaussian responses, conjugate chain.
        Eigen::VectorXd y_lin(cfg.n_total);
        RngStream noise(RngStream::from_key({data_seed, 0x4c494eULL}).next_u64());
        for (int i = 0; i < cfg.n_total; ++i) {
            y_lin(i) = data.design->row(i).dot(cfg.theta0) + noise.next_normal();
        }
        const MiniBatch lin_data(y_lin, *data.design);
        const ModelKind lin_model = ModelKind::gaussian_linear(1.0);
        const auto lin_records = run_online(lin_model, split_batches(lin_data, n), prior0,
                                            UpdateMethod::exact_conjugate());
        const GaussianState lin_batch = conjugate_posterior(1.0, lin_data, prior0);
        obs.push_back({"conjugate_control", "exact", "batch_laplace", n, rep,
                       discrepancy(lin_records.back().posterior, lin_batch, "batch_laplace")});
    });

    // Deterministic aggregation in (n, series, rep) order.
    std::vector<ScalingRow> rows;
    std::vector<std::tuple<std::string, std::string, std::string>> series;
    for (const auto& obs_list : job_obs) {
        for (const auto& o : obs_list) {
            const auto key = std::make_tuple(o.model, o.method, o.baseline);
            if (std::find(series.begin(), series.end(), key) == series.end()) {
                series.push_back(key);
            }
        }
    }
    auto jsonl = open_output(dir / "diagnostics.jsonl");
    for (int size_idx = 0; size_idx < num_sizes; ++size_idx) {
        const int n = cfg.batch_sizes[static_cast<std::size_t>(size_idx)];
        for (const auto& [model_name, method_name, baseline_name] : series) {
            std::vector<double> tvs, means, frobs;
            for (int rep = 0; rep < m_reps; ++rep) {
                const auto& obs_list = job_obs[static_cast<std::size_t>(size_idx * m_reps + rep)];
                for (const auto& o : obs_list) {
                    if (o.model != model_name || o.method != method_name ||
                        o.baseline != baseline_name) {
                        continue;
                    }
                    tvs.push_back(o.report.tv.upper);
                    means.push_back(o.report.mean_term);
                    frobs.push_back(o.report.frob_term);
                    jsonl << "{\"model\":\"" << o.model << "\",\"method\":\"" << o.method
                          << "\",\"n\":" << o.n << ",\"rep\":" << o.rep
                          << ",\"discrepancy\":" << to_json(o.report) << "}\n";
                }
            }
            rows.push_back(ScalingRow{model_name, method_name, baseline_name, n,
                                      median_of(tvs), median_of(means), median_of(frobs)});
        }
    }

    auto out = open_output(dir / "tv_scaling.csv");
    out << "model,method,baseline,n,tv_upper_median,mean_term_median,frob_term_median\r\n";
    for (const auto& r : rows) {
        out << r.model << ',' << r.method << ',' << r.baseline << ',' << r.n << ','
            << csv_number(r.tv_upper_median) << ',' << csv_number(r.mean_term_median) << ','
            << csv_number(r.frob_term_median) << "\r\n";
    }
    return rows;
}

void run_diagnose(const ExperimentConfig& cfg) {
    if (cfg.experiment != "diagnose") {
        throw ConfigError("run_diagnose: experiment must be diagnose");
    }
    cfg.validate();
    if (cfg.data_csv.empty()) {
        throw ConfigError("diagnose requires data_csv");
    }
    const auto dir = prepare_out_dir(cfg);
    const MiniBatch data = load_csv(cfg.data_csv);
    const int n = cfg.batch_sizes.front();
    if (data.n() % n != 0) {
        throw ConfigError("batch size " + std::to_string(n) + " does not divide data rows " +
                          std::to_string(data.n()));
    }

    ModelKind model = ModelKind::logistic();
    if (cfg.model == "bernoulli_intercept") {
        model = ModelKind::bernoulli_intercept();
        if (data.design) {
            throw ConfigError("bernoulli_intercept expects a CSV with only a y column");
        }
    } else if (cfg.model == "gaussian_linear") {
        model = ModelKind::gaussian_linear(cfg.noise_precision);
    }

    const int p = data.param_dim();
    const GaussianState prior0 = iso_prior(p, cfg.prior_mean, cfg.prior_sd);
    UpdateMethod method = UpdateMethod::laplace_update();
    if (cfg.method == "exact") {
        method = UpdateMethod::exact_conjugate();
    } else if (cfg.method == "vb") {
        VbConfig vb = solver_for(cfg);
        vb.seed = stream_key(cfg.seed, kPhaseVb, static_cast<std::uint64_t>(n), 0);
        method = UpdateMethod::variational(vb);
    }

    const auto batches = split_batches(data, n);
    const auto records = run_online(model, batches, prior0, method);

    {
        auto out = open_output(dir / "records.jsonl");
        write_records_jsonl(records, out);
    }

    auto out = open_output(dir / "diagnostics.jsonl");
    const GaussianState* prior = &prior0;
    for (std::size_t t = 0; t < records.size(); ++t) {
        const auto rep = smoothness_report(model, batches[t], *prior, records[t].pmle_theta,
                                           records[t].pmle_precision, data.n(),
                                           static_cast<int>(batches.size()));
        out << "{\"t\":" << (t + 1) << ",\"smoothness\":" << to_json(rep) << "}\n";
        prior = &records[t].posterior;
    }

    const GaussianState& final_post = records.back().posterior;
    try {
        const BatchBaselines base = batch_baselines(model, data, prior0);
        const double rho = eta_residual(model, batches, prior0, records, base.pmle_theta);
        out << "{\"final\":true,\"rho\":" << json_number(rho) << ",\"discrepancies\":["
            << to_json(discrepancy(final_post, base.laplace_full, "batch_laplace")) << ","
            << to_json(discrepancy(final_post, base.mle_normal, base.mle_normal_tag)) << "]}\n";
    } catch (const SeparationDetected& e) {
        out << "{\"final\":true,\"error\":\"separation_detected\",\"detail\":\"" << e.what()
            << "\"}\n";
    }
}

namespace {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("emit_svg: cannot open " + path);
    }
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            table.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != table.header.size()) {
                throw MalformedCsv(path + ": row with " + std::to_string(cells.size()) +
                                   " fields, expected " + std::to_string(table.header.size()));
            }
            table.rows.push_back(std::move(cells));
        }
    }
    if (table.header.empty()) throw MalformedCsv(path + ": missing header row");
    if (table.rows.empty()) throw MalformedCsv(path + ": no data rows");
    return table;
}

double parse_double(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw MalformedCsv(context + ": bad number '" + s + "'");
    }
}

std::string svg_number(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 6);
    return std::string(buf, res.ptr);
}

int find_column(const CsvTable& t, const std::string& name, const std::string& path) {
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] == name) return static_cast<int>(i);
    }
    throw MalformedCsv(path + ": missing column '" + name + "'");
}

}  // namespace

void emit_svg(const std::string& csv_path, const std::string& kind, const std::string& out_path) {
    const CsvTable table = read_csv_table(csv_path);

    int x_col = 0, y_col = 0;
    std::vector<int> key_cols;
    if (kind == "re") {
        x_col = find_column(table, "t", csv_path);
        y_col = find_column(table, "re", csv_path);
        key_cols = {find_column(table, "n", csv_path)};
    } else if (kind == "tv") {
        x_col = find_column(table, "n", csv_path);
        y_col = find_column(table, "tv_upper_median", csv_path);
        key_cols = {find_column(table, "model", csv_path),
                    find_column(table, "method", csv_path),
                    find_column(table, "baseline", csv_path)};
    } else {
        throw MalformedCsv("emit_svg: unknown kind '" + kind + "'");
    }

    std::vector<std::string> series_keys;
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
    bool any = false;
    for (const auto& row : table.rows) {
        std::string key;
        for (std::size_t i = 0; i < key_cols.size(); ++i) {
            if (i) key += '/';
            key += row[static_cast<std::size_t>(key_cols[i])];
        }
        if (kind == "re") key = "n=" + key;
        const double x = parse_double(row[static_cast<std::size_t>(x_col)], csv_path);
        const double y = parse_double(row[static_cast<std::size_t>(y_col)], csv_path);
        if (!series.count(key)) series_keys.push_back(key);
        series[key].emplace_back(x, y);
        if (!any) {
            x_min = x_max = x;
            y_min = y_max = y;
            any = true;
        } else {
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    }
    if (x_max == x_min) x_max = x_min + 1.0;
    if (y_max == y_min) y_max = y_min + 1.0;
    const double y_pad = 0.05 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;

    constexpr double kWidth = 720.0, kHeight = 440.0;
    constexpr double kLeft = 70.0, kRight = 180.0, kTop = 20.0, kBottom = 50.0;
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const auto sx = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
    const auto sy = [&](double y) { return kTop + (y_max - y) / (y_max - y_min) * plot_h; };

    static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                     "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    constexpr int kPaletteSize = 10;

    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        throw IoError("emit_svg: cannot write " + out_path);
    }
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg_number(kWidth)
        << "\" height=\"" << svg_number(kHeight) << "\" viewBox=\"0 0 " << svg_number(kWidth)
        << " " << svg_number(kHeight) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<g stroke=\"black\" stroke-width=\"1\">\n";
    out << "<line x1=\"" << svg_number(kLeft) << "\" y1=\"" << svg_number(kTop + plot_h)
        << "\" x2=\"" << svg_number(kLeft + plot_w) << "\" y2=\"" << svg_number(kTop + plot_h)
        << "\"/>\n";
    out << "<line x1=\"" << svg_number(kLeft) << "\" y1=\"" << svg_number(kTop) << "\" x2=\""
        << svg_number(kLeft) << "\" y2=\"" << svg_number(kTop + plot_h) << "\"/>\n";
    out << "</g>\n";

    out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"black\">\n";
    constexpr int kTicks = 5;
    for (int i = 0; i <= kTicks; ++i) {
        const double fx = x_min + (x_max - x_min) * i / kTicks;
        const double px = sx(fx);
        out << "<line x1=\"" << svg_number(px) << "\" y1=\"" << svg_number(kTop + plot_h)
            << "\" x2=\"" << svg_number(px) << "\" y2=\"" << svg_number(kTop + plot_h + 5)
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << svg_number(px) << "\" y=\"" << svg_number(kTop + plot_h + 18)
            << "\" text-anchor=\"middle\">" << svg_number(fx) << "</text>\n";
        const double fy = y_min + (y_max - y_min) * i / kTicks;
        const double py = sy(fy);
        out << "<line x1=\"" << svg_number(kLeft - 5) << "\" y1=\"" << svg_number(py)
            << "\" x2=\"" << svg_number(kLeft) << "\" y2=\"" << svg_number(py)
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << svg_number(kLeft - 8) << "\" y=\"" << svg_number(py + 4)
            << "\" text-anchor=\"end\">" << svg_number(fy) << "</text>\n";
    }
    out << "<text x=\"" << svg_number(kLeft + plot_w / 2) << "\" y=\""
        << svg_number(kHeight - 12) << "\" text-anchor=\"middle\">"
        << table.header[static_cast<std::size_t>(x_col)] << "</text>\n";
    out << "<text x=\"14\" y=\"" << svg_number(kTop + plot_h / 2)
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
        << svg_number(kTop + plot_h / 2) << ")\">"
        << table.header[static_cast<std::size_t>(y_col)] << "</text>\n";
    out << "</g>\n";

    int color_idx = 0;
    for (const auto& key : series_keys) {
        const char* color = kPalette[color_idx % kPaletteSize];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (const auto& [x, y] : series[key]) {
            if (!first) out << ' ';
            out << svg_number(sx(x)) << ',' << svg_number(sy(y));
            first = false;
        }
        out << "\"/>\n";
        const double ly = kTop + 14.0 * (color_idx + 1);
        out << "<line x1=\"" << svg_number(kLeft + plot_w + 10) << "\" y1=\"" << svg_number(ly - 4)
            << "\" x2=\"" << svg_number(kLeft + plot_w + 30) << "\" y2=\"" << svg_number(ly - 4)
            << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
        out << "<text font-family=\"sans-serif\" font-size=\"11\" x=\""
            << svg_number(kLeft + plot_w + 35) << "\" y=\"" << svg_number(ly) << "\">" << key
            << "</text>\n";
        ++color_idx;
    }
    out << "</svg>\n";
}

}  // namespace ovb
