#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ovb/diagnostics.hpp"
#include "ovb/engine.hpp"

namespace ovb {

struct ExperimentConfig {
    std::string experiment = "bernoulli_sec9";  // bernoulli_sec9 | logistic_gaussian | diagnose
    int n_total = 1000;
    std::vector<int> batch_sizes = {1, 2, 4, 8, 10, 20, 50, 200, 1000};
    int replications = 500;
    double alpha = 0.05;
    double prior_mean = 0.0;
    double prior_sd = 3.0;
    Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(1);
    std::uint64_t seed = 1;
    std::optional<VbConfig> solver;
    std::string out_dir = ".";
    int threads = 0;  // <= 0 picks hardware concurrency
    // diagnose-only knobs
    std::string data_csv;
    std::string method = "vb";       // exact | laplace | vb
    std::string model = "logistic";  // logistic | bernoulli_intercept | gaussian_linear
    double noise_precision = 1.0;

    void validate() const;
};

ExperimentConfig config_from_json_file(const std::string& path);
ExperimentConfig config_from_json_string(const std::string& text);

/// N fair coin flips as an intercept-only batch, deterministic per seed.
MiniBatch gen_bernoulli(int n_total, std::uint64_t seed);

/// Standard normal design, Bernoulli responses with success rate
/// sigmoid(x'theta0); deterministic per seed.
MiniBatch gen_logistic_gaussian(int n_total, int p, const Eigen::VectorXd& theta0,
                                std::uint64_t seed);

struct Sec9Row {
    std::string method;  // "mle" or "vb"
    int n = 0;
    double cp = 0.0;
    double cp_se = 0.0;
    double mean_length = 0.0;
};

struct Sec9Result {
    std::vector<Sec9Row> coverage;            // mle row first, then config order
    std::map<int, std::vector<double>> re;    // n -> RE_t (index t-1; NaN where undefined)
};

/// Coverage table and relative-efficiency curve; writes coverage.csv and
/// re_curve.csv under cfg.out_dir.
Sec9Result run_sec9(const ExperimentConfig& cfg);

struct ScalingRow {
    std::string model;     // "logistic" or "conjugate_control"
    std::string method;    // "laplace" | "vb" | "exact"
    std::string baseline;  // "batch_laplace" | "mle_plugin"
    int n = 0;
    double tv_upper_median = 0.0;
    double mean_term_median = 0.0;
    double frob_term_median = 0.0;
};

/// Fixed-N doubling ladder over the mini-batch size; writes tv_scaling.csv
/// and diagnostics.jsonl under cfg.out_dir.
std::vector<ScalingRow> run_logistic_scaling(const ExperimentConfig& cfg);

/// File-backed single run: update-record log plus per-step smoothness and
/// final discrepancy reports (records.jsonl, diagnostics.jsonl).
void run_diagnose(const ExperimentConfig& cfg);

/// Standalone SVG line plot of a CSV produced by this tool. kind "re" plots
/// re_curve.csv (one polyline per n); kind "tv" plots tv_scaling.csv (one
/// polyline per model/method/baseline series). Byte-deterministic.
void emit_svg(const std::string& csv_path, const std::string& kind, const std::string& out_path);

/// 12-significant-digit, locale-independent CSV number format.
std::string csv_number(double v);

}  // namespace ovb
