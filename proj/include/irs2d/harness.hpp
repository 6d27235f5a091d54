#pragma once

// Monte Carlo driver, metrics and analytic complexity counts.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "irs2d/channel.hpp"
#include "irs2d/crlb.hpp"
#include "irs2d/estimators.hpp"
#include "irs2d/training.hpp"

namespace irs2d {

enum class Method
{
    HKMR,
    TSHDR,
    LS,
    KRF,
    HDR, ///< complexity model only
};

inline constexpr std::array<Method, 4> kEstimationMethods{Method::HKMR, Method::TSHDR, Method::LS, Method::KRF};

std::string to_string(Method m);
/// Case-insensitive. Throws std::invalid_argument for unknown names.
Method parse_method(std::string_view name);

enum class Metric
{
    RMSE,
    NMSE,
    SE,
    Complexity,
};

std::string to_string(Metric m);
Metric parse_metric(std::string_view name);

/// Thrown for invalid experiment configurations (CLI exit code 1).
class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- metrics

/// Difference x - y wrapped into (-pi, pi].
double wrapped_difference(double x, double y);

/// sqrt(mean(wrap(estimate - truth)^2)). Throws on an empty list.
double rmse_wrapped(double truth, const std::vector<double>& estimates);

/// ||E - E_hat||^2 / ||E||^2, optionally after the scalar gauge fit of
/// E_hat onto E. Throws on a zero E or a shape mismatch.
double nmse(const CMatrix& E, const CMatrix& E_hat, bool gauge_fix = false);

/// Transmit beam f, receive beam w and IRS phases omega.
struct Beams
{
    CVector f;     ///< M, unit norm
    CVector w;     ///< Q, unit norm
    CVector omega; ///< N, unit-modulus entries
};

/// Beams steered at the estimated frequencies.
Beams beams_from_estimate(const FrequencyEstimate& est, const ArrayConfig& cfg);

/// Beams from an unstructured cascaded-channel estimate (QM x N): dominant
/// singular vectors of E_hat, then of the Q x M reshape of its left vector.
Beams beams_from_cascaded(const CMatrix& E_hat, const ArrayConfig& cfg);

/// KRF beams: dominant right vector of H_hat, dominant left vector of
/// G_hat, and the phases of the dominant right vector of E_hat.
Beams beams_from_krf(const KrfResult& krf, const ArrayConfig& cfg);

/// log2(1 + P_T/sigma^2 |w^H G diag(omega) H f|^2) on the true channel.
double spectral_efficiency(const ChannelFactors& ch, const Beams& beams, double noise_variance,
                           double transmit_power);
double spectral_efficiency(const ChannelFactors& ch, const FrequencyEstimate& est, double noise_variance,
                           double transmit_power);

/// Beams steered at the true frequencies.
double spectral_efficiency_ideal(const ChannelFactors& ch, const SceneParams& scene, double noise_variance,
                                 double transmit_power);

/// Estimate holding the true frequencies (IRS departure folded into the
/// combined frequencies, as the estimators report them).
FrequencyEstimate truth_as_estimate(const SceneParams& scene);

/// Operation counts with unit big-O constants. Throws std::invalid_argument
/// on invalid dimensions and std::overflow_error past 2^64.
std::uint64_t complexity_flops(Method method, const ArrayConfig& cfg, Index T, Index K);

// ------------------------------------------------------------- experiment

struct ExperimentConfig
{
    ArrayConfig array;
    std::vector<double> snr_db{-10, -5, 0, 5, 10, 15, 20};
    int trials = 500;
    /// HDR only contributes to the complexity table.
    std::vector<Method> methods{Method::HKMR, Method::TSHDR, Method::LS, Method::KRF, Method::HDR};
    std::vector<Metric> metrics{Metric::RMSE};
    /// IRS sizes for the N sweeps (nmse, se) and the complexity table.
    /// Unset means per-metric defaults.
    std::optional<std::vector<Index>> irs_sizes;
    /// SNR of the N sweeps; unset means 5 dB for nmse and -17 dB for se.
    std::optional<double> irs_sweep_snr_db;
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "results";
    bool plot_script = false;

    double transmit_power = 1.0;
    IrsConvention convention = IrsConvention::Orthonormal;
    EstimatorOptions estimator;
    /// Zero noise at every SNR point.
    bool noiseless = false;
    /// Also emit sqrt(CRLB) rows next to RMSE. Scaled by P_T T K when
    /// crlb_scale_by_training_energy is set.
    bool crlb = true;
    bool crlb_scale_by_training_energy = false;
    /// Worker threads over trials; 0 picks the hardware concurrency.
    unsigned threads = 0;

    /// Throws ConfigError.
    void validate() const;
};

inline const std::vector<Index> kDefaultSweepSizes{16, 64, 256, 1024};
inline const std::vector<Index> kDefaultComplexitySizes{16, 64, 256, 1024, 1500, 2000, 2500, 3000};

/// Parses a JSON document; unknown keys are rejected. Throws ConfigError.
ExperimentConfig parse_experiment_config(const std::string& json_text, ExperimentConfig base = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path, ExperimentConfig base = {});

struct MetricRecord
{
    std::string metric;    ///< rmse, rmse_median, nmse, nmse_median, se, se_median, complexity, failures
    std::string method;    ///< HKMR, TSHDR, LS, KRF, HDR, CRLB, IDEAL
    std::optional<double> snr_db;
    Index n_irs = 0;
    std::string parameter; ///< frequency name, or nmse / se / flops / count
    double value = 0.0;
    int trials = 0;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0; ///< not persisted
};

/// One Monte Carlo sweep over SNR at a fixed array size.
struct SweepRequest
{
    ArrayConfig array;
    std::vector<double> snr_db;
    int trials = 1;
    std::uint64_t seed = 1;
    std::vector<Method> methods;
    bool want_rmse = false;
    bool want_nmse = false;
    bool want_se = false;
    bool want_crlb = false;
    bool crlb_scale_by_training_energy = false;
    bool noiseless = false;
    double transmit_power = 1.0;
    IrsConvention convention = IrsConvention::Orthonormal;
    EstimatorOptions estimator;
    unsigned threads = 0;
};

struct MethodOutcome
{
    bool ran = false;
    bool failed = false;
    std::string error;
    std::array<double, 6> estimate{}; ///< HKMR/TSHDR only
    std::array<double, 6> error_rad{}; ///< wrapped estimate - truth
    double nmse = 0.0;
    double se = 0.0;
};

struct TrialOutcome
{
    std::array<MethodOutcome, 4> methods; ///< indexed like kEstimationMethods
    double se_ideal = 0.0;
    bool crlb_ok = false;
    std::array<double, 6> crlb{}; ///< sqrt(CRLB) in kParameterNames order
};

struct SweepResult
{
    SweepRequest request;
    std::vector<SceneParams> scenes;              ///< per trial
    std::vector<std::vector<TrialOutcome>> cells; ///< [snr index][trial]
    double wall_time_s = 0.0;
};

std::size_t method_slot(Method m);

/// Scenes come from a stream keyed by (seed, trial); noise from one keyed by
/// (seed, N, trial). Noise is drawn once per trial and scaled per SNR, and
/// every method sees the same observation.
SweepResult run_sweep(const SweepRequest& request);

/// Aggregated records for one sweep. n_irs is taken from the array.
std::vector<MetricRecord> aggregate_rmse(const SweepResult& sweep);
std::vector<MetricRecord> aggregate_nmse(const SweepResult& sweep);
std::vector<MetricRecord> aggregate_se(const SweepResult& sweep);
std::vector<MetricRecord> complexity_records(const ExperimentConfig& cfg);

/// ArrayConfig with the IRS resized to a near-square split of n.
ArrayConfig with_irs_size(ArrayConfig cfg, Index n);

/// Runs every selected metric, writes <out_dir>/<metric>.csv (and
/// plot_results.py when requested), and returns all records.
std::vector<MetricRecord> run_experiment(const ExperimentConfig& cfg);

inline constexpr const char* kCsvHeader = "metric,method,snr_db,n_irs,parameter,value,trials,seed";

std::string format_csv(const std::vector<MetricRecord>& records);
/// Throws std::runtime_error naming the path on I/O failure.
void write_csv(const std::filesystem::path& path, const std::vector<MetricRecord>& records);
void write_plot_script(const std::filesystem::path& dir, const std::vector<Metric>& metrics);

/// Compensated (Neumaier) sum in the given order.
double neumaier_sum(const std::vector<double>& values);
double median(std::vector<double> values);

} // namespace irs2d
