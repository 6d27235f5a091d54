#include "irs2d/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace irs2d {

namespace {

std::string upper(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
    return out;
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t r = 0;
    if (__builtin_mul_overflow(a, b, &r)) {
        throw std::overflow_error("complexity_flops: count exceeds 64 bits");
    }
    return r;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t r = 0;
    if (__builtin_add_overflow(a, b, &r)) {
        throw std::overflow_error("complexity_flops: count exceeds 64 bits");
    }
    return r;
}

std::uint64_t prod(std::initializer_list<Index> xs)
{
    std::uint64_t r = 1;
    for (Index x : xs) {
        r = checked_mul(r, static_cast<std::uint64_t>(x));
    }
    return r;
}

CVector unit_phases(const CVector& v)
{
    CVector out(v.size());
    for (Index i = 0; i < v.size(); ++i) {
        const double mag = std::abs(v(i));
        out(i) = mag > 0.0 ? v(i) / mag : cplx(1.0, 0.0);
    }
    return out;
}

std::array<double, 6> truth_values(const SceneParams& s)
{
    return {s.bs.mu, s.bs.psi, s.ue.mu, s.ue.psi, s.mu_y(), s.psi_z()};
}

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b),    static_cast<std::uint32_t>(b >> 32)};
    return std::mt19937_64(seq);
}

// Scene stream tag, distinct from any IRS size used for noise streams.
constexpr std::uint64_t kSceneStream = 0xFFFF'FFFF'FFFF'FFFFULL;

void run_methods(const SweepRequest& req, const TrainingDesign& design, const ChannelFactors& ch,
                 const SceneParams& scene, const CMatrix& E_true, const PilotObservation& obs, double se_noise,
                 TrialOutcome& out)
{
    const auto truth = truth_values(scene);
    const double amp = std::sqrt(req.transmit_power);

    for (Method m : req.methods) {
        if (m == Method::HDR) {
            continue;
        }
        MethodOutcome& mo = out.methods[method_slot(m)];
        mo.ran = true;
        try {
            if (m == Method::HKMR || m == Method::TSHDR) {
                const FrequencyEstimate est = m == Method::HKMR ? hkmr_estimate(obs, design, req.estimator)
                                                                : tshdr_estimate(obs, design, req.estimator);
                mo.estimate = est.values();
                for (std::size_t i = 0; i < 6; ++i) {
                    mo.error_rad[i] = wrapped_difference(mo.estimate[i], truth[i]);
                }
                if (req.want_nmse) {
                    mo.nmse = nmse(E_true, est.E_hat, true);
                }
                if (req.want_se) {
                    mo.se = spectral_efficiency(ch, est, se_noise, req.transmit_power);
                }
            } else if (m == Method::LS) {
                const CMatrix E_ls = ls_baseline(obs, design);
                if (req.want_nmse) {
                    mo.nmse = nmse(amp * E_true, E_ls);
                }
                if (req.want_se) {
                    mo.se = spectral_efficiency(ch, beams_from_cascaded(E_ls, design.cfg), se_noise,
                                                req.transmit_power);
                }
            } else {
                const KrfResult krf = krf_baseline(obs, design);
                if (req.want_nmse) {
                    mo.nmse = nmse(amp * E_true, krf.E_hat);
                }
                if (req.want_se) {
                    mo.se = spectral_efficiency(ch, beams_from_krf(krf, design.cfg), se_noise, req.transmit_power);
                }
            }
            const bool finite = std::isfinite(mo.nmse) && std::isfinite(mo.se) &&
                                std::all_of(mo.error_rad.begin(), mo.error_rad.end(),
                                            [](double x) { return std::isfinite(x); });
            if (!finite) {
                mo.failed = true;
                mo.error = "non-finite result";
            }
        } catch (const std::exception& e) {
            mo.failed = true;
            mo.error = e.what();
        }
    }
}

MetricRecord make_record(const SweepResult& sweep, std::string metric, std::string method, double snr,
                         std::string parameter, double value, int trials)
{
    MetricRecord r;
    r.metric = std::move(metric);
    r.method = std::move(method);
    r.snr_db = snr;
    r.n_irs = sweep.request.array.N();
    r.parameter = std::move(parameter);
    r.value = value;
    r.trials = trials;
    r.seed = sweep.request.seed;
    r.wall_time_s = sweep.wall_time_s;
    return r;
}

double root_mean(const std::vector<double>& squares)
{
    return std::sqrt(neumaier_sum(squares) / static_cast<double>(squares.size()));
}

double mean(const std::vector<double>& xs)
{
    return neumaier_sum(xs) / static_cast<double>(xs.size());
}

void append_failures(const SweepResult& sweep, std::size_t cell, std::vector<MetricRecord>& out)
{
    for (Method m : sweep.request.methods) {
        if (m == Method::HDR) {
            continue;
        }
        int failed = 0;
        for (const auto& t : sweep.cells[cell]) {
            failed += t.methods[method_slot(m)].failed ? 1 : 0;
        }
        if (failed > 0) {
            out.push_back(make_record(sweep, "failures", to_string(m), sweep.request.snr_db[cell], "count",
                                      static_cast<double>(failed), sweep.request.trials));
        }
    }
}

unsigned worker_count(unsigned requested, int trials)
{
    unsigned n = requested == 0 ? std::max(1U, std::thread::hardware_concurrency()) : requested;
    return std::min<unsigned>(n, static_cast<unsigned>(std::max(trials, 1)));
}

std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

} // namespace

// ------------------------------------------------------------------ names

std::string to_string(Method m)
{
    switch (m) {
    case Method::HKMR: return "HKMR";
    case Method::TSHDR: return "TSHDR";
    case Method::LS: return "LS";
    case Method::KRF: return "KRF";
    case Method::HDR: return "HDR";
    }
    return "?";
}

Method parse_method(std::string_view name)
{
    const std::string u = upper(name);
    if (u == "HKMR") return Method::HKMR;
    if (u == "TSHDR") return Method::TSHDR;
    if (u == "LS") return Method::LS;
    if (u == "KRF") return Method::KRF;
    if (u == "HDR") return Method::HDR;
    throw std::invalid_argument("unknown method '" + std::string(name) + "' (expected HKMR, TSHDR, LS, KRF, HDR)");
}

std::string to_string(Metric m)
{
    switch (m) {
    case Metric::RMSE: return "rmse";
    case Metric::NMSE: return "nmse";
    case Metric::SE: return "se";
    case Metric::Complexity: return "complexity";
    }
    return "?";
}

Metric parse_metric(std::string_view name)
{
    const std::string u = upper(name);
    if (u == "RMSE") return Metric::RMSE;
    if (u == "NMSE") return Metric::NMSE;
    if (u == "SE") return Metric::SE;
    if (u == "COMPLEXITY") return Metric::Complexity;
    throw std::invalid_argument("unknown metric '" + std::string(name) + "' (expected rmse, nmse, se, complexity)");
}

std::size_t method_slot(Method m)
{
    switch (m) {
    case Method::HKMR: return 0;
    case Method::TSHDR: return 1;
    case Method::LS: return 2;
    case Method::KRF: return 3;
    case Method::HDR: break;
    }
    throw std::invalid_argument("method_slot: HDR has no estimator");
}

// ---------------------------------------------------------------- metrics

double wrapped_difference(double x, double y)
{
    return wrap_to_pi(x - y);
}

double rmse_wrapped(double truth, const std::vector<double>& estimates)
{
    if (estimates.empty()) {
        throw std::invalid_argument("rmse_wrapped: empty estimate list");
    }
    std::vector<double> sq;
    sq.reserve(estimates.size());
    for (double e : estimates) {
        const double d = wrapped_difference(e, truth);
        sq.push_back(d * d);
    }
    return root_mean(sq);
}

double nmse(const CMatrix& E, const CMatrix& E_hat, bool gauge_fix)
{
    if (E.rows() != E_hat.rows() || E.cols() != E_hat.cols()) {
        throw std::invalid_argument("nmse: shape mismatch");
    }
    const double ref = E.squaredNorm();
    if (!(ref > 0.0)) {
        throw std::invalid_argument("nmse: reference matrix is zero");
    }
    if (gauge_fix) {
        return (E - gauge_fit(E, E_hat)).squaredNorm() / ref;
    }
    return (E - E_hat).squaredNorm() / ref;
}

Beams beams_from_estimate(const FrequencyEstimate& est, const ArrayConfig& cfg)
{
    Beams b;
    const CVector a = kron(steering_vector(est.mu_bs, cfg.My), steering_vector(est.psi_bs, cfg.Mz));
    const CVector q = kron(steering_vector(est.mu_ue, cfg.Qy), steering_vector(est.psi_ue, cfg.Qz));
    const CVector n = kron(steering_vector(est.mu_y, cfg.Ny), steering_vector(est.psi_z, cfg.Nz));
    b.f = a.conjugate() / std::sqrt(static_cast<double>(cfg.M()));
    b.w = q / std::sqrt(static_cast<double>(cfg.Q()));
    b.omega = n.conjugate();
    return b;
}

Beams beams_from_cascaded(const CMatrix& E_hat, const ArrayConfig& cfg)
{
    if (E_hat.rows() != cfg.Q() * cfg.M() || E_hat.cols() != cfg.N()) {
        throw std::invalid_argument("beams_from_cascaded: expected a QM x N matrix");
    }
    // E ~ (a (x) q) n^T: left vector ~ a (x) q, right vector ~ conj(n).
    const SingularTriplet top = svd_rank1(E_hat);
    const SingularTriplet aq = svd_rank1(unvec(top.u, cfg.Q(), cfg.M())); // ~ q a^T
    Beams b;
    b.f = aq.v;
    b.w = aq.u;
    b.omega = unit_phases(top.v);
    return b;
}

Beams beams_from_krf(const KrfResult& krf, const ArrayConfig& cfg)
{
    const SingularTriplet h = svd_rank1(krf.H_hat); // ~ b a^T
    const SingularTriplet g = svd_rank1(krf.G_hat); // ~ q p^T
    const SingularTriplet e = svd_rank1(krf.E_hat);
    if (h.v.size() != cfg.M() || g.u.size() != cfg.Q() || e.v.size() != cfg.N()) {
        throw std::invalid_argument("beams_from_krf: factor sizes disagree with the array");
    }
    Beams b;
    b.f = h.v;
    b.w = g.u;
    b.omega = unit_phases(e.v);
    return b;
}

double spectral_efficiency(const ChannelFactors& ch, const Beams& beams, double noise_variance,
                           double transmit_power)
{
    if (!(noise_variance > 0.0)) {
        throw std::invalid_argument("spectral_efficiency: noise variance must be > 0");
    }
    const cplx gain = beams.w.dot(ch.G * beams.omega.asDiagonal() * (ch.H * beams.f));
    return std::log2(1.0 + transmit_power / noise_variance * std::norm(gain));
}

double spectral_efficiency(const ChannelFactors& ch, const FrequencyEstimate& est, double noise_variance,
                           double transmit_power)
{
    const ArrayConfig cfg{ch.Hy.cols(), ch.Hz.cols(), ch.Gy.rows(), ch.Gz.rows(), ch.Hy.rows(), ch.Hz.rows()};
    return spectral_efficiency(ch, beams_from_estimate(est, cfg), noise_variance, transmit_power);
}

double spectral_efficiency_ideal(const ChannelFactors& ch, const SceneParams& scene, double noise_variance,
                                 double transmit_power)
{
    return spectral_efficiency(ch, truth_as_estimate(scene), noise_variance, transmit_power);
}

FrequencyEstimate truth_as_estimate(const SceneParams& scene)
{
    FrequencyEstimate e;
    e.mu_bs = scene.bs.mu;
    e.psi_bs = scene.bs.psi;
    e.mu_ue = scene.ue.mu;
    e.psi_ue = scene.ue.psi;
    e.mu_y = scene.mu_y();
    e.psi_z = scene.psi_z();
    return e;
}

std::uint64_t complexity_flops(Method method, const ArrayConfig& cfg, Index T, Index K)
{
    cfg.validate();
    if (T < 1 || K < 1) {
        throw std::invalid_argument("complexity_flops: T and K must be >= 1");
    }
    const Index M = cfg.M(), Q = cfg.Q(), N = cfg.N();
    const Index My = cfg.My, Mz = cfg.Mz, Qy = cfg.Qy, Qz = cfg.Qz, Ny = cfg.Ny, Nz = cfg.Nz;
    // Square-root pilot lengths per domain; T = Ty Tz with Ty/Tz in the
    // My/Mz ratio when T = M, otherwise split near-square.
    Index Ty = My, Tz = Mz;
    if (T != M) {
        std::tie(Ty, Tz) = near_square_split(T);
    }
    const std::uint64_t ls = prod({Q, Q, M, N, T, K});

    switch (method) {
    case Method::HKMR: {
        std::uint64_t inner = prod({Q, Q, T});
        for (std::uint64_t term : {prod({Qy, Ty, My}), prod({Qz, Tz, Mz}), prod({Qy, Qy, My}), prod({My, My, Qy}),
                                   prod({Qz, Qz, Mz}), prod({Mz, Mz, Qz})}) {
            inner = checked_add(inner, term);
        }
        return checked_add(checked_mul(static_cast<std::uint64_t>(K), inner), prod({Nz, Nz, Ny}));
    }
    case Method::TSHDR: {
        std::uint64_t total = prod({K, M, Q, T});
        for (std::uint64_t term : {prod({M, M, Q, Q, N}), prod({Qy, Qy, My, Ny}), prod({My, My, Qy, Ny}),
                                   prod({Ny, Ny, Qy, My}), prod({Qz, Qz, Mz, Nz}), prod({Mz, Mz, Qz, Nz}),
                                   prod({Nz, Nz, Qz, Mz})}) {
            total = checked_add(total, term);
        }
        return total;
    }
    case Method::LS: return ls;
    case Method::KRF: return checked_add(ls, prod({N, N, Q, Q, M, M}));
    case Method::HDR: return checked_add(ls, checked_mul(prod({Q, M, N}), static_cast<std::uint64_t>(Qz + Qy + Mz + My + Nz + Ny)));
    }
    throw std::invalid_argument("complexity_flops: unknown method");
}

// ------------------------------------------------------------- experiment

void ExperimentConfig::validate() const
{
    try {
        array.validate();
        if (!is_power_of_two(array.My) || !is_power_of_two(array.Mz)) {
            throw std::invalid_argument("My and Mz must be powers of two");
        }
        estimator.grid.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (trials < 1) {
        throw ConfigError("trials must be >= 1");
    }
    if (snr_db.empty()) {
        throw ConfigError("SNR grid must not be empty");
    }
    for (double s : snr_db) {
        if (!std::isfinite(s)) {
            throw ConfigError("SNR values must be finite");
        }
    }
    if (methods.empty()) {
        throw ConfigError("at least one method is required");
    }
    if (metrics.empty()) {
        throw ConfigError("at least one metric is required");
    }
    if (irs_sizes) {
        if (irs_sizes->empty()) {
            throw ConfigError("IRS size list must not be empty");
        }
        for (Index n : *irs_sizes) {
            if (n < 1) {
                throw ConfigError("IRS sizes must be >= 1");
            }
        }
    }
    if (irs_sweep_snr_db && !std::isfinite(*irs_sweep_snr_db)) {
        throw ConfigError("IRS sweep SNR must be finite");
    }
    if (!(transmit_power > 0.0) || !std::isfinite(transmit_power)) {
        throw ConfigError("transmit power must be finite and > 0");
    }
    if (estimator.hosvd.refinement_sweeps < 0) {
        throw ConfigError("HOSVD refinement sweeps must be >= 0");
    }
}

ArrayConfig with_irs_size(ArrayConfig cfg, Index n)
{
    const auto [ny, nz] = near_square_split(n);
    cfg.Ny = ny;
    cfg.Nz = nz;
    return cfg;
}

SweepResult run_sweep(const SweepRequest& req)
{
    req.array.validate();
    if (req.trials < 1 || req.snr_db.empty()) {
        throw std::invalid_argument("run_sweep: need at least one trial and one SNR point");
    }
    const auto t0 = std::chrono::steady_clock::now();
    const TrainingDesign design = make_training_design(req.array, 0, 0, req.convention);
    const auto trials = static_cast<std::size_t>(req.trials);

    SweepResult res;
    res.request = req;
    res.scenes.resize(trials);
    res.cells.assign(req.snr_db.size(), std::vector<TrialOutcome>(trials));

    auto run_trial = [&](std::size_t t) {
        auto scene_rng = substream(req.seed, kSceneStream, t);
        const SceneParams scene = sample_scene(scene_rng);
        res.scenes[t] = scene;
        const ChannelFactors ch = build_channel_factors(req.array, scene);
        const CMatrix E_true = khatri_rao(ch.H.transpose(), ch.G);
        const auto signal = pilot_signal(ch, design, req.transmit_power);
        std::vector<CMatrix> unit;
        if (!req.noiseless) {
            auto noise_rng = substream(req.seed, static_cast<std::uint64_t>(req.array.N()), t);
            unit = draw_unit_noise(req.array.Q(), design.T(), design.K(), noise_rng);
        }
        for (std::size_t i = 0; i < req.snr_db.size(); ++i) {
            const double nominal = noise_variance_from_snr_db(req.snr_db[i], req.transmit_power);
            const double sigma2 = req.noiseless ? 0.0 : nominal;
            const PilotObservation obs = assemble_observation(signal, unit, sigma2, req.transmit_power);
            TrialOutcome& out = res.cells[i][t];
            run_methods(req, design, ch, scene, E_true, obs, nominal, out);
            if (req.want_se) {
                out.se_ideal = spectral_efficiency_ideal(ch, scene, nominal, req.transmit_power);
            }
            if (req.want_crlb && sigma2 > 0.0) {
                FimOptions fo;
                fo.scale_by_training_energy = req.crlb_scale_by_training_energy;
                fo.transmit_power = req.transmit_power;
                fo.pilot_length = design.T();
                fo.blocks = design.K();
                try {
                    const auto by = crlb_bounds(fim_domain(scene, req.array, sigma2, Domain::Y, fo));
                    const auto bz = crlb_bounds(fim_domain(scene, req.array, sigma2, Domain::Z, fo));
                    out.crlb = {by[0], bz[0], by[1], bz[1], by[2], bz[2]};
                    out.crlb_ok = true;
                } catch (const SingularFisherError&) {
                    out.crlb_ok = false;
                }
            }
        }
    };

    const unsigned workers = worker_count(req.threads, req.trials);
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (std::size_t t = next++; t < trials; t = next++) {
            try {
                run_trial(t);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    first_error = std::current_exception();
                }
                next = trials;
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
    res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

std::vector<MetricRecord> aggregate_rmse(const SweepResult& sweep)
{
    std::vector<MetricRecord> out;
    const auto& req = sweep.request;
    for (std::size_t i = 0; i < req.snr_db.size(); ++i) {
        const double snr = req.snr_db[i];
        for (Method m : req.methods) {
            if (m != Method::HKMR && m != Method::TSHDR) {
                continue;
            }
            for (std::size_t p = 0; p < 6; ++p) {
                std::vector<double> sq;
                for (const auto& t : sweep.cells[i]) {
                    const auto& mo = t.methods[method_slot(m)];
                    if (mo.ran && !mo.failed) {
                        sq.push_back(mo.error_rad[p] * mo.error_rad[p]);
                    }
                }
                if (sq.empty()) {
                    continue;
                }
                const int n = static_cast<int>(sq.size());
                out.push_back(make_record(sweep, "rmse", to_string(m), snr, kParameterNames[p], root_mean(sq), n));
                out.push_back(
                    make_record(sweep, "rmse_median", to_string(m), snr, kParameterNames[p], std::sqrt(median(sq)), n));
            }
        }
        if (req.want_crlb) {
            for (std::size_t p = 0; p < 6; ++p) {
                std::vector<double> sq;
                for (const auto& t : sweep.cells[i]) {
                    if (t.crlb_ok) {
                        sq.push_back(t.crlb[p] * t.crlb[p]);
                    }
                }
                if (!sq.empty()) {
                    out.push_back(make_record(sweep, "rmse", "CRLB", snr, kParameterNames[p], root_mean(sq),
                                              static_cast<int>(sq.size())));
                }
            }
        }
        append_failures(sweep, i, out);
    }
    return out;
}

std::vector<MetricRecord> aggregate_nmse(const SweepResult& sweep)
{
    std::vector<MetricRecord> out;
    const auto& req = sweep.request;
    for (std::size_t i = 0; i < req.snr_db.size(); ++i) {
        for (Method m : req.methods) {
            if (m == Method::HDR) {
                continue;
            }
            std::vector<double> v;
            for (const auto& t : sweep.cells[i]) {
                const auto& mo = t.methods[method_slot(m)];
                if (mo.ran && !mo.failed) {
                    v.push_back(mo.nmse);
                }
            }
            if (v.empty()) {
                continue;
            }
            const int n = static_cast<int>(v.size());
            out.push_back(make_record(sweep, "nmse", to_string(m), req.snr_db[i], "nmse", mean(v), n));
            out.push_back(make_record(sweep, "nmse_median", to_string(m), req.snr_db[i], "nmse", median(v), n));
        }
        append_failures(sweep, i, out);
    }
    return out;
}

std::vector<MetricRecord> aggregate_se(const SweepResult& sweep)
{
    std::vector<MetricRecord> out;
    const auto& req = sweep.request;
    for (std::size_t i = 0; i < req.snr_db.size(); ++i) {
        for (Method m : req.methods) {
            if (m == Method::HDR) {
                continue;
            }
            std::vector<double> v;
            for (const auto& t : sweep.cells[i]) {
                const auto& mo = t.methods[method_slot(m)];
                if (mo.ran && !mo.failed) {
                    v.push_back(mo.se);
                }
            }
            if (!v.empty()) {
                out.push_back(make_record(sweep, "se", to_string(m), req.snr_db[i], "se", mean(v),
                                          static_cast<int>(v.size())));
            }
        }
        std::vector<double> ideal;
        for (const auto& t : sweep.cells[i]) {
            ideal.push_back(t.se_ideal);
        }
        out.push_back(make_record(sweep, "se", "IDEAL", req.snr_db[i], "se", mean(ideal),
                                  static_cast<int>(ideal.size())));
        append_failures(sweep, i, out);
    }
    return out;
}

std::vector<MetricRecord> complexity_records(const ExperimentConfig& cfg)
{
    std::vector<MetricRecord> out;
    const auto& sizes = cfg.irs_sizes ? *cfg.irs_sizes : kDefaultComplexitySizes;
    for (Index n : sizes) {
        const ArrayConfig a = with_irs_size(cfg.array, n);
        for (Method m : cfg.methods) {
            MetricRecord r;
            r.metric = "complexity";
            r.method = to_string(m);
            r.n_irs = n;
            r.parameter = "flops";
            r.value = static_cast<double>(complexity_flops(m, a, a.M(), a.N()));
            r.trials = 0;
            r.seed = cfg.seed;
            out.push_back(std::move(r));
        }
    }
    return out;
}

std::vector<MetricRecord> run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    auto wants = [&](Metric m) { return std::find(cfg.metrics.begin(), cfg.metrics.end(), m) != cfg.metrics.end(); };
    const bool rmse = wants(Metric::RMSE);
    const bool nm = wants(Metric::NMSE);
    const bool se = wants(Metric::SE);

    SweepRequest base;
    base.array = cfg.array;
    base.snr_db = cfg.snr_db;
    base.trials = cfg.trials;
    base.seed = cfg.seed;
    for (Method m : cfg.methods) {
        if (m != Method::HDR) {
            base.methods.push_back(m);
        }
    }
    base.noiseless = cfg.noiseless;
    base.transmit_power = cfg.transmit_power;
    base.convention = cfg.convention;
    base.estimator = cfg.estimator;
    base.threads = cfg.threads;
    base.crlb_scale_by_training_energy = cfg.crlb_scale_by_training_energy;

    std::vector<MetricRecord> rmse_rec, nmse_rec, se_rec, cx_rec;

    if ((rmse || nm || se) && !base.methods.empty()) {
        SweepRequest r = base;
        r.want_rmse = rmse;
        r.want_nmse = nm;
        r.want_se = se;
        r.want_crlb = rmse && cfg.crlb && !cfg.noiseless;
        const SweepResult sweep = run_sweep(r);
        if (rmse) {
            auto v = aggregate_rmse(sweep);
            rmse_rec.insert(rmse_rec.end(), v.begin(), v.end());
        }
        if (nm) {
            auto v = aggregate_nmse(sweep);
            nmse_rec.insert(nmse_rec.end(), v.begin(), v.end());
        }
        if (se) {
            auto v = aggregate_se(sweep);
            se_rec.insert(se_rec.end(), v.begin(), v.end());
        }
    }

    if ((nm || se) && !base.methods.empty()) {
        const auto& sizes = cfg.irs_sizes ? *cfg.irs_sizes : kDefaultSweepSizes;
        const double nmse_snr = cfg.irs_sweep_snr_db.value_or(5.0);
        const double se_snr = cfg.irs_sweep_snr_db.value_or(-17.0);
        for (Index n : sizes) {
            SweepRequest r = base;
            r.array = with_irs_size(cfg.array, n);
            r.snr_db.clear();
            if (nm) {
                r.snr_db.push_back(nmse_snr);
            }
            if (se && !(nm && se_snr == nmse_snr)) {
                r.snr_db.push_back(se_snr);
            }
            r.want_nmse = nm;
            r.want_se = se;
            const SweepResult sweep = run_sweep(r);
            if (nm) {
                for (auto& rec : aggregate_nmse(sweep)) {
                    if (rec.snr_db == nmse_snr) {
                        rec.metric += "_vs_n";
                        nmse_rec.push_back(std::move(rec));
                    }
                }
            }
            if (se) {
                for (auto& rec : aggregate_se(sweep)) {
                    if (rec.snr_db == se_snr) {
                        rec.metric += "_vs_n";
                        se_rec.push_back(std::move(rec));
                    }
                }
            }
        }
    }

    if (wants(Metric::Complexity)) {
        cx_rec = complexity_records(cfg);
    }

    std::vector<MetricRecord> all;
    const std::pair<Metric, const std::vector<MetricRecord>*> files[] = {
        {Metric::RMSE, &rmse_rec}, {Metric::NMSE, &nmse_rec}, {Metric::SE, &se_rec}, {Metric::Complexity, &cx_rec}};
    for (const auto& [metric, recs] : files) {
        if (!wants(metric)) {
            continue;
        }
        write_csv(cfg.out_dir / (to_string(metric) + ".csv"), *recs);
        all.insert(all.end(), recs->begin(), recs->end());
    }
    if (cfg.plot_script) {
        write_plot_script(cfg.out_dir, cfg.metrics);
    }
    return all;
}

// ---------------------------------------------------------------- output

std::string format_csv(const std::vector<MetricRecord>& records)
{
    std::ostringstream os;
    os << kCsvHeader << '\n';
    for (const auto& r : records) {
        os << r.metric << ',' << r.method << ',' << (r.snr_db ? format_double(*r.snr_db) : std::string()) << ','
           << r.n_irs << ',' << r.parameter << ',' << format_double(r.value) << ',' << r.trials << ',' << r.seed
           << '\n';
    }
    return os.str();
}

void write_csv(const std::filesystem::path& path, const std::vector<MetricRecord>& records)
{
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw std::runtime_error("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    f << format_csv(records);
    f.close();
    if (!f) {
        throw std::runtime_error("write to '" + path.string() + "' failed");
    }
}

void write_plot_script(const std::filesystem::path& dir, const std::vector<Metric>& metrics)
{
    std::ostringstream py;
    py << R"PY(#!/usr/bin/env python3
# Regenerates figures from the CSV files in this directory.
import os
import pandas as pd
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))


def load(name):
    path = os.path.join(here, name + ".csv")
    return pd.read_csv(path) if os.path.exists(path) else None


def plot_vs(df, x, metric, ylabel, fname, logy=True, by_param=False):
    sub = df[df.metric == metric]
    if sub.empty:
        return
    groups = sorted(sub.parameter.unique()) if by_param else [None]
    for p in groups:
        part = sub if p is None else sub[sub.parameter == p]
        plt.figure()
        for method, g in part.groupby("method"):
            g = g.sort_values(x)
            plt.plot(g[x], g["value"], marker="o", label=method)
        if logy:
            plt.yscale("log")
        plt.xlabel(x)
        plt.ylabel(ylabel if p is None else f"{ylabel} ({p})")
        plt.grid(True, which="both", alpha=0.3)
        plt.legend()
        suffix = "" if p is None else "_" + p
        plt.savefig(os.path.join(here, fname + suffix + ".png"), dpi=120, bbox_inches="tight")
        plt.close()

)PY";
    for (Metric m : metrics) {
        switch (m) {
        case Metric::RMSE:
            py << "df = load(\"rmse\")\nif df is not None:\n"
                  "    plot_vs(df, \"snr_db\", \"rmse\", \"RMSE [rad]\", \"rmse\", by_param=True)\n";
            break;
        case Metric::NMSE:
            py << "df = load(\"nmse\")\nif df is not None:\n"
                  "    plot_vs(df, \"snr_db\", \"nmse\", \"NMSE\", \"nmse_vs_snr\")\n"
                  "    plot_vs(df, \"n_irs\", \"nmse_vs_n\", \"NMSE\", \"nmse_vs_n\")\n";
            break;
        case Metric::SE:
            py << "df = load(\"se\")\nif df is not None:\n"
                  "    plot_vs(df, \"snr_db\", \"se\", \"SE [bit/s/Hz]\", \"se_vs_snr\", logy=False)\n"
                  "    plot_vs(df, \"n_irs\", \"se_vs_n\", \"SE [bit/s/Hz]\", \"se_vs_n\", logy=False)\n";
            break;
        case Metric::Complexity:
            py << "df = load(\"complexity\")\nif df is not None:\n"
                  "    plot_vs(df, \"n_irs\", \"complexity\", \"operations\", \"complexity\")\n";
            break;
        }
    }
    const auto path = dir / "plot_results.py";
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    f << py.str();
    if (!f) {
        throw std::runtime_error("write to '" + path.string() + "' failed");
    }
}

double neumaier_sum(const std::vector<double>& values)
{
    double sum = 0.0;
    double c = 0.0;
    for (double x : values) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    return sum + c;
}

double median(std::vector<double> values)
{
    if (values.empty()) {
        throw std::invalid_argument("median: empty list");
    }
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double hi = values[mid];
    if (values.size() % 2 == 1) {
        return hi;
    }
    const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

} // namespace irs2d
