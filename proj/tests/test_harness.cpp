#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "irs2d/harness.hpp"
#include "test_util.hpp"

using namespace irs2d;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("irs2d_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExperimentConfig small_config(const fs::path& out)
{
    ExperimentConfig c;
    c.array = ArrayConfig{2, 2, 2, 2, 2, 2};
    c.snr_db = {0.0, 10.0};
    c.trials = 3;
    c.out_dir = out;
    c.irs_sizes = std::vector<Index>{4, 6};
    c.threads = 2;
    return c;
}

} // namespace

TEST(RmseWrapped, Examples)
{
    EXPECT_EQ(rmse_wrapped(0.4, {0.4, 0.4}), 0.0);
    EXPECT_NEAR(rmse_wrapped(M_PI - 0.1, {-M_PI + 0.1}), 0.2, 1e-12);
    EXPECT_NEAR(rmse_wrapped(1.0, {1.03, 0.97, 1.03, 0.97}), 0.03, 1e-12);
    EXPECT_THROW(rmse_wrapped(0.0, {}), std::invalid_argument);
}

TEST(WrappedDifference, Range)
{
    EXPECT_NEAR(wrapped_difference(3.0, -3.0), 6.0 - 2.0 * M_PI, 1e-15);
    EXPECT_NEAR(wrapped_difference(-M_PI, 0.0), M_PI, 1e-15);
    EXPECT_NEAR(wrapped_difference(0.25, 0.5), -0.25, 1e-15);
}

TEST(Nmse, Examples)
{
    std::mt19937_64 rng(1);
    const CMatrix E = irs2d::testing::random_matrix(5, 4, rng);
    EXPECT_EQ(nmse(E, E), 0.0);
    EXPECT_EQ(nmse(E, CMatrix::Zero(5, 4)), 1.0);
    CMatrix D = irs2d::testing::random_matrix(5, 4, rng);
    D /= D.norm();
    const double delta = 0.01;
    EXPECT_NEAR(nmse(E, E + delta * D), delta * delta / E.squaredNorm(), 1e-15);
    // gauge fix removes any complex scale
    EXPECT_LT(nmse(E, cplx(0.2, 3.0) * E, true), 1e-28);
    EXPECT_THROW(nmse(CMatrix::Zero(2, 2), CMatrix::Ones(2, 2)), std::invalid_argument);
    EXPECT_THROW(nmse(E, CMatrix::Ones(4, 4)), std::invalid_argument);
}

TEST(SpectralEfficiency, PerfectEstimatesEqualIdeal)
{
    std::mt19937_64 rng(2);
    const ArrayConfig cfg;
    for (int i = 0; i < 20; ++i) {
        const auto s = sample_scene(rng);
        const auto ch = build_channel_factors(cfg, s);
        const double ideal = spectral_efficiency_ideal(ch, s, 0.05, 1.0);
        EXPECT_EQ(spectral_efficiency(ch, truth_as_estimate(s), 0.05, 1.0), ideal);
        // matched beams on a rank-one channel: gain (Q M N^2) independent of angles
        EXPECT_NEAR(ideal, std::log2(1.0 + 1.0 / 0.05 * cfg.Q() * cfg.M() * cfg.N() * cfg.N()), 1e-9);
    }
}

TEST(SpectralEfficiency, NeverExceedsIdeal)
{
    std::mt19937_64 rng(3);
    const ArrayConfig cfg{2, 4, 4, 2, 3, 5};
    std::uniform_real_distribution<double> u(-M_PI, M_PI);
    for (int i = 0; i < 200; ++i) {
        const auto s = sample_scene(rng);
        const auto ch = build_channel_factors(cfg, s);
        FrequencyEstimate est;
        est.mu_bs = u(rng);
        est.psi_bs = u(rng);
        est.mu_ue = u(rng);
        est.psi_ue = u(rng);
        est.mu_y = u(rng);
        est.psi_z = u(rng);
        const double se = spectral_efficiency(ch, est, 0.3, 2.0);
        EXPECT_GE(se, 0.0);
        EXPECT_LE(se, spectral_efficiency_ideal(ch, s, 0.3, 2.0) + 1e-12);
        Beams b;
        b.f = irs2d::testing::random_vector(cfg.M(), rng).normalized();
        b.w = irs2d::testing::random_vector(cfg.Q(), rng).normalized();
        b.omega = irs2d::testing::random_vector(cfg.N(), rng).unaryExpr([](cplx z) { return z / std::abs(z); });
        EXPECT_LE(spectral_efficiency(ch, b, 0.3, 2.0), spectral_efficiency_ideal(ch, s, 0.3, 2.0) + 1e-12);
    }
}

TEST(SpectralEfficiency, CascadedBeamsFromExactChannelAreIdeal)
{
    std::mt19937_64 rng(4);
    const ArrayConfig cfg;
    const auto s = sample_scene(rng);
    const auto ch = build_channel_factors(cfg, s);
    const CMatrix E = khatri_rao(ch.H.transpose(), ch.G);
    const double ideal = spectral_efficiency_ideal(ch, s, 1.0, 1.0);
    EXPECT_NEAR(spectral_efficiency(ch, beams_from_cascaded(E, cfg), 1.0, 1.0), ideal, 1e-9);
    const auto krf = krf_factorize(E, cfg);
    EXPECT_NEAR(spectral_efficiency(ch, beams_from_krf(krf, cfg), 1.0, 1.0), ideal, 1e-9);
}

TEST(Complexity, UnitDimensions)
{
    const ArrayConfig one{1, 1, 1, 1, 1, 1};
    EXPECT_EQ(complexity_flops(Method::LS, one, 1, 1), 1u);
    EXPECT_EQ(complexity_flops(Method::KRF, one, 1, 1), 2u);
    EXPECT_EQ(complexity_flops(Method::HDR, one, 1, 1), 7u);
    EXPECT_EQ(complexity_flops(Method::HKMR, one, 1, 1), 8u);
    EXPECT_EQ(complexity_flops(Method::TSHDR, one, 1, 1), 8u);
}

TEST(Complexity, DefaultArraysAt3000)
{
    const ArrayConfig cfg = with_irs_size(ArrayConfig{}, 3000);
    ASSERT_EQ(cfg.Ny, 50);
    ASSERT_EQ(cfg.Nz, 60);
    const double krf = static_cast<double>(complexity_flops(Method::KRF, cfg, cfg.M(), cfg.N()));
    const double hkmr = static_cast<double>(complexity_flops(Method::HKMR, cfg, cfg.M(), cfg.N()));
    // Q^2 M N T K + N^2 Q^2 M^2 with Q = M = T = 16, N = K = 3000
    EXPECT_EQ(krf, 16.0 * 16 * 16 * 3000 * 16 * 3000 + 3000.0 * 3000 * 256 * 256);
    EXPECT_GE(krf / hkmr, 1e4);
}

TEST(Complexity, OrderingOverSweep)
{
    for (Index n : kDefaultComplexitySizes) {
        const ArrayConfig cfg = with_irs_size(ArrayConfig{}, n);
        const auto f = [&](Method m) { return complexity_flops(m, cfg, cfg.M(), cfg.N()); };
        EXPECT_LE(f(Method::HKMR), f(Method::TSHDR)) << n;
        EXPECT_LE(f(Method::TSHDR), f(Method::LS)) << n;
        EXPECT_LE(f(Method::LS), f(Method::HDR)) << n;
        EXPECT_LT(static_cast<double>(f(Method::HDR)) / static_cast<double>(f(Method::LS)), 1.01) << n;
    }
}

TEST(Complexity, MonotoneInEveryDimension)
{
    const ArrayConfig base{4, 4, 4, 4, 4, 4};
    for (Method m : {Method::HKMR, Method::TSHDR, Method::LS, Method::KRF, Method::HDR}) {
        const auto ref = complexity_flops(m, base, 16, 16);
        for (int dim = 0; dim < 6; ++dim) {
            ArrayConfig bigger = base;
            Index* fields[] = {&bigger.My, &bigger.Mz, &bigger.Qy, &bigger.Qz, &bigger.Ny, &bigger.Nz};
            *fields[dim] *= 2;
            EXPECT_GE(complexity_flops(m, bigger, 16, 16), ref) << to_string(m) << dim;
        }
        EXPECT_GE(complexity_flops(m, base, 32, 16), ref);
        EXPECT_GE(complexity_flops(m, base, 16, 32), ref);
    }
}

TEST(Complexity, Errors)
{
    EXPECT_THROW(complexity_flops(Method::LS, ArrayConfig{}, 0, 1), std::invalid_argument);
    const ArrayConfig huge{1 << 16, 1 << 16, 1 << 16, 1 << 16, 1 << 10, 1 << 10};
    EXPECT_THROW(complexity_flops(Method::KRF, huge, 1 << 16, 1 << 16), std::overflow_error);
}

TEST(Names, RoundTrip)
{
    for (Method m : {Method::HKMR, Method::TSHDR, Method::LS, Method::KRF, Method::HDR}) {
        EXPECT_EQ(parse_method(to_string(m)), m);
    }
    EXPECT_EQ(parse_method("tshdr"), Method::TSHDR);
    EXPECT_THROW(parse_method("music"), std::invalid_argument);
    EXPECT_EQ(parse_metric("SE"), Metric::SE);
    EXPECT_THROW(parse_metric("ber"), std::invalid_argument);
    EXPECT_THROW(method_slot(Method::HDR), std::invalid_argument);
}

TEST(Summation, NeumaierAndMedian)
{
    EXPECT_EQ(neumaier_sum({1.0, 1e100, 1.0, -1e100}), 2.0);
    EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
    EXPECT_THROW(median({}), std::invalid_argument);
}

TEST(Config, ParsesAllKeys)
{
    const std::string text = R"({
        // comments are allowed
        "array": {"My": 2, "Mz": 4, "Qy": 3, "Qz": 2, "Ny": 5, "Nz": 6},
        "snr_db": [-5, 0.5],
        "trials": 7,
        "methods": ["hkmr", "KRF"],
        "metrics": ["nmse", "complexity"],
        "irs_sizes": [16, 30],
        "irs_sweep_snr_db": 3,
        "seed": 99,
        "out_dir": "elsewhere",
        "plot_script": true,
        "transmit_power": 2.5,
        "irs_convention": "unit_modulus",
        "grid_points": 1024,
        "grid_refine": false,
        "grid_tolerance": 1e-9,
        "hosvd_refinement_sweeps": 2,
        "noiseless": true,
        "crlb": false,
        "crlb_scale_by_training_energy": true,
        "threads": 3
    })";
    const auto c = parse_experiment_config(text);
    EXPECT_EQ(c.array.My, 2);
    EXPECT_EQ(c.array.Nz, 6);
    EXPECT_EQ(c.snr_db, (std::vector<double>{-5.0, 0.5}));
    EXPECT_EQ(c.trials, 7);
    EXPECT_EQ(c.methods, (std::vector<Method>{Method::HKMR, Method::KRF}));
    EXPECT_EQ(c.metrics, (std::vector<Metric>{Metric::NMSE, Metric::Complexity}));
    EXPECT_EQ(*c.irs_sizes, (std::vector<Index>{16, 30}));
    EXPECT_EQ(*c.irs_sweep_snr_db, 3.0);
    EXPECT_EQ(c.seed, 99u);
    EXPECT_EQ(c.out_dir, fs::path("elsewhere"));
    EXPECT_TRUE(c.plot_script);
    EXPECT_EQ(c.transmit_power, 2.5);
    EXPECT_EQ(c.convention, IrsConvention::UnitModulus);
    EXPECT_EQ(c.estimator.grid.points, 1024);
    EXPECT_FALSE(c.estimator.grid.refine);
    EXPECT_EQ(c.estimator.grid.tolerance, 1e-9);
    EXPECT_EQ(c.estimator.hosvd.refinement_sweeps, 2);
    EXPECT_TRUE(c.noiseless);
    EXPECT_FALSE(c.crlb);
    EXPECT_TRUE(c.crlb_scale_by_training_energy);
    EXPECT_EQ(c.threads, 3u);
}

TEST(Config, DefaultsAndPartialOverride)
{
    const ExperimentConfig d;
    EXPECT_EQ(d.trials, 500);
    EXPECT_EQ(d.snr_db.size(), 7u);
    EXPECT_EQ(d.array.N(), 16);
    const auto c = parse_experiment_config(R"({"trials": 4})");
    EXPECT_EQ(c.trials, 4);
    EXPECT_EQ(c.snr_db, d.snr_db);
}

TEST(Config, Rejections)
{
    for (const char* bad : {
             "not json",
             "[1, 2]",
             R"({"trails": 3})",
             R"({"trials": 0})",
             R"({"trials": "many"})",
             R"({"snr_db": []})",
             R"({"methods": ["MUSIC"]})",
             R"({"metrics": ["ber"]})",
             R"({"array": {"My": 3}})",
             R"({"array": {"Nq": 3}})",
             R"({"irs_sizes": [0]})",
             R"({"irs_convention": "random"})",
             R"({"transmit_power": -1})",
         }) {
        // syntax and key errors surface while parsing, range errors in validate()
        EXPECT_THROW(parse_experiment_config(bad).validate(), ConfigError) << bad;
    }
    EXPECT_THROW(load_experiment_config("/nonexistent/irs2d.json"), ConfigError);
}

TEST(Csv, FormatAndSchema)
{
    MetricRecord r;
    r.metric = "rmse";
    r.method = "TSHDR";
    r.snr_db = -5.0;
    r.n_irs = 16;
    r.parameter = "mu_bs";
    r.value = 1.0 / 3.0;
    r.trials = 500;
    r.seed = 7;
    MetricRecord c;
    c.metric = "complexity";
    c.method = "HDR";
    c.n_irs = 3000;
    c.parameter = "flops";
    c.value = 1.2e12;
    c.seed = 7;
    EXPECT_EQ(format_csv({r, c}), "metric,method,snr_db,n_irs,parameter,value,trials,seed\n"
                                  "rmse,TSHDR,-5,16,mu_bs,0.333333333,500,7\n"
                                  "complexity,HDR,,3000,flops,1.2e+12,0,7\n");
}

TEST(Csv, WriteErrorNamesPath)
{
    const fs::path dir = scratch_dir("csv_err");
    fs::create_directories(dir);
    const fs::path blocker = dir / "file";
    std::ofstream(blocker) << "x";
    try {
        write_csv(blocker / "sub" / "rmse.csv", {});
        FAIL() << "expected an I/O error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find(blocker.string()), std::string::npos) << e.what();
    }
    fs::remove_all(dir);
}

TEST(Sweep, PairedObservationsAcrossMethods)
{
    SweepRequest r;
    r.array = ArrayConfig{2, 2, 2, 2, 2, 2};
    r.snr_db = {0.0};
    r.trials = 4;
    r.methods = {Method::LS, Method::KRF};
    r.want_nmse = true;
    r.threads = 1;
    const auto a = run_sweep(r);
    r.methods = {Method::KRF};
    r.threads = 3;
    const auto b = run_sweep(r);
    const auto slot = method_slot(Method::KRF);
    for (std::size_t t = 0; t < 4; ++t) {
        // same scene and noise whatever else runs, on any thread count
        EXPECT_EQ(a.cells[0][t].methods[slot].nmse, b.cells[0][t].methods[slot].nmse);
        EXPECT_EQ(a.scenes[t].phi_bs, b.scenes[t].phi_bs);
        EXPECT_LE(a.cells[0][t].methods[slot].nmse, a.cells[0][t].methods[method_slot(Method::LS)].nmse);
    }
}

TEST(Sweep, NoiselessRmseBelowTolerance)
{
    ExperimentConfig c = small_config(scratch_dir("noiseless"));
    c.array = ArrayConfig{};
    c.noiseless = true;
    c.trials = 10;
    c.methods = {Method::HKMR, Method::TSHDR};
    const auto recs = run_experiment(c);
    int n = 0;
    for (const auto& r : recs) {
        if (r.metric == "rmse") {
            EXPECT_LT(r.value, 1e-4) << r.method << ' ' << r.parameter;
            ++n;
        }
        EXPECT_NE(r.metric, "failures");
    }
    EXPECT_EQ(n, 2 * 2 * 6);
    fs::remove_all(c.out_dir);
}

TEST(Experiment, DeterministicCsv)
{
    const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
    ExperimentConfig c = small_config(a);
    c.metrics = {Metric::RMSE, Metric::NMSE, Metric::SE, Metric::Complexity};
    c.plot_script = true;
    run_experiment(c);
    c.out_dir = b;
    c.threads = 1;
    run_experiment(c);
    for (const char* f : {"rmse.csv", "nmse.csv", "se.csv", "complexity.csv"}) {
        const std::string x = slurp(a / f);
        EXPECT_FALSE(x.empty()) << f;
        EXPECT_EQ(x, slurp(b / f)) << f;
        EXPECT_EQ(x.substr(0, x.find('\n')), kCsvHeader);
    }
    EXPECT_TRUE(fs::exists(a / "plot_results.py"));
    c.seed = 2;
    run_experiment(c);
    EXPECT_NE(slurp(a / "rmse.csv"), slurp(b / "rmse.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Experiment, RecordsAreSane)
{
    ExperimentConfig c = small_config(scratch_dir("sane"));
    c.metrics = {Metric::RMSE, Metric::NMSE, Metric::SE};
    const auto recs = run_experiment(c);
    bool saw_crlb = false, saw_ideal = false, saw_vs_n = false;
    for (const auto& r : recs) {
        EXPECT_TRUE(std::isfinite(r.value)) << r.metric;
        EXPECT_GE(r.value, 0.0) << r.metric;
        saw_crlb |= r.method == "CRLB";
        saw_ideal |= r.method == "IDEAL";
        saw_vs_n |= r.metric == "nmse_vs_n" && r.n_irs == 6;
    }
    EXPECT_TRUE(saw_crlb);
    EXPECT_TRUE(saw_ideal);
    EXPECT_TRUE(saw_vs_n);
    fs::remove_all(c.out_dir);
}
