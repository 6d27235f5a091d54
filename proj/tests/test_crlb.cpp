#include <gtest/gtest.h>

#include <random>

#include "irs2d/crlb.hpp"
#include "test_util.hpp"

using namespace irs2d;
using irs2d::testing::rel_err;

namespace {

struct DomainDims
{
    Index M, Q, N;
};

DomainDims dims_of(const ArrayConfig& cfg, Domain d)
{
    return d == Domain::Y ? DomainDims{cfg.My, cfg.Qy, cfg.Ny} : DomainDims{cfg.Mz, cfg.Qz, cfg.Nz};
}

// F from central differences of S(eta), built without the analytic derivatives.
Eigen::Matrix3d fim_by_differences(const std::array<double, 3>& eta, DomainDims dd, double var, double h = 1e-5)
{
    std::array<CMatrix, 3> dS;
    for (std::size_t i = 0; i < 3; ++i) {
        auto up = eta, down = eta;
        up[i] += h;
        down[i] -= h;
        dS[i] = (domain_signal(up, dd.M, dd.Q, dd.N) - domain_signal(down, dd.M, dd.Q, dd.N)) / (2.0 * h);
    }
    Eigen::Matrix3d F;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            F(static_cast<Index>(i), static_cast<Index>(j)) = 2.0 / var * (dS[i].adjoint() * dS[j]).trace().real();
        }
    }
    return F;
}

} // namespace

TEST(SteeringDerivative, Examples)
{
    EXPECT_EQ(steering_derivative(0.4, 1), CVector::Zero(1));
    const CVector d = steering_derivative(0.0, 3);
    EXPECT_EQ(d(0), cplx(0.0, 0.0));
    EXPECT_NEAR(std::abs(d(1) - cplx(0.0, -1.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(d(2) - cplx(0.0, -2.0)), 0.0, 1e-15);
    EXPECT_THROW(steering_derivative(0.0, 0), std::invalid_argument);
}

TEST(SteeringDerivative, CentralDifferences)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-M_PI, M_PI);
    const double h = 1e-5;
    for (int i = 0; i < 50; ++i) {
        const double mu = u(rng);
        for (Index L : {1, 4, 16}) {
            const CVector fd = (steering_vector(mu + h, L) - steering_vector(mu - h, L)) / (2.0 * h);
            EXPECT_LT((fd - steering_derivative(mu, L)).norm(), 1e-6);
        }
    }
}

TEST(DomainSignal, StructureAndDerivatives)
{
    const std::array<double, 3> eta{0.3, -1.2, 2.5};
    const CMatrix S = domain_signal(eta, 3, 2, 4);
    ASSERT_EQ(S.rows(), 6);
    ASSERT_EQ(S.cols(), 4);
    const CVector a = steering_vector(0.3, 3), q = steering_vector(-1.2, 2), n = steering_vector(2.5, 4);
    for (Index m = 0; m < 3; ++m) {
        for (Index k = 0; k < 2; ++k) {
            for (Index c = 0; c < 4; ++c) {
                EXPECT_NEAR(std::abs(S(m * 2 + k, c) - a(m) * q(k) * n(c)), 0.0, 1e-15);
            }
        }
    }
    EXPECT_THROW(domain_signal_derivative(eta, 3, 2, 4, 3), std::invalid_argument);
}

TEST(Fim, EntriesMatchFiniteDifferences)
{
    std::mt19937_64 rng(2);
    const ArrayConfig cfg{4, 4, 4, 4, 4, 4};
    const double var = 0.37;
    for (int i = 0; i < 50; ++i) {
        const auto s = sample_scene(rng);
        for (Domain dom : {Domain::Y, Domain::Z}) {
            const auto fim = fim_domain(s, cfg, var, dom);
            const auto fd = fim_by_differences(fim.eta, dims_of(cfg, dom), var);
            for (Index r = 0; r < 3; ++r) {
                for (Index c = 0; c < 3; ++c) {
                    const double ref = std::sqrt(fd(r, r) * fd(c, c));
                    EXPECT_LT(std::abs(fim.F(r, c) - fd(r, c)), 1e-5 * ref) << r << c;
                }
            }
        }
    }
}

TEST(Fim, DiagonalIsDerivativeEnergy)
{
    std::mt19937_64 rng(3);
    const ArrayConfig cfg{2, 4, 3, 5, 6, 2};
    const auto s = sample_scene(rng);
    const auto fim = fim_domain(s, cfg, 2.0, Domain::Z);
    for (int i = 0; i < 3; ++i) {
        const double e = domain_signal_derivative(fim.eta, cfg.Mz, cfg.Qz, cfg.Nz, i).squaredNorm();
        EXPECT_NEAR(fim.F(i, i), e, 1e-12 * e);
    }
    // closed form for the IRS entry: ||a (x) q||^2 * sum l^2 = M Q sum_{l<N} l^2
    const double sum_l2 = 0.0 + 1.0;
    EXPECT_NEAR(fim.F(2, 2), cfg.Mz * cfg.Qz * sum_l2, 1e-12);
}

TEST(Fim, SymmetricPsdAndInverseNoiseScaling)
{
    std::mt19937_64 rng(4);
    const ArrayConfig cfg;
    for (int i = 0; i < 50; ++i) {
        const auto s = sample_scene(rng);
        for (Domain dom : {Domain::Y, Domain::Z}) {
            const auto a = fim_domain(s, cfg, 1.0, dom);
            const auto b = fim_domain(s, cfg, 0.1, dom);
            EXPECT_EQ(a.F, a.F.transpose());
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(a.F);
            EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10 * a.F.trace());
            EXPECT_LT((b.F - 10.0 * a.F).norm(), 1e-12 * b.F.norm());
        }
    }
}

TEST(Fim, TrainingEnergyScaling)
{
    std::mt19937_64 rng(5);
    const auto s = sample_scene(rng);
    FimOptions o;
    o.scale_by_training_energy = true;
    o.transmit_power = 2.0;
    o.pilot_length = 16;
    o.blocks = 16;
    const auto plain = fim_domain(s, ArrayConfig{}, 1.0, Domain::Y);
    const auto scaled = fim_domain(s, ArrayConfig{}, 1.0, Domain::Y, o);
    EXPECT_LT((scaled.F - 512.0 * plain.F).norm(), 1e-12 * scaled.F.norm());
}

TEST(Fim, RejectsNonPositiveNoise)
{
    EXPECT_THROW(fim_domain(SceneParams{}, ArrayConfig{}, 0.0, Domain::Y), std::invalid_argument);
}

TEST(Crlb, DiagonalFisher)
{
    FimDomain f;
    f.F = Eigen::Vector3d(4.0, 9.0, 0.25).asDiagonal();
    const auto b = crlb_bounds(f);
    EXPECT_NEAR(b[0], 0.5, 1e-15);
    EXPECT_NEAR(b[1], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(b[2], 2.0, 1e-15);
}

TEST(Crlb, ScalesWithNoiseStd)
{
    std::mt19937_64 rng(6);
    const ArrayConfig cfg;
    for (int i = 0; i < 20; ++i) {
        const auto s = sample_scene(rng);
        const auto lo = crlb_bounds(fim_domain(s, cfg, 1.0, Domain::Y));
        const auto hi = crlb_bounds(fim_domain(s, cfg, 10.0, Domain::Y));
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_NEAR(hi[k] / lo[k], std::sqrt(10.0), 1e-10);
            EXPECT_GE(lo[k], 0.0);
        }
    }
}

TEST(Crlb, BoundIsAtLeastInverseDiagonal)
{
    std::mt19937_64 rng(7);
    const auto fim = fim_domain(sample_scene(rng), ArrayConfig{}, 1.0, Domain::Z);
    const auto b = crlb_bounds(fim);
    for (int i = 0; i < 3; ++i) {
        EXPECT_GE(b[static_cast<std::size_t>(i)], 1.0 / std::sqrt(fim.F(i, i)) * (1.0 - 1e-12));
    }
}

TEST(Crlb, SingularFisherThrows)
{
    // a single BS element carries no information about the BS frequency
    const ArrayConfig cfg{1, 4, 4, 4, 4, 4};
    std::mt19937_64 rng(8);
    const auto fim = fim_domain(sample_scene(rng), cfg, 1.0, Domain::Y);
    EXPECT_FALSE(std::isfinite(fisher_condition(fim)));
    try {
        crlb_bounds(fim);
        FAIL() << "expected SingularFisherError";
    } catch (const SingularFisherError& e) {
        EXPECT_FALSE(std::isfinite(e.condition()));
    }
    FimDomain bad;
    bad.F = Eigen::Vector3d(1.0, 1.0, 1e-14).asDiagonal();
    EXPECT_THROW(crlb_bounds(bad), SingularFisherError);
}
