#include "irs2d/crlb.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace irs2d {

CVector steering_derivative(double mu, Index length)
{
    if (length < 1) {
        throw std::invalid_argument("steering_derivative: length must be >= 1");
    }
    CVector d(length);
    for (Index l = 0; l < length; ++l) {
        const double ld = static_cast<double>(l);
        d(l) = cplx(0.0, -ld) * std::polar(1.0, -ld * mu);
    }
    return d;
}

CMatrix domain_signal(const std::array<double, 3>& eta, Index M_t, Index Q_t, Index N_t)
{
    const CMatrix aq = kron(steering_vector(eta[0], M_t), steering_vector(eta[1], Q_t));
    return aq * steering_vector(eta[2], N_t).transpose();
}

CMatrix domain_signal_derivative(const std::array<double, 3>& eta, Index M_t, Index Q_t, Index N_t, int which)
{
    const bool d_bs = which == 0;
    const bool d_ue = which == 1;
    const bool d_irs = which == 2;
    if (!d_bs && !d_ue && !d_irs) {
        throw std::invalid_argument("domain_signal_derivative: parameter index must be 0, 1 or 2");
    }
    const CVector a = d_bs ? steering_derivative(eta[0], M_t) : steering_vector(eta[0], M_t);
    const CVector q = d_ue ? steering_derivative(eta[1], Q_t) : steering_vector(eta[1], Q_t);
    const CVector n = d_irs ? steering_derivative(eta[2], N_t) : steering_vector(eta[2], N_t);
    return kron(a, q) * n.transpose();
}

FimDomain fim_domain(const SceneParams& scene, const ArrayConfig& cfg, double noise_variance, Domain domain,
                     const FimOptions& options)
{
    cfg.validate();
    if (!(noise_variance > 0.0)) {
        throw std::invalid_argument("fim_domain: noise variance must be > 0");
    }
    FimDomain fim;
    fim.domain = domain;
    fim.noise_variance = noise_variance;

    Index M_t = cfg.My, Q_t = cfg.Qy, N_t = cfg.Ny;
    if (domain == Domain::Y) {
        fim.eta = {scene.bs.mu, scene.ue.mu, scene.mu_y()};
    } else {
        fim.eta = {scene.bs.psi, scene.ue.psi, scene.psi_z()};
        M_t = cfg.Mz;
        Q_t = cfg.Qz;
        N_t = cfg.Nz;
    }

    std::array<CMatrix, 3> dS;
    for (int i = 0; i < 3; ++i) {
        dS[static_cast<std::size_t>(i)] = domain_signal_derivative(fim.eta, M_t, Q_t, N_t, i);
    }
    double scale = 2.0 / noise_variance;
    if (options.scale_by_training_energy) {
        scale *= options.transmit_power * static_cast<double>(options.pilot_length * options.blocks);
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            // Re tr(A^H B) = Re sum conj(A) .* B
            const auto& A = dS[static_cast<std::size_t>(i)];
            const auto& B = dS[static_cast<std::size_t>(j)];
            const double v = scale * (A.conjugate().cwiseProduct(B)).sum().real();
            fim.F(i, j) = v;
            fim.F(j, i) = v;
        }
    }
    return fim;
}

double fisher_condition(const FimDomain& fim)
{
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(fim.F);
    const auto& ev = eig.eigenvalues();
    const double largest = ev.cwiseAbs().maxCoeff();
    const double smallest = ev.minCoeff();
    if (!(smallest > 0.0)) {
        return std::numeric_limits<double>::infinity();
    }
    return largest / smallest;
}

std::array<double, 3> crlb_bounds(const FimDomain& fim)
{
    const double cond = fisher_condition(fim);
    if (!(cond <= kMaxFisherCondition)) {
        std::ostringstream msg;
        msg << "crlb_bounds: Fisher information is singular or ill-conditioned (condition " << cond << ", limit "
            << kMaxFisherCondition << ")";
        throw SingularFisherError(msg.str(), cond);
    }
    const Eigen::Matrix3d inv = fim.F.inverse();
    return {std::sqrt(inv(0, 0)), std::sqrt(inv(1, 1)), std::sqrt(inv(2, 2))};
}

} // namespace irs2d
