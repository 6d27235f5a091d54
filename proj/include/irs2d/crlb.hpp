#pragma once

// Fisher information and Cramer-Rao bounds for the per-domain parameter
// triples (mu_bs, mu_ue, mu_y) and (psi_bs, psi_ue, psi_z).
//
// The per-domain signal is S(eta) = H_t^T <> G_t = (a_t (x) q_t) n_t^T and
//
//   F[i][j] = (2 / sigma^2) Re tr{ (dS/deta_i)^H (dS/deta_j) }.

#include <array>
#include <stdexcept>

#include "irs2d/channel.hpp"
#include "irs2d/multilin.hpp"

namespace irs2d {

enum class Domain
{
    Y,
    Z,
};

struct FimOptions
{
    /// Multiply F by P_T * T * K so the bound lines up with the simulated
    /// training energy. Off by default (plain per-domain model).
    bool scale_by_training_energy = false;
    double transmit_power = 1.0;
    Index pilot_length = 1;
    Index blocks = 1;
};

struct FimDomain
{
    Domain domain = Domain::Y;
    std::array<double, 3> eta{}; ///< (bs, ue, combined IRS) frequencies
    Eigen::Matrix3d F = Eigen::Matrix3d::Zero();
    double noise_variance = 0.0;
};

/// Thrown when F cannot be inverted reliably.
class SingularFisherError : public std::runtime_error
{
public:
    SingularFisherError(const std::string& what, double condition)
        : std::runtime_error(what)
        , condition_(condition)
    {}
    [[nodiscard]] double condition() const { return condition_; }

private:
    double condition_;
};

/// d/dmu of steering_vector(mu, L): element l is -j l exp(-j l mu).
CVector steering_derivative(double mu, Index length);

/// Per-domain signal S(eta) = (a (x) q) n^T for the given frequencies.
CMatrix domain_signal(const std::array<double, 3>& eta, Index M_t, Index Q_t, Index N_t);

/// Analytic dS/deta_i for i = 0 (bs), 1 (ue), 2 (combined IRS).
CMatrix domain_signal_derivative(const std::array<double, 3>& eta, Index M_t, Index Q_t, Index N_t, int which);

FimDomain fim_domain(const SceneParams& scene, const ArrayConfig& cfg, double noise_variance, Domain domain,
                     const FimOptions& options = {});

/// Largest condition number accepted by crlb_bounds.
inline constexpr double kMaxFisherCondition = 1e12;

double fisher_condition(const FimDomain& fim);

/// sqrt(diag(F^-1)). Throws SingularFisherError for (near-)singular F.
std::array<double, 3> crlb_bounds(const FimDomain& fim);

} // namespace irs2d
