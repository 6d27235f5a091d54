#pragma once

// Channel-parameter estimators for the decoupled pilot design:
//
//  * HKMR  - per-block Kronecker factorization of the received pilots,
//            temporal matched filtering, two rank-one tensor fits for the
//            BS/UE factors, then spatial filtering and a rank-one matrix fit
//            for the IRS factors.
//  * TSHDR - pilot and IRS matched filtering to the Khatri-Rao channel,
//            one Kronecker factorization into y and z parts, then joint
//            rank-one tensor fits for BS, UE and IRS factors.
//  * LS / KRF baselines on the Khatri-Rao channel.
//
// Combined IRS frequencies are only identifiable modulo 2 pi; estimates are
// reported inside the peak-search interval.

#include <array>
#include <string>
#include <vector>

#include "irs2d/channel.hpp"
#include "irs2d/multilin.hpp"
#include "irs2d/training.hpp"

namespace irs2d {

struct PeakGrid
{
    Index points = 4096;
    double lower = -M_PI;
    double upper = M_PI;
    /// Parabolic interpolation of the log-magnitude around the grid peak.
    bool refine = true;
    /// When positive, a golden-section polish within one grid step of the
    /// interpolated peak, down to this bracket width.
    double tolerance = 0.0;

    void validate() const;
    [[nodiscard]] double center() const { return 0.5 * (lower + upper); }
};

struct EstimatorOptions
{
    PeakGrid grid;
    HosvdOptions hosvd;
};

/// Names in the order used by FrequencyEstimate::values().
inline constexpr std::array<const char*, 6> kParameterNames{"mu_bs", "psi_bs", "mu_ue", "psi_ue", "mu_y", "psi_z"};

struct EstimateDiagnostics
{
    /// A rank-one fit had negligible energy; affected frequencies sit at
    /// the grid center.
    bool degenerate = false;
    /// Fraction of energy captured by the rank-one tensor fits, per domain.
    double fit_y = 0.0;
    double fit_z = 0.0;
    /// Kronecker-factorization residual (HKMR: root-sum-square over blocks).
    double kron_residual = 0.0;
    /// HKMR only: blocks whose Kronecker factorization was degenerate.
    int degenerate_blocks = 0;
};

struct FrequencyEstimate
{
    double mu_bs = 0.0, psi_bs = 0.0;
    double mu_ue = 0.0, psi_ue = 0.0;
    double mu_y = 0.0, psi_z = 0.0;

    /// Estimated factor vectors as produced by the rank-one fits.
    CVector a_y, a_z, q_y, q_z, n_y, n_z;

    EstimateDiagnostics diag;

    /// Channels rebuilt from the estimated frequencies.
    CMatrix H_hat, G_hat, E_hat;

    /// (mu_bs, psi_bs, mu_ue, psi_ue, mu_y, psi_z)
    [[nodiscard]] std::array<double, 6> values() const;
};

struct HkmrIntermediates
{
    std::vector<CMatrix> Xy_hat, Xz_hat; ///< per-block Kronecker factors (balanced scale)
    CMatrix Uy, Uz;                      ///< Q_t M_t x K stacks
    CTensor3 Uy_tensor, Uz_tensor;       ///< Q_t x M_t x K
    CVector l_y, l_z, l;                 ///< spatially filtered vectors
    CVector n_hat;                       ///< conj(Omega) l
    CMatrix N_hat;                       ///< Nz x Ny
};

struct TshdrIntermediates
{
    CMatrix E;                     ///< QM x N Khatri-Rao channel estimate
    CMatrix J;                     ///< block-permuted E
    CMatrix Jy_hat, Jz_hat;        ///< Q_t M_t x N_t
    CTensor3 Jy_tensor, Jz_tensor; ///< Q_t x M_t x N_t
};

/// Argmax over the grid of |v^H a(mu)| with a(mu) = steering_vector(mu, L).
/// Throws DegenerateInputError for a zero vector.
double peak_search(const CVector& v, Index L, const PeakGrid& grid = {});

FrequencyEstimate hkmr_estimate(const PilotObservation& obs, const TrainingDesign& design,
                                const EstimatorOptions& options = {}, HkmrIntermediates* trace = nullptr);
FrequencyEstimate hkmr_estimate(const PilotObservation& obs, const TrainingDesign& design, const PeakGrid& grid);

FrequencyEstimate tshdr_estimate(const PilotObservation& obs, const TrainingDesign& design,
                                 const EstimatorOptions& options = {}, TshdrIntermediates* trace = nullptr);
FrequencyEstimate tshdr_estimate(const PilotObservation& obs, const TrainingDesign& design, const PeakGrid& grid);

/// Unstructured estimate of sqrt(P_T) (H^T <> G).
CMatrix ls_baseline(const PilotObservation& obs, const TrainingDesign& design);

struct KrfResult
{
    CMatrix H_hat; ///< N x M, rows unit norm
    CMatrix G_hat; ///< Q x N, columns carry the scale
    CMatrix E_hat; ///< H_hat^T <> G_hat
    std::vector<double> column_residuals;
};

/// Column-wise rank-one factorization of the LS Khatri-Rao channel.
KrfResult krf_baseline(const PilotObservation& obs, const TrainingDesign& design);
KrfResult krf_factorize(const CMatrix& E_ls, const ArrayConfig& cfg);

struct CascadedChannels
{
    CMatrix H; ///< N x M
    CMatrix G; ///< Q x N
    CMatrix E; ///< H^T <> G
};

/// Rebuilds H, G and E from estimated frequencies. Only the combined IRS
/// frequencies are identifiable, so the IRS arrival response carries them
/// and the departure response is all ones.
CascadedChannels reconstruct_channels(const FrequencyEstimate& est, const ArrayConfig& cfg);
CMatrix reconstruct_cascaded(const FrequencyEstimate& est, const ArrayConfig& cfg);

/// c * E_hat with the complex c minimizing ||E - c E_hat||_F.
CMatrix gauge_fit(const CMatrix& E, const CMatrix& E_hat);

} // namespace irs2d
