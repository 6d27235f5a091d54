#pragma once

// Kronecker-structured pilots, IRS phase-shift schedule, and the forward
// model for the received pilot blocks
//
//   X_k = sqrt(P_T) * G diag(omega_k) H S + V_k,   k = 1..K.

#include <cstdint>
#include <random>
#include <vector>

#include "irs2d/channel.hpp"
#include "irs2d/multilin.hpp"

namespace irs2d {

/// How the IRS reflection coefficients are scaled.
enum class IrsConvention
{
    /// Omega Omega^H = I_N; entries have magnitude 1/sqrt(K).
    Orthonormal,
    /// Physical unit-modulus phases, sqrt(K) * Omega; receivers divide it back out.
    UnitModulus,
};

struct PilotDesign
{
    CMatrix Sy; ///< My x Ty
    CMatrix Sz; ///< Mz x Tz
    CMatrix S;  ///< Sy (x) Sz
};

struct IrsSchedule
{
    CMatrix Wy, Wz;           ///< DFT codebooks, Ny x Ky and Nz x Kz
    Eigen::MatrixXd Psi, Phi; ///< I_Ky (x) 1_Kz^T and 1_Ky^T (x) I_Kz
    CMatrix Omega_y;          ///< Wy Psi, Ny x K
    CMatrix Omega_z;          ///< Wz Phi, Nz x K
    CMatrix Omega;            ///< Omega_y <> Omega_z = Wy (x) Wz, N x K
    Index Ky = 0, Kz = 0;
};

struct TrainingDesign
{
    ArrayConfig cfg;
    PilotDesign pilots;
    IrsSchedule irs;
    IrsConvention convention = IrsConvention::Orthonormal;

    [[nodiscard]] Index Ty() const { return pilots.Sy.cols(); }
    [[nodiscard]] Index Tz() const { return pilots.Sz.cols(); }
    [[nodiscard]] Index T() const { return pilots.S.cols(); }
    [[nodiscard]] Index K() const { return irs.Omega.cols(); }

    /// Amplitude applied to Omega on the air: 1 or sqrt(K).
    [[nodiscard]] double irs_gain() const;

    /// The reflection vector used in block k, including irs_gain().
    [[nodiscard]] CVector reflection(Index k) const;
};

struct NoiseModel
{
    double variance = 0.0; ///< per complex entry; 0 gives noiseless blocks

    void validate() const;
};

/// Noise variance giving SNR = P_T / sigma^2 at the requested level in dB.
double noise_variance_from_snr_db(double snr_db, double transmit_power = 1.0);

struct PilotObservation
{
    std::vector<CMatrix> blocks; ///< K blocks, each Q x T
    double noise_variance = 0.0;
    double transmit_power = 1.0;
    std::uint64_t seed = 0;
};

/// Scaled Hadamard pilots with Ty = My, Tz = Mz.
PilotDesign build_pilots(const ArrayConfig& cfg);

/// Ky, Kz of zero default to Ny, Nz.
IrsSchedule build_irs_schedule(const ArrayConfig& cfg, Index Ky = 0, Index Kz = 0);

TrainingDesign make_training_design(const ArrayConfig& cfg, Index Ky = 0, Index Kz = 0,
                                    IrsConvention convention = IrsConvention::Orthonormal);

/// Noiseless blocks sqrt(P_T) G diag(omega_k) H S.
std::vector<CMatrix> pilot_signal(const ChannelFactors& ch, const TrainingDesign& design, double transmit_power);

/// K blocks of i.i.d. CN(0, 1) entries, Q x T each.
std::vector<CMatrix> draw_unit_noise(Index rows, Index cols, Index blocks, std::mt19937_64& rng);

/// signal + sqrt(noise_variance) * unit_noise, blockwise. Lets one noise
/// realization be reused across SNR points.
PilotObservation assemble_observation(const std::vector<CMatrix>& signal, const std::vector<CMatrix>& unit_noise,
                                      double noise_variance, double transmit_power);

PilotObservation synthesize_received(const ChannelFactors& ch, const TrainingDesign& design, const NoiseModel& noise,
                                     double transmit_power, std::mt19937_64& rng);

/// Matched filter U_k = X_k S^H for each block.
std::vector<CMatrix> matched_filter_blocks(const PilotObservation& obs, const TrainingDesign& design);

/// Khatri-Rao channel estimate E = [vec(U_1) ... vec(U_K)] Omega^H / irs_gain.
CMatrix khatri_rao_channel_estimate(const PilotObservation& obs, const TrainingDesign& design);

/// Throws std::invalid_argument if the observation does not match the design.
void check_observation(const PilotObservation& obs, const TrainingDesign& design);

} // namespace irs2d
