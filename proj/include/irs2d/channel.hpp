#pragma once

// BS -> IRS -> UE line-of-sight geometry with uniform rectangular arrays.
//
// Each array response factors into a horizontal (y) and a vertical (z)
// uniform-linear-array steering vector; element m = m_z + m_y * M_z (0-based)
// of the joint response is a_y[m_y] * a_z[m_z].

#include <random>

#include "irs2d/multilin.hpp"

namespace irs2d {

struct ArrayConfig
{
    Index My = 4, Mz = 4; ///< BS elements per axis
    Index Qy = 4, Qz = 4; ///< UE elements per axis
    Index Ny = 4, Nz = 4; ///< IRS elements per axis

    [[nodiscard]] Index M() const { return My * Mz; }
    [[nodiscard]] Index Q() const { return Qy * Qz; }
    [[nodiscard]] Index N() const { return Ny * Nz; }

    /// Throws std::invalid_argument when any count is below one.
    void validate() const;

    friend bool operator==(const ArrayConfig&, const ArrayConfig&) = default;
};

/// Splits n into Ny x Nz with Ny the largest divisor not exceeding sqrt(n).
std::pair<Index, Index> near_square_split(Index n);

/// Spatial frequency pair of one array (radians).
struct SpatialFreq
{
    double mu = 0.0;  ///< pi sin(theta) sin(phi)
    double psi = 0.0; ///< pi cos(theta)
};

SpatialFreq spatial_freqs_from_angles(double azimuth, double elevation);

/// Ground-truth geometry. Angles in radians.
struct SceneParams
{
    double phi_bs = 0.0, theta_bs = 0.5 * M_PI;
    double phi_ue = 0.0, theta_ue = 0.5 * M_PI;
    double phi_irs_a = 0.0, theta_irs_a = 0.5 * M_PI;
    double phi_irs_d = 0.0, theta_irs_d = 0.5 * M_PI;

    SpatialFreq bs, ue, irs_a, irs_d;

    /// Combined IRS frequencies; identifiable modulo 2 pi only.
    [[nodiscard]] double mu_y() const { return irs_a.mu + irs_d.mu; }
    [[nodiscard]] double psi_z() const { return irs_a.psi + irs_d.psi; }

    /// Builds a scene from angles, deriving every spatial frequency.
    static SceneParams from_angles(double phi_bs, double theta_bs, double phi_ue, double theta_ue,
                                   double phi_irs_a, double theta_irs_a, double phi_irs_d, double theta_irs_d);

    /// Builds a scene directly from spatial frequencies (angles left at broadside).
    static SceneParams from_frequencies(SpatialFreq bs, SpatialFreq ue, SpatialFreq irs_a, SpatialFreq irs_d);
};

/// Horizontal and vertical channel factors plus their Kronecker assemblies.
struct ChannelFactors
{
    CMatrix Hy, Hz; ///< N_t x M_t, BS -> IRS
    CMatrix Gy, Gz; ///< Q_t x N_t, IRS -> UE
    CMatrix H;      ///< Hy (x) Hz
    CMatrix G;      ///< Gy (x) Gz
};

/// Element l (0-based) is exp(-j l mu).
CVector steering_vector(double mu, Index length);

ChannelFactors build_channel_factors(const ArrayConfig& cfg, const SceneParams& scene);

/// n_y = b_y (.) p_y and n_z = b_z (.) p_z, the effective IRS responses.
std::pair<CVector, CVector> effective_irs_vectors(const SceneParams& scene, const ArrayConfig& cfg);

/// Azimuths ~ U(-60 deg, 60 deg), elevations ~ U(90 deg, 130 deg).
SceneParams sample_scene(std::mt19937_64& rng);

constexpr double deg2rad(double deg) { return deg * M_PI / 180.0; }
constexpr double rad2deg(double rad) { return rad * 180.0 / M_PI; }

/// Wraps an angle into (-pi, pi].
double wrap_to_pi(double x);

} // namespace irs2d
