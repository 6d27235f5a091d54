#include "irs2d/channel.hpp"

#include <cmath>
#include <string>

namespace irs2d {

void ArrayConfig::validate() const
{
    if (My < 1 || Mz < 1 || Qy < 1 || Qz < 1 || Ny < 1 || Nz < 1) {
        throw std::invalid_argument("ArrayConfig: every per-axis count must be >= 1");
    }
}

std::pair<Index, Index> near_square_split(Index n)
{
    if (n < 1) {
        throw std::invalid_argument("near_square_split: n must be >= 1, got " + std::to_string(n));
    }
    Index ny = static_cast<Index>(std::floor(std::sqrt(static_cast<double>(n))));
    while (ny > 1 && n % ny != 0) {
        --ny;
    }
    return {ny, n / ny};
}

SpatialFreq spatial_freqs_from_angles(double azimuth, double elevation)
{
    return {M_PI * std::sin(elevation) * std::sin(azimuth), M_PI * std::cos(elevation)};
}

SceneParams SceneParams::from_angles(double phi_bs, double theta_bs, double phi_ue, double theta_ue,
                                     double phi_irs_a, double theta_irs_a, double phi_irs_d, double theta_irs_d)
{
    SceneParams s;
    s.phi_bs = phi_bs;
    s.theta_bs = theta_bs;
    s.phi_ue = phi_ue;
    s.theta_ue = theta_ue;
    s.phi_irs_a = phi_irs_a;
    s.theta_irs_a = theta_irs_a;
    s.phi_irs_d = phi_irs_d;
    s.theta_irs_d = theta_irs_d;
    s.bs = spatial_freqs_from_angles(phi_bs, theta_bs);
    s.ue = spatial_freqs_from_angles(phi_ue, theta_ue);
    s.irs_a = spatial_freqs_from_angles(phi_irs_a, theta_irs_a);
    s.irs_d = spatial_freqs_from_angles(phi_irs_d, theta_irs_d);
    return s;
}

SceneParams SceneParams::from_frequencies(SpatialFreq bs, SpatialFreq ue, SpatialFreq irs_a, SpatialFreq irs_d)
{
    SceneParams s;
    s.bs = bs;
    s.ue = ue;
    s.irs_a = irs_a;
    s.irs_d = irs_d;
    return s;
}

CVector steering_vector(double mu, Index length)
{
    if (length < 1) {
        throw std::invalid_argument("steering_vector: length must be >= 1");
    }
    CVector a(length);
    for (Index l = 0; l < length; ++l) {
        a(l) = std::polar(1.0, -static_cast<double>(l) * mu);
    }
    return a;
}

ChannelFactors build_channel_factors(const ArrayConfig& cfg, const SceneParams& scene)
{
    cfg.validate();
    ChannelFactors ch;
    ch.Hy = steering_vector(scene.irs_a.mu, cfg.Ny) * steering_vector(scene.bs.mu, cfg.My).transpose();
    ch.Hz = steering_vector(scene.irs_a.psi, cfg.Nz) * steering_vector(scene.bs.psi, cfg.Mz).transpose();
    ch.Gy = steering_vector(scene.ue.mu, cfg.Qy) * steering_vector(scene.irs_d.mu, cfg.Ny).transpose();
    ch.Gz = steering_vector(scene.ue.psi, cfg.Qz) * steering_vector(scene.irs_d.psi, cfg.Nz).transpose();
    ch.H = kron(ch.Hy, ch.Hz);
    ch.G = kron(ch.Gy, ch.Gz);
    return ch;
}

std::pair<CVector, CVector> effective_irs_vectors(const SceneParams& scene, const ArrayConfig& cfg)
{
    cfg.validate();
    return {steering_vector(scene.mu_y(), cfg.Ny), steering_vector(scene.psi_z(), cfg.Nz)};
}

SceneParams sample_scene(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> azimuth(deg2rad(-60.0), deg2rad(60.0));
    std::uniform_real_distribution<double> elevation(deg2rad(90.0), deg2rad(130.0));
    // Draw order is part of the reproducibility contract.
    const double phi_bs = azimuth(rng);
    const double theta_bs = elevation(rng);
    const double phi_ue = azimuth(rng);
    const double theta_ue = elevation(rng);
    const double phi_irs_a = azimuth(rng);
    const double theta_irs_a = elevation(rng);
    const double phi_irs_d = azimuth(rng);
    const double theta_irs_d = elevation(rng);
    return SceneParams::from_angles(phi_bs, theta_bs, phi_ue, theta_ue, phi_irs_a, theta_irs_a, phi_irs_d,
                                    theta_irs_d);
}

double wrap_to_pi(double x)
{
    double r = std::remainder(x, 2.0 * M_PI); // [-pi, pi]
    if (r <= -M_PI) {
        r += 2.0 * M_PI;
    }
    return r;
}

} // namespace irs2d
