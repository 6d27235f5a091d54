#include "irs2d/training.hpp"

#include <cmath>
#include <string>

namespace irs2d {

double TrainingDesign::irs_gain() const
{
    return convention == IrsConvention::UnitModulus ? std::sqrt(static_cast<double>(K())) : 1.0;
}

CVector TrainingDesign::reflection(Index k) const
{
    return irs_gain() * irs.Omega.col(k);
}

void NoiseModel::validate() const
{
    if (!(variance >= 0.0) || !std::isfinite(variance)) {
        throw std::invalid_argument("NoiseModel: variance must be finite and >= 0");
    }
}

double noise_variance_from_snr_db(double snr_db, double transmit_power)
{
    return transmit_power / std::pow(10.0, snr_db / 10.0);
}

PilotDesign build_pilots(const ArrayConfig& cfg)
{
    cfg.validate();
    if (!is_power_of_two(cfg.My) || !is_power_of_two(cfg.Mz)) {
        throw std::invalid_argument("build_pilots: My and Mz must be powers of two (got " + std::to_string(cfg.My) +
                                    ", " + std::to_string(cfg.Mz) + ")");
    }
    PilotDesign p;
    p.Sy = hadamard_matrix(cfg.My);
    p.Sz = hadamard_matrix(cfg.Mz);
    p.S = kron(p.Sy, p.Sz);
    return p;
}

IrsSchedule build_irs_schedule(const ArrayConfig& cfg, Index Ky, Index Kz)
{
    cfg.validate();
    if (Ky == 0) {
        Ky = cfg.Ny;
    }
    if (Kz == 0) {
        Kz = cfg.Nz;
    }
    if (Ky < cfg.Ny || Kz < cfg.Nz) {
        throw std::invalid_argument("build_irs_schedule: need Ky >= Ny and Kz >= Nz (got Ky=" + std::to_string(Ky) +
                                    ", Kz=" + std::to_string(Kz) + ")");
    }
    IrsSchedule s;
    s.Ky = Ky;
    s.Kz = Kz;
    s.Wy = dft_codebook(cfg.Ny, Ky);
    s.Wz = dft_codebook(cfg.Nz, Kz);

    const Index K = Ky * Kz;
    s.Psi = Eigen::MatrixXd::Zero(Ky, K);
    s.Phi = Eigen::MatrixXd::Zero(Kz, K);
    for (Index ky = 0; ky < Ky; ++ky) {
        for (Index kz = 0; kz < Kz; ++kz) {
            s.Psi(ky, ky * Kz + kz) = 1.0;
            s.Phi(kz, ky * Kz + kz) = 1.0;
        }
    }
    s.Omega_y = s.Wy * s.Psi.cast<cplx>();
    s.Omega_z = s.Wz * s.Phi.cast<cplx>();
    s.Omega = khatri_rao(s.Omega_y, s.Omega_z);
    return s;
}

TrainingDesign make_training_design(const ArrayConfig& cfg, Index Ky, Index Kz, IrsConvention convention)
{
    TrainingDesign d;
    d.cfg = cfg;
    d.pilots = build_pilots(cfg);
    d.irs = build_irs_schedule(cfg, Ky, Kz);
    d.convention = convention;
    return d;
}

std::vector<CMatrix> pilot_signal(const ChannelFactors& ch, const TrainingDesign& design, double transmit_power)
{
    if (ch.G.cols() != design.irs.Omega.rows() || ch.H.cols() != design.pilots.S.rows()) {
        throw std::invalid_argument("pilot_signal: channel and training dimensions disagree");
    }
    // Column k of Omega is Wy[:, ky] (x) Wz[:, kz], so each block is the
    // Kronecker product of one y-domain and one z-domain block.
    const Index Ky = design.irs.Ky;
    const Index Kz = design.irs.Kz;
    const CMatrix HSy = ch.Hy * design.pilots.Sy;
    const CMatrix HSz = ch.Hz * design.pilots.Sz;
    std::vector<CMatrix> Xy, Xz;
    Xy.reserve(static_cast<std::size_t>(Ky));
    Xz.reserve(static_cast<std::size_t>(Kz));
    for (Index ky = 0; ky < Ky; ++ky) {
        Xy.push_back(ch.Gy * design.irs.Wy.col(ky).asDiagonal() * HSy);
    }
    for (Index kz = 0; kz < Kz; ++kz) {
        Xz.push_back(ch.Gz * design.irs.Wz.col(kz).asDiagonal() * HSz);
    }
    const double amplitude = std::sqrt(transmit_power) * design.irs_gain();
    std::vector<CMatrix> blocks;
    blocks.reserve(static_cast<std::size_t>(design.K()));
    for (Index ky = 0; ky < Ky; ++ky) {
        for (Index kz = 0; kz < Kz; ++kz) {
            blocks.push_back(amplitude * kron(Xy[static_cast<std::size_t>(ky)], Xz[static_cast<std::size_t>(kz)]));
        }
    }
    return blocks;
}

std::vector<CMatrix> draw_unit_noise(Index rows, Index cols, Index blocks, std::mt19937_64& rng)
{
    std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
    std::vector<CMatrix> out;
    out.reserve(static_cast<std::size_t>(blocks));
    for (Index k = 0; k < blocks; ++k) {
        CMatrix V(rows, cols);
        for (Index j = 0; j < cols; ++j) {
            for (Index i = 0; i < rows; ++i) {
                const double re = normal(rng);
                const double im = normal(rng);
                V(i, j) = {re, im};
            }
        }
        out.push_back(std::move(V));
    }
    return out;
}

PilotObservation assemble_observation(const std::vector<CMatrix>& signal, const std::vector<CMatrix>& unit_noise,
                                      double noise_variance, double transmit_power)
{
    NoiseModel{noise_variance}.validate();
    PilotObservation obs;
    obs.noise_variance = noise_variance;
    obs.transmit_power = transmit_power;
    obs.blocks = signal;
    if (noise_variance > 0.0) {
        if (unit_noise.size() != signal.size()) {
            throw std::invalid_argument("assemble_observation: noise and signal block counts differ");
        }
        const double sigma = std::sqrt(noise_variance);
        for (std::size_t k = 0; k < signal.size(); ++k) {
            obs.blocks[k] += sigma * unit_noise[k];
        }
    }
    return obs;
}

PilotObservation synthesize_received(const ChannelFactors& ch, const TrainingDesign& design, const NoiseModel& noise,
                                     double transmit_power, std::mt19937_64& rng)
{
    noise.validate();
    const auto signal = pilot_signal(ch, design, transmit_power);
    std::vector<CMatrix> unit;
    if (noise.variance > 0.0) {
        unit = draw_unit_noise(ch.G.rows(), design.T(), design.K(), rng);
    }
    return assemble_observation(signal, unit, noise.variance, transmit_power);
}

void check_observation(const PilotObservation& obs, const TrainingDesign& design)
{
    if (static_cast<Index>(obs.blocks.size()) != design.K()) {
        throw std::invalid_argument("observation has " + std::to_string(obs.blocks.size()) + " blocks, design expects " +
                                    std::to_string(design.K()));
    }
    for (const auto& X : obs.blocks) {
        if (X.rows() != design.cfg.Q() || X.cols() != design.T()) {
            throw std::invalid_argument("observation block is " + std::to_string(X.rows()) + "x" +
                                        std::to_string(X.cols()) + ", expected " + std::to_string(design.cfg.Q()) +
                                        "x" + std::to_string(design.T()));
        }
    }
}

std::vector<CMatrix> matched_filter_blocks(const PilotObservation& obs, const TrainingDesign& design)
{
    check_observation(obs, design);
    const CMatrix SH = design.pilots.S.adjoint();
    std::vector<CMatrix> out;
    out.reserve(obs.blocks.size());
    for (const auto& X : obs.blocks) {
        out.push_back(X * SH);
    }
    return out;
}

CMatrix khatri_rao_channel_estimate(const PilotObservation& obs, const TrainingDesign& design)
{
    const auto U_blocks = matched_filter_blocks(obs, design);
    const Index rows = design.cfg.Q() * design.cfg.M();
    const Index Ky = design.irs.Ky;
    const Index Kz = design.irs.Kz;
    const Index Ny = design.cfg.Ny;
    const Index Nz = design.cfg.Nz;

    // Row r of U Omega^H with Omega^H = Wy^H (x) Wz^H is
    // vec(conj(Wz) R Wy^H)^T, R the row reshaped to Kz x Ky.
    const CMatrix Wz_conj = design.irs.Wz.conjugate();
    const CMatrix Wy_adj = design.irs.Wy.adjoint();
    CMatrix E(rows, design.cfg.N());
    CMatrix R(Kz, Ky);
    for (Index r = 0; r < rows; ++r) {
        for (Index k = 0; k < design.K(); ++k) {
            R(k % Kz, k / Kz) = U_blocks[static_cast<std::size_t>(k)](r % design.cfg.Q(), r / design.cfg.Q());
        }
        const CMatrix out = Wz_conj * R * Wy_adj; // Nz x Ny
        E.row(r) = Eigen::Map<const CVector>(out.data(), Ny * Nz).transpose();
    }
    return E / design.irs_gain();
}

} // namespace irs2d
