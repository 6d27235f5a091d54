#include "irs2d/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace irs2d {

namespace {

constexpr double kDegenerateFactor = 10.0 * std::numeric_limits<double>::epsilon();

bool full_period(const PeakGrid& grid)
{
    return std::abs((grid.upper - grid.lower) - 2.0 * M_PI) < 1e-12;
}

// |sum_l conj(v_l) exp(-j l mu)| via Horner in z = exp(-j mu).
double correlation(const CVector& v_conj, double mu)
{
    const cplx z = std::polar(1.0, -mu);
    cplx acc = 0.0;
    for (Index l = v_conj.size() - 1; l >= 0; --l) {
        acc = acc * z + v_conj(l);
    }
    return std::abs(acc);
}

double golden_section_max(const CVector& v_conj, double a, double b, double tol)
{
    const double invphi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = correlation(v_conj, c);
    double fd = correlation(v_conj, d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = correlation(v_conj, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = correlation(v_conj, d);
        }
    }
    return 0.5 * (a + b);
}

double into_interval(double mu, const PeakGrid& grid)
{
    if (full_period(grid)) {
        const double span = grid.upper - grid.lower;
        double r = std::fmod(mu - grid.lower, span);
        if (r < 0.0) {
            r += span;
        }
        return grid.lower + r;
    }
    return std::clamp(mu, grid.lower, grid.upper);
}

// Peak search that turns negligible input into a flagged grid-center result.
double guarded_peak(const CVector& v, Index L, const PeakGrid& grid, double reference_energy, bool& degenerate)
{
    if (v.size() == 0 || v.squaredNorm() <= kDegenerateFactor * reference_energy || v.squaredNorm() == 0.0) {
        degenerate = true;
        return grid.center();
    }
    return peak_search(v, L, grid);
}

double total_energy(const PilotObservation& obs)
{
    double e = 0.0;
    for (const auto& X : obs.blocks) {
        e += X.squaredNorm();
    }
    return e;
}

struct DomainFit
{
    Rank1Triple factors;
    double fit = 0.0;
    bool degenerate = false;
};

DomainFit fit_domain(const CTensor3& T, double reference_energy, const HosvdOptions& options)
{
    DomainFit out;
    const double energy = T.norm() * T.norm();
    const auto [d1, d2, d3] = T.dims();
    if (energy == 0.0 || energy <= kDegenerateFactor * reference_energy) {
        out.degenerate = true;
        out.factors = {CVector::Zero(d1), CVector::Zero(d2), CVector::Zero(d3)};
        return out;
    }
    out.factors = hosvd_rank1_3(T, options);
    out.fit = out.factors.u3.squaredNorm() / energy;
    return out;
}

// Stacked matrix with column k = vec of a Q_t x M_t block -> tensor Q_t x M_t x K.
CTensor3 stack_to_tensor(const CMatrix& stacked, Index rows_q, Index cols_m)
{
    return CTensor3::fold(stacked.transpose(), 3, {rows_q, cols_m, stacked.cols()});
}

void finalize(FrequencyEstimate& est, const ArrayConfig& cfg)
{
    const CascadedChannels rec = reconstruct_channels(est, cfg);
    est.H_hat = rec.H;
    est.G_hat = rec.G;
    est.E_hat = rec.E;
}

} // namespace

void PeakGrid::validate() const
{
    if (points < 2) {
        throw std::invalid_argument("PeakGrid: need at least 2 points");
    }
    if (!(upper > lower)) {
        throw std::invalid_argument("PeakGrid: empty search interval");
    }
    if (!(tolerance >= 0.0)) {
        throw std::invalid_argument("PeakGrid: tolerance must be >= 0");
    }
}

std::array<double, 6> FrequencyEstimate::values() const
{
    return {mu_bs, psi_bs, mu_ue, psi_ue, mu_y, psi_z};
}

double peak_search(const CVector& v, Index L, const PeakGrid& grid)
{
    grid.validate();
    if (v.size() != L) {
        throw std::invalid_argument("peak_search: vector length " + std::to_string(v.size()) + " != " +
                                    std::to_string(L));
    }
    if (v.squaredNorm() == 0.0) {
        throw DegenerateInputError("peak_search: zero vector");
    }
    const CVector v_conj = v.conjugate();
    const double step = (grid.upper - grid.lower) / static_cast<double>(grid.points);

    std::vector<double> mag(static_cast<std::size_t>(grid.points));
    Index best = 0;
    for (Index g = 0; g < grid.points; ++g) {
        mag[static_cast<std::size_t>(g)] = correlation(v_conj, grid.lower + static_cast<double>(g) * step);
        if (mag[static_cast<std::size_t>(g)] > mag[static_cast<std::size_t>(best)]) {
            best = g;
        }
    }
    double mu = grid.lower + static_cast<double>(best) * step;
    if (!grid.refine) {
        return mu;
    }

    const bool periodic = full_period(grid);
    Index left = best - 1;
    Index right = best + 1;
    if (periodic) {
        left = (left + grid.points) % grid.points;
        right = right % grid.points;
    }
    if (left >= 0 && right < grid.points) {
        const double ym = mag[static_cast<std::size_t>(left)];
        const double y0 = mag[static_cast<std::size_t>(best)];
        const double yp = mag[static_cast<std::size_t>(right)];
        if (ym > 0.0 && y0 > 0.0 && yp > 0.0) {
            const double lm = std::log(ym);
            const double l0 = std::log(y0);
            const double lp = std::log(yp);
            const double curvature = lm - 2.0 * l0 + lp;
            if (curvature < 0.0) {
                const double offset = std::clamp(0.5 * (lm - lp) / curvature, -0.5, 0.5);
                mu += offset * step;
            }
        }
    }
    if (grid.tolerance > 0.0 && grid.tolerance < step) {
        mu = golden_section_max(v_conj, mu - step, mu + step, grid.tolerance);
    }
    return into_interval(mu, grid);
}

// -- HKMR -------------------------------------------------------------------------

FrequencyEstimate hkmr_estimate(const PilotObservation& obs, const TrainingDesign& design,
                                const EstimatorOptions& options, HkmrIntermediates* trace)
{
    check_observation(obs, design);
    options.grid.validate();
    const ArrayConfig& cfg = design.cfg;
    const Index K = design.K();
    const double energy = total_energy(obs);

    FrequencyEstimate est;
    HkmrIntermediates local;
    HkmrIntermediates& tr = trace != nullptr ? *trace : local;
    tr = {};

    // (i)-(ii) per-block Kronecker factorization and temporal matched filter.
    tr.Uy = CMatrix(cfg.Qy * cfg.My, K);
    tr.Uz = CMatrix(cfg.Qz * cfg.Mz, K);
    const CMatrix SyH = design.pilots.Sy.adjoint();
    const CMatrix SzH = design.pilots.Sz.adjoint();
    double residual_sq = 0.0;
    for (Index k = 0; k < K; ++k) {
        KroneckerFactors f = nearest_kronecker(obs.blocks[static_cast<std::size_t>(k)], cfg.Qy, design.Ty());
        residual_sq += f.residual * f.residual;
        if (f.degenerate) {
            ++est.diag.degenerate_blocks;
        } else {
            // Split the block scale evenly between the two domains.
            const double s = f.B.norm();
            f.A *= std::sqrt(s);
            f.B /= std::sqrt(s);
        }
        tr.Uy.col(k) = vec(f.A * SyH);
        tr.Uz.col(k) = vec(f.B * SzH);
        tr.Xy_hat.push_back(std::move(f.A));
        tr.Xz_hat.push_back(std::move(f.B));
    }
    est.diag.kron_residual = std::sqrt(residual_sq);

    // (iii)-(iv) rank-one tensor fits for BS and UE factors.
    tr.Uy_tensor = stack_to_tensor(tr.Uy, cfg.Qy, cfg.My);
    tr.Uz_tensor = stack_to_tensor(tr.Uz, cfg.Qz, cfg.Mz);
    const DomainFit fy = fit_domain(tr.Uy_tensor, energy, options.hosvd);
    const DomainFit fz = fit_domain(tr.Uz_tensor, energy, options.hosvd);
    est.diag.fit_y = fy.fit;
    est.diag.fit_z = fz.fit;
    bool degenerate = fy.degenerate || fz.degenerate;

    est.q_y = fy.factors.u1;
    est.a_y = fy.factors.u2;
    est.q_z = fz.factors.u1;
    est.a_z = fz.factors.u2;
    const PeakGrid& grid = options.grid;
    est.mu_ue = guarded_peak(est.q_y, cfg.Qy, grid, 0.0, degenerate);
    est.mu_bs = guarded_peak(est.a_y, cfg.My, grid, 0.0, degenerate);
    est.psi_ue = guarded_peak(est.q_z, cfg.Qz, grid, 0.0, degenerate);
    est.psi_bs = guarded_peak(est.a_z, cfg.Mz, grid, 0.0, degenerate);

    // (v) spatial filtering with unit-norm beams at the estimated frequencies.
    const auto beam = [](double mu, Index L) -> CVector {
        return steering_vector(mu, L).conjugate() / std::sqrt(static_cast<double>(L));
    };
    tr.l_y = mode_product(tr.Uy_tensor, beam(est.mu_ue, cfg.Qy), 1).transpose() * beam(est.mu_bs, cfg.My);
    tr.l_z = mode_product(tr.Uz_tensor, beam(est.psi_ue, cfg.Qz), 1).transpose() * beam(est.psi_bs, cfg.Mz);

    // (vi) IRS matched filter, (vii) rank-one split of the IRS response.
    tr.l = tr.l_y.cwiseProduct(tr.l_z);
    tr.n_hat = design.irs.Omega.conjugate() * tr.l / design.irs_gain();
    tr.N_hat = unvec(tr.n_hat, cfg.Nz, cfg.Ny);
    if (tr.N_hat.squaredNorm() > kDegenerateFactor * energy && tr.N_hat.squaredNorm() > 0.0) {
        const SingularTriplet t = svd_rank1(tr.N_hat);
        est.n_z = std::sqrt(t.s) * t.u;
        est.n_y = std::sqrt(t.s) * t.v.conjugate();
    } else {
        degenerate = true;
        est.n_z = CVector::Zero(cfg.Nz);
        est.n_y = CVector::Zero(cfg.Ny);
    }

    // (viii) combined IRS frequencies.
    est.mu_y = guarded_peak(est.n_y, cfg.Ny, grid, 0.0, degenerate);
    est.psi_z = guarded_peak(est.n_z, cfg.Nz, grid, 0.0, degenerate);
    est.diag.degenerate = degenerate;

    finalize(est, cfg);
    return est;
}

FrequencyEstimate hkmr_estimate(const PilotObservation& obs, const TrainingDesign& design, const PeakGrid& grid)
{
    EstimatorOptions options;
    options.grid = grid;
    return hkmr_estimate(obs, design, options);
}

// -- TSHDR --------------------------------------------------------------------------

FrequencyEstimate tshdr_estimate(const PilotObservation& obs, const TrainingDesign& design,
                                 const EstimatorOptions& options, TshdrIntermediates* trace)
{
    check_observation(obs, design);
    options.grid.validate();
    const ArrayConfig& cfg = design.cfg;
    const double energy = total_energy(obs);

    FrequencyEstimate est;
    TshdrIntermediates local;
    TshdrIntermediates& tr = trace != nullptr ? *trace : local;
    tr = {};

    // (i)-(ii) pilot and IRS matched filtering.
    tr.E = khatri_rao_channel_estimate(obs, design);
    // (iii) regroup rows into y and z Khatri-Rao blocks.
    tr.J = permute_rows(tr.E, block_perm_indices(cfg.My, cfg.Mz, cfg.Qy, cfg.Qz, cfg.Ny, cfg.Nz));
    // (iv) Kronecker factorization J ~ Jy (x) Jz.
    const KroneckerFactors f = nearest_kronecker(tr.J, cfg.My * cfg.Qy, cfg.Ny);
    tr.Jy_hat = f.A;
    tr.Jz_hat = f.B;
    est.diag.kron_residual = f.residual;

    bool degenerate = f.degenerate;
    // (v)-(vi) joint rank-one fits per domain.
    tr.Jy_tensor = stack_to_tensor(tr.Jy_hat, cfg.Qy, cfg.My);
    tr.Jz_tensor = stack_to_tensor(tr.Jz_hat, cfg.Qz, cfg.Mz);
    // Jy_hat is unit norm by the factor gauge; the scale sits in Jz_hat.
    const DomainFit fy = fit_domain(tr.Jy_tensor, 0.0, options.hosvd);
    const DomainFit fz = fit_domain(tr.Jz_tensor, energy, options.hosvd);
    est.diag.fit_y = fy.fit;
    est.diag.fit_z = fz.fit;
    degenerate = degenerate || fy.degenerate || fz.degenerate;

    est.q_y = fy.factors.u1;
    est.a_y = fy.factors.u2;
    est.n_y = fy.factors.u3;
    est.q_z = fz.factors.u1;
    est.a_z = fz.factors.u2;
    est.n_z = fz.factors.u3;

    // (vii) frequency extraction.
    const PeakGrid& grid = options.grid;
    est.mu_ue = guarded_peak(est.q_y, cfg.Qy, grid, 0.0, degenerate);
    est.mu_bs = guarded_peak(est.a_y, cfg.My, grid, 0.0, degenerate);
    est.mu_y = guarded_peak(est.n_y, cfg.Ny, grid, 0.0, degenerate);
    est.psi_ue = guarded_peak(est.q_z, cfg.Qz, grid, 0.0, degenerate);
    est.psi_bs = guarded_peak(est.a_z, cfg.Mz, grid, 0.0, degenerate);
    est.psi_z = guarded_peak(est.n_z, cfg.Nz, grid, 0.0, degenerate);
    est.diag.degenerate = degenerate;

    finalize(est, cfg);
    return est;
}

FrequencyEstimate tshdr_estimate(const PilotObservation& obs, const TrainingDesign& design, const PeakGrid& grid)
{
    EstimatorOptions options;
    options.grid = grid;
    return tshdr_estimate(obs, design, options);
}

// -- baselines ----------------------------------------------------------------------

CMatrix ls_baseline(const PilotObservation& obs, const TrainingDesign& design)
{
    return khatri_rao_channel_estimate(obs, design);
}

KrfResult krf_factorize(const CMatrix& E_ls, const ArrayConfig& cfg)
{
    const Index Q = cfg.Q();
    const Index M = cfg.M();
    const Index N = E_ls.cols();
    if (E_ls.rows() != Q * M) {
        throw std::invalid_argument("krf_factorize: expected " + std::to_string(Q * M) + " rows, got " +
                                    std::to_string(E_ls.rows()));
    }
    KrfResult r;
    r.H_hat = CMatrix::Zero(N, M);
    r.G_hat = CMatrix::Zero(Q, N);
    r.column_residuals.assign(static_cast<std::size_t>(N), 0.0);
    for (Index n = 0; n < N; ++n) {
        const CMatrix C = unvec(E_ls.col(n), Q, M); // ~ g_n h_n^T
        if (C.squaredNorm() == 0.0) {
            continue;
        }
        const SingularTriplet t = svd_rank1(C);
        const CVector h = t.v.conjugate();
        const CVector g = t.s * t.u;
        r.H_hat.row(n) = h.transpose();
        r.G_hat.col(n) = g;
        r.column_residuals[static_cast<std::size_t>(n)] = (C - g * h.transpose()).norm();
    }
    r.E_hat = khatri_rao(r.H_hat.transpose(), r.G_hat);
    return r;
}

KrfResult krf_baseline(const PilotObservation& obs, const TrainingDesign& design)
{
    return krf_factorize(ls_baseline(obs, design), design.cfg);
}

// -- reconstruction ------------------------------------------------------------------

CascadedChannels reconstruct_channels(const FrequencyEstimate& est, const ArrayConfig& cfg)
{
    cfg.validate();
    const CMatrix Hy = steering_vector(est.mu_y, cfg.Ny) * steering_vector(est.mu_bs, cfg.My).transpose();
    const CMatrix Hz = steering_vector(est.psi_z, cfg.Nz) * steering_vector(est.psi_bs, cfg.Mz).transpose();
    const CMatrix Gy = steering_vector(est.mu_ue, cfg.Qy) * CVector::Ones(cfg.Ny).transpose();
    const CMatrix Gz = steering_vector(est.psi_ue, cfg.Qz) * CVector::Ones(cfg.Nz).transpose();
    CascadedChannels c;
    c.H = kron(Hy, Hz);
    c.G = kron(Gy, Gz);
    c.E = khatri_rao(c.H.transpose(), c.G);
    return c;
}

CMatrix reconstruct_cascaded(const FrequencyEstimate& est, const ArrayConfig& cfg)
{
    return reconstruct_channels(est, cfg).E;
}

CMatrix gauge_fit(const CMatrix& E, const CMatrix& E_hat)
{
    if (E.rows() != E_hat.rows() || E.cols() != E_hat.cols()) {
        throw std::invalid_argument("gauge_fit: shape mismatch");
    }
    const double denom = E_hat.squaredNorm();
    if (denom == 0.0) {
        return E_hat;
    }
    const cplx c = (E_hat.conjugate().cwiseProduct(E)).sum() / denom;
    return c * E_hat;
}

} // namespace irs2d
