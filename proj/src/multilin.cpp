#include "irs2d/multilin.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace irs2d {

namespace {

constexpr double kPowerTolerance = 1e-12;
constexpr int kPowerIterationCap = 500;
constexpr Index kFullDecompositionLimit = 64;

void require(bool condition, const char* message)
{
    if (!condition) {
        throw std::invalid_argument(message);
    }
}

// Dominant pair from the Hermitian eigendecomposition of the smaller Gram
// matrix; the other vector follows from one multiplication.
SingularTriplet gram_rank1(const CMatrix& M)
{
    SingularTriplet t;
    if (M.rows() <= M.cols()) {
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(M * M.adjoint());
        t.u = eig.eigenvectors().col(M.rows() - 1);
        t.v = M.adjoint() * t.u;
        t.s = t.v.norm();
        t.v /= t.s;
    } else {
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(M.adjoint() * M);
        t.v = eig.eigenvectors().col(M.cols() - 1);
        t.u = M * t.v;
        t.s = t.u.norm();
        t.u /= t.s;
    }
    return t;
}

SingularTriplet full_rank1(const CMatrix& M)
{
    Eigen::BDCSVD<CMatrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SingularTriplet t;
    t.u = svd.matrixU().col(0);
    t.s = svd.singularValues()(0);
    t.v = svd.matrixV().col(0);
    return t;
}

// Alternating power iteration on M M^H, started from the first nonzero column.
bool power_rank1(const CMatrix& M, SingularTriplet& out)
{
    Index start = 0;
    while (start < M.cols() && M.col(start).norm() == 0.0) {
        ++start;
    }
    CVector u = M.col(start).normalized();
    CVector v;
    double s = 0.0;
    for (int it = 0; it < kPowerIterationCap; ++it) {
        v = M.adjoint() * u;
        const double vn = v.norm();
        if (vn == 0.0) {
            return false;
        }
        v /= vn;
        CVector next = M * v;
        s = next.norm();
        next /= s;
        const double change = (next - u).norm();
        u = std::move(next);
        if (change <= kPowerTolerance) {
            out = {u, s, v};
            return true;
        }
    }
    return false;
}

} // namespace

// -- CTensor3 -------------------------------------------------------------------

CTensor3::CTensor3(Index d1, Index d2, Index d3)
    : dims_{d1, d2, d3}
    , data_(static_cast<std::size_t>(d1 * d2 * d3), cplx{0.0, 0.0})
{
    require(d1 >= 0 && d2 >= 0 && d3 >= 0, "CTensor3: negative dimension");
}

CMatrix CTensor3::unfold(int mode) const
{
    const auto [d1, d2, d3] = dims_;
    switch (mode) {
    case 1: {
        CMatrix out(d1, d2 * d3);
        for (Index k = 0; k < d3; ++k)
            for (Index j = 0; j < d2; ++j)
                for (Index i = 0; i < d1; ++i)
                    out(i, j + d2 * k) = (*this)(i, j, k);
        return out;
    }
    case 2: {
        CMatrix out(d2, d1 * d3);
        for (Index k = 0; k < d3; ++k)
            for (Index j = 0; j < d2; ++j)
                for (Index i = 0; i < d1; ++i)
                    out(j, i + d1 * k) = (*this)(i, j, k);
        return out;
    }
    case 3: {
        CMatrix out(d3, d1 * d2);
        for (Index k = 0; k < d3; ++k)
            for (Index j = 0; j < d2; ++j)
                for (Index i = 0; i < d1; ++i)
                    out(k, i + d1 * j) = (*this)(i, j, k);
        return out;
    }
    default:
        throw std::invalid_argument("CTensor3::unfold: mode must be 1, 2 or 3");
    }
}

CTensor3 CTensor3::fold(const CMatrix& unfolded, int mode, std::array<Index, 3> dims)
{
    const auto [d1, d2, d3] = dims;
    CTensor3 T(d1, d2, d3);
    switch (mode) {
    case 1:
        require(unfolded.rows() == d1 && unfolded.cols() == d2 * d3, "CTensor3::fold: shape mismatch");
        for (Index k = 0; k < d3; ++k)
            for (Index j = 0; j < d2; ++j)
                for (Index i = 0; i < d1; ++i)
                    T(i, j, k) = unfolded(i, j + d2 * k);
        break;
    case 2:
        require(unfolded.rows() == d2 && unfolded.cols() == d1 * d3, "CTensor3::fold: shape mismatch");
        for (Index k = 0; k < d3; ++k)
            for (Index j = 0; j < d2; ++j)
                for (Index i = 0; i < d1; ++i)
                    T(i, j, k) = unfolded(j, i + d1 * k);
        break;
    case 3:
        require(unfolded.rows() == d3 && unfolded.cols() == d1 * d2, "CTensor3::fold: shape mismatch");
        for (Index k = 0; k < d3; ++k)
            for (Index j = 0; j < d2; ++j)
                for (Index i = 0; i < d1; ++i)
                    T(i, j, k) = unfolded(k, i + d1 * j);
        break;
    default:
        throw std::invalid_argument("CTensor3::fold: mode must be 1, 2 or 3");
    }
    return T;
}

double CTensor3::norm() const
{
    double acc = 0.0;
    for (const auto& x : data_) {
        acc += std::norm(x);
    }
    return std::sqrt(acc);
}

// -- structured products ----------------------------------------------------------

CMatrix kron(const CMatrix& A, const CMatrix& B)
{
    CMatrix out(A.rows() * B.rows(), A.cols() * B.cols());
    for (Index j = 0; j < A.cols(); ++j) {
        for (Index i = 0; i < A.rows(); ++i) {
            out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
        }
    }
    return out;
}

CMatrix khatri_rao(const CMatrix& A, const CMatrix& B)
{
    if (A.cols() != B.cols()) {
        throw std::invalid_argument("khatri_rao: column counts differ (" + std::to_string(A.cols()) + " vs " +
                                    std::to_string(B.cols()) + ")");
    }
    CMatrix out(A.rows() * B.rows(), A.cols());
    for (Index n = 0; n < A.cols(); ++n) {
        for (Index i = 0; i < A.rows(); ++i) {
            out.col(n).segment(i * B.rows(), B.rows()) = A(i, n) * B.col(n);
        }
    }
    return out;
}

CMatrix hadamard_product(const CMatrix& A, const CMatrix& B)
{
    require(A.rows() == B.rows() && A.cols() == B.cols(), "hadamard_product: shape mismatch");
    return A.cwiseProduct(B);
}

CVector vec(const CMatrix& A)
{
    return Eigen::Map<const CVector>(A.data(), A.size());
}

CMatrix unvec(const CVector& v, Index rows, Index cols)
{
    if (rows < 0 || cols < 0 || v.size() != rows * cols) {
        throw std::invalid_argument("unvec: length " + std::to_string(v.size()) + " does not match " +
                                    std::to_string(rows) + "x" + std::to_string(cols));
    }
    return Eigen::Map<const CMatrix>(v.data(), rows, cols);
}

CMatrix van_loan_rearrange(const CMatrix& X, Index blockRows, Index blockCols)
{
    require(blockRows > 0 && blockCols > 0, "van_loan_rearrange: block counts must be positive");
    if (X.rows() % blockRows != 0 || X.cols() % blockCols != 0) {
        throw std::invalid_argument("van_loan_rearrange: " + std::to_string(X.rows()) + "x" +
                                    std::to_string(X.cols()) + " is not divisible into " +
                                    std::to_string(blockRows) + "x" + std::to_string(blockCols) + " blocks");
    }
    const Index r2 = X.rows() / blockRows;
    const Index c2 = X.cols() / blockCols;
    CMatrix out(r2 * c2, blockRows * blockCols);
    for (Index j = 0; j < blockCols; ++j) {
        for (Index i = 0; i < blockRows; ++i) {
            const Index col = i + blockRows * j;
            for (Index c = 0; c < c2; ++c) {
                out.col(col).segment(c * r2, r2) = X.block(i * r2, j * c2 + c, r2, 1);
            }
        }
    }
    return out;
}

KroneckerFactors nearest_kronecker(const CMatrix& X, Index blockRows, Index blockCols)
{
    const CMatrix R = van_loan_rearrange(X, blockRows, blockCols);
    const Index r2 = X.rows() / blockRows;
    const Index c2 = X.cols() / blockCols;

    KroneckerFactors out;
    if (X.norm() == 0.0) {
        out.A = CMatrix::Zero(blockRows, blockCols);
        out.B = CMatrix::Zero(r2, c2);
        out.degenerate = true;
        return out;
    }

    const SingularTriplet t = svd_rank1(R);
    CVector a = t.v.conjugate();
    const cplx phase = phase_normalize(a);
    const CVector b = t.s * phase * t.u;

    out.A = unvec(a, blockRows, blockCols);
    out.B = unvec(b, r2, c2);
    out.residual = (R - b * a.transpose()).norm();
    return out;
}

// -- rank-one approximations ---------------------------------------------------

cplx phase_normalize(CVector& v)
{
    if (v.size() == 0) {
        return {1.0, 0.0};
    }
    Index best = 0;
    double best_mag = std::abs(v(0));
    for (Index i = 1; i < v.size(); ++i) {
        const double m = std::abs(v(i));
        if (m > best_mag) {
            best_mag = m;
            best = i;
        }
    }
    if (best_mag == 0.0) {
        return {1.0, 0.0};
    }
    const cplx phase = v(best) / best_mag;
    v *= std::conj(phase);
    v(best) = best_mag;
    return phase;
}

SingularTriplet svd_rank1(const CMatrix& M)
{
    if (M.size() == 0 || M.norm() == 0.0) {
        throw DegenerateInputError("svd_rank1: zero matrix");
    }
    SingularTriplet t;
    if (std::max(M.rows(), M.cols()) <= kFullDecompositionLimit) {
        t = gram_rank1(M);
    } else if (!power_rank1(M, t)) {
        t = full_rank1(M);
    }
    const cplx phase = phase_normalize(t.u);
    t.v *= std::conj(phase);
    return t;
}

Eigen::VectorXd singular_values(const CMatrix& M)
{
    Eigen::BDCSVD<CMatrix> svd(M);
    return svd.singularValues();
}

CTensor3 outer3(const CVector& a, const CVector& b, const CVector& c)
{
    CTensor3 T(a.size(), b.size(), c.size());
    for (Index k = 0; k < c.size(); ++k)
        for (Index j = 0; j < b.size(); ++j)
            for (Index i = 0; i < a.size(); ++i)
                T(i, j, k) = a(i) * b(j) * c(k);
    return T;
}

CMatrix mode_product(const CTensor3& T, const CVector& v, int mode)
{
    const auto [d1, d2, d3] = T.dims();
    if (mode < 1 || mode > 3) {
        throw std::invalid_argument("mode_product: mode must be 1, 2 or 3");
    }
    if (v.size() != T.dim(mode)) {
        throw std::invalid_argument("mode_product: vector length " + std::to_string(v.size()) +
                                    " does not match mode-" + std::to_string(mode) + " size " +
                                    std::to_string(T.dim(mode)));
    }
    CMatrix out;
    switch (mode) {
    case 1:
        out = CMatrix::Zero(d2, d3);
        for (Index k = 0; k < d3; ++k)
            for (Index j = 0; j < d2; ++j)
                for (Index i = 0; i < d1; ++i)
                    out(j, k) += v(i) * T(i, j, k);
        break;
    case 2:
        out = CMatrix::Zero(d1, d3);
        for (Index k = 0; k < d3; ++k)
            for (Index j = 0; j < d2; ++j)
                for (Index i = 0; i < d1; ++i)
                    out(i, k) += v(j) * T(i, j, k);
        break;
    default:
        out = CMatrix::Zero(d1, d2);
        for (Index k = 0; k < d3; ++k)
            for (Index j = 0; j < d2; ++j)
                for (Index i = 0; i < d1; ++i)
                    out(i, j) += v(k) * T(i, j, k);
        break;
    }
    return out;
}

namespace {

// Best third factor for fixed unit-norm first and second factors.
CVector project_mode3(const CTensor3& T, const CVector& u1, const CVector& u2)
{
    const CMatrix partial = mode_product(T, u1.conjugate(), 1); // d2 x d3
    return partial.transpose() * u2.conjugate();
}

} // namespace

Rank1Triple hosvd_rank1_3(const CTensor3& T, const HosvdOptions& options)
{
    if (T.size() == 0 || T.norm() == 0.0) {
        throw DegenerateInputError("hosvd_rank1_3: zero tensor");
    }
    Rank1Triple r;
    r.u1 = svd_rank1(T.unfold(1)).u;
    r.u2 = svd_rank1(T.unfold(2)).u;
    r.u3 = project_mode3(T, r.u1, r.u2);

    for (int sweep = 0; sweep < options.refinement_sweeps; ++sweep) {
        // u1 <- T x2 conj(u2) x3 conj(u3), normalized; likewise u2; then u3.
        CVector u1 = mode_product(T, r.u2.conjugate(), 2) * r.u3.conjugate();
        if (u1.norm() == 0.0) {
            break;
        }
        u1.normalize();
        phase_normalize(u1);
        r.u1 = std::move(u1);

        CVector u2 = mode_product(T, r.u1.conjugate(), 1) * r.u3.conjugate();
        if (u2.norm() == 0.0) {
            break;
        }
        u2.normalize();
        phase_normalize(u2);
        r.u2 = std::move(u2);

        r.u3 = project_mode3(T, r.u1, r.u2);
    }
    return r;
}

// -- index maps and codebooks ----------------------------------------------------

std::vector<Index> block_perm_indices(Index My, Index Mz, Index Qy, Index Qz, Index Ny, Index Nz)
{
    require(My > 0 && Mz > 0 && Qy > 0 && Qz > 0 && Ny > 0 && Nz > 0,
            "block_perm_indices: dimensions must be positive");
    const Index n_rows = My * Mz * Qy * Qz;
    std::vector<Index> perm(static_cast<std::size_t>(n_rows));
    for (Index iy = 0; iy < My; ++iy)
        for (Index ky = 0; ky < Qy; ++ky)
            for (Index iz = 0; iz < Mz; ++iz)
                for (Index kz = 0; kz < Qz; ++kz) {
                    const Index rhs = (iy * Qy + ky) * (Mz * Qz) + (iz * Qz + kz);
                    const Index lhs = (iy * Mz + iz) * (Qy * Qz) + (ky * Qz + kz);
                    perm[static_cast<std::size_t>(rhs)] = lhs;
                }
    return perm;
}

CMatrix permute_rows(const CMatrix& X, const std::vector<Index>& perm)
{
    require(static_cast<Index>(perm.size()) == X.rows(), "permute_rows: permutation length mismatch");
    CMatrix out(X.rows(), X.cols());
    for (std::size_t r = 0; r < perm.size(); ++r) {
        out.row(static_cast<Index>(r)) = X.row(perm[r]);
    }
    return out;
}

std::vector<Index> invert_permutation(const std::vector<Index>& perm)
{
    std::vector<Index> inv(perm.size());
    for (std::size_t r = 0; r < perm.size(); ++r) {
        inv[static_cast<std::size_t>(perm[r])] = static_cast<Index>(r);
    }
    return inv;
}

bool is_power_of_two(Index n)
{
    return n > 0 && (n & (n - 1)) == 0;
}

CMatrix hadamard_matrix(Index n)
{
    if (!is_power_of_two(n)) {
        throw std::invalid_argument("hadamard_matrix: order " + std::to_string(n) + " is not a power of two");
    }
    Eigen::MatrixXd H = Eigen::MatrixXd::Ones(1, 1);
    while (H.rows() < n) {
        const Index h = H.rows();
        Eigen::MatrixXd next(2 * h, 2 * h);
        next << H, H, H, -H;
        H = std::move(next);
    }
    return H.cast<cplx>() / std::sqrt(static_cast<double>(n));
}

CMatrix dft_codebook(Index N, Index K)
{
    if (N < 1 || K < N) {
        throw std::invalid_argument("dft_codebook: need 1 <= N <= K, got N=" + std::to_string(N) +
                                    " K=" + std::to_string(K));
    }
    CMatrix W(N, K);
    const double scale = 1.0 / std::sqrt(static_cast<double>(K));
    for (Index k = 0; k < K; ++k) {
        for (Index n = 0; n < N; ++n) {
            // Reduce n*k modulo K before the trig call to keep the argument small.
            const double angle = -2.0 * M_PI * static_cast<double>((n * k) % K) / static_cast<double>(K);
            W(n, k) = std::polar(scale, angle);
        }
    }
    return W;
}

} // namespace irs2d
