#pragma once

// Dense complex matrix and third-order tensor kernels.
//
// Everything here is a pure function of its arguments. Matrices are Eigen
// column-major, so "vec" is plain column stacking and matches the storage
// order.

#include <array>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace irs2d {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Index = Eigen::Index;

/// Raised when a rank-one factorization is requested for an all-zero input.
class DegenerateInputError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Third-order complex tensor with entry (i, j, k) stored at i + d1*(j + d2*k).
class CTensor3
{
public:
    CTensor3() = default;
    CTensor3(Index d1, Index d2, Index d3);

    [[nodiscard]] std::array<Index, 3> dims() const { return dims_; }
    [[nodiscard]] Index dim(int mode) const { return dims_.at(static_cast<std::size_t>(mode - 1)); }
    [[nodiscard]] Index size() const { return static_cast<Index>(data_.size()); }

    cplx& operator()(Index i, Index j, Index k) { return data_[offset(i, j, k)]; }
    [[nodiscard]] const cplx& operator()(Index i, Index j, Index k) const { return data_[offset(i, j, k)]; }

    /// Mode-n unfolding (n = 1, 2, 3): rows indexed by mode n, columns by
    /// the remaining two modes with the lower-numbered one varying fastest.
    [[nodiscard]] CMatrix unfold(int mode) const;

    /// Inverse of unfold for the given target dimensions.
    static CTensor3 fold(const CMatrix& unfolded, int mode, std::array<Index, 3> dims);

    [[nodiscard]] double norm() const;

private:
    [[nodiscard]] std::size_t offset(Index i, Index j, Index k) const
    {
        return static_cast<std::size_t>(i + dims_[0] * (j + dims_[1] * k));
    }

    std::array<Index, 3> dims_{0, 0, 0};
    std::vector<cplx> data_;
};

/// Rank-one factors of a third-order tensor, T ~ u1 o u2 o u3.
/// u1 and u2 are unit norm with their largest-magnitude entry real and
/// nonnegative; u3 carries scale and phase.
struct Rank1Triple
{
    CVector u1;
    CVector u2;
    CVector u3;
};

/// Dominant singular triplet, M ~ s * u * v^H.
struct SingularTriplet
{
    CVector u;
    double s = 0.0;
    CVector v;
};

/// Nearest Kronecker factors, X ~ A (x) B.
struct KroneckerFactors
{
    CMatrix A;
    CMatrix B;
    double residual = 0.0;   ///< ||X - A (x) B||_F
    bool degenerate = false; ///< X was all zero; A and B are zero matrices
};

struct HosvdOptions
{
    /// Alternating least-squares sweeps applied after the truncated HOSVD.
    int refinement_sweeps = 0;
};

// -- structured products ----------------------------------------------------

CMatrix kron(const CMatrix& A, const CMatrix& B);
CMatrix khatri_rao(const CMatrix& A, const CMatrix& B);
CMatrix hadamard_product(const CMatrix& A, const CMatrix& B);

CVector vec(const CMatrix& A);
CMatrix unvec(const CVector& v, Index rows, Index cols);

/// Van Loan rearrangement. With X of size (blockRows*r2) x (blockCols*c2),
/// column i + blockRows*j of the result is vec of block (i, j) of X, so that
/// X = A (x) B maps to vec(B) vec(A)^T.
CMatrix van_loan_rearrange(const CMatrix& X, Index blockRows, Index blockCols);

/// Frobenius-nearest A (x) B with A of size blockRows x blockCols.
/// ||A||_F = 1 with its largest-magnitude entry real nonnegative.
KroneckerFactors nearest_kronecker(const CMatrix& X, Index blockRows, Index blockCols);

// -- rank-one approximations -------------------------------------------------

/// Rotates v so that its largest-magnitude entry (lowest index on ties) is
/// real and nonnegative. Returns the unit phase that was removed.
cplx phase_normalize(CVector& v);

/// Best rank-one approximation. Throws DegenerateInputError on a zero matrix.
/// u is phase-normalized; v follows from the product.
SingularTriplet svd_rank1(const CMatrix& M);

/// Full singular values in descending order (reference decomposition).
Eigen::VectorXd singular_values(const CMatrix& M);

/// Truncated rank-one HOSVD. Throws DegenerateInputError on a zero tensor.
Rank1Triple hosvd_rank1_3(const CTensor3& T, const HosvdOptions& options = {});

/// Outer product a o b o c.
CTensor3 outer3(const CVector& a, const CVector& b, const CVector& c);

/// Contraction of mode n with v (no conjugation). The result keeps the two
/// remaining modes in their original order: mode 1 gives d2 x d3, mode 2
/// gives d1 x d3, mode 3 gives d1 x d2.
CMatrix mode_product(const CTensor3& T, const CVector& v, int mode);

// -- index maps and codebooks --------------------------------------------------

/// Row permutation relating (A (x) B) <> (C (x) D) to (A <> C) (x) (B <> D),
/// with A: I x R, B: J x S, C: K x R, D: L x S. Dimension arguments follow the
/// channel naming (I, J, K, L, R, S) = (My, Mz, Qy, Qz, Ny, Nz).
/// Row r of the right-hand product equals row perm[r] of the left-hand one.
std::vector<Index> block_perm_indices(Index My, Index Mz, Index Qy, Index Qz, Index Ny, Index Nz);

/// Applies a row map: out.row(r) = X.row(perm[r]).
CMatrix permute_rows(const CMatrix& X, const std::vector<Index>& perm);
std::vector<Index> invert_permutation(const std::vector<Index>& perm);

/// Sylvester Hadamard matrix scaled by 1/sqrt(n); n must be a power of two.
CMatrix hadamard_matrix(Index n);

/// Row-orthonormal N x K DFT codebook, W(n, k) = exp(-j 2 pi n k / K) / sqrt(K).
CMatrix dft_codebook(Index N, Index K);

bool is_power_of_two(Index n);

} // namespace irs2d
