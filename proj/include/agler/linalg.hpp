#ifndef AGLER_LINALG_HPP
#define AGLER_LINALG_HPP

#include "agler/types.hpp"

namespace agler {

struct PsdReport {
    bool is_psd = true;
    double min_eigenvalue = 0.0;
    CVector witness;  // unit eigenvector attaining the minimum Rayleigh quotient
};

struct NotPositiveKernel : std::runtime_error {
    PsdReport report;
    NotPositiveKernel(const std::string& msg, PsdReport r)
        : std::runtime_error(msg), report(std::move(r)) {}
};

struct NotIsometric : std::runtime_error {
    double gram_mismatch;
    NotIsometric(const std::string& msg, double mismatch)
        : std::runtime_error(msg), gram_mismatch(mismatch) {}
};

CMatrix hermitian_part(const CMatrix& a);

/** @brief Decide positive semidefiniteness of a (near-)Hermitian matrix. */
PsdReport psd_check(const CMatrix& h, double tol = 1e-9);

/** @brief Eigenvalue-clipped projection onto the PSD cone. */
CMatrix nearest_psd(const CMatrix& h);

/**
 * @brief Factor a PSD block Gram matrix as G = F F^* and slice F per block row.
 *
 * Inner dimension is the numerical rank: eigenvalues > tol * max(1, lambda_max) are kept.
 * Throws NotPositiveKernel when the Gram fails psd_check within tol.
 */
std::vector<CMatrix> kolmogorov_factor(const CMatrix& gram, int blocks, int block_dim,
                                       double tol = 1e-9);
std::vector<CMatrix> kolmogorov_factor(const FiniteKernel& k, double tol = 1e-9);

/**
 * @brief Unitary U with U d_k = r_k for Gram-matched column lists.
 *
 * Both matrices carry dim rows, one column per vector pair (zero columns allowed;
 * the completion is then any deterministic unitary, here the identity).
 * Bases of the spans and of their orthogonal complements are built by pivoted
 * orthogonalization: largest remaining norm first, ties broken by lowest index.
 */
CMatrix unitary_completion(const CMatrix& domain_cols, const CMatrix& range_cols,
                           double tol = 1e-8);

}

#endif
