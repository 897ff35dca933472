#ifndef AGLER_KERNELS_HPP
#define AGLER_KERNELS_HPP

#include <limits>
#include <optional>

#include "agler/linalg.hpp"
#include "agler/testfns.hpp"

namespace agler {

struct InterpolationProblem {
    enum class ClassTag { classical_disk, constrained_hardy, polydisk, custom };

    ClassTag tag = ClassTag::classical_disk;
    int domain_dim = 1;
    int block_dim = 1;
    std::vector<Point> nodes;
    std::vector<CMatrix> values;

    int size() const { return static_cast<int>(nodes.size()); }
};

enum class Verdict { feasible, infeasible, undecided };

struct CheckWitness {
    CVector alpha, beta;        // generating-kernel direction, when applicable
    std::vector<CMatrix> y;     // sampled Y per node (empty means Y == 1)
    CMatrix pick;               // the failing Pick-form matrix
    PsdReport report;
    int kernel_index = -1;      // index into a supplied kernel family
};

struct CheckReport {
    Verdict verdict = Verdict::feasible;
    std::optional<CheckWitness> witness;
    long samples_used = 0;
    double min_eig_seen = std::numeric_limits<double>::infinity();
    bool vacuous = false;
};

/** @brief Block Pick matrix with (i,j) block (I - S_i S_j^*) / (1 - z_i conj(z_j)). */
CMatrix dbr_pick_matrix(const InterpolationProblem& problem);

/**
 * @brief Generating kernel for the derivative-constrained disk algebra:
 * (alpha + z beta)(alpha + w beta)^* + z^2 conj(w)^2 / (1 - z conj(w)) * I.
 */
CMatrix constrained_generating_value(const CVector& alpha, const CVector& beta, Complex z,
                                     Complex w);
FiniteKernel constrained_generating_kernel(const CVector& alpha, const CVector& beta,
                                           const std::vector<Point>& nodes);

/**
 * @brief Assembled matrix of the admissibility quadratic form; block (j,i) is
 * K(z_i,z_j)^T tensor (I - psi(z_j)^* psi(z_i)).
 */
CMatrix admissibility_form(const FiniteKernel& k, const std::vector<CMatrix>& psi_at_nodes);

/** @brief PSD test of the multiplication-by-psi contractivity form on H(K). */
PsdReport admissibility_check(const FiniteKernel& k, const TestFunction& psi, double tol = 1e-9);

/** @brief Norm-bound variant with M^2 I - S(z_j)^* S(z_i); M = 1 is admissibility. */
PsdReport multiplier_norm_bound(const FiniteKernel& k, const std::vector<CMatrix>& s_at_nodes,
                                double m, double tol = 1e-9);

struct SphereSample {
    CVector alpha, beta;
};

/**
 * @brief Deterministic unit samples on the complex sphere of dimension 2N:
 * canonical real directions first (pi/12-spaced axis-pair grid, the pi/4 point
 * leading), then a Kronecker low-discrepancy grid, then seeded draws.
 */
std::vector<SphereSample> sphere_samples(int block_dim, long count, unsigned long long seed);

CheckReport constrained_np_check(const InterpolationProblem& problem, long sphere_count,
                                 int y_count, unsigned long long seed, double tol = 1e-9);

CheckReport generic_dual_check(const InterpolationProblem& problem,
                               const std::vector<FiniteKernel>& family, int y_count,
                               double tol = 1e-9);

}

#endif
