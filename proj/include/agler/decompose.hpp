#ifndef AGLER_DECOMPOSE_HPP
#define AGLER_DECOMPOSE_HPP

#include <optional>

#include "agler/linalg.hpp"
#include "agler/testfns.hpp"

namespace agler {

struct DecompositionProblem {
    std::vector<Point> nodes;
    std::vector<CMatrix> samples;  // S(z_i), all square of the same size
    std::vector<TestFunction> family;
    int multiplicity = 0;  // copies per test function; 0 means one per node
    double tol = 1e-7;     // feasibility threshold, max block norm
    long max_iters = 50000;
    double psd_tol = 1e-9;
    long plateau_window = 500;
    double plateau_rel = 1e-12;

    int size() const { return static_cast<int>(nodes.size()); }
    int block_dim() const { return samples.empty() ? 0 : static_cast<int>(samples.front().rows()); }
    int copies() const { return multiplicity > 0 ? multiplicity : size(); }
};

/**
 * @brief PSD Gram variables and extracted factors witnessing
 * I - S(z_i)S(z_j)^* = sum_m H_m(z_i) (I tensor (I - psi_m(z_i)psi_m(z_j)^*)) H_m(z_j)^*.
 *
 * grams[m] is indexed by (node, copy, output row, test-function column);
 * factors[m][i] is the N x (R_m * psi_dim) slice at node i after rank reduction.
 */
struct AglerDecomposition {
    std::vector<CMatrix> grams;
    std::vector<std::vector<CMatrix>> factors;
    std::vector<int> multiplicities;  // effective copies R_m after factoring
    double residual = 0.0;
    long iterations = 0;
};

/**
 * @brief Certificate that the target kernel lies outside the decomposition cone:
 * a Hermitian functional nonnegative on sampled cone generators, negative on the target.
 */
struct SeparationEvidence {
    CMatrix functional;  // assembled block Hermitian matrix, unit Frobenius norm
    int nodes = 0;
    int block_dim = 0;
    double margin = 0.0;           // -Re<target, functional>
    double generator_floor = 0.0;  // minimum sampled generator pairing
    double residual = 0.0;
    long iterations = 0;

    CMatrix coefficient(int i, int j) const {
        return functional.block(i * block_dim, j * block_dim, block_dim, block_dim);
    }
};

enum class SolveStatus { feasible, infeasible, undecided };

struct DecompositionOutcome {
    SolveStatus status = SolveStatus::undecided;
    std::optional<AglerDecomposition> decomposition;
    std::optional<SeparationEvidence> evidence;
    double residual = 0.0;
    long iterations = 0;
    std::vector<double> residual_trace;
};

/** @brief Assembled target with (i,j) block I - S(z_i) S(z_j)^*. */
CMatrix target_kernel(const DecompositionProblem& problem);

DecompositionOutcome solve_decomposition(const DecompositionProblem& problem);

/** @brief Max block reconstruction error of the Gram variables against the target. */
double verify_decomposition(const AglerDecomposition& d, const DecompositionProblem& problem);

/** @brief Copy-summed kernels K_m(z_i, z_j), block size N * psi_dim. */
std::vector<FiniteKernel> recovered_kernels(const AglerDecomposition& d,
                                            const DecompositionProblem& problem);

}

#endif
