#ifndef AGLER_REALIZE_HPP
#define AGLER_REALIZE_HPP

#include "agler/decompose.hpp"

namespace agler {

struct Sector {
    TestFunction psi;
    int multiplicity = 1;
};

/**
 * @brief Unitary colligation U = [A B; C D] with block-diagonal sector structure.
 *
 * The state space is the direct sum over sectors of multiplicity copies of the
 * test-function block; transfer function D + C (I - rho(z) A)^{-1} rho(z) B.
 */
struct Colligation {
    CMatrix A, B, C, D;
    std::vector<Sector> sectors;
    int io_dim = 1;

    // interpolation data the colligation was built from (may be empty)
    std::vector<Point> nodes;
    std::vector<CMatrix> samples;

    int state_dim() const {
        int x = 0;
        for (const auto& s : sectors) x += s.multiplicity * s.psi.output_dim();
        return x;
    }
    CMatrix assemble() const;
};

/** @brief Block-diagonal evaluation: direct sum over sectors of I tensor psi_m(z). */
CMatrix rho_eval(const std::vector<Sector>& sectors, const Point& z);

/**
 * @brief Build the colligation whose transfer function matches the samples, by
 * extending the isometry between structured columns to a unitary.
 */
Colligation lurking_isometry(const AglerDecomposition& d, const DecompositionProblem& problem);

CMatrix transfer_eval(const Colligation& col, const Point& z);
inline CMatrix transfer_eval(const Colligation& col, Complex z) {
    return transfer_eval(col, make_point(z));
}

struct TransferReport {
    double unitarity_defect = 0.0;
    std::vector<double> node_errors;
    double max_node_error = 0.0;
    double max_spectral_radius = 0.0;
    double max_resolvent_cond = 1.0;
};

TransferReport verify_colligation(const Colligation& col);

struct Polynomial {
    int dim = 1;
    std::vector<std::pair<std::vector<int>, Complex>> terms;  // exponents -> coefficient
};

CMatrix poly_eval(const Polynomial& p, const std::vector<CMatrix>& tuple);

/**
 * @brief ||S(T)|| for a commuting tuple of strict contractions, substituting T_k
 * for the k-th coordinate; defined for polynomials and coordinate-family colligations.
 */
double von_neumann_test(const Polynomial& p, const std::vector<CMatrix>& tuple,
                        double tol = 1e-10);
double von_neumann_test(const Colligation& col, const std::vector<CMatrix>& tuple,
                        double tol = 1e-10);

}

#endif
