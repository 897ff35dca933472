#ifndef AGLER_TYPES_HPP
#define AGLER_TYPES_HPP

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace agler {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// A domain point: one complex coordinate per polydisk variable (length 1 on the disk).
using Point = Eigen::VectorXcd;

inline Point make_point(Complex z) {
    Point p(1);
    p(0) = z;
    return p;
}

struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TestAxiomViolation : InvalidInput {
    using InvalidInput::InvalidInput;
};

struct SamplingFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NormalizationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InconsistentDecomposition : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedOperation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

double max_abs(const CMatrix& a);
bool all_finite(const CMatrix& a);
double spectral_norm(const CMatrix& a);

/**
 * @brief Values of an operator-valued kernel on a finite node set.
 *
 * values[i*n + j] holds the block_dim x block_dim block K(z_i, z_j).
 */
struct FiniteKernel {
    std::vector<Point> nodes;
    int block_dim = 1;
    std::vector<CMatrix> values;

    int size() const { return static_cast<int>(nodes.size()); }
    const CMatrix& at(int i, int j) const { return values[static_cast<size_t>(i) * nodes.size() + j]; }
    CMatrix& at(int i, int j) { return values[static_cast<size_t>(i) * nodes.size() + j]; }

    CMatrix assemble() const;
    double hermitian_defect() const;
};

FiniteKernel szego_kernel(const std::vector<Point>& nodes);
FiniteKernel constant_kernel(const std::vector<Point>& nodes, const CMatrix& value);

}

#endif
