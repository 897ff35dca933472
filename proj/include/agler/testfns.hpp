#ifndef AGLER_TESTFNS_HPP
#define AGLER_TESTFNS_HPP

#include <optional>

#include "agler/types.hpp"

namespace agler {

/**
 * @brief Finitely supported positive-matrix measure with total mass I.
 *
 * points are unimodular; weights are PSD blocks summing to the identity.
 * The constrained family additionally satisfies the two real moment
 * constraints sum Re(t_r) W_r = 0 and sum Im(t_r) W_r = 0.
 */
struct QuantumMeasure {
    std::vector<Complex> points;
    std::vector<CMatrix> weights;

    int block_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.front().rows()); }
    int support_size() const { return static_cast<int>(points.size()); }
};

struct MeasureDefects {
    double mass;    // || sum W_r - I ||_max
    double psd;     // most negative weight eigenvalue, as a defect >= 0
    double moment;  // max over the two real moment constraints
};
MeasureDefects measure_defects(const QuantumMeasure& mu);

struct BarycentricOptions {
    long max_iters = 20000;
    double tol = 1e-9;
    long plateau_window = 500;
    double plateau_rel = 1e-12;
};

struct BarycentricResult {
    std::optional<QuantumMeasure> measure;
    double residual = 0.0;
    long iterations = 0;
};

/**
 * @brief Matrix barycentric weights for unimodular points, by Dykstra alternating
 * projections between the PSD product cone and the mass/moment affine subspace.
 *
 * Infeasible inputs are reported with the stalled residual as certificate.
 */
BarycentricResult solve_barycentric(const std::vector<Complex>& points, int block_dim,
                                    const BarycentricOptions& opts = {});

struct IndependenceReport {
    bool weakly_independent = false;
    int nullity = 0;
};

/**
 * @brief Triviality test for Hermitian perturbations T_r with range(T_r) inside
 * range(W_r) subject to the mass and moment constraints; certifies extreme points.
 */
IndependenceReport weak_independence_check(const QuantumMeasure& mu, double tol = 1e-9);

struct SampleOptions {
    int max_attempts = 500;
    BarycentricOptions solver;
};

QuantumMeasure sample_extreme_measure(int block_dim, unsigned long long seed,
                                      const SampleOptions& opts = {});

/** @brief The antipodal pair measure: points (1, -1), weights I/2 each. */
QuantumMeasure antipodal_measure(int block_dim);

CMatrix herglotz_eval(const QuantumMeasure& mu, Complex z);
CMatrix cayley_to_schur(const QuantumMeasure& mu, Complex z);

/** @brief Right-normalized evaluation S(z) S(1)^*, the boundary value taken radially. */
CMatrix normalize_at_one(const QuantumMeasure& mu, Complex z);

class TestFunction {
public:
    enum class Kind { disk, polydisk, constrained, tabulated };

    static TestFunction disk_coordinate();
    static TestFunction polydisk_coordinate(int index, int dim);
    static TestFunction constrained_extreme(QuantumMeasure mu);
    static TestFunction tabulated(std::vector<Point> nodes, std::vector<CMatrix> values);

    CMatrix eval(const Point& z) const;
    CMatrix eval(Complex z) const { return eval(make_point(z)); }

    Kind kind() const { return kind_; }
    int input_dim() const { return input_dim_; }
    int output_dim() const { return out_dim_; }
    int coordinate_index() const { return coord_; }
    const QuantumMeasure& measure() const { return mu_; }
    const std::vector<Point>& table_nodes() const { return tab_nodes_; }
    const std::vector<CMatrix>& table_values() const { return tab_values_; }

private:
    TestFunction() = default;
    Kind kind_ = Kind::disk;
    int input_dim_ = 1;
    int out_dim_ = 1;
    int coord_ = 0;
    QuantumMeasure mu_;
    std::vector<Point> tab_nodes_;
    std::vector<CMatrix> tab_values_;
};

struct FamilySpec {
    enum class Kind { disk, polydisk, constrained };
    Kind kind = Kind::disk;
    int domain_dim = 1;
    int block_dim = 1;
    int count = 4;  // constrained measures to sample
    unsigned long long seed = 1;
    bool include_antipodal = false;
};

std::vector<TestFunction> build_family(const FamilySpec& spec);
std::vector<CMatrix> eval_family(const std::vector<TestFunction>& family, const Point& z);

}

#endif
