#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "agler/realize.hpp"

using namespace agler;

namespace {

Point point2(Complex a, Complex b) {
    Point p(2);
    p(0) = a;
    p(1) = b;
    return p;
}

// s(z) = z on two nodes, single channel with kernel K == 1
DecompositionProblem shift_problem() {
    DecompositionProblem p;
    for (Complex z : {Complex(0, 0), Complex(0.5, 0)}) {
        p.nodes.push_back(make_point(z));
        p.samples.push_back(CMatrix::Constant(1, 1, z));
    }
    p.family.push_back(TestFunction::disk_coordinate());
    p.multiplicity = 1;
    return p;
}

AglerDecomposition shift_decomposition() {
    AglerDecomposition d;
    d.grams.push_back(CMatrix::Ones(2, 2));
    d.factors.push_back({CMatrix::Ones(1, 1), CMatrix::Ones(1, 1)});
    d.multiplicities = {1};
    d.residual = 0.0;
    return d;
}

// s(z) = z^2 on three nodes; the forced kernel 1 + z conj(w) has the explicit
// rank-two factor [1, z]
DecompositionProblem squared_problem() {
    DecompositionProblem p;
    for (Complex z : {Complex(0, 0), Complex(0.5, 0), Complex(0, 0.5)}) {
        p.nodes.push_back(make_point(z));
        p.samples.push_back(CMatrix::Constant(1, 1, z * z));
    }
    p.family.push_back(TestFunction::disk_coordinate());
    p.multiplicity = 1;
    return p;
}

AglerDecomposition squared_decomposition(const DecompositionProblem& p) {
    AglerDecomposition d;
    const int n = p.size();
    CMatrix g(n, n);
    std::vector<CMatrix> slices;
    for (int i = 0; i < n; ++i) {
        Complex zi = p.nodes[static_cast<size_t>(i)](0);
        CMatrix h(1, 2);
        h << 1.0, zi;
        slices.push_back(h);
        for (int j = 0; j < n; ++j) {
            Complex zj = p.nodes[static_cast<size_t>(j)](0);
            g(i, j) = 1.0 + zi * std::conj(zj);
        }
    }
    d.grams.push_back(g);
    d.factors.push_back(std::move(slices));
    d.multiplicities = {2};
    d.residual = 0.0;
    return d;
}

DecompositionProblem product_problem() {
    DecompositionProblem p;
    for (Complex z1 : {Complex(0.4, 0), Complex(-0.3, 0)})
        for (Complex z2 : {Complex(0.35, 0), Complex(-0.2, 0)}) {
            p.nodes.push_back(point2(z1, z2));
            p.samples.push_back(CMatrix::Constant(1, 1, z1 * z2));
        }
    p.family.push_back(TestFunction::polydisk_coordinate(0, 2));
    p.family.push_back(TestFunction::polydisk_coordinate(1, 2));
    p.multiplicity = 1;
    return p;
}

Point interior_probe(int t, int dim) {
    Point z(dim);
    double radius = 0.12 + 0.75 * (t % 17) / 16.0;
    for (int c = 0; c < dim; ++c)
        z(c) = std::polar(radius, 0.7 * t + 2.1 * c + 0.3);
    return z;
}

// simultaneously diagonalized strict contractions commute exactly
std::vector<CMatrix> commuting_tuple(int count, int dim, unsigned long long seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    CMatrix raw(dim, dim);
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) raw(a, b) = Complex(gauss(rng), gauss(rng));
    Eigen::HouseholderQR<CMatrix> qr(raw);
    CMatrix q = qr.householderQ();
    std::uniform_real_distribution<double> mag(0.0, 0.9);
    std::uniform_real_distribution<double> arg(0.0, 2.0 * M_PI);
    std::vector<CMatrix> tuple;
    for (int k = 0; k < count; ++k) {
        CMatrix lam = CMatrix::Zero(dim, dim);
        for (int a = 0; a < dim; ++a) lam(a, a) = std::polar(mag(rng), arg(rng));
        tuple.push_back(q * lam * q.adjoint());
    }
    return tuple;
}

double kernel_identity_gap(const Colligation& col, const Point& z, const Point& w) {
    const Eigen::Index x = col.state_dim();
    CMatrix rz = rho_eval(col.sectors, z);
    CMatrix rw = rho_eval(col.sectors, w);
    CMatrix fz = (CMatrix::Identity(x, x) - rz * col.A).partialPivLu().solve(
        CMatrix::Identity(x, x));
    CMatrix fw = (CMatrix::Identity(x, x) - rw * col.A).partialPivLu().solve(
        CMatrix::Identity(x, x));
    CMatrix lhs = CMatrix::Identity(col.io_dim, col.io_dim) -
                  transfer_eval(col, z) * transfer_eval(col, w).adjoint();
    CMatrix rhs = col.C * fz * (CMatrix::Identity(x, x) - rz * rw.adjoint()) * fw.adjoint() *
                  col.C.adjoint();
    return max_abs(lhs - rhs);
}

}  // namespace

TEST_CASE("block-diagonal evaluation over sectors") {
    std::vector<Sector> single = {Sector{TestFunction::disk_coordinate(), 2}};
    Complex z(0.3, 0.4);
    CMatrix r = rho_eval(single, make_point(z));
    REQUIRE(r.rows() == 2);
    CHECK(std::abs(r(0, 0) - z) <= 1e-15);
    CHECK(std::abs(r(1, 1) - z) <= 1e-15);
    CHECK(std::abs(r(0, 1)) <= 1e-15);

    std::vector<Sector> pair = {Sector{TestFunction::polydisk_coordinate(0, 2), 1},
                                Sector{TestFunction::polydisk_coordinate(1, 2), 1}};
    CMatrix r2 = rho_eval(pair, point2(Complex(0.5, 0), Complex(0, 1.0 / 3)));
    REQUIRE(r2.rows() == 2);
    CHECK(std::abs(r2(0, 0) - Complex(0.5, 0)) <= 1e-15);
    CHECK(std::abs(r2(1, 1) - Complex(0, 1.0 / 3)) <= 1e-15);

    std::vector<Sector> constrained = {
        Sector{TestFunction::constrained_extreme(antipodal_measure(1)), 1}};
    CMatrix r3 = rho_eval(constrained, make_point(Complex(0.5, 0)));
    REQUIRE(r3.rows() == 1);
    CHECK(std::abs(r3(0, 0) - 0.25) <= 1e-4);

    CHECK_THROWS_AS(rho_eval(single, make_point(Complex(1.0, 0))), InvalidInput);
    CHECK_THROWS_AS(rho_eval(pair, make_point(Complex(0.5, 0))), InvalidInput);
}

TEST_CASE("canonical shift realization") {
    DecompositionProblem p = shift_problem();
    Colligation col = lurking_isometry(shift_decomposition(), p);
    REQUIRE(col.state_dim() == 1);
    CHECK(std::abs(col.A(0, 0)) <= 1e-10);
    CHECK(std::abs(col.B(0, 0) - 1.0) <= 1e-10);
    CHECK(std::abs(col.C(0, 0) - 1.0) <= 1e-10);
    CHECK(std::abs(col.D(0, 0)) <= 1e-10);
    for (int t = 0; t < 10; ++t) {
        Point z = interior_probe(t, 1);
        CHECK(std::abs(transfer_eval(col, z)(0, 0) - z(0)) <= 1e-10);
    }
}

TEST_CASE("squared coordinate from the explicit rank-two factor") {
    DecompositionProblem p = squared_problem();
    Colligation col = lurking_isometry(squared_decomposition(p), p);
    REQUIRE(col.state_dim() == 2);
    CHECK(std::abs(transfer_eval(col, make_point(Complex(0.5, 0)))(0, 0) - 0.25) <= 1e-10);
    for (int t = 0; t < 20; ++t) {
        Point z = interior_probe(t, 1);
        CHECK(std::abs(transfer_eval(col, z)(0, 0) - z(0) * z(0)) <= 1e-10);
    }
    TransferReport rep = verify_colligation(col);
    CHECK(rep.unitarity_defect <= 1e-12);
    CHECK(rep.max_node_error <= 1e-10);
    CHECK(rep.max_spectral_radius < 1.0);
    CHECK(rep.max_resolvent_cond < 1e6);
}

TEST_CASE("solved decomposition round trip") {
    DecompositionProblem p = squared_problem();
    p.multiplicity = 0;  // default copies
    DecompositionOutcome out = solve_decomposition(p);
    REQUIRE(out.status == SolveStatus::feasible);
    Colligation col = lurking_isometry(*out.decomposition, p);
    double allowed = 100.0 * out.decomposition->residual + 1e-8;
    for (size_t i = 0; i < p.nodes.size(); ++i)
        CHECK(max_abs(transfer_eval(col, p.nodes[i]) - p.samples[i]) <= allowed);
    for (int t = 0; t < 20; ++t) {
        Point z = interior_probe(t, 1);
        CHECK(std::abs(transfer_eval(col, z)(0, 0) - z(0) * z(0)) <= 1e-6);
    }
}

TEST_CASE("product transfer function on the bidisk") {
    DecompositionProblem p = product_problem();
    DecompositionOutcome out = solve_decomposition(p);
    REQUIRE(out.status == SolveStatus::feasible);
    Colligation col = lurking_isometry(*out.decomposition, p);
    REQUIRE(col.sectors.size() == 2);
    for (size_t i = 0; i < p.nodes.size(); ++i)
        CHECK(max_abs(transfer_eval(col, p.nodes[i]) - p.samples[i]) <= 1e-6);
    for (int t = 0; t < 20; ++t) {
        Point z = interior_probe(t, 2);
        CHECK(std::abs(transfer_eval(col, z)(0, 0) - z(0) * z(1)) <= 1e-6);
    }
    TransferReport rep = verify_colligation(col);
    CHECK(rep.unitarity_defect <= 1e-10);
}

TEST_CASE("constant unitary needs no state") {
    DecompositionProblem p;
    p.nodes.push_back(make_point(Complex(0.3, 0.1)));
    CMatrix u0(2, 2);
    u0 << 0, 1, 1, 0;
    p.samples.push_back(u0);
    Colligation col = lurking_isometry(AglerDecomposition{}, p);
    CHECK(col.state_dim() == 0);
    CHECK(max_abs(col.D - u0) <= 1e-12);
    CHECK(max_abs(transfer_eval(col, make_point(Complex(0.2, -0.4))) - u0) <= 1e-12);
    TransferReport rep = verify_colligation(col);
    CHECK(rep.unitarity_defect <= 1e-12);
}

TEST_CASE("corrupted factors are rejected") {
    DecompositionProblem p = squared_problem();
    AglerDecomposition d = squared_decomposition(p);
    for (CMatrix& h : d.factors[0]) h *= 1.2;
    CHECK_THROWS_AS(lurking_isometry(d, p), InconsistentDecomposition);

    AglerDecomposition wrong = squared_decomposition(p);
    wrong.grams[0] *= 3.0;  // residual gate fires first
    CHECK_THROWS_AS(lurking_isometry(wrong, p), InvalidInput);
}

TEST_CASE("transfer evaluation guards its domain") {
    DecompositionProblem p = shift_problem();
    Colligation col = lurking_isometry(shift_decomposition(), p);
    CHECK_THROWS_AS(transfer_eval(col, make_point(Complex(1.2, 0))), InvalidInput);
}

TEST_CASE("unitarity defect responds linearly to perturbation") {
    DecompositionProblem p = squared_problem();
    Colligation col = lurking_isometry(squared_decomposition(p), p);
    col.A(0, 0) += 1e-4;
    TransferReport rep = verify_colligation(col);
    CHECK(rep.unitarity_defect >= 1e-5);
    CHECK(rep.unitarity_defect <= 1e-2);
}

TEST_CASE("transfer functions are contractive on interior probes") {
    DecompositionProblem sq = squared_problem();
    Colligation a = lurking_isometry(squared_decomposition(sq), sq);
    DecompositionProblem pr = product_problem();
    DecompositionOutcome out = solve_decomposition(pr);
    REQUIRE(out.status == SolveStatus::feasible);
    Colligation b = lurking_isometry(*out.decomposition, pr);
    for (int t = 0; t < 100; ++t) {
        CHECK(spectral_norm(transfer_eval(a, interior_probe(t, 1))) <= 1.0 + 1e-9);
        CHECK(spectral_norm(transfer_eval(b, interior_probe(t, 2))) <= 1.0 + 1e-9);
    }
}

TEST_CASE("defect kernel identity on probe pairs") {
    DecompositionProblem sq = squared_problem();
    Colligation a = lurking_isometry(squared_decomposition(sq), sq);
    DecompositionProblem pr = product_problem();
    DecompositionOutcome out = solve_decomposition(pr);
    REQUIRE(out.status == SolveStatus::feasible);
    Colligation b = lurking_isometry(*out.decomposition, pr);
    for (int t = 0; t < 50; ++t) {
        CHECK(kernel_identity_gap(a, interior_probe(t, 1), interior_probe(t + 31, 1)) <= 1e-8);
        CHECK(kernel_identity_gap(b, interior_probe(t, 2), interior_probe(t + 31, 2)) <= 1e-8);
    }
}

TEST_CASE("polynomial evaluation and direct von Neumann bounds") {
    Polynomial sq{1, {{{2}, Complex(1, 0)}}};
    CMatrix t(2, 2);
    t << 0, 0.9, 0, 0;
    CHECK(von_neumann_test(sq, {t}) <= 1e-14);

    Polynomial id{1, {{{1}, Complex(1, 0)}}};
    CHECK(std::abs(von_neumann_test(id, {t}) - 0.9) <= 1e-12);

    Polynomial prod{2, {{{1, 1}, Complex(1, 0)}}};
    CMatrix proj(2, 2);
    proj << 0.7, 0, 0, 0;
    CHECK(std::abs(von_neumann_test(prod, {proj, proj}) - 0.49) <= 1e-12);

    CMatrix big = CMatrix::Identity(2, 2);
    CHECK_THROWS_AS(von_neumann_test(id, {big}), InvalidInput);
    CMatrix a(2, 2), b(2, 2);
    a << 0, 0.5, 0, 0;
    b << 0, 0, 0.5, 0;
    CHECK_THROWS_AS(von_neumann_test(prod, {a, b}), InvalidInput);
    CHECK_THROWS_AS(poly_eval(prod, {a}), InvalidInput);
}

TEST_CASE("operator substitution into realized transfer functions") {
    DecompositionProblem pr = product_problem();
    DecompositionOutcome out = solve_decomposition(pr);
    REQUIRE(out.status == SolveStatus::feasible);
    Colligation col = lurking_isometry(*out.decomposition, pr);
    for (int trial = 0; trial < 10; ++trial) {
        auto tuple = commuting_tuple(2, 2 + trial % 5, 900 + static_cast<unsigned>(trial));
        CHECK(von_neumann_test(col, tuple) <= 1.0 + 1e-8);
    }

    DecompositionProblem sq = squared_problem();
    Colligation single = lurking_isometry(squared_decomposition(sq), sq);
    CMatrix t(2, 2);
    t << 0, 0.9, 0, 0;
    CHECK(von_neumann_test(single, {t}) <= 1e-10);  // T^2 = 0
    CHECK_THROWS_AS(von_neumann_test(single, {t, t}), InvalidInput);
}

TEST_CASE("non-coordinate sectors refuse operator substitution") {
    DecompositionProblem p;
    for (Complex z : {Complex(0, 0), Complex(0.4, 0)}) {
        p.nodes.push_back(make_point(z));
        p.samples.push_back(CMatrix::Constant(1, 1, z * z));
    }
    p.family.push_back(TestFunction::constrained_extreme(antipodal_measure(1)));
    p.multiplicity = 1;
    DecompositionOutcome out = solve_decomposition(p);
    REQUIRE(out.status == SolveStatus::feasible);
    Colligation col = lurking_isometry(*out.decomposition, p);
    for (size_t i = 0; i < p.nodes.size(); ++i)
        CHECK(max_abs(transfer_eval(col, p.nodes[i]) - p.samples[i]) <= 1e-5);
    CMatrix t = CMatrix::Constant(1, 1, 0.5);
    CHECK_THROWS_AS(von_neumann_test(col, {t}), UnsupportedOperation);
}
