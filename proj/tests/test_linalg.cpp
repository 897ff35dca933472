#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "agler/linalg.hpp"

using namespace agler;

namespace {

CMatrix m2(Complex a, Complex b, Complex c, Complex d) {
    CMatrix m(2, 2);
    m << a, b, c, d;
    return m;
}

CMatrix random_hermitian(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> g;
    CMatrix a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = Complex(g(rng), g(rng));
    return hermitian_part(a);
}

CMatrix random_psd(std::mt19937_64& rng, int dim, int inner) {
    std::normal_distribution<double> g;
    CMatrix f(dim, inner);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < inner; ++j) f(i, j) = Complex(g(rng), g(rng));
    return f * f.adjoint();
}

}  // namespace

TEST_CASE("psd_check on the identity") {
    PsdReport rep = psd_check(CMatrix::Identity(2, 2), 1e-9);
    CHECK(rep.is_psd);
    CHECK(rep.min_eigenvalue == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.witness.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("psd_check on a rank-one projection-like matrix") {
    PsdReport rep = psd_check(m2(1, 1, 1, 1), 1e-9);
    CHECK(rep.is_psd);
    CHECK(std::abs(rep.min_eigenvalue) < 1e-12);
}

TEST_CASE("psd_check flags the indefinite interpolation witness matrix") {
    CMatrix h = m2(0.5, 0.75, 0.75, 29.0 / 32.0);
    PsdReport rep = psd_check(h, 1e-9);
    CHECK_FALSE(rep.is_psd);
    CHECK(rep.min_eigenvalue < -1e-9);
    // det = -7/64
    double det = std::real(h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0));
    CHECK(det == doctest::Approx(-7.0 / 64.0).epsilon(1e-14));
    Complex q = (rep.witness.adjoint() * h * rep.witness)(0, 0);
    CHECK(std::real(q) == doctest::Approx(rep.min_eigenvalue).epsilon(1e-10));
}

TEST_CASE("psd_check rejects non-finite input") {
    CMatrix h = m2(1, 0, 0, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(psd_check(h, 1e-9), InvalidInput);
}

TEST_CASE("psd_check agrees with random Rayleigh sampling") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (int inst = 0; inst < 40; ++inst) {
        int dim = 2 + static_cast<int>(rng() % 11);
        CMatrix h = inst % 2 ? random_hermitian(rng, dim) : random_psd(rng, dim, dim);
        PsdReport rep = psd_check(h, 1e-9);
        for (int s = 0; s < 1000; ++s) {
            CVector v(dim);
            for (int i = 0; i < dim; ++i) v(i) = Complex(g(rng), g(rng));
            v.normalize();
            double q = std::real((v.adjoint() * h * v)(0, 0));
            CHECK(q >= rep.min_eigenvalue - 1e-9);
            if (rep.is_psd) CHECK(q >= -1e-9);
        }
    }
}

TEST_CASE("kolmogorov_factor reproduces a hand Cholesky") {
    FiniteKernel k;
    k.nodes = {make_point(0.0)};
    k.block_dim = 2;
    k.values = {m2(2, 1, 1, 1)};
    auto h = kolmogorov_factor(k, 1e-9);
    REQUIRE(h.size() == 1);
    CHECK(max_abs(h[0] * h[0].adjoint() - k.at(0, 0)) < 1e-10);
}

TEST_CASE("kolmogorov_factor of the zero kernel is empty") {
    std::vector<Point> nodes = {make_point(0.0), make_point(0.3), make_point(Complex(0, 0.5))};
    FiniteKernel k = constant_kernel(nodes, CMatrix::Zero(2, 2));
    auto h = kolmogorov_factor(k, 1e-9);
    REQUIRE(h.size() == 3);
    for (const auto& b : h) {
        CHECK(b.rows() == 2);
        CHECK(b.cols() == 0);
    }
}

TEST_CASE("kolmogorov_factor of the Szego kernel on {0, 1/2}") {
    FiniteKernel k = szego_kernel({make_point(0.0), make_point(0.5)});
    CHECK(std::real(k.at(1, 1)(0, 0)) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    auto h = kolmogorov_factor(k, 1e-9);
    CMatrix prod(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) prod(i, j) = (h[static_cast<size_t>(i)] * h[static_cast<size_t>(j)].adjoint())(0, 0);
    CHECK(max_abs(prod - k.assemble()) < 1e-10);
}

TEST_CASE("kolmogorov_factor refuses an indefinite gram") {
    CMatrix g = m2(1, 2, 2, 1);
    CHECK_THROWS_AS(kolmogorov_factor(g, 2, 1, 1e-9), NotPositiveKernel);
    try {
        kolmogorov_factor(g, 2, 1, 1e-9);
    } catch (const NotPositiveKernel& e) {
        CHECK(e.report.min_eigenvalue == doctest::Approx(-1.0).epsilon(1e-12));
    }
}

TEST_CASE("kolmogorov_factor round trip on random PSD block grams") {
    std::mt19937_64 rng(7);
    for (int inst = 0; inst < 100; ++inst) {
        int blocks = 1 + static_cast<int>(rng() % 4);
        int bd = 1 + static_cast<int>(rng() % 3);
        int dim = blocks * bd;
        CMatrix g = random_psd(rng, dim, 1 + static_cast<int>(rng() % dim));
        auto h = kolmogorov_factor(g, blocks, bd, 1e-9);
        for (int i = 0; i < blocks; ++i)
            for (int j = 0; j < blocks; ++j) {
                CMatrix rebuilt = h[static_cast<size_t>(i)] * h[static_cast<size_t>(j)].adjoint();
                CHECK(max_abs(rebuilt - g.block(i * bd, j * bd, bd, bd)) < 1e-8);
            }
    }
}

TEST_CASE("nearest_psd clips negative eigenvalues") {
    CMatrix d = CMatrix::Zero(2, 2);
    d(0, 0) = 1;
    d(1, 1) = -1;
    CMatrix p = nearest_psd(d);
    CHECK(max_abs(p - m2(1, 0, 0, 0)) < 1e-14);

    CMatrix sw = nearest_psd(m2(0, 1, 1, 0));
    CHECK(max_abs(sw - m2(0.5, 0.5, 0.5, 0.5)) < 1e-14);
}

TEST_CASE("nearest_psd fixes PSD matrices and is idempotent and non-expansive") {
    std::mt19937_64 rng(3);
    for (int inst = 0; inst < 100; ++inst) {
        int dim = 2 + static_cast<int>(rng() % 5);
        CMatrix psd = random_psd(rng, dim, dim);
        CHECK(max_abs(nearest_psd(psd) - psd) < 1e-12 * std::max(1.0, max_abs(psd)));

        CMatrix h = random_hermitian(rng, dim);
        CMatrix p = nearest_psd(h);
        // clipping is exact up to eigensolver round-off
        CHECK(psd_check(p, 1e-13 * std::max(1.0, max_abs(p))).is_psd);
        CHECK(max_abs(nearest_psd(p) - p) < 1e-12);
        // projection is the nearest PSD point in Frobenius norm
        CMatrix other = random_psd(rng, dim, dim);
        CHECK((h - other).norm() >= (h - p).norm() - 1e-12);
    }
}

TEST_CASE("unitary_completion with no constraints returns the identity") {
    CMatrix u = unitary_completion(CMatrix(2, 0), CMatrix(2, 0));
    CHECK(max_abs(u - CMatrix::Identity(2, 2)) < 1e-14);
}

TEST_CASE("unitary_completion maps e1 to e2") {
    CMatrix d = CMatrix::Zero(2, 1);
    d(0, 0) = 1;
    CMatrix r = CMatrix::Zero(2, 1);
    r(1, 0) = 1;
    CMatrix u = unitary_completion(d, r);
    CHECK((u * d.col(0) - r.col(0)).norm() < 1e-12);
    CHECK(max_abs(u.adjoint() * u - CMatrix::Identity(2, 2)) < 1e-10);
    CHECK(max_abs(u * u.adjoint() - CMatrix::Identity(2, 2)) < 1e-10);
}

TEST_CASE("unitary_completion on random gram-matched pairs") {
    std::mt19937_64 rng(19);
    std::normal_distribution<double> g;
    for (int inst = 0; inst < 50; ++inst) {
        int dim = 2 + static_cast<int>(rng() % 6);
        int k = static_cast<int>(rng() % (dim + 2));
        CMatrix d(dim, k);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < k; ++j) d(i, j) = Complex(g(rng), g(rng));
        // range vectors rotated by a random unitary keep the gram matrix
        CMatrix a(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) a(i, j) = Complex(g(rng), g(rng));
        Eigen::HouseholderQR<CMatrix> qr(a);
        CMatrix q = qr.householderQ();
        CMatrix r = q * d;
        CMatrix u = unitary_completion(d, r);
        CHECK(max_abs(u.adjoint() * u - CMatrix::Identity(dim, dim)) < 1e-10);
        CHECK(max_abs(u * u.adjoint() - CMatrix::Identity(dim, dim)) < 1e-10);
        for (int j = 0; j < k; ++j) CHECK((u * d.col(j) - r.col(j)).norm() < 1e-8);
    }
}

TEST_CASE("unitary_completion rejects gram mismatches and bad shapes") {
    CMatrix d = CMatrix::Identity(2, 1);
    CMatrix r = 2.0 * CMatrix::Identity(2, 1);
    CHECK_THROWS_AS(unitary_completion(d, r), NotIsometric);
    CHECK_THROWS_AS(unitary_completion(CMatrix(2, 1), CMatrix(3, 1)), InvalidInput);
}
