#include "agler/testfns.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <random>

#include "agler/linalg.hpp"

namespace agler {

namespace {

constexpr double kUnimodularTol = 1e-9;
constexpr double kBoundaryMargin = 1e-6;

void validate_points(const std::vector<Complex>& points) {
    for (size_t r = 0; r < points.size(); ++r) {
        if (std::abs(std::abs(points[r]) - 1.0) > kUnimodularTol)
            throw InvalidInput("support points must be unimodular");
        for (size_t s = r + 1; s < points.size(); ++s)
            if (std::abs(points[r] - points[s]) < 1e-9)
                throw InvalidInput("support points must be distinct");
    }
}

}  // namespace

MeasureDefects measure_defects(const QuantumMeasure& mu) {
    const int n = mu.support_size();
    const int N = mu.block_dim();
    CMatrix mass = CMatrix::Zero(N, N);
    CMatrix re = CMatrix::Zero(N, N);
    CMatrix im = CMatrix::Zero(N, N);
    double psd = 0.0;
    for (int r = 0; r < n; ++r) {
        const CMatrix& w = mu.weights[static_cast<size_t>(r)];
        mass += w;
        re += std::real(mu.points[static_cast<size_t>(r)]) * w;
        im += std::imag(mu.points[static_cast<size_t>(r)]) * w;
        PsdReport rep = psd_check(w, 0.0);
        psd = std::max(psd, std::max(0.0, -rep.min_eigenvalue));
    }
    return {max_abs(mass - CMatrix::Identity(N, N)), psd, std::max(max_abs(re), max_abs(im))};
}

BarycentricResult solve_barycentric(const std::vector<Complex>& points, int block_dim,
                                    const BarycentricOptions& opts) {
    const int n = static_cast<int>(points.size());
    if (n < 2) throw InvalidInput("solve_barycentric: need at least two points");
    if (block_dim < 1) throw InvalidInput("solve_barycentric: block_dim must be positive");
    validate_points(points);

    const int N = block_dim;
    Eigen::VectorXd cre(n), cim(n);
    for (int r = 0; r < n; ++r) {
        cre(r) = std::real(points[static_cast<size_t>(r)]);
        cim(r) = std::imag(points[static_cast<size_t>(r)]);
    }

    // rows of the affine constraint map: total mass, first moment (real, imaginary)
    Eigen::MatrixXd a(3, n);
    a.row(0).setOnes();
    a.row(1) = cre.transpose();
    a.row(2) = cim.transpose();
    Eigen::MatrixXd aat = a * a.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(aat);
    Eigen::VectorXd ev = es.eigenvalues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(3);
    double lmax = ev(2);
    for (int i = 0; i < 3; ++i)
        if (ev(i) > 1e-12 * std::max(1.0, lmax)) inv(i) = 1.0 / ev(i);
    Eigen::MatrixXd pinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();

    const CMatrix id = CMatrix::Identity(N, N);
    auto affine_project = [&](std::vector<CMatrix>& w) {
        CMatrix r1 = -id, r2 = CMatrix::Zero(N, N), r3 = CMatrix::Zero(N, N);
        for (int r = 0; r < n; ++r) {
            r1 += w[static_cast<size_t>(r)];
            r2 += cre(r) * w[static_cast<size_t>(r)];
            r3 += cim(r) * w[static_cast<size_t>(r)];
        }
        CMatrix u1 = pinv(0, 0) * r1 + pinv(0, 1) * r2 + pinv(0, 2) * r3;
        CMatrix u2 = pinv(1, 0) * r1 + pinv(1, 1) * r2 + pinv(1, 2) * r3;
        CMatrix u3 = pinv(2, 0) * r1 + pinv(2, 1) * r2 + pinv(2, 2) * r3;
        for (int r = 0; r < n; ++r) w[static_cast<size_t>(r)] -= u1 + cre(r) * u2 + cim(r) * u3;
    };
    auto violation = [&](const std::vector<CMatrix>& w) {
        CMatrix r1 = -id, r2 = CMatrix::Zero(N, N), r3 = CMatrix::Zero(N, N);
        for (int r = 0; r < n; ++r) {
            r1 += w[static_cast<size_t>(r)];
            r2 += cre(r) * w[static_cast<size_t>(r)];
            r3 += cim(r) * w[static_cast<size_t>(r)];
        }
        return std::max({max_abs(r1), max_abs(r2), max_abs(r3)});
    };

    std::vector<CMatrix> x(static_cast<size_t>(n), id / n);
    std::vector<CMatrix> p(static_cast<size_t>(n), CMatrix::Zero(N, N));

    BarycentricResult result;
    double res = violation(x);
    double best = res;
    long best_iter = 0;
    bool feasible = res <= opts.tol;
    long it = 0;
    while (!feasible && it < opts.max_iters) {
        ++it;
        std::vector<CMatrix> y = x;
        affine_project(y);
        for (int r = 0; r < n; ++r) {
            CMatrix z = y[static_cast<size_t>(r)] + p[static_cast<size_t>(r)];
            x[static_cast<size_t>(r)] = nearest_psd(z);
            p[static_cast<size_t>(r)] = z - x[static_cast<size_t>(r)];
        }
        res = violation(x);
        if (res <= opts.tol) {
            feasible = true;
            break;
        }
        if (res < best * (1.0 - opts.plateau_rel)) {
            best = res;
            best_iter = it;
        } else if (it - best_iter >= opts.plateau_window) {
            break;  // stalled above tol: infeasibility certificate is the residual
        }
    }
    result.iterations = it;
    result.residual = res;
    if (!feasible) return result;

    // a final affine pass makes the mass and moment identities exact when the
    // iterate is strictly inside the cone
    std::vector<CMatrix> polished = x;
    affine_project(polished);
    bool ok = true;
    for (const CMatrix& w : polished)
        if (psd_check(w, 1e-10).min_eigenvalue < -1e-10) ok = false;
    const std::vector<CMatrix>& final_w = ok ? polished : x;

    QuantumMeasure mu;
    mu.points = points;
    mu.weights.reserve(static_cast<size_t>(n));
    for (const CMatrix& w : final_w) mu.weights.push_back(hermitian_part(w));
    result.residual = violation(mu.weights);
    result.measure = std::move(mu);
    return result;
}

IndependenceReport weak_independence_check(const QuantumMeasure& mu, double tol) {
    const int n = mu.support_size();
    const int N = mu.block_dim();
    if (n == 0 || N == 0) throw InvalidInput("weak_independence_check: empty measure");

    // Hermitian unknowns live on the ranges of the weights
    std::vector<CMatrix> range_basis;
    std::vector<int> ranks;
    for (int r = 0; r < n; ++r) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(mu.weights[static_cast<size_t>(r)]));
        double lmax = es.eigenvalues().size() ? es.eigenvalues()(N - 1) : 0.0;
        double floor = tol * std::max(1.0, lmax);
        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < N; ++i)
            if (es.eigenvalues()(i) > floor) keep.push_back(i);
        CMatrix v(N, static_cast<Eigen::Index>(keep.size()));
        for (size_t c = 0; c < keep.size(); ++c) v.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(keep[c]);
        range_basis.push_back(v);
        ranks.push_back(static_cast<int>(keep.size()));
    }

    int unknowns = 0;
    for (int k : ranks) unknowns += k * k;
    if (unknowns == 0) return {true, 0};

    // real coordinates of a Hermitian N x N matrix: diagonal, then sqrt2-scaled
    // real and imaginary parts above the diagonal
    auto vec_h = [N](const CMatrix& m, Eigen::VectorXd& out, int offset) {
        int idx = offset;
        const double s = std::sqrt(2.0);
        for (int p = 0; p < N; ++p) out(idx++) = std::real(m(p, p));
        for (int p = 0; p < N; ++p)
            for (int q = p + 1; q < N; ++q) {
                out(idx++) = s * std::real(m(p, q));
                out(idx++) = s * std::imag(m(p, q));
            }
    };

    const int rows_per_eq = N * N;
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(3 * rows_per_eq, unknowns);
    int col = 0;
    for (int r = 0; r < n; ++r) {
        const int k = ranks[static_cast<size_t>(r)];
        const CMatrix& v = range_basis[static_cast<size_t>(r)];
        double tre = std::real(mu.points[static_cast<size_t>(r)]);
        double tim = std::imag(mu.points[static_cast<size_t>(r)]);
        // Hermitian basis of the k x k coefficient space
        std::vector<CMatrix> basis;
        for (int p = 0; p < k; ++p) {
            CMatrix e = CMatrix::Zero(k, k);
            e(p, p) = 1;
            basis.push_back(e);
        }
        const double s = 1.0 / std::sqrt(2.0);
        for (int p = 0; p < k; ++p)
            for (int q = p + 1; q < k; ++q) {
                CMatrix e = CMatrix::Zero(k, k);
                e(p, q) = s;
                e(q, p) = s;
                basis.push_back(e);
                CMatrix f = CMatrix::Zero(k, k);
                f(p, q) = Complex(0, s);
                f(q, p) = Complex(0, -s);
                basis.push_back(f);
            }
        for (const CMatrix& e : basis) {
            CMatrix t = v * e * v.adjoint();
            Eigen::VectorXd column = Eigen::VectorXd::Zero(3 * rows_per_eq);
            vec_h(t, column, 0);
            vec_h(tre * t, column, rows_per_eq);
            vec_h(tim * t, column, 2 * rows_per_eq);
            sys.col(col++) = column;
        }
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys);
    double smax = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    int rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > 1e-9 * std::max(1.0, smax)) ++rank;
    int nullity = unknowns - rank;
    return {nullity == 0, nullity};
}

QuantumMeasure antipodal_measure(int block_dim) {
    if (block_dim < 1) throw InvalidInput("antipodal_measure: block_dim must be positive");
    QuantumMeasure mu;
    mu.points = {Complex(1, 0), Complex(-1, 0)};
    CMatrix half = 0.5 * CMatrix::Identity(block_dim, block_dim);
    mu.weights = {half, half};
    return mu;
}

QuantumMeasure sample_extreme_measure(int block_dim, unsigned long long seed,
                                      const SampleOptions& opts) {
    if (block_dim < 1) throw InvalidInput("sample_extreme_measure: block_dim must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    std::uniform_int_distribution<int> count(2, 3 * block_dim);

    for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
        int n = count(rng);
        std::vector<Complex> points;
        points.reserve(static_cast<size_t>(n));
        for (int r = 0; r < n; ++r) {
            double th = angle(rng);
            points.push_back(Complex(std::cos(th), std::sin(th)));
        }
        bool distinct = true;
        for (size_t r = 0; r < points.size() && distinct; ++r)
            for (size_t s = r + 1; s < points.size(); ++s)
                if (std::abs(points[r] - points[s]) < 1e-3) {
                    distinct = false;
                    break;
                }
        if (!distinct) continue;
        BarycentricResult bary = solve_barycentric(points, block_dim, opts.solver);
        if (!bary.measure) continue;
        if (!weak_independence_check(*bary.measure).weakly_independent) continue;
        return *bary.measure;
    }
    throw SamplingFailure("sample_extreme_measure: no extreme candidate found; retry with a new seed");
}

CMatrix herglotz_eval(const QuantumMeasure& mu, Complex z) {
    const int N = mu.block_dim();
    if (N == 0) throw InvalidInput("herglotz_eval: empty measure");
    if (std::abs(z) >= 1.0) throw InvalidInput("herglotz_eval: point outside the open disk");
    CMatrix f = CMatrix::Zero(N, N);
    for (int r = 0; r < mu.support_size(); ++r)
        f += ((mu.points[static_cast<size_t>(r)] + z) / (mu.points[static_cast<size_t>(r)] - z)) *
             mu.weights[static_cast<size_t>(r)];
    return f;
}

CMatrix cayley_to_schur(const QuantumMeasure& mu, Complex z) {
    CMatrix f = herglotz_eval(mu, z);
    const int N = mu.block_dim();
    CMatrix id = CMatrix::Identity(N, N);
    return (f + id).partialPivLu().solve(f - id);
}

CMatrix normalize_at_one(const QuantumMeasure& mu, Complex z) {
    const double r = 1.0 - kBoundaryMargin;
    CMatrix s1 = cayley_to_schur(mu, Complex(r, 0));
    const int N = mu.block_dim();
    double defect = max_abs(s1 * s1.adjoint() - CMatrix::Identity(N, N));
    if (defect > 1e-4)
        throw NormalizationFailure("normalize_at_one: boundary value is not numerically unitary");
    return cayley_to_schur(mu, z) * s1.adjoint();
}

TestFunction TestFunction::disk_coordinate() {
    TestFunction f;
    f.kind_ = Kind::disk;
    f.input_dim_ = 1;
    f.out_dim_ = 1;
    return f;
}

TestFunction TestFunction::polydisk_coordinate(int index, int dim) {
    if (dim < 1 || index < 0 || index >= dim)
        throw InvalidInput("polydisk_coordinate: bad coordinate index");
    TestFunction f;
    f.kind_ = Kind::polydisk;
    f.input_dim_ = dim;
    f.out_dim_ = 1;
    f.coord_ = index;
    return f;
}

TestFunction TestFunction::constrained_extreme(QuantumMeasure mu) {
    if (mu.block_dim() < 1) throw InvalidInput("constrained_extreme: empty measure");
    TestFunction f;
    f.kind_ = Kind::constrained;
    f.input_dim_ = 1;
    f.out_dim_ = mu.block_dim();
    f.mu_ = std::move(mu);
    return f;
}

TestFunction TestFunction::tabulated(std::vector<Point> nodes, std::vector<CMatrix> values) {
    if (nodes.empty() || nodes.size() != values.size())
        throw InvalidInput("tabulated: nodes and values must align");
    TestFunction f;
    f.kind_ = Kind::tabulated;
    f.input_dim_ = static_cast<int>(nodes.front().size());
    f.out_dim_ = static_cast<int>(values.front().rows());
    f.tab_nodes_ = std::move(nodes);
    f.tab_values_ = std::move(values);
    return f;
}

CMatrix TestFunction::eval(const Point& z) const {
    if (z.size() != input_dim_) throw InvalidInput("test function: wrong point dimension");
    CMatrix value;
    switch (kind_) {
        case Kind::disk:
            value = CMatrix::Constant(1, 1, z(0));
            break;
        case Kind::polydisk:
            value = CMatrix::Constant(1, 1, z(coord_));
            break;
        case Kind::constrained:
            value = cayley_to_schur(mu_, z(0));
            break;
        case Kind::tabulated: {
            bool found = false;
            for (size_t i = 0; i < tab_nodes_.size(); ++i) {
                if (tab_nodes_[i].size() == z.size() && (tab_nodes_[i] - z).cwiseAbs().maxCoeff() <= 1e-12) {
                    value = tab_values_[i];
                    found = true;
                    break;
                }
            }
            if (!found) throw InvalidInput("tabulated test function: point not in table");
            break;
        }
    }
    bool interior = true;
    for (Eigen::Index c = 0; c < z.size(); ++c)
        if (std::abs(z(c)) > 1.0 - kBoundaryMargin) interior = false;
    if (interior && spectral_norm(value) >= 1.0)
        throw TestAxiomViolation("test function value is not strictly contractive");
    return value;
}

namespace {

// distinctness probe for sampled test functions: compare I - psi(a) psi(b)^*
// on a fixed interior grid
bool same_kernel_footprint(const TestFunction& f, const TestFunction& g) {
    if (f.output_dim() != g.output_dim()) return false;
    static const std::vector<Complex> probes = {
        Complex(0.4, 0.0),   Complex(-0.35, 0.25), Complex(0.15, -0.55),
        Complex(-0.6, -0.1), Complex(0.52, 0.33)};
    const int N = f.output_dim();
    CMatrix id = CMatrix::Identity(N, N);
    for (Complex a : probes)
        for (Complex b : probes) {
            CMatrix kf = id - f.eval(a) * f.eval(b).adjoint();
            CMatrix kg = id - g.eval(a) * g.eval(b).adjoint();
            if (max_abs(kf - kg) > 1e-8) return false;
        }
    return true;
}

}  // namespace

std::vector<TestFunction> build_family(const FamilySpec& spec) {
    std::vector<TestFunction> family;
    switch (spec.kind) {
        case FamilySpec::Kind::disk:
            family.push_back(TestFunction::disk_coordinate());
            break;
        case FamilySpec::Kind::polydisk:
            for (int k = 0; k < spec.domain_dim; ++k)
                family.push_back(TestFunction::polydisk_coordinate(k, spec.domain_dim));
            break;
        case FamilySpec::Kind::constrained: {
            if (spec.count < 1) throw InvalidInput("build_family: count must be positive");
            if (spec.include_antipodal)
                family.push_back(TestFunction::constrained_extreme(antipodal_measure(spec.block_dim)));
            unsigned long long idx = 0;
            const unsigned long long limit = static_cast<unsigned long long>(spec.count) * 50 + 100;
            while (static_cast<int>(family.size()) < spec.count && idx < limit) {
                QuantumMeasure mu;
                try {
                    mu = sample_extreme_measure(spec.block_dim, spec.seed + 1 + idx);
                } catch (const SamplingFailure&) {
                    ++idx;
                    continue;
                }
                ++idx;
                TestFunction cand = TestFunction::constrained_extreme(std::move(mu));
                bool duplicate = false;
                for (const TestFunction& f : family)
                    if (same_kernel_footprint(f, cand)) {
                        duplicate = true;
                        break;
                    }
                if (!duplicate) family.push_back(std::move(cand));
            }
            if (static_cast<int>(family.size()) < spec.count)
                throw SamplingFailure("build_family: could not collect enough distinct measures");
            break;
        }
    }
    return family;
}

std::vector<CMatrix> eval_family(const std::vector<TestFunction>& family, const Point& z) {
    std::vector<CMatrix> out;
    out.reserve(family.size());
    for (const TestFunction& f : family) out.push_back(f.eval(z));
    return out;
}

}
