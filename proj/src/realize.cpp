#include "agler/realize.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace agler {

namespace {

Eigen::Index sectors_state_dim(const std::vector<Sector>& sectors) {
    Eigen::Index x = 0;
    for (const auto& s : sectors)
        x += static_cast<Eigen::Index>(s.multiplicity) * s.psi.output_dim();
    return x;
}

void check_interior(const std::vector<Sector>& sectors, const Point& z) {
    for (const auto& s : sectors)
        if (z.size() != s.psi.input_dim())
            throw InvalidInput("rho_eval: point dimension does not match the sector domain");
    for (Eigen::Index c = 0; c < z.size(); ++c)
        if (!(std::abs(z(c)) < 1.0))
            throw InvalidInput("rho_eval: point outside the open domain");
}

double condition_estimate(const CMatrix& a) {
    Eigen::JacobiSVD<CMatrix> svd(a);
    double smin = svd.singularValues()(svd.singularValues().size() - 1);
    double smax = svd.singularValues()(0);
    if (!(smin > 0)) return std::numeric_limits<double>::infinity();
    return smax / smin;
}

// commuting strict contractions, all square of one size
void validate_tuple(const std::vector<CMatrix>& tuple, double comm_tol) {
    if (tuple.empty()) throw InvalidInput("von_neumann_test: empty operator tuple");
    const Eigen::Index h = tuple.front().rows();
    for (const CMatrix& t : tuple) {
        if (t.rows() != h || t.cols() != h || !all_finite(t))
            throw InvalidInput("von_neumann_test: tuple entries must be square of equal size");
        if (spectral_norm(t) > 1.0 - 1e-6)
            throw InvalidInput("von_neumann_test: tuple entries must be strict contractions");
    }
    for (size_t a = 0; a + 1 < tuple.size(); ++a)
        for (size_t b = a + 1; b < tuple.size(); ++b)
            if (spectral_norm(tuple[a] * tuple[b] - tuple[b] * tuple[a]) > comm_tol)
                throw InvalidInput("von_neumann_test: operator tuple does not commute");
}

}  // namespace

CMatrix Colligation::assemble() const {
    const Eigen::Index x = state_dim();
    const Eigen::Index io = io_dim;
    CMatrix u(x + io, x + io);
    u.topLeftCorner(x, x) = A;
    u.topRightCorner(x, io) = B;
    u.bottomLeftCorner(io, x) = C;
    u.bottomRightCorner(io, io) = D;
    return u;
}

CMatrix rho_eval(const std::vector<Sector>& sectors, const Point& z) {
    check_interior(sectors, z);
    const Eigen::Index x = sectors_state_dim(sectors);
    CMatrix rho = CMatrix::Zero(x, x);
    Eigen::Index at = 0;
    for (const auto& s : sectors) {
        CMatrix v = s.psi.eval(z);
        const Eigen::Index d = v.rows();
        for (int k = 0; k < s.multiplicity; ++k, at += d) rho.block(at, at, d, d) = v;
    }
    return rho;
}

Colligation lurking_isometry(const AglerDecomposition& d, const DecompositionProblem& problem) {
    const int n = problem.size();
    const int N = problem.block_dim();
    if (n < 1 || problem.samples.size() != problem.nodes.size())
        throw InvalidInput("lurking_isometry: samples and nodes must align");
    for (const CMatrix& s : problem.samples)
        if (s.rows() != N || s.cols() != N || !all_finite(s))
            throw InvalidInput("lurking_isometry: samples must be finite square blocks");

    const size_t channels = d.factors.size();
    if (d.multiplicities.size() != channels)
        throw InvalidInput("lurking_isometry: factors and multiplicities must align");
    if (channels > problem.family.size())
        throw InvalidInput("lurking_isometry: more factor channels than test functions");

    // reconstruction quality gates the whole construction
    double residual = d.residual;
    double gram_scale = 1.0;
    if (!d.grams.empty()) {
        residual = verify_decomposition(d, problem);
        if (residual > problem.tol)
            throw InvalidInput("lurking_isometry: decomposition residual exceeds tolerance");
        for (const CMatrix& g : d.grams) gram_scale = std::max(gram_scale, max_abs(g));
    }

    std::vector<Sector> sectors;
    for (size_t m = 0; m < channels; ++m) {
        if (d.factors[m].size() != static_cast<size_t>(n))
            throw InvalidInput("lurking_isometry: one factor slice per node expected");
        const TestFunction& psi = problem.family[m];
        const int rm = d.multiplicities[m];
        for (const CMatrix& h : d.factors[m])
            if (h.rows() != N || h.cols() != static_cast<Eigen::Index>(rm) * psi.output_dim())
                throw InvalidInput("lurking_isometry: factor slice shape mismatch");
        if (rm > 0) sectors.push_back(Sector{psi, rm});
    }

    const Eigen::Index x = sectors_state_dim(sectors);
    CMatrix dom(x + N, static_cast<Eigen::Index>(n) * N);
    CMatrix ran(x + N, static_cast<Eigen::Index>(n) * N);
    for (int i = 0; i < n; ++i) {
        CMatrix h(N, x);
        Eigen::Index at = 0;
        for (size_t m = 0; m < channels; ++m) {
            const CMatrix& slice = d.factors[m][static_cast<size_t>(i)];
            h.middleCols(at, slice.cols()) = slice;
            at += slice.cols();
        }
        CMatrix rho = rho_eval(sectors, problem.nodes[static_cast<size_t>(i)]);
        dom.block(0, i * N, x, N) = rho.adjoint() * h.adjoint();
        dom.block(x, i * N, N, N) = CMatrix::Identity(N, N);
        ran.block(0, i * N, x, N) = h.adjoint();
        ran.block(x, i * N, N, N) = problem.samples[static_cast<size_t>(i)].adjoint();
    }

    // the two column grams agree exactly when the factors reproduce the target;
    // the allowance covers the verified residual plus rank-truncation roundoff
    double mismatch = max_abs(hermitian_part(dom.adjoint() * dom) -
                              hermitian_part(ran.adjoint() * ran));
    double allowance = std::max(100.0 * residual, 50.0 * problem.psd_tol * gram_scale);
    allowance = std::max(allowance, 1e-10);
    if (mismatch > allowance)
        throw InconsistentDecomposition(
            "lurking_isometry: factor grams disagree with the sample data");

    CMatrix v = unitary_completion(dom, ran, std::max(10.0 * mismatch, 1e-8));

    Colligation col;
    col.A = v.topLeftCorner(x, x).adjoint();
    col.C = v.topRightCorner(x, N).adjoint();
    col.B = v.bottomLeftCorner(N, x).adjoint();
    col.D = v.bottomRightCorner(N, N).adjoint();
    col.sectors = std::move(sectors);
    col.io_dim = N;
    col.nodes = problem.nodes;
    col.samples = problem.samples;
    return col;
}

CMatrix transfer_eval(const Colligation& col, const Point& z) {
    CMatrix rho = rho_eval(col.sectors, z);
    if (!(spectral_norm(rho) < 1.0))
        throw InvalidInput("transfer_eval: sector evaluation is not a strict contraction");
    const Eigen::Index x = rho.rows();
    if (x == 0) return col.D;
    CMatrix f = CMatrix::Identity(x, x) - rho * col.A;
    if (condition_estimate(f) > 1e12)
        throw NumericalFailure("transfer_eval: resolvent is numerically singular");
    return col.D + col.C * f.partialPivLu().solve(rho * col.B);
}

TransferReport verify_colligation(const Colligation& col) {
    TransferReport rep;
    const Eigen::Index x = col.state_dim();
    const Eigen::Index side = x + col.io_dim;
    CMatrix u = col.assemble();
    rep.unitarity_defect =
        std::max(max_abs(u.adjoint() * u - CMatrix::Identity(side, side)),
                 max_abs(u * u.adjoint() - CMatrix::Identity(side, side)));

    for (size_t i = 0; i < col.nodes.size() && i < col.samples.size(); ++i) {
        double err = spectral_norm(col.samples[i] - transfer_eval(col, col.nodes[i]));
        rep.node_errors.push_back(err);
        rep.max_node_error = std::max(rep.max_node_error, err);
    }

    // interior probe sweep; tabulated sectors only admit their own nodes
    std::vector<Point> probes;
    bool tabulated = false;
    int dim = 1;
    for (const auto& s : col.sectors) {
        tabulated = tabulated || s.psi.kind() == TestFunction::Kind::tabulated;
        dim = std::max(dim, s.psi.input_dim());
    }
    if (tabulated) {
        probes = col.nodes;
    } else {
        const double golden = 0.618033988749895;
        for (int t = 0; t < 20; ++t) {
            Point z(dim);
            double radius = 0.1 + 0.8 * t / 19.0;
            for (int c = 0; c < dim; ++c) {
                double angle = 2.0 * M_PI * (golden * (t + 1) + static_cast<double>(c) / dim);
                z(c) = std::polar(radius, angle);
            }
            probes.push_back(std::move(z));
        }
    }
    for (const Point& z : probes) {
        CMatrix rho = rho_eval(col.sectors, z);
        if (rho.rows() == 0) continue;
        CMatrix ra = rho * col.A;
        Eigen::ComplexEigenSolver<CMatrix> es(ra, false);
        if (es.info() == Eigen::Success && es.eigenvalues().size())
            rep.max_spectral_radius =
                std::max(rep.max_spectral_radius, es.eigenvalues().cwiseAbs().maxCoeff());
        rep.max_resolvent_cond =
            std::max(rep.max_resolvent_cond,
                     condition_estimate(CMatrix::Identity(ra.rows(), ra.rows()) - ra));
    }
    return rep;
}

CMatrix poly_eval(const Polynomial& p, const std::vector<CMatrix>& tuple) {
    if (p.dim < 1 || static_cast<int>(tuple.size()) != p.dim)
        throw InvalidInput("poly_eval: tuple size must match the polynomial dimension");
    const Eigen::Index h = tuple.front().rows();
    for (const CMatrix& t : tuple)
        if (t.rows() != h || t.cols() != h || !all_finite(t))
            throw InvalidInput("poly_eval: tuple entries must be square of equal size");
    CMatrix acc = CMatrix::Zero(h, h);
    for (const auto& [exps, coeff] : p.terms) {
        if (static_cast<int>(exps.size()) != p.dim)
            throw InvalidInput("poly_eval: exponent list must match the polynomial dimension");
        CMatrix term = CMatrix::Identity(h, h);
        for (int k = 0; k < p.dim; ++k) {
            if (exps[static_cast<size_t>(k)] < 0)
                throw InvalidInput("poly_eval: negative exponent");
            for (int e = 0; e < exps[static_cast<size_t>(k)]; ++e)
                term = term * tuple[static_cast<size_t>(k)];
        }
        acc += coeff * term;
    }
    return acc;
}

double von_neumann_test(const Polynomial& p, const std::vector<CMatrix>& tuple, double tol) {
    validate_tuple(tuple, tol);
    return spectral_norm(poly_eval(p, tuple));
}

double von_neumann_test(const Colligation& col, const std::vector<CMatrix>& tuple, double tol) {
    int dim = 1;
    for (const auto& s : col.sectors) {
        if (s.psi.kind() != TestFunction::Kind::disk &&
            s.psi.kind() != TestFunction::Kind::polydisk)
            throw UnsupportedOperation(
                "von_neumann_test: operator substitution requires coordinate sectors");
        dim = std::max(dim, s.psi.input_dim());
    }
    if (static_cast<int>(tuple.size()) != dim)
        throw InvalidInput("von_neumann_test: tuple size must match the sector domain");
    validate_tuple(tuple, tol);

    const Eigen::Index h = tuple.front().rows();
    const Eigen::Index x = col.state_dim();
    const CMatrix ih = CMatrix::Identity(h, h);
    if (x == 0) {
        CMatrix s = CMatrix::Zero(col.io_dim * h, col.io_dim * h);
        for (int a = 0; a < col.io_dim; ++a)
            for (int b = 0; b < col.io_dim; ++b)
                s.block(a * h, b * h, h, h) = col.D(a, b) * ih;
        return spectral_norm(s);
    }

    // substitute T_k for the k-th coordinate in the block-diagonal representation
    CMatrix rho_t = CMatrix::Zero(x * h, x * h);
    Eigen::Index at = 0;
    for (const auto& s : col.sectors) {
        const CMatrix& t = tuple[static_cast<size_t>(s.psi.coordinate_index())];
        for (int k = 0; k < s.multiplicity; ++k, at += h) rho_t.block(at, at, h, h) = t;
    }
    auto expand = [&](const CMatrix& m) {
        CMatrix big(m.rows() * h, m.cols() * h);
        for (Eigen::Index a = 0; a < m.rows(); ++a)
            for (Eigen::Index b = 0; b < m.cols(); ++b) big.block(a * h, b * h, h, h) = m(a, b) * ih;
        return big;
    };
    CMatrix f = CMatrix::Identity(x * h, x * h) - rho_t * expand(col.A);
    CMatrix s_of_t = expand(col.D) + expand(col.C) * f.partialPivLu().solve(rho_t * expand(col.B));
    return spectral_norm(s_of_t);
}

}
