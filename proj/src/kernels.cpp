#include "agler/kernels.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <cmath>
#include <random>

namespace agler {

namespace {

void validate_problem(const InterpolationProblem& p) {
    if (p.size() == 0) throw InvalidInput("interpolation problem has no nodes");
    if (p.values.size() != p.nodes.size())
        throw InvalidInput("interpolation problem: values and nodes must align");
    for (int i = 0; i < p.size(); ++i) {
        const Point& z = p.nodes[static_cast<size_t>(i)];
        if (z.size() != p.domain_dim) throw InvalidInput("node has wrong dimension");
        for (Eigen::Index c = 0; c < z.size(); ++c)
            if (std::abs(z(c)) >= 1.0) throw InvalidInput("node must lie in the open unit polydisk");
        const CMatrix& v = p.values[static_cast<size_t>(i)];
        if (v.rows() != p.block_dim || v.cols() != p.block_dim)
            throw InvalidInput("value has wrong block dimension");
        if (!all_finite(v)) throw InvalidInput("value is not finite");
        for (int j = i + 1; j < p.size(); ++j)
            if ((p.nodes[static_cast<size_t>(j)] - z).cwiseAbs().maxCoeff() < 1e-12)
                throw InvalidInput("nodes must be distinct");
    }
}

// one exact Y slot for the scalar case, identity plus seeded draws otherwise;
// rows match the value dimension, columns the kernel block dimension
std::vector<std::vector<CMatrix>> y_directions(int n, int value_dim, int kernel_dim, int y_count,
                                               unsigned long long seed) {
    std::vector<std::vector<CMatrix>> ys;
    CMatrix eye = CMatrix::Identity(value_dim, kernel_dim);
    ys.emplace_back(static_cast<size_t>(n), eye);
    if (value_dim == 1 && kernel_dim == 1) return ys;  // Y cancels up to positive scale
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int t = 1; t < y_count; ++t) {
        std::vector<CMatrix> tuple;
        tuple.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            CMatrix y(value_dim, kernel_dim);
            for (Eigen::Index r = 0; r < y.rows(); ++r)
                for (Eigen::Index c = 0; c < y.cols(); ++c) y(r, c) = Complex(gauss(rng), gauss(rng));
            tuple.push_back(std::move(y));
        }
        ys.push_back(std::move(tuple));
    }
    return ys;
}

// k(i,j) = tr(Y_j^* (I - S_j^* S_i) Y_i K_ij)
CMatrix dual_form(const InterpolationProblem& p, const FiniteKernel& kernel,
                  const std::vector<CMatrix>& y) {
    const int n = p.size();
    const int N = p.block_dim;
    CMatrix id = CMatrix::Identity(N, N);
    CMatrix k(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            CMatrix b = id - p.values[static_cast<size_t>(j)].adjoint() * p.values[static_cast<size_t>(i)];
            k(i, j) = (y[static_cast<size_t>(j)].adjoint() * b * y[static_cast<size_t>(i)] *
                       kernel.at(i, j))
                          .trace();
        }
    return hermitian_part(k);
}

int next_prime(int p) {
    auto is_prime = [](int m) {
        if (m < 2) return false;
        for (int d = 2; d * d <= m; ++d)
            if (m % d == 0) return false;
        return true;
    };
    do {
        ++p;
    } while (!is_prime(p));
    return p;
}

CVector gaussians_to_unit(const std::vector<double>& g) {
    const int dim = static_cast<int>(g.size()) / 2;
    CVector v(dim);
    for (int k = 0; k < dim; ++k) v(k) = Complex(g[static_cast<size_t>(2 * k)], g[static_cast<size_t>(2 * k + 1)]);
    double nrm = v.norm();
    if (nrm < 1e-12) {
        v.setZero();
        v(0) = 1;
        return v;
    }
    return v / nrm;
}

}  // namespace

CMatrix dbr_pick_matrix(const InterpolationProblem& problem) {
    if (problem.tag != InterpolationProblem::ClassTag::classical_disk)
        throw InvalidInput("dbr_pick_matrix: class tag must be classical-disk");
    if (problem.domain_dim != 1) throw InvalidInput("dbr_pick_matrix: one complex variable only");
    validate_problem(problem);
    const int n = problem.size();
    const int N = problem.block_dim;
    for (const CMatrix& s : problem.values)
        if (spectral_norm(s) > 1.0 + 1e-10)
            throw InvalidInput("dbr_pick_matrix: values must be contractions");
    CMatrix id = CMatrix::Identity(N, N);
    CMatrix pick(n * N, n * N);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Complex zi = problem.nodes[static_cast<size_t>(i)](0);
            Complex zj = problem.nodes[static_cast<size_t>(j)](0);
            pick.block(i * N, j * N, N, N) =
                (id - problem.values[static_cast<size_t>(i)] *
                          problem.values[static_cast<size_t>(j)].adjoint()) /
                (1.0 - zi * std::conj(zj));
        }
    return hermitian_part(pick);
}

CMatrix constrained_generating_value(const CVector& alpha, const CVector& beta, Complex z,
                                     Complex w) {
    if (alpha.size() != beta.size() || alpha.size() == 0)
        throw InvalidInput("generating kernel: alpha and beta must be nonempty and aligned");
    if (std::abs(z) >= 1.0 || std::abs(w) >= 1.0)
        throw InvalidInput("generating kernel: points must lie in the open disk");
    CVector u = alpha + z * beta;
    CVector v = alpha + w * beta;
    const Eigen::Index N = alpha.size();
    Complex tail = z * z * std::conj(w) * std::conj(w) / (1.0 - z * std::conj(w));
    return u * v.adjoint() + tail * CMatrix::Identity(N, N);
}

FiniteKernel constrained_generating_kernel(const CVector& alpha, const CVector& beta,
                                           const std::vector<Point>& nodes) {
    FiniteKernel k;
    k.nodes = nodes;
    k.block_dim = static_cast<int>(alpha.size());
    const int n = static_cast<int>(nodes.size());
    k.values.reserve(static_cast<size_t>(n) * static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            k.values.push_back(constrained_generating_value(alpha, beta,
                                                            nodes[static_cast<size_t>(i)](0),
                                                            nodes[static_cast<size_t>(j)](0)));
    return k;
}

CMatrix admissibility_form(const FiniteKernel& k, const std::vector<CMatrix>& psi_at_nodes) {
    const int n = k.size();
    if (static_cast<int>(psi_at_nodes.size()) != n)
        throw InvalidInput("admissibility_form: one test-function value per node");
    if (n == 0) throw InvalidInput("admissibility_form: empty kernel");
    const Eigen::Index npsi = psi_at_nodes.front().rows();
    for (const CMatrix& p : psi_at_nodes)
        if (p.rows() != npsi || p.cols() != npsi)
            throw InvalidInput("admissibility_form: test-function values must be square and uniform");
    const int nk = k.block_dim;
    const Eigen::Index block = nk * npsi;
    CMatrix id = CMatrix::Identity(npsi, npsi);
    CMatrix m(n * block, n * block);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            CMatrix coupling = id - psi_at_nodes[static_cast<size_t>(j)].adjoint() *
                                        psi_at_nodes[static_cast<size_t>(i)];
            m.block(j * block, i * block, block, block) =
                Eigen::kroneckerProduct(k.at(i, j).transpose(), coupling);
        }
    return hermitian_part(m);
}

PsdReport admissibility_check(const FiniteKernel& k, const TestFunction& psi, double tol) {
    std::vector<CMatrix> values;
    values.reserve(k.nodes.size());
    for (const Point& z : k.nodes) {
        CMatrix v = psi.eval(z);
        if (spectral_norm(v) >= 1.0)
            throw TestAxiomViolation("admissibility_check: test function is not contractive at a node");
        values.push_back(std::move(v));
    }
    return psd_check(admissibility_form(k, values), tol);
}

PsdReport multiplier_norm_bound(const FiniteKernel& k, const std::vector<CMatrix>& s_at_nodes,
                                double m, double tol) {
    if (!(m > 0)) throw InvalidInput("multiplier_norm_bound: bound must be positive");
    const int n = k.size();
    if (static_cast<int>(s_at_nodes.size()) != n)
        throw InvalidInput("multiplier_norm_bound: one sampled value per node");
    const Eigen::Index ns = s_at_nodes.front().rows();
    const Eigen::Index block = k.block_dim * ns;
    CMatrix id = CMatrix::Identity(ns, ns);
    CMatrix form(n * block, n * block);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            CMatrix coupling = m * m * id - s_at_nodes[static_cast<size_t>(j)].adjoint() *
                                                s_at_nodes[static_cast<size_t>(i)];
            form.block(j * block, i * block, block, block) =
                Eigen::kroneckerProduct(k.at(i, j).transpose(), coupling);
        }
    return psd_check(hermitian_part(form), tol);
}

std::vector<SphereSample> sphere_samples(int block_dim, long count, unsigned long long seed) {
    if (block_dim < 1) throw InvalidInput("sphere_samples: block_dim must be positive");
    if (count < 0) throw InvalidInput("sphere_samples: count must be nonnegative");
    const int N = block_dim;
    std::vector<SphereSample> out;
    out.reserve(static_cast<size_t>(count));

    // canonical real axis-pair directions; the pi/4 point leads so the
    // hand-built witness direction is always sampled first
    std::vector<double> thetas;
    thetas.push_back(M_PI / 4.0);
    for (int k = 0; k < 24; ++k) {
        if (k == 3) continue;
        thetas.push_back(k * M_PI / 12.0);
    }
    for (double th : thetas) {
        for (int a = 0; a < N && static_cast<long>(out.size()) < count; ++a)
            for (int b = 0; b < N && static_cast<long>(out.size()) < count; ++b) {
                CVector alpha = CVector::Zero(N), beta = CVector::Zero(N);
                alpha(a) = std::cos(th);
                beta(b) = std::sin(th);
                out.push_back({alpha, beta});
            }
        if (static_cast<long>(out.size()) >= count) return out;
    }

    // low-discrepancy bulk: Kronecker sequence on root-prime frequencies pushed
    // through the gaussian map, then normalized
    std::vector<double> roots;
    int p = 1;
    for (int k = 0; k < 4 * N; ++k) {
        p = next_prime(p);
        roots.push_back(std::sqrt(static_cast<double>(p)));
    }
    long remaining = count - static_cast<long>(out.size());
    long lattice = (remaining + 1) / 2;
    for (long j = 1; j <= lattice; ++j) {
        std::vector<double> g(static_cast<size_t>(4 * N));
        for (int k = 0; k < 2 * N; ++k) {
            double u1 = std::fmod(static_cast<double>(j) * roots[static_cast<size_t>(2 * k)], 1.0);
            double u2 = std::fmod(static_cast<double>(j) * roots[static_cast<size_t>(2 * k + 1)], 1.0);
            u1 = std::max(u1, 1e-16);
            double r = std::sqrt(-2.0 * std::log(u1));
            g[static_cast<size_t>(2 * k)] = r * std::cos(2.0 * M_PI * u2);
            g[static_cast<size_t>(2 * k + 1)] = r * std::sin(2.0 * M_PI * u2);
        }
        CVector v = gaussians_to_unit(g);
        out.push_back({v.head(N), v.tail(N)});
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    while (static_cast<long>(out.size()) < count) {
        std::vector<double> g(static_cast<size_t>(4 * N));
        for (double& x : g) x = gauss(rng);
        CVector v = gaussians_to_unit(g);
        out.push_back({v.head(N), v.tail(N)});
    }
    return out;
}

CheckReport constrained_np_check(const InterpolationProblem& problem, long sphere_count,
                                 int y_count, unsigned long long seed, double tol) {
    if (problem.tag != InterpolationProblem::ClassTag::constrained_hardy)
        throw InvalidInput("constrained_np_check: class tag must be constrained");
    if (problem.domain_dim != 1)
        throw InvalidInput("constrained_np_check: one complex variable only");
    validate_problem(problem);
    const int n = problem.size();
    const int N = problem.block_dim;

    auto spheres = sphere_samples(N, sphere_count, seed);
    auto ys = y_directions(n, N, N, std::max(1, y_count), seed);

    CheckReport report;
    for (const SphereSample& s : spheres) {
        FiniteKernel kernel = constrained_generating_kernel(s.alpha, s.beta, problem.nodes);
        for (const auto& y : ys) {
            CMatrix k = dual_form(problem, kernel, y);
            PsdReport psd = psd_check(k, tol);
            ++report.samples_used;
            report.min_eig_seen = std::min(report.min_eig_seen, psd.min_eigenvalue);
            if (!psd.is_psd) {
                report.verdict = Verdict::infeasible;
                CheckWitness w;
                w.alpha = s.alpha;
                w.beta = s.beta;
                if (N > 1) w.y = y;
                w.pick = k;
                w.report = psd;
                report.witness = std::move(w);
                return report;
            }
        }
    }
    report.verdict = Verdict::feasible;
    return report;
}

CheckReport generic_dual_check(const InterpolationProblem& problem,
                               const std::vector<FiniteKernel>& family, int y_count, double tol) {
    validate_problem(problem);
    CheckReport report;
    if (family.empty()) {
        report.verdict = Verdict::feasible;
        report.vacuous = true;
        return report;
    }
    const int n = problem.size();
    for (size_t idx = 0; idx < family.size(); ++idx) {
        const FiniteKernel& kernel = family[idx];
        if (kernel.size() != n)
            throw InvalidInput("generic_dual_check: kernel is not restricted to the problem nodes");
        auto ys = y_directions(n, problem.block_dim, kernel.block_dim, std::max(1, y_count),
                               0x517cc1b727220a95ull + idx);
        for (const auto& y : ys) {
            CMatrix k = dual_form(problem, kernel, y);
            PsdReport psd = psd_check(k, tol);
            ++report.samples_used;
            report.min_eig_seen = std::min(report.min_eig_seen, psd.min_eigenvalue);
            if (!psd.is_psd) {
                report.verdict = Verdict::infeasible;
                CheckWitness w;
                if (!(problem.block_dim == 1 && kernel.block_dim == 1)) w.y = y;
                w.pick = k;
                w.report = psd;
                w.kernel_index = static_cast<int>(idx);
                report.witness = std::move(w);
                return report;
            }
        }
    }
    report.verdict = Verdict::feasible;
    return report;
}

}
