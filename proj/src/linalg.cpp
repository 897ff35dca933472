#include "agler/linalg.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace agler {

double max_abs(const CMatrix& a) {
    if (a.size() == 0) return 0.0;
    return a.cwiseAbs().maxCoeff();
}

bool all_finite(const CMatrix& a) {
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (!std::isfinite(a(i, j).real()) || !std::isfinite(a(i, j).imag())) return false;
    return true;
}

double spectral_norm(const CMatrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<CMatrix> svd(a);
    return svd.singularValues()(0);
}

CMatrix FiniteKernel::assemble() const {
    const int n = size();
    const int N = block_dim;
    CMatrix g = CMatrix::Zero(static_cast<Eigen::Index>(n) * N, static_cast<Eigen::Index>(n) * N);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g.block(i * N, j * N, N, N) = at(i, j);
    return g;
}

double FiniteKernel::hermitian_defect() const {
    double d = 0.0;
    for (int i = 0; i < size(); ++i)
        for (int j = 0; j < size(); ++j) d = std::max(d, max_abs(at(i, j) - at(j, i).adjoint()));
    return d;
}

FiniteKernel szego_kernel(const std::vector<Point>& nodes) {
    FiniteKernel k;
    k.nodes = nodes;
    k.block_dim = 1;
    const int n = static_cast<int>(nodes.size());
    k.values.resize(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            Complex v = 1.0;
            for (Eigen::Index c = 0; c < nodes[i].size(); ++c)
                v /= (1.0 - nodes[i](c) * std::conj(nodes[j](c)));
            k.at(i, j) = CMatrix::Constant(1, 1, v);
        }
    return k;
}

FiniteKernel constant_kernel(const std::vector<Point>& nodes, const CMatrix& value) {
    FiniteKernel k;
    k.nodes = nodes;
    k.block_dim = static_cast<int>(value.rows());
    const int n = static_cast<int>(nodes.size());
    k.values.assign(static_cast<size_t>(n) * n, value);
    return k;
}

CMatrix hermitian_part(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

PsdReport psd_check(const CMatrix& h, double tol) {
    if (tol < 0) throw InvalidInput("psd_check: tol must be nonnegative");
    if (!all_finite(h)) throw InvalidInput("psd_check: non-finite entries");
    if (h.rows() != h.cols()) throw InvalidInput("psd_check: matrix not square");
    PsdReport rep;
    if (h.rows() == 0) return rep;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(h));
    if (es.info() != Eigen::Success) throw NumericalFailure("psd_check: eigensolver failed");
    rep.min_eigenvalue = es.eigenvalues()(0);
    rep.witness = es.eigenvectors().col(0);
    rep.is_psd = rep.min_eigenvalue >= -tol;
    return rep;
}

CMatrix nearest_psd(const CMatrix& h) {
    if (h.size() == 0) return h;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(h));
    if (es.info() != Eigen::Success) throw NumericalFailure("nearest_psd: eigensolver failed");
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

std::vector<CMatrix> kolmogorov_factor(const CMatrix& gram, int blocks, int block_dim, double tol) {
    if (blocks <= 0 || block_dim < 0) throw InvalidInput("kolmogorov_factor: bad block shape");
    if (gram.rows() != static_cast<Eigen::Index>(blocks) * block_dim || gram.rows() != gram.cols())
        throw InvalidInput("kolmogorov_factor: gram shape mismatch");
    PsdReport rep = psd_check(gram, tol);
    if (!rep.is_psd) throw NotPositiveKernel("kolmogorov_factor: gram is not PSD", rep);

    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(gram));
    const Eigen::VectorXd& ev = es.eigenvalues();
    const double lmax = ev.size() ? ev(ev.size() - 1) : 0.0;
    const double floor = tol * std::max(1.0, lmax);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
        if (ev(i) > floor) keep.push_back(i);

    CMatrix f(gram.rows(), static_cast<Eigen::Index>(keep.size()));
    for (size_t c = 0; c < keep.size(); ++c)
        f.col(static_cast<Eigen::Index>(c)) =
            es.eigenvectors().col(keep[c]) * std::sqrt(ev(keep[c]));

    std::vector<CMatrix> out(static_cast<size_t>(blocks));
    for (int i = 0; i < blocks; ++i) out[static_cast<size_t>(i)] = f.middleRows(i * block_dim, block_dim);
    return out;
}

std::vector<CMatrix> kolmogorov_factor(const FiniteKernel& k, double tol) {
    return kolmogorov_factor(k.assemble(), k.size(), k.block_dim, tol);
}

namespace {

// Pivoted orthogonalization in the metric given by a PSD Gram matrix g.
// Returns coefficient vectors c with c_i^* g c_j = delta_ij; span is preserved.
std::vector<CVector> gram_orthogonalize(const CMatrix& g, double drop_tol) {
    const Eigen::Index k = g.rows();
    std::vector<CVector> coeff;
    std::vector<CVector> residual;
    residual.reserve(static_cast<size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j) residual.push_back(CVector::Unit(k, j));
    std::vector<bool> used(static_cast<size_t>(k), false);

    auto gnorm2 = [&](const CVector& c) { return std::real(c.dot(g * c)); };

    for (Eigen::Index step = 0; step < k; ++step) {
        Eigen::Index pivot = -1;
        double best = -1.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (used[static_cast<size_t>(j)]) continue;
            double nrm2 = gnorm2(residual[static_cast<size_t>(j)]);
            if (nrm2 > best + 1e-15 * std::max(1.0, best)) {
                best = nrm2;
                pivot = j;
            }
        }
        if (pivot < 0 || best <= drop_tol) break;
        CVector q = residual[static_cast<size_t>(pivot)] / std::sqrt(best);
        // a second pass keeps the basis orthonormal when g is ill conditioned
        for (const CVector& p : coeff) q -= p * (p.dot(g * q));
        double nq = std::sqrt(std::max(gnorm2(q), 0.0));
        if (nq <= std::sqrt(drop_tol)) {
            used[static_cast<size_t>(pivot)] = true;
            continue;
        }
        q /= nq;
        coeff.push_back(q);
        used[static_cast<size_t>(pivot)] = true;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (used[static_cast<size_t>(j)]) continue;
            residual[static_cast<size_t>(j)] -= q * (q.dot(g * residual[static_cast<size_t>(j)]));
        }
    }
    return coeff;
}

// Extend an orthonormal column set to a full basis by pivoting over standard
// basis candidates: largest remaining norm first, ties by lowest index.
CMatrix complete_basis(const CMatrix& q) {
    const Eigen::Index dim = q.rows();
    CMatrix full(dim, dim);
    Eigen::Index have = q.cols();
    full.leftCols(have) = q;
    while (have < dim) {
        Eigen::Index pivot = -1;
        double best = -1.0;
        CVector bestres;
        for (Eigen::Index cand = 0; cand < dim; ++cand) {
            CVector e = CVector::Unit(dim, cand);
            CVector res = e - full.leftCols(have) * (full.leftCols(have).adjoint() * e);
            double nrm = res.norm();
            if (nrm > best + 1e-15) {
                best = nrm;
                pivot = cand;
                bestres = res;
            }
        }
        if (pivot < 0 || best < 1e-12) throw NumericalFailure("unitary_completion: basis completion broke down");
        bestres -= full.leftCols(have) * (full.leftCols(have).adjoint() * bestres);
        full.col(have) = bestres / bestres.norm();
        ++have;
    }
    return full;
}

}  // namespace

CMatrix unitary_completion(const CMatrix& domain_cols, const CMatrix& range_cols, double tol) {
    if (domain_cols.rows() != range_cols.rows() || domain_cols.cols() != range_cols.cols())
        throw InvalidInput("unitary_completion: dimension mismatch");
    if (!all_finite(domain_cols) || !all_finite(range_cols))
        throw InvalidInput("unitary_completion: non-finite entries");
    const Eigen::Index dim = domain_cols.rows();

    CMatrix gd = hermitian_part(domain_cols.adjoint() * domain_cols);
    CMatrix gr = hermitian_part(range_cols.adjoint() * range_cols);
    double mismatch = max_abs(gd - gr);
    if (mismatch > tol)
        throw NotIsometric("unitary_completion: gram matrices disagree", mismatch);

    double scale = std::max(1.0, max_abs(gd));
    std::vector<CVector> coeff = gram_orthogonalize(gd, 1e-12 * scale);

    CMatrix qd(dim, static_cast<Eigen::Index>(coeff.size()));
    CMatrix qr(dim, static_cast<Eigen::Index>(coeff.size()));
    for (size_t c = 0; c < coeff.size(); ++c) {
        qd.col(static_cast<Eigen::Index>(c)) = domain_cols * coeff[c];
        qr.col(static_cast<Eigen::Index>(c)) = range_cols * coeff[c];
    }

    CMatrix u = complete_basis(qr) * complete_basis(qd).adjoint();

    double udef = std::max(max_abs(u.adjoint() * u - CMatrix::Identity(dim, dim)),
                           max_abs(u * u.adjoint() - CMatrix::Identity(dim, dim)));
    if (udef > 1e-10) throw NumericalFailure("unitary_completion: completion is not unitary");
    return u;
}

}
