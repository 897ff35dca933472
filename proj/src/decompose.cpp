#include "agler/decompose.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <cmath>
#include <random>

namespace agler {

namespace {

struct Workspace {
    int n = 0, N = 0, r = 0, M = 0;
    std::vector<int> psi_dim;                 // per test function
    std::vector<std::vector<CMatrix>> delta;  // [m][i*n+j] = I - psi(z_i) psi(z_j)^*
    Eigen::MatrixXd gamma;                    // diagonal of L L^* per node pair
    CMatrix target;                           // assembled nN x nN

    Eigen::Index gram_side(int m) const {
        return static_cast<Eigen::Index>(n) * r * N * psi_dim[static_cast<size_t>(m)];
    }
};

Workspace make_workspace(const DecompositionProblem& p) {
    if (p.size() < 1) throw InvalidInput("decomposition: need at least one node");
    if (p.family.empty()) throw InvalidInput("decomposition: need at least one test function");
    if (p.samples.size() != p.nodes.size())
        throw InvalidInput("decomposition: samples and nodes must align");
    if (p.copies() < 1) throw InvalidInput("decomposition: multiplicity must be positive");

    Workspace ws;
    ws.n = p.size();
    ws.N = p.block_dim();
    ws.r = p.copies();
    ws.M = static_cast<int>(p.family.size());
    for (const CMatrix& s : p.samples)
        if (s.rows() != ws.N || s.cols() != ws.N || !all_finite(s))
            throw InvalidInput("decomposition: samples must be finite square blocks of equal size");

    ws.delta.resize(static_cast<size_t>(ws.M));
    for (int m = 0; m < ws.M; ++m) {
        std::vector<CMatrix> values;
        values.reserve(p.nodes.size());
        for (const Point& z : p.nodes) {
            CMatrix v = p.family[static_cast<size_t>(m)].eval(z);
            if (spectral_norm(v) >= 1.0)
                throw TestAxiomViolation("decomposition: test function not contractive at a node");
            values.push_back(std::move(v));
        }
        const Eigen::Index d = values.front().rows();
        ws.psi_dim.push_back(static_cast<int>(d));
        CMatrix id = CMatrix::Identity(d, d);
        ws.delta[static_cast<size_t>(m)].reserve(static_cast<size_t>(ws.n) * ws.n);
        for (int i = 0; i < ws.n; ++i)
            for (int j = 0; j < ws.n; ++j)
                ws.delta[static_cast<size_t>(m)].push_back(
                    id - values[static_cast<size_t>(i)] * values[static_cast<size_t>(j)].adjoint());
    }

    ws.gamma.resize(ws.n, ws.n);
    for (int i = 0; i < ws.n; ++i)
        for (int j = 0; j < ws.n; ++j) {
            double g = 0;
            for (int m = 0; m < ws.M; ++m)
                g += ws.delta[static_cast<size_t>(m)][static_cast<size_t>(i * ws.n + j)].squaredNorm();
            ws.gamma(i, j) = ws.r * g;
            if (!(ws.gamma(i, j) > 0))
                throw NumericalFailure("decomposition: degenerate coupling between nodes");
        }

    ws.target = target_kernel(p);
    return ws;
}

// L(W): contract each matched-copy block of the Grams against the couplings
CMatrix apply_forward(const Workspace& ws, const std::vector<CMatrix>& w) {
    const int n = ws.n, N = ws.N, r = ws.r;
    CMatrix lw = CMatrix::Zero(n * N, n * N);
    for (int m = 0; m < ws.M; ++m) {
        const int d = ws.psi_dim[static_cast<size_t>(m)];
        const int B = N * d;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const CMatrix& cpl = ws.delta[static_cast<size_t>(m)][static_cast<size_t>(i * n + j)];
                for (int k = 0; k < r; ++k) {
                    auto block = w[static_cast<size_t>(m)].block((i * r + k) * B, (j * r + k) * B, B, B);
                    for (int a = 0; a < N; ++a)
                        for (int b = 0; b < N; ++b)
                            lw(i * N + a, j * N + b) +=
                                (block.block(a * d, b * d, d, d).array() * cpl.array()).sum();
                }
            }
    }
    return lw;
}

double block_residual(const Workspace& ws, const CMatrix& lw) {
    double res = 0;
    for (int i = 0; i < ws.n; ++i)
        for (int j = 0; j < ws.n; ++j)
            res = std::max(res, max_abs(lw.block(i * ws.N, j * ws.N, ws.N, ws.N) -
                                        ws.target.block(i * ws.N, j * ws.N, ws.N, ws.N)));
    return res;
}

// exact projection onto {L(W) = T}: L L^* acts blockwise as multiplication by gamma
void affine_project(const Workspace& ws, std::vector<CMatrix>& w) {
    CMatrix resid = apply_forward(ws, w) - ws.target;
    const int n = ws.n, N = ws.N, r = ws.r;
    for (int m = 0; m < ws.M; ++m) {
        const int d = ws.psi_dim[static_cast<size_t>(m)];
        const int B = N * d;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                CMatrix scaled = resid.block(i * N, j * N, N, N) / ws.gamma(i, j);
                CMatrix corr = Eigen::kroneckerProduct(
                    scaled, ws.delta[static_cast<size_t>(m)][static_cast<size_t>(i * n + j)].conjugate());
                for (int k = 0; k < r; ++k)
                    w[static_cast<size_t>(m)].block((i * r + k) * B, (j * r + k) * B, B, B) -= corr;
            }
    }
}

double min_gram_eigenvalue(const std::vector<CMatrix>& w) {
    double worst = 0;
    for (const CMatrix& g : w) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(g), Eigen::EigenvaluesOnly);
        if (es.eigenvalues().size()) worst = std::min(worst, es.eigenvalues()(0));
    }
    return worst;
}

// apply_forward restricted to a single test function channel
CMatrix forward_channel(const Workspace& ws, int m, const CMatrix& g) {
    const int n = ws.n, N = ws.N, r = ws.r;
    const int d = ws.psi_dim[static_cast<size_t>(m)];
    const int B = N * d;
    CMatrix lw = CMatrix::Zero(n * N, n * N);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const CMatrix& cpl = ws.delta[static_cast<size_t>(m)][static_cast<size_t>(i * n + j)];
            for (int k = 0; k < r; ++k) {
                auto block = g.block((i * r + k) * B, (j * r + k) * B, B, B);
                for (int a = 0; a < N; ++a)
                    for (int b = 0; b < N; ++b)
                        lw(i * N + a, j * N + b) +=
                            (block.block(a * d, b * d, d, d).array() * cpl.array()).sum();
            }
        }
    return lw;
}

// Alternating projections can crawl when the affine set meets the cone
// tangentially; once progress stalls near feasibility, switch to a damped
// Gauss-Newton descent on low-rank factors G = F F^*. Positivity then holds
// by construction, so the finish is accepted purely on the residual reaching
// the tolerance; anything else falls back to the calling loop unchanged.
std::optional<std::vector<CMatrix>> low_rank_finish(const Workspace& ws,
                                                    const std::vector<CMatrix>& w, double tol) {
    const Eigen::Index out_dim = static_cast<Eigen::Index>(ws.n) * ws.N;
    std::vector<Eigen::Index> est(static_cast<size_t>(ws.M), 0);
    std::vector<Eigen::Index> full(static_cast<size_t>(ws.M), 0);
    std::vector<Eigen::SelfAdjointEigenSolver<CMatrix>> eig;
    eig.reserve(static_cast<size_t>(ws.M));
    for (int m = 0; m < ws.M; ++m) {
        eig.emplace_back(hermitian_part(w[static_cast<size_t>(m)]));
        const auto& lam = eig.back().eigenvalues();
        double top = lam.size() ? lam(lam.size() - 1) : 0.0;
        Eigen::Index cnt = 0;
        for (Eigen::Index a = 0; a < lam.size(); ++a)
            if (lam(a) > 1e-3 * std::max(top, 1e-12)) ++cnt;
        est[static_cast<size_t>(m)] = std::max<Eigen::Index>(cnt, 1);
        full[static_cast<size_t>(m)] = ws.gram_side(m);
    }

    for (const auto& ranks : {est, full}) {
        Eigen::Index unknowns = 0;
        for (int m = 0; m < ws.M; ++m) unknowns += 2 * ws.gram_side(m) * ranks[static_cast<size_t>(m)];
        if (unknowns == 0 || unknowns > 400) continue;
        if (&ranks == &full && full == est) continue;

        std::vector<CMatrix> f;
        for (int m = 0; m < ws.M; ++m) {
            const auto& lam = eig[static_cast<size_t>(m)].eigenvalues();
            const CMatrix& vec = eig[static_cast<size_t>(m)].eigenvectors();
            const Eigen::Index rk = ranks[static_cast<size_t>(m)];
            CMatrix fm(ws.gram_side(m), rk);
            for (Eigen::Index c = 0; c < rk; ++c) {
                Eigen::Index src = lam.size() - 1 - c;
                fm.col(c) = vec.col(src) * std::sqrt(std::max(lam(src), 0.0));
            }
            f.push_back(std::move(fm));
        }

        auto residual_of = [&](const std::vector<CMatrix>& fac) {
            CMatrix lw = CMatrix::Zero(out_dim, out_dim);
            for (int m = 0; m < ws.M; ++m)
                lw += forward_channel(
                    ws, m, fac[static_cast<size_t>(m)] * fac[static_cast<size_t>(m)].adjoint());
            return CMatrix(lw - ws.target);
        };

        CMatrix resid = residual_of(f);
        double lam_damp = 1e-8;
        for (int pass = 0; pass < 120; ++pass) {
            if (resid.norm() <= 1e-14 * std::max(1.0, ws.target.norm())) break;
            Eigen::MatrixXd jac(2 * out_dim * out_dim, unknowns);
            Eigen::Index col = 0;
            for (int m = 0; m < ws.M; ++m) {
                const CMatrix& fm = f[static_cast<size_t>(m)];
                for (Eigen::Index a = 0; a < fm.rows(); ++a)
                    for (Eigen::Index b = 0; b < fm.cols(); ++b)
                        for (int part = 0; part < 2; ++part, ++col) {
                            CMatrix dg = CMatrix::Zero(fm.rows(), fm.rows());
                            Complex unit = part ? Complex(0, 1) : Complex(1, 0);
                            dg.row(a) += unit * fm.col(b).adjoint();
                            dg.col(a) += std::conj(unit) * fm.col(b);
                            CMatrix dr = forward_channel(ws, m, dg);
                            for (Eigen::Index q = 0; q < out_dim * out_dim; ++q) {
                                jac(q, col) = dr(q % out_dim, q / out_dim).real();
                                jac(out_dim * out_dim + q, col) = dr(q % out_dim, q / out_dim).imag();
                            }
                        }
            }
            Eigen::VectorXd rv(2 * out_dim * out_dim);
            for (Eigen::Index q = 0; q < out_dim * out_dim; ++q) {
                rv(q) = resid(q % out_dim, q / out_dim).real();
                rv(out_dim * out_dim + q) = resid(q % out_dim, q / out_dim).imag();
            }
            Eigen::MatrixXd jtj = jac.transpose() * jac;
            Eigen::VectorXd jtr = jac.transpose() * rv;
            bool stepped = false;
            while (lam_damp <= 1e8) {
                Eigen::MatrixXd lhs = jtj;
                lhs.diagonal().array() += lam_damp;
                Eigen::VectorXd step = lhs.ldlt().solve(-jtr);
                std::vector<CMatrix> trial = f;
                Eigen::Index pos = 0;
                for (int m = 0; m < ws.M; ++m) {
                    CMatrix& fm = trial[static_cast<size_t>(m)];
                    for (Eigen::Index a = 0; a < fm.rows(); ++a)
                        for (Eigen::Index b = 0; b < fm.cols(); ++b, pos += 2)
                            fm(a, b) += Complex(step(pos), step(pos + 1));
                }
                CMatrix trial_resid = residual_of(trial);
                if (trial_resid.norm() < resid.norm()) {
                    f = std::move(trial);
                    resid = std::move(trial_resid);
                    lam_damp = std::max(lam_damp * 0.3, 1e-12);
                    stepped = true;
                    break;
                }
                lam_damp *= 10;
            }
            if (!stepped) break;
        }

        std::vector<CMatrix> polished;
        for (int m = 0; m < ws.M; ++m)
            polished.push_back(hermitian_part(f[static_cast<size_t>(m)] *
                                              f[static_cast<size_t>(m)].adjoint()));
        if (block_residual(ws, apply_forward(ws, polished)) <= tol) return polished;
    }
    return std::nullopt;
}

std::optional<SeparationEvidence> build_evidence(const Workspace& ws,
                                                const std::vector<CMatrix>& w, double res,
                                                long iterations) {
    const int n = ws.n, N = ws.N;
    CMatrix resid = apply_forward(ws, w) - ws.target;
    CMatrix functional(n * N, n * N);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            functional.block(i * N, j * N, N, N) = resid.block(i * N, j * N, N, N) / ws.gamma(i, j);
    functional = hermitian_part(functional);
    double fn = functional.norm();
    if (fn < 1e-14) return std::nullopt;
    functional /= fn;

    double margin = -std::real((ws.target.array() * functional.conjugate().array()).sum());
    if (!(margin > 0)) return std::nullopt;

    // sampled cone generators: rank-style kernels V_i Delta_ij V_j^*
    std::mt19937_64 rng(424242);
    std::normal_distribution<double> gauss;
    double floor = 0;
    const int draws = 1000;
    for (int t = 0; t < draws; ++t) {
        int m = t % ws.M;
        const int d = ws.psi_dim[static_cast<size_t>(m)];
        std::vector<CMatrix> v;
        v.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            CMatrix vi(N, d);
            for (Eigen::Index a = 0; a < vi.rows(); ++a)
                for (Eigen::Index c = 0; c < vi.cols(); ++c) vi(a, c) = Complex(gauss(rng), gauss(rng));
            v.push_back(std::move(vi));
        }
        CMatrix gen(n * N, n * N);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                gen.block(i * N, j * N, N, N) =
                    v[static_cast<size_t>(i)] *
                    ws.delta[static_cast<size_t>(m)][static_cast<size_t>(i * n + j)] *
                    v[static_cast<size_t>(j)].adjoint();
        double gn = gen.norm();
        if (gn < 1e-14) continue;
        double pairing = std::real((gen.array() * functional.conjugate().array()).sum()) / gn;
        floor = std::min(floor, pairing);
    }
    if (floor < -1e-8) return std::nullopt;

    SeparationEvidence ev;
    ev.functional = std::move(functional);
    ev.nodes = n;
    ev.block_dim = N;
    ev.margin = margin;
    ev.generator_floor = floor;
    ev.residual = res;
    ev.iterations = iterations;
    return ev;
}

void extract_factors(const Workspace& ws, const DecompositionProblem& p, AglerDecomposition& out) {
    const int n = ws.n, N = ws.N, r = ws.r;
    out.factors.clear();
    out.multiplicities.clear();
    for (int m = 0; m < ws.M; ++m) {
        const int d = ws.psi_dim[static_cast<size_t>(m)];
        const int B = N * d;
        std::vector<std::vector<CMatrix>> per_copy;  // [k][i] slices, B x rank_k
        int total = 0;
        for (int k = 0; k < r; ++k) {
            CMatrix sub(n * B, n * B);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    sub.block(i * B, j * B, B, B) =
                        out.grams[static_cast<size_t>(m)].block((i * r + k) * B, (j * r + k) * B, B, B);
            per_copy.push_back(kolmogorov_factor(hermitian_part(sub), n, B, p.psd_tol));
            total += static_cast<int>(per_copy.back().front().cols());
        }
        std::vector<CMatrix> at_node;
        at_node.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            CMatrix h = CMatrix::Zero(N, static_cast<Eigen::Index>(total) * d);
            Eigen::Index col = 0;
            for (int k = 0; k < r; ++k) {
                const CMatrix& g = per_copy[static_cast<size_t>(k)][static_cast<size_t>(i)];
                for (Eigen::Index c = 0; c < g.cols(); ++c, ++col)
                    for (int a = 0; a < N; ++a)
                        for (int q = 0; q < d; ++q) h(a, col * d + q) = g(a * d + q, c);
            }
            at_node.push_back(std::move(h));
        }
        out.factors.push_back(std::move(at_node));
        out.multiplicities.push_back(total);
    }
}

}  // namespace

CMatrix target_kernel(const DecompositionProblem& problem) {
    if (problem.samples.empty() || problem.samples.size() != problem.nodes.size())
        throw InvalidInput("target_kernel: samples and nodes must align");
    const int n = problem.size();
    const int N = problem.block_dim();
    CMatrix id = CMatrix::Identity(N, N);
    CMatrix t(n * N, n * N);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            t.block(i * N, j * N, N, N) =
                id - problem.samples[static_cast<size_t>(i)] *
                         problem.samples[static_cast<size_t>(j)].adjoint();
    return t;
}

DecompositionOutcome solve_decomposition(const DecompositionProblem& problem) {
    Workspace ws = make_workspace(problem);
    std::vector<CMatrix> x, p;
    for (int m = 0; m < ws.M; ++m) {
        x.push_back(CMatrix::Zero(ws.gram_side(m), ws.gram_side(m)));
        p.push_back(CMatrix::Zero(ws.gram_side(m), ws.gram_side(m)));
    }

    DecompositionOutcome out;
    double res = block_residual(ws, apply_forward(ws, x));
    out.residual_trace.push_back(res);
    bool feasible = res <= problem.tol;
    bool plateau = false;
    double best = res;
    long best_iter = 0;
    long it = 0;
    const double finish_gate = 1e-2 * std::max(1.0, max_abs(ws.target));
    long next_finish = 1000;
    long finish_step = 1000;
    auto try_finish = [&]() {
        if (res > finish_gate) return false;
        auto polished = low_rank_finish(ws, x, problem.tol);
        if (!polished) return false;
        x = std::move(*polished);
        res = block_residual(ws, apply_forward(ws, x));
        out.residual_trace.push_back(res);
        feasible = true;
        return true;
    };
    while (!feasible && it < problem.max_iters) {
        ++it;
        std::vector<CMatrix> y = x;
        affine_project(ws, y);
        // the affine iterate satisfies the linear identity exactly, so it is a
        // finished solution as soon as it drifts into the cone; this sidesteps
        // the slow alternating-projection tail on touching sets
        if (min_gram_eigenvalue(y) >= -problem.psd_tol) {
            x = std::move(y);
            res = block_residual(ws, apply_forward(ws, x));
            out.residual_trace.push_back(res);
            feasible = true;
            break;
        }
        for (int m = 0; m < ws.M; ++m) {
            CMatrix z = y[static_cast<size_t>(m)] + p[static_cast<size_t>(m)];
            x[static_cast<size_t>(m)] = nearest_psd(z);
            p[static_cast<size_t>(m)] = z - x[static_cast<size_t>(m)];
        }
        res = block_residual(ws, apply_forward(ws, x));
        out.residual_trace.push_back(res);
        if (res <= problem.tol) {
            feasible = true;
            break;
        }
        if (it >= next_finish) {
            if (try_finish()) break;
            finish_step *= 2;
            next_finish = it + finish_step;
        }
        if (res < best * (1.0 - problem.plateau_rel)) {
            best = res;
            best_iter = it;
        } else if (it - best_iter >= problem.plateau_window) {
            if (try_finish()) break;
            plateau = true;
            break;
        }
    }
    out.iterations = it;

    if (feasible) {
        // a final affine pass sharpens the reconstruction when it stays inside
        // the cone up to the PSD tolerance
        std::vector<CMatrix> polished = x;
        affine_project(ws, polished);
        if (min_gram_eigenvalue(polished) >= -problem.psd_tol) x = std::move(polished);
        for (CMatrix& g : x) g = hermitian_part(g);
        res = block_residual(ws, apply_forward(ws, x));

        AglerDecomposition d;
        d.grams = std::move(x);
        d.residual = res;
        d.iterations = it;
        extract_factors(ws, problem, d);
        out.status = SolveStatus::feasible;
        out.residual = res;
        out.decomposition = std::move(d);
        return out;
    }

    out.residual = res;
    if (plateau) {
        auto ev = build_evidence(ws, x, res, it);
        if (ev) {
            out.status = SolveStatus::infeasible;
            out.evidence = std::move(ev);
            return out;
        }
    }
    out.status = SolveStatus::undecided;
    return out;
}

double verify_decomposition(const AglerDecomposition& d, const DecompositionProblem& problem) {
    Workspace ws = make_workspace(problem);
    if (static_cast<int>(d.grams.size()) != ws.M)
        throw InvalidInput("verify_decomposition: one Gram per test function expected");
    for (int m = 0; m < ws.M; ++m) {
        const CMatrix& g = d.grams[static_cast<size_t>(m)];
        if (g.rows() != ws.gram_side(m) || g.cols() != ws.gram_side(m))
            throw InvalidInput("verify_decomposition: Gram shape mismatch");
        PsdReport rep = psd_check(g, problem.psd_tol);
        if (!rep.is_psd)
            throw NotPositiveKernel("verify_decomposition: Gram variable is not PSD", rep);
    }
    return block_residual(ws, apply_forward(ws, d.grams));
}

std::vector<FiniteKernel> recovered_kernels(const AglerDecomposition& d,
                                            const DecompositionProblem& problem) {
    Workspace ws = make_workspace(problem);
    if (static_cast<int>(d.grams.size()) != ws.M)
        throw InvalidInput("recovered_kernels: one Gram per test function expected");
    const int n = ws.n, N = ws.N, r = ws.r;
    std::vector<FiniteKernel> out;
    for (int m = 0; m < ws.M; ++m) {
        const CMatrix& g = d.grams[static_cast<size_t>(m)];
        if (g.rows() != ws.gram_side(m))
            throw InvalidInput("recovered_kernels: Gram shape mismatch");
        const int d_psi = ws.psi_dim[static_cast<size_t>(m)];
        const int B = N * d_psi;
        FiniteKernel k;
        k.nodes = problem.nodes;
        k.block_dim = B;
        k.values.reserve(static_cast<size_t>(n) * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                CMatrix sum = CMatrix::Zero(B, B);
                for (int kk = 0; kk < r; ++kk)
                    sum += g.block((i * r + kk) * B, (j * r + kk) * B, B, B);
                k.values.push_back(std::move(sum));
            }
        out.push_back(std::move(k));
    }
    return out;
}

}
