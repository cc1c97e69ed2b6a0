#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "adiaphase/linalg.hpp"
#include "adiaphase/model.hpp"
#include "adiaphase/time_grid.hpp"
#include "adiaphase/types.hpp"

namespace adiaphase {

enum class DerivativeMethod { finite_difference, perturbative };

// Biorthogonal eigensystems tracked continuously along the grid.
// Branch b keeps its identity across points (matched by maximal overlap),
// and the continuity gauge makes <phi_b(s_{k-1})|phi_b(s_k)> real positive
// while keeping ||phi_b|| = 1 and <phi*_b|phi_b> = 1.
struct EigenTrajectory {
    TimeGrid grid;
    std::vector<EigenSystem> systems;   // one per grid point, branch-ordered
    std::vector<CMatrix> hamiltonians;  // H(s_k)
    std::vector<CMatrix> h_derivatives; // Hdot(s_k)
    int followed_index = 0;
    DerivativeMethod derivative_method = DerivativeMethod::finite_difference;

    int dim() const { return systems.empty() ? 0 : systems.front().dim; }

    Complex eigenvalue(int k, int b) const { return systems[k].eigenvalues[b]; }
    const CVector& right(int k, int b) const { return systems[k].right[b]; }
    const CVector& left(int k, int b) const { return systems[k].left[b]; }
    Complex eigenvalue(int k) const { return eigenvalue(k, followed_index); }
    const CVector& right(int k) const { return right(k, followed_index); }
    const CVector& left(int k) const { return left(k, followed_index); }
};

// Follow all branches over the grid; `level` names the followed branch in the
// lexicographic order of the eigenvalues at s = 0.
inline EigenTrajectory track_eigensystem(
    const HamiltonianModel& model, const TimeGrid& grid, int level,
    DerivativeMethod method = DerivativeMethod::finite_difference) {
    if (level < 0 || level >= model.dim)
        throw Error("track_eigensystem: level out of range");
    EigenTrajectory tr;
    tr.grid = grid;
    tr.followed_index = level;
    tr.derivative_method = method;
    tr.systems.reserve(grid.size());
    tr.hamiltonians.reserve(grid.size());
    tr.h_derivatives.reserve(grid.size());
    const int dim = model.dim;
    for (int k = 0; k < grid.size(); ++k) {
        const double s = grid.point(k);
        CMatrix h = model.evaluate(s);
        EigenSystem es = biorthonormalize(eigensystem(h));
        if (k > 0) {
            const EigenSystem& prev = tr.systems.back();
            // greedy maximal-overlap assignment prev branch -> current column
            std::vector<int> perm(dim, -1);
            std::vector<bool> used(dim, false);
            for (int b = 0; b < dim; ++b) {
                double best = -1.0;
                int cbest = -1;
                for (int c = 0; c < dim; ++c) {
                    if (used[c]) continue;
                    const double ov = std::abs(inner(prev.right[b], es.right[c]));
                    if (ov > best) { best = ov; cbest = c; }
                }
                if (best < 0.5)
                    throw TrackingLost("track_eigensystem: branch " + std::to_string(b) +
                                       " overlap " + std::to_string(best) + " at s = " +
                                       std::to_string(s) + " (grid too coarse)");
                used[cbest] = true;
                perm[b] = cbest;
            }
            EigenSystem reordered;
            reordered.dim = dim;
            reordered.eigenvalues.resize(dim);
            reordered.right.resize(dim);
            reordered.left.resize(dim);
            for (int b = 0; b < dim; ++b) {
                const int c = perm[b];
                reordered.eigenvalues[b] = es.eigenvalues[c];
                CVector v = es.right[c];
                CVector l = es.left[c];
                const Complex ov = inner(prev.right[b], v);
                const Complex g = ov / std::abs(ov);  // unit modulus
                for (auto& z : v) z /= g;
                for (auto& z : l) z /= g;  // |g|=1 keeps <l|v> = 1
                reordered.right[b] = std::move(v);
                reordered.left[b] = std::move(l);
            }
            es = std::move(reordered);
        }
        tr.systems.push_back(std::move(es));
        tr.h_derivatives.push_back(model.derivative(s, grid.h()));
        tr.hamiltonians.push_back(std::move(h));
    }
    return tr;
}

enum class ProjectorKind { orthogonal, spectral, chi };

struct Projector {
    CMatrix matrix;
    ProjectorKind kind;
    int level = 0;
};

// P_o = |phi><phi| / <phi|phi>  (hermitian idempotent on the ray)
inline Projector orthogonal_projector(const EigenTrajectory& tr, int k, int level) {
    const CVector& v = tr.right(k, level);
    const double n2 = inner(v, v).real();
    if (!(n2 > 0.0)) throw Error("orthogonal_projector: zero eigenvector");
    return {(1.0 / n2) * outer(v, v), ProjectorKind::orthogonal, level};
}
inline Projector orthogonal_projector(const EigenTrajectory& tr, int k) {
    return orthogonal_projector(tr, k, tr.followed_index);
}

// P_s = |phi><phi*|  (idempotent, generally not hermitian)
inline Projector spectral_projector(const EigenTrajectory& tr, int k, int level) {
    return {outer(tr.right(k, level), tr.left(k, level)), ProjectorKind::spectral, level};
}
inline Projector spectral_projector(const EigenTrajectory& tr, int k) {
    return spectral_projector(tr, k, tr.followed_index);
}

// ------------------------------------------------------------------ contour

struct Contour {
    Complex center;
    double radius = 0.0;
    int n_nodes = 128;
};

// Default circle around eigenvalue `level`: half the distance to the
// nearest other eigenvalue.
inline Contour default_contour(const HamiltonianModel& model, double s, int level) {
    const auto eig = [&] {
        auto es = eigensystem(model.evaluate(s));
        return es.eigenvalues;
    }();
    double dist = 1e308;
    for (std::size_t j = 0; j < eig.size(); ++j)
        if (static_cast<int>(j) != level)
            dist = std::min(dist, std::abs(eig[j] - eig[level]));
    return {eig[level], 0.5 * dist, 128};
}

// Riesz projector by trapezoidal quadrature of the resolvent around the
// circle: P = (2 pi i)^-1 \oint (z - H)^-1 dz, positively oriented.
inline Projector riesz_projector_contour(const HamiltonianModel& model, double s,
                                         const Contour& contour) {
    const CMatrix h = model.evaluate(s);
    const int n = h.dim();
    const auto eig = eigensystem(h).eigenvalues;
    int enclosed = 0, level = -1;
    double nearest_outside = 1e308;
    for (std::size_t j = 0; j < eig.size(); ++j) {
        const double d = std::abs(eig[j] - contour.center);
        if (d < contour.radius) { ++enclosed; level = static_cast<int>(j); }
        else nearest_outside = std::min(nearest_outside, d);
    }
    if (enclosed != 1)
        throw ContourMisplaced("riesz_projector_contour: circle encloses " +
                               std::to_string(enclosed) + " eigenvalues");
    if (contour.radius > 0.5 * nearest_outside + 1e-12)
        throw ContourMisplaced(
            "riesz_projector_contour: radius exceeds half the distance to the "
            "nearest excluded eigenvalue");
    CMatrix acc(n);
    const CMatrix id = CMatrix::identity(n);
    for (int j = 0; j < contour.n_nodes; ++j) {
        const double theta = 2.0 * M_PI * j / contour.n_nodes;
        const Complex e = std::exp(IM * theta);
        const Complex z = contour.center + contour.radius * e;
        CMatrix shifted(n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) shifted(r, c) = z * id(r, c) - h(r, c);
        LuFactor lu(shifted);
        if (lu.singular() || lu.diag_condition() > 1e15)
            throw SingularResolvent("riesz_projector_contour: node z = (" +
                                    std::to_string(z.real()) + "," +
                                    std::to_string(z.imag()) + ") hits the spectrum");
        for (int c = 0; c < n; ++c) {
            CVector rhs(n, 0.0);
            rhs[c] = 1.0;
            const CVector col = lu.solve(rhs);
            for (int r = 0; r < n; ++r) acc(r, c) += e * col[r];
        }
    }
    acc = Complex(contour.radius / contour.n_nodes, 0.0) * acc;
    return {std::move(acc), ProjectorKind::spectral, level};
}

// -------------------------------------------------------------- derivatives

namespace detail {

inline CVector fd3(const CVector& a, const CVector& b, const CVector& c, double h,
                   double w0, double w1, double w2) {
    CVector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        r[i] = (w0 * a[i] + w1 * b[i] + w2 * c[i]) / (2 * h);
    return r;
}

template <typename Get>
auto fd_at(const EigenTrajectory& tr, int k, Get get) -> decltype(get(0)) {
    const int n = tr.grid.n_steps;
    const double h = tr.grid.h();
    if (k == 0) return (1.0 / (2 * h)) * (-3.0 * get(0) + 4.0 * get(1) - get(2));
    if (k == n) return (1.0 / (2 * h)) * (3.0 * get(n) - 4.0 * get(n - 1) + get(n - 2));
    return (1.0 / (2 * h)) * (get(k + 1) - get(k - 1));
}

}  // namespace detail

// d phi_a/ds at grid point k in the continuity gauge.
//  - finite_difference: second-order FD of the tracked vectors.
//  - perturbative: sum_{b!=a} phi_b <phi*_b|Hdot|phi_a>/(lam_a - lam_b) plus
//    the diagonal term that restores <phi_a|phi_a_dot> = 0 (the continuum
//    limit of the continuity gauge).
inline CVector derivative_eigvec(const EigenTrajectory& tr, int k, int level) {
    if (tr.derivative_method == DerivativeMethod::perturbative) {
        const CVector& v = tr.right(k, level);
        const CMatrix& hd = tr.h_derivatives[k];
        CVector u(v.size(), 0.0);
        for (int b = 0; b < tr.dim(); ++b) {
            if (b == level) continue;
            const Complex num = inner(tr.left(k, b), hd.apply(v));
            const Complex den = tr.eigenvalue(k, level) - tr.eigenvalue(k, b);
            axpy(num / den, tr.right(k, b), u);
        }
        const Complex alpha = -inner(v, u) / inner(v, v).real();
        axpy(alpha, v, u);
        return u;
    }
    const int n = tr.grid.n_steps;
    const double h = tr.grid.h();
    auto get = [&](int kk) -> const CVector& { return tr.right(kk, level); };
    if (k == 0) return detail::fd3(get(0), get(1), get(2), h, -3.0, 4.0, -1.0);
    if (k == n) return detail::fd3(get(n), get(n - 1), get(n - 2), h, 3.0, -4.0, 1.0);
    CVector r(get(k).size());
    const CVector &p = get(k + 1), &m = get(k - 1);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = (p[i] - m[i]) / (2 * h);
    return r;
}
inline CVector derivative_eigvec(const EigenTrajectory& tr, int k) {
    return derivative_eigvec(tr, k, tr.followed_index);
}

// d phi*_a/ds (always finite differences; the left vectors carry the gauge
// imposed by biorthonormality).
inline CVector derivative_left_eigvec(const EigenTrajectory& tr, int k, int level) {
    const int n = tr.grid.n_steps;
    const double h = tr.grid.h();
    auto get = [&](int kk) -> const CVector& { return tr.left(kk, level); };
    if (k == 0) return detail::fd3(get(0), get(1), get(2), h, -3.0, 4.0, -1.0);
    if (k == n) return detail::fd3(get(n), get(n - 1), get(n - 2), h, 3.0, -4.0, 1.0);
    CVector r(get(k).size());
    const CVector &p = get(k + 1), &m = get(k - 1);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = (p[i] - m[i]) / (2 * h);
    return r;
}
inline CVector derivative_left_eigvec(const EigenTrajectory& tr, int k) {
    return derivative_left_eigvec(tr, k, tr.followed_index);
}

// Central finite difference of the projector matrix sequence (gauge-free).
inline CMatrix derivative_projector(const EigenTrajectory& tr, int k,
                                    ProjectorKind kind, int level) {
    auto get = [&](int kk) {
        return kind == ProjectorKind::orthogonal
                   ? orthogonal_projector(tr, kk, level).matrix
                   : spectral_projector(tr, kk, level).matrix;
    };
    return detail::fd_at(tr, k, get);
}
inline CMatrix derivative_projector(const EigenTrajectory& tr, int k,
                                    ProjectorKind kind) {
    return derivative_projector(tr, k, kind, tr.followed_index);
}

}  // namespace adiaphase
