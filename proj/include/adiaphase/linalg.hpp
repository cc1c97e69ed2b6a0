#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "adiaphase/types.hpp"

namespace adiaphase {

// LU factorization with partial pivoting, kept around for repeated solves
// against the same matrix (resolvent quadrature, inverse iteration).
class LuFactor {
public:
    explicit LuFactor(CMatrix a, double pivot_floor_rel = 1e-14)
        : lu_(std::move(a)), perm_(lu_.dim()) {
        const int n = lu_.dim();
        std::iota(perm_.begin(), perm_.end(), 0);
        double scale = 0.0;
        for (auto z : lu_.entries()) scale = std::max(scale, std::abs(z));
        pivot_floor_ = pivot_floor_rel * std::max(scale, 1e-300);
        for (int k = 0; k < n; ++k) {
            int p = k;
            double best = std::abs(lu_(k, k));
            for (int i = k + 1; i < n; ++i) {
                const double m = std::abs(lu_(i, k));
                if (m > best) { best = m; p = i; }
            }
            if (best < pivot_floor_) {
                singular_ = true;
                // keep factoring with a perturbed pivot so callers that opted
                // in (inverse iteration) can still solve
                lu_(p, k) = (std::abs(lu_(p, k)) == 0.0)
                                ? Complex(pivot_floor_, 0.0)
                                : lu_(p, k) / std::abs(lu_(p, k)) * pivot_floor_;
            }
            if (p != k) {
                std::swap(perm_[p], perm_[k]);
                for (int j = 0; j < n; ++j) std::swap(lu_(p, j), lu_(k, j));
            }
            const Complex piv = lu_(k, k);
            for (int i = k + 1; i < n; ++i) {
                const Complex f = lu_(i, k) / piv;
                lu_(i, k) = f;
                for (int j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
            }
        }
    }

    bool singular() const { return singular_; }

    // Crude condition proxy from the U diagonal.
    double diag_condition() const {
        double mx = 0.0, mn = 1e308;
        for (int i = 0; i < lu_.dim(); ++i) {
            const double d = std::abs(lu_(i, i));
            mx = std::max(mx, d);
            mn = std::min(mn, d);
        }
        return mn > 0.0 ? mx / mn : 1e308;
    }

    CVector solve(const CVector& b) const {
        const int n = lu_.dim();
        CVector x(n);
        for (int i = 0; i < n; ++i) x[i] = b[perm_[i]];
        for (int i = 1; i < n; ++i)
            for (int j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
        for (int i = n - 1; i >= 0; --i) {
            for (int j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
            x[i] /= lu_(i, i);
        }
        return x;
    }

private:
    CMatrix lu_;
    std::vector<int> perm_;
    double pivot_floor_ = 0.0;
    bool singular_ = false;
};

// Solve A x = b. Throws SingularMatrix when a pivot falls under the floor.
inline CVector solve_linear(const CMatrix& a, const CVector& b) {
    LuFactor lu(a);
    if (lu.singular()) throw SingularMatrix("solve_linear: pivot below threshold");
    return lu.solve(b);
}

// Biorthogonal eigensystem: H phi_b = lam_b phi_b, H^dag phi*_b = conj(lam_b) phi*_b,
// <phi*_a|phi_b> = delta_ab after biorthonormalize().
struct EigenSystem {
    std::vector<Complex> eigenvalues;
    std::vector<CVector> right;
    std::vector<CVector> left;
    int dim = 0;
};

namespace detail {

// Householder reduction to upper Hessenberg form (in place).
inline void hessenberg(CMatrix& h) {
    const int n = h.dim();
    for (int k = 0; k < n - 2; ++k) {
        CVector x(n - k - 1);
        for (int i = k + 1; i < n; ++i) x[i - k - 1] = h(i, k);
        const double xn = norm(x);
        if (xn == 0.0) continue;
        Complex alpha = (std::abs(x[0]) == 0.0) ? Complex(-xn, 0.0)
                                                : -x[0] / std::abs(x[0]) * xn;
        CVector v = x;
        v[0] -= alpha;
        const double vn = norm(v);
        if (vn == 0.0) continue;
        for (auto& z : v) z /= vn;
        // H <- (I - 2 v v^dag) H (I - 2 v v^dag) acting on rows/cols k+1..n-1
        for (int j = 0; j < n; ++j) {
            Complex s = 0.0;
            for (int i = k + 1; i < n; ++i) s += std::conj(v[i - k - 1]) * h(i, j);
            s *= 2.0;
            for (int i = k + 1; i < n; ++i) h(i, j) -= s * v[i - k - 1];
        }
        for (int i = 0; i < n; ++i) {
            Complex s = 0.0;
            for (int j = k + 1; j < n; ++j) s += h(i, j) * v[j - k - 1];
            s *= 2.0;
            for (int j = k + 1; j < n; ++j) h(i, j) -= s * std::conj(v[j - k - 1]);
        }
    }
}

// Eigenvalue of the 2x2 [[a,b],[c,d]] closest to d (Wilkinson shift).
inline Complex wilkinson_shift(Complex a, Complex b, Complex c, Complex d) {
    const Complex tr = a + d;
    const Complex det = a * d - b * c;
    const Complex disc = std::sqrt(tr * tr - 4.0 * det);
    const Complex l1 = 0.5 * (tr + disc);
    const Complex l2 = 0.5 * (tr - disc);
    return (std::abs(l1 - d) < std::abs(l2 - d)) ? l1 : l2;
}

// Eigenvalues of a complex matrix via Hessenberg + shifted QR (Givens).
inline std::vector<Complex> qr_eigenvalues(CMatrix h, int max_sweeps = 60) {
    const int n = h.dim();
    hessenberg(h);
    std::vector<Complex> eig(n);
    double hnorm = frobenius(h);
    if (hnorm == 0.0) hnorm = 1.0;
    int m = n - 1;
    int iter = 0;
    while (m >= 0) {
        // deflation scan
        int l = m;
        while (l > 0 && std::abs(h(l, l - 1)) >
                   1e-16 * (std::abs(h(l - 1, l - 1)) + std::abs(h(l, l)) + 1e-300))
            --l;
        if (l == m) {
            eig[m] = h(m, m);
            --m;
            iter = 0;
            continue;
        }
        if (++iter > max_sweeps * n)
            throw NoConvergence("eigensystem: QR iteration cap exceeded");
        Complex mu = wilkinson_shift(h(m - 1, m - 1), h(m - 1, m), h(m, m - 1), h(m, m));
        if (iter % 12 == 0) mu += Complex(std::abs(h(m, m - 1)), 0.0);  // stagnation kick
        for (int i = l; i <= m; ++i) h(i, i) -= mu;
        // QR by Givens on the Hessenberg band, then RQ
        std::vector<Complex> cs(m), sn(m);
        for (int k = l; k < m; ++k) {
            const Complex a = h(k, k), b = h(k + 1, k);
            const double r = std::hypot(std::abs(a), std::abs(b));
            if (r == 0.0) { cs[k] = 1.0; sn[k] = 0.0; continue; }
            const Complex c = std::conj(a) / r, s = std::conj(b) / r;
            cs[k] = c; sn[k] = s;
            for (int j = k; j <= m; ++j) {
                const Complex t1 = h(k, j), t2 = h(k + 1, j);
                h(k, j) = c * t1 + s * t2;
                h(k + 1, j) = -std::conj(s) * t1 + std::conj(c) * t2;
            }
        }
        for (int k = l; k < m; ++k) {
            const Complex c = cs[k], s = sn[k];
            const int top = l;
            for (int i = top; i <= std::min(k + 2, m); ++i) {
                const Complex t1 = h(i, k), t2 = h(i, k + 1);
                h(i, k) = t1 * std::conj(c) + t2 * std::conj(s);
                h(i, k + 1) = -t1 * s + t2 * c;
            }
        }
        for (int i = l; i <= m; ++i) h(i, i) += mu;
    }
    return eig;
}

// One inverse-iteration eigenvector for eigenvalue lam of a.
inline CVector inverse_iteration(const CMatrix& a, Complex lam, double anorm) {
    const int n = a.dim();
    CMatrix shifted = a;
    for (int i = 0; i < n; ++i) shifted(i, i) -= lam;
    LuFactor lu(shifted, 1e-16);
    CVector v(n);
    for (int i = 0; i < n; ++i)  // fixed deterministic start
        v[i] = Complex(1.0 + 0.3 * i, 0.25 - 0.1 * i);
    double vn = norm(v);
    for (auto& z : v) z /= vn;
    double resid = 1e308;
    for (int pass = 0; pass < 6; ++pass) {
        CVector w = lu.solve(v);
        vn = norm(w);
        if (!std::isfinite(vn) || vn == 0.0) break;
        for (auto& z : w) z /= vn;
        v = std::move(w);
        CVector r = a.apply(v);
        axpy(-lam, v, r);
        resid = norm(r);
        if (resid <= 1e-13 * anorm) break;
    }
    if (resid > 1e-10 * anorm)
        throw NoConvergence("eigensystem: inverse iteration residual " +
                            std::to_string(resid) + " above tolerance");
    // canonical phase: largest-magnitude entry real positive
    int imax = 0;
    for (int i = 1; i < n; ++i)
        if (std::abs(v[i]) > std::abs(v[imax])) imax = i;
    const Complex ph = v[imax] / std::abs(v[imax]);
    for (auto& z : v) z /= ph;
    return v;
}

}  // namespace detail

// Full biorthogonal eigendecomposition of a general complex matrix.
// Eigenvalues come back sorted lexicographically by (re, im). Right vectors
// have unit norm; left vectors are eigenvectors of H^dag paired by conjugate
// eigenvalue. Call biorthonormalize() to enforce <phi*_a|phi_b> = delta_ab.
inline EigenSystem eigensystem(const CMatrix& h,
                               double degeneracy_threshold_rel = 1e-8) {
    const int n = h.dim();
    EigenSystem es;
    es.dim = n;
    double hnorm = frobenius(h);
    if (hnorm == 0.0) hnorm = 1.0;
    es.eigenvalues = detail::qr_eigenvalues(h);
    std::sort(es.eigenvalues.begin(), es.eigenvalues.end(), [](Complex a, Complex b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(es.eigenvalues[i] - es.eigenvalues[j]) <
                degeneracy_threshold_rel * hnorm)
                throw NearDegenerate("eigensystem: eigenvalue gap " +
                                     std::to_string(std::abs(es.eigenvalues[i] -
                                                             es.eigenvalues[j])) +
                                     " below threshold");
    const CMatrix hdag = h.adjoint();
    es.right.resize(n);
    es.left.resize(n);
    for (int b = 0; b < n; ++b) {
        es.right[b] = detail::inverse_iteration(h, es.eigenvalues[b], hnorm);
        es.left[b] = detail::inverse_iteration(hdag, std::conj(es.eigenvalues[b]), hnorm);
    }
    return es;
}

// Enforce <phi*_b|phi_b> = 1 keeping right vectors at unit norm.
inline EigenSystem biorthonormalize(EigenSystem es,
                                    double defective_threshold = 1e-8) {
    for (int b = 0; b < es.dim; ++b) {
        const double rn = norm(es.right[b]);
        for (auto& z : es.right[b]) z /= rn;
        const Complex d = inner(es.left[b], es.right[b]);
        if (std::abs(d) < defective_threshold)
            throw DefectivePair("biorthonormalize: |<phi*|phi>| = " +
                                std::to_string(std::abs(d)) +
                                " signals a near-exceptional point");
        const Complex alpha = 1.0 / std::conj(d);
        for (auto& z : es.left[b]) z *= alpha;
    }
    return es;
}

}  // namespace adiaphase
