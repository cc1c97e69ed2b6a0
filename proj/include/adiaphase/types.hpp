#pragma once

#include <cmath>
#include <complex>
#include <initializer_list>
#include <vector>

#include "adiaphase/errors.hpp"

namespace adiaphase {

using Complex = std::complex<double>;
using CVector = std::vector<Complex>;

inline constexpr Complex IM{0.0, 1.0};

inline bool is_finite(Complex z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

inline bool is_finite(const CVector& v) {
    for (auto z : v)
        if (!is_finite(z)) return false;
    return true;
}

// <a|b> with the physics convention: conjugate-linear in the first slot.
inline Complex inner(const CVector& a, const CVector& b) {
    Complex s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

// Overflow/underflow-safe Euclidean norm (components may sit near 1e-170).
inline double norm(const CVector& v) {
    double m = 0.0;
    for (auto z : v) m = std::max(m, std::max(std::abs(z.real()), std::abs(z.imag())));
    if (m == 0.0) return 0.0;
    double s = 0.0;
    for (auto z : v) {
        const double re = z.real() / m, im = z.imag() / m;
        s += re * re + im * im;
    }
    return m * std::sqrt(s);
}

inline CVector operator+(const CVector& a, const CVector& b) {
    CVector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline CVector operator-(const CVector& a, const CVector& b) {
    CVector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline CVector operator*(Complex c, const CVector& v) {
    CVector r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = c * v[i];
    return r;
}

inline void axpy(Complex c, const CVector& x, CVector& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

inline double rel_diff(const CVector& a, const CVector& b) {
    return norm(a - b) / norm(b);
}

// Dense square complex matrix, row-major.
class CMatrix {
public:
    CMatrix() = default;
    explicit CMatrix(int dim) : dim_(dim), e_(static_cast<std::size_t>(dim) * dim) {}
    CMatrix(std::initializer_list<std::initializer_list<Complex>> rows) {
        dim_ = static_cast<int>(rows.size());
        e_.reserve(static_cast<std::size_t>(dim_) * dim_);
        for (const auto& r : rows)
            for (auto z : r) e_.push_back(z);
    }

    static CMatrix identity(int dim) {
        CMatrix m(dim);
        for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }

    int dim() const { return dim_; }
    Complex& operator()(int i, int j) { return e_[static_cast<std::size_t>(i) * dim_ + j]; }
    Complex operator()(int i, int j) const { return e_[static_cast<std::size_t>(i) * dim_ + j]; }
    const std::vector<Complex>& entries() const { return e_; }

    CMatrix adjoint() const {
        CMatrix m(dim_);
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j) m(j, i) = std::conj((*this)(i, j));
        return m;
    }

    Complex trace() const {
        Complex t = 0.0;
        for (int i = 0; i < dim_; ++i) t += (*this)(i, i);
        return t;
    }

    CVector apply(const CVector& v) const {
        CVector r(dim_, 0.0);
        for (int i = 0; i < dim_; ++i) {
            Complex s = 0.0;
            for (int j = 0; j < dim_; ++j) s += (*this)(i, j) * v[j];
            r[i] = s;
        }
        return r;
    }

    friend CMatrix operator+(const CMatrix& a, const CMatrix& b) {
        CMatrix r(a.dim_);
        for (std::size_t i = 0; i < a.e_.size(); ++i) r.e_[i] = a.e_[i] + b.e_[i];
        return r;
    }
    friend CMatrix operator-(const CMatrix& a, const CMatrix& b) {
        CMatrix r(a.dim_);
        for (std::size_t i = 0; i < a.e_.size(); ++i) r.e_[i] = a.e_[i] - b.e_[i];
        return r;
    }
    friend CMatrix operator*(Complex c, const CMatrix& a) {
        CMatrix r(a.dim_);
        for (std::size_t i = 0; i < a.e_.size(); ++i) r.e_[i] = c * a.e_[i];
        return r;
    }
    friend CMatrix operator*(const CMatrix& a, const CMatrix& b) {
        CMatrix r(a.dim_);
        for (int i = 0; i < a.dim_; ++i)
            for (int k = 0; k < a.dim_; ++k) {
                const Complex aik = a(i, k);
                if (aik == Complex{}) continue;
                for (int j = 0; j < a.dim_; ++j) r(i, j) += aik * b(k, j);
            }
        return r;
    }

    bool finite() const {
        for (auto z : e_)
            if (!is_finite(z)) return false;
        return true;
    }

private:
    int dim_ = 0;
    std::vector<Complex> e_;
};

// Frobenius norm with the same overflow-safe scaling as norm().
inline double frobenius(const CMatrix& m) {
    double mx = 0.0;
    for (auto z : m.entries())
        mx = std::max(mx, std::max(std::abs(z.real()), std::abs(z.imag())));
    if (mx == 0.0) return 0.0;
    double s = 0.0;
    for (auto z : m.entries()) {
        const double re = z.real() / mx, im = z.imag() / mx;
        s += re * re + im * im;
    }
    return mx * std::sqrt(s);
}

// |phi><psi| outer product.
inline CMatrix outer(const CVector& phi, const CVector& psi) {
    CMatrix m(static_cast<int>(phi.size()));
    for (int i = 0; i < m.dim(); ++i)
        for (int j = 0; j < m.dim(); ++j) m(i, j) = phi[i] * std::conj(psi[j]);
    return m;
}

}  // namespace adiaphase
