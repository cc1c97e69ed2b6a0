#pragma once

#include <vector>

#include "adiaphase/types.hpp"

namespace adiaphase {

// Uniform grid on the reduced-time interval [0,1]: s_k = k/n_steps.
struct TimeGrid {
    int n_steps = 2000;

    double h() const { return 1.0 / n_steps; }
    double point(int k) const { return static_cast<double>(k) / n_steps; }
    int size() const { return n_steps + 1; }
};

// Second-order finite difference of a sampled sequence (one-sided at the ends).
template <typename T>
std::vector<T> fd_derivative(const std::vector<T>& f, double h) {
    const int n = static_cast<int>(f.size());
    std::vector<T> d(n);
    for (int k = 1; k < n - 1; ++k) d[k] = (1.0 / (2 * h)) * (f[k + 1] - f[k - 1]);
    if (n >= 3) {
        d[0] = (1.0 / (2 * h)) * ((-3.0) * f[0] + 4.0 * f[1] - f[2]);
        d[n - 1] = (1.0 / (2 * h)) * (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]);
    }
    return d;
}

inline std::vector<Complex> fd_derivative(const std::vector<Complex>& f, double h) {
    const int n = static_cast<int>(f.size());
    std::vector<Complex> d(n);
    for (int k = 1; k < n - 1; ++k) d[k] = (f[k + 1] - f[k - 1]) / (2 * h);
    if (n >= 3) {
        d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2 * h);
        d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2 * h);
    }
    return d;
}

// Cumulative integral of grid samples: trapezoid plus the Euler-Maclaurin
// endpoint correction -h^2/12 (f'_k - f'_0) with f' from second-order FD.
// The correction lifts the plain-trapezoid O(h^2) accumulation error to
// O(h^4) on smooth integrands, which the T-scaled phase integrals need.
inline std::vector<Complex> accumulate_integral(const std::vector<Complex>& f,
                                                double h) {
    const int n = static_cast<int>(f.size());
    std::vector<Complex> out(n, 0.0);
    for (int k = 1; k < n; ++k) out[k] = out[k - 1] + 0.5 * h * (f[k] + f[k - 1]);
    if (n >= 3) {
        const auto fp = fd_derivative(f, h);
        const double c = h * h / 12.0;
        for (int k = 0; k < n; ++k) out[k] -= c * (fp[k] - fp[0]);
    }
    return out;
}

inline std::vector<double> accumulate_integral(const std::vector<double>& f,
                                               double h) {
    const int n = static_cast<int>(f.size());
    std::vector<double> out(n, 0.0);
    for (int k = 1; k < n; ++k) out[k] = out[k - 1] + 0.5 * h * (f[k] + f[k - 1]);
    if (n >= 3) {
        std::vector<double> fp(n);
        for (int k = 1; k < n - 1; ++k) fp[k] = (f[k + 1] - f[k - 1]) / (2 * h);
        fp[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h);
        fp[n - 1] = (3 * f[n - 1] - 4 * f[n - 2] + f[n - 3]) / (2 * h);
        const double c = h * h / 12.0;
        for (int k = 0; k < n; ++k) out[k] -= c * (fp[k] - fp[0]);
    }
    return out;
}

}  // namespace adiaphase
