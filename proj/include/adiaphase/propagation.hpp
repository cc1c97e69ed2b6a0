#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "adiaphase/model.hpp"
#include "adiaphase/spectral.hpp"
#include "adiaphase/time_grid.hpp"
#include "adiaphase/types.hpp"

namespace adiaphase {

// psi(s_k) from integrating (i/T) psi_dot = H psi (hbar = 1). States are kept
// internally renormalized so the error control stays relative even when the
// norm decays through hundreds of orders of magnitude; states[k] holds the
// unit-scale representative and log_scale[k] the accumulated log-norm factor:
//   psi(s_k) = states[k] * exp(log_scale[k]).
struct WavefunctionTrajectory {
    TimeGrid grid;
    std::vector<CVector> states;
    std::vector<double> log_scale;
    double T = 0.0;
    double integrator_tolerance = 1e-10;

    CVector state(int k) const {
        CVector v = states[k];
        const double f = std::exp(log_scale[k]);
        for (auto& z : v) z *= f;
        return v;
    }
    double log_norm(int k) const { return std::log(norm(states[k])) + log_scale[k]; }
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double DP_C[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
inline constexpr double DP_A[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},
};
inline constexpr double DP_E[7] = {71.0 / 57600,      0.0,         -71.0 / 16695,
                                   71.0 / 1920,       -17253.0 / 339200,
                                   22.0 / 525,        -1.0 / 40};

template <typename Rhs, typename OnGridPoint>
void dp54_integrate(Rhs rhs, CVector y, const TimeGrid& grid, double rtol,
                    double atol, OnGridPoint emit) {
    const int dim = static_cast<int>(y.size());
    double logscale = 0.0;
    double s = 0.0;
    emit(0, y, logscale);
    CVector k[7];
    k[0] = rhs(s, y);
    double dt_ctrl = grid.h() / 8.0;
    for (int kg = 1; kg < grid.size(); ++kg) {
        const double target = grid.point(kg);
        while (s < target - 1e-15) {
            const double dt = std::min(dt_ctrl, target - s);
            const bool clamped = dt < dt_ctrl;
            CVector yi(dim);
            for (int i = 1; i < 7; ++i) {
                yi = y;
                for (int j = 0; j < i; ++j)
                    if (DP_A[i][j] != 0.0) axpy(dt * DP_A[i][j], k[j], yi);
                k[i] = rhs(s + DP_C[i] * dt, yi);
            }
            // stage 7 input is the 5th-order solution (FSAL pair)
            CVector ynew = y;
            for (int j = 0; j < 6; ++j)
                if (DP_A[6][j] != 0.0) axpy(dt * DP_A[6][j], k[j], ynew);
            CVector err(dim, 0.0);
            for (int j = 0; j < 7; ++j)
                if (DP_E[j] != 0.0) axpy(dt * DP_E[j], k[j], err);
            const double sc = atol + rtol * std::max(norm(y), norm(ynew));
            const double e = norm(err) / sc;
            if (e <= 1.0) {
                s += dt;
                y = std::move(ynew);
                k[0] = rhs(s, y);  // recompute; renormalization below rescales it
                const double nrm = norm(y);
                if (nrm < 0.5 || nrm > 2.0) {
                    if (!(nrm > 0.0) || !std::isfinite(nrm))
                        throw StepUnderflow("propagate: state norm degenerated at s = " +
                                            std::to_string(s));
                    logscale += std::log(nrm);
                    for (auto& z : y) z /= nrm;
                    for (auto& z : k[0]) z /= nrm;
                }
            } else if (dt <= 1e-13) {
                // a rejected step at the floor is genuine stiffness; a step
                // clamped to the remaining interval is not
                throw StepUnderflow(
                    "propagate: step size underflow at s = " + std::to_string(s) +
                    "; increase tol or reduce T");
            }
            const double fac = (e > 0.0) ? 0.9 * std::pow(e, -0.2) : 5.0;
            dt_ctrl = dt * std::clamp(fac, 0.2, 5.0);
        }
        emit(kg, y, logscale);
    }
}

}  // namespace detail

// Adaptive DP5(4) integration of psi_dot = -i T H(s) psi, sampled on the grid.
inline WavefunctionTrajectory propagate(const HamiltonianModel& model, double T,
                                        const CVector& psi0, const TimeGrid& grid,
                                        double tol = 1e-10, double atol = 1e-12) {
    if (!(T > 0.0)) throw Error("propagate: T must be positive");
    if (!(norm(psi0) > 0.0)) throw Error("propagate: zero initial state");
    WavefunctionTrajectory wt;
    wt.grid = grid;
    wt.T = T;
    wt.integrator_tolerance = tol;
    wt.states.resize(grid.size());
    wt.log_scale.resize(grid.size());
    auto rhs = [&](double s, const CVector& y) {
        CVector r = model.evaluate(s).apply(y);
        for (auto& z : r) z *= Complex(0.0, -T);
        return r;
    };
    detail::dp54_integrate(rhs, psi0, grid, tol, atol,
                           [&](int k, const CVector& y, double lg) {
                               wt.states[k] = y;
                               wt.log_scale[k] = lg;
                           });
    return wt;
}

// U_T(s_k, 0) by column-wise propagation of the identity.
struct EvolutionOperator {
    TimeGrid grid;
    std::vector<CMatrix> matrices;
    double T = 0.0;
};

inline EvolutionOperator evolution_operator(const HamiltonianModel& model, double T,
                                            const TimeGrid& grid, double tol = 1e-10,
                                            double atol = 1e-12) {
    EvolutionOperator op;
    op.grid = grid;
    op.T = T;
    op.matrices.assign(grid.size(), CMatrix(model.dim));
    for (int c = 0; c < model.dim; ++c) {
        CVector e(model.dim, 0.0);
        e[c] = 1.0;
        const auto wt = propagate(model, T, e, grid, tol, atol);
        for (int k = 0; k < grid.size(); ++k) {
            const CVector col = wt.state(k);
            for (int r = 0; r < model.dim; ++r) op.matrices[k](r, c) = col[r];
        }
    }
    return op;
}

// Local section for the cyclic (Aharonov-Anandan) analysis:
//   psibar(s) = c0 psi(s) / <phi*_a(s)|psi(s)>,  c0 = <phi*_a(0)|psi(0)>.
// The scale factors of the renormalized trajectory cancel in the quotient,
// so the section is O(1)-valued however deep the dissipation runs.
struct CyclicSectionData {
    TimeGrid grid;
    std::vector<CVector> section;      // psibar(s_k), plain values
    std::vector<Complex> log_f;        // log f(s_k) with psibar = f psi, log_f[0] = 0
    Complex mu;                        // psi(1) ~ mu psi(0)
    double cyclicity_residual = 0.0;   // ||psi(1)/mu - psi(0)|| / ||psi(0)||
    double T = 0.0;
};

inline CyclicSectionData build_local_section(const WavefunctionTrajectory& traj,
                                             const EigenTrajectory& eig,
                                             double section_threshold = 1e-8,
                                             double cyclicity_threshold = 1e-6,
                                             bool allow_acyclic = false) {
    const int n = traj.grid.n_steps;
    if (eig.grid.n_steps != n)
        throw Error("build_local_section: grids disagree");
    CyclicSectionData out;
    out.grid = traj.grid;
    out.T = traj.T;
    out.section.resize(n + 1);
    out.log_f.resize(n + 1);

    // model cyclicity gate (H(0) vs H(1))
    const double defect = frobenius(eig.hamiltonians.front() - eig.hamiltonians.back()) /
                          std::max(frobenius(eig.hamiltonians.front()), 1e-300);
    if (defect > cyclicity_threshold && !allow_acyclic)
        throw Error("build_local_section: model is not cyclic (||H(0)-H(1)|| rel = " +
                    std::to_string(defect) + "); pass allow_acyclic to override");

    const Complex c0 = inner(eig.left(0), traj.states[0]);
    for (int k = 0; k <= n; ++k) {
        const Complex ip = inner(eig.left(k), traj.states[k]);
        if (std::abs(ip) < section_threshold * norm(traj.states[k]) * norm(eig.left(k)))
            throw SectionSingular(
                "build_local_section: |<phi*|psi>| below threshold at s = " +
                std::to_string(traj.grid.point(k)) + " (dynamics left the followed ray)");
        const Complex q = c0 / ip;
        CVector v = traj.states[k];
        for (auto& z : v) z *= q;
        out.section[k] = std::move(v);
        // f = c0 / <phi*|psi_true>; log f = log(c0/ip) - log_scale, with the
        // imaginary part unwrapped so log f is continuous along s
        Complex lf = std::log(q) - traj.log_scale[k];
        if (k > 0) {
            const double prev = out.log_f[k - 1].imag();
            double im = lf.imag();
            while (im - prev > M_PI) im -= 2.0 * M_PI;
            while (im - prev < -M_PI) im += 2.0 * M_PI;
            lf = Complex(lf.real(), im);
        }
        out.log_f[k] = lf;
    }
    // mu from the followed-component ratio; safe in log space
    const Complex ip1 = inner(eig.left(0), traj.states[n]);
    const Complex ip0 = inner(eig.left(0), traj.states[0]);
    const double dlg = traj.log_scale[n] - traj.log_scale[0];
    out.mu = (ip1 / ip0) * std::exp(dlg);
    // residual computed on scaled representatives to dodge underflow
    CVector scaled_end = traj.states[n];
    const Complex corr = (ip0 / ip1);  // psi(1)/mu in scaled terms
    for (auto& z : scaled_end) z *= corr;
    out.cyclicity_residual = norm(scaled_end - traj.states[0]) / norm(traj.states[0]);
    return out;
}

}  // namespace adiaphase
