#include <catch2/catch_amalgamated.hpp>

#include "adiaphase/phases.hpp"
#include "adiaphase/propagation.hpp"
#include "testutil.hpp"

using namespace adiaphase;
using testutil::constant_model;

namespace {

double spectral_norm_2x2(const CMatrix& u) {
    const CMatrix g = u.adjoint() * u;  // hermitian psd
    const double tr = g.trace().real();
    const Complex det = g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0);
    const double disc = std::max(0.0, tr * tr / 4.0 - det.real());
    return std::sqrt(tr / 2.0 + std::sqrt(disc));
}

}  // namespace

TEST_CASE("propagation of a constant hamiltonian is the exact exponential") {
    const Complex lam(-0.3, -0.2);
    CMatrix h(2);
    h(0, 0) = lam;
    h(1, 1) = Complex(0.4, -0.9);
    const auto m = constant_model(h);
    const TimeGrid grid{500};
    const double T = 50.0;
    const auto wt = propagate(m, T, {1.0, 0.0}, grid);
    for (int k = 0; k <= 500; k += 25) {
        const Complex expo = -IM * T * lam * grid.point(k);
        // compare in the scaled representation to dodge tiny magnitudes
        const Complex want0 = std::exp(expo - wt.log_scale[k]);
        CHECK(std::abs(wt.states[k][0] - want0) <= 1e-8 * std::abs(want0));
        CHECK(std::abs(wt.states[k][1]) <= 1e-9 * std::abs(want0));
    }
}

TEST_CASE("decoupled resonance level decays at the closed-form rate") {
    const auto m = two_level_pulse({1.0, 0.0, 0.5, 0.16});
    const TimeGrid grid{400};
    const double T = 120.0;
    const auto wt = propagate(m, T, {0.0, 1.0}, grid);
    for (int k = 0; k <= 400; k += 20) {
        const double want = -T * 0.5 * grid.point(k);  // ln||psi|| = -T gamma s / 2
        CHECK(std::abs(wt.log_norm(k) - want) < 1e-7 * (1.0 + std::abs(want)));
    }
}

TEST_CASE("norm contraction holds along every trajectory") {
    const auto m = two_level_pulse({1.0, 1.0, 0.5, 0.16});
    const TimeGrid grid{400};
    const auto tr = track_eigensystem(m, grid, 0);
    const auto wt = propagate(m, 100.0, tr.right(0), grid, 1e-10);
    for (int k = 1; k <= 400; ++k)
        CHECK(wt.log_norm(k) - wt.log_norm(0) <= std::log1p(10.0 * 1e-10));
}

TEST_CASE("integrator tolerance is honored in relative terms deep into decay") {
    // after decaying by ~e^-45 the state must still carry full relative accuracy
    const auto m = two_level_pulse({1.0, 1.0, 0.5, 0.16});
    const TimeGrid grid{300};
    const auto tr = track_eigensystem(m, grid, 0);
    const auto tight = propagate(m, 180.0, tr.right(0), grid, 1e-12);
    const auto loose = propagate(m, 180.0, tr.right(0), grid, 1e-8);
    const int n = 300;
    // both runs agree relatively at s=1 although ||psi|| ~ e^-45
    const Complex scale = std::exp(Complex(loose.log_scale[n] - tight.log_scale[n]));
    CVector diff = tight.states[n];
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= loose.states[n][i] * scale;
    CHECK(norm(diff) / norm(tight.states[n]) < 1e-6);
}

TEST_CASE("step underflow is reported, not looped on") {
    const auto m = two_level_pulse({1.0, 1.0, 0.5, 0.16});
    CHECK_THROWS_AS(propagate(m, 100.0, {1.0, 0.0}, TimeGrid{100}, 1e-300, 1e-300),
                    StepUnderflow);
}

TEST_CASE("evolution operator") {
    const TimeGrid grid{400};
    SECTION("constant diagonal generator") {
        CMatrix h(2);
        h(0, 0) = Complex(0.5, -0.1);
        h(1, 1) = Complex(-0.5, -0.4);
        const auto m = constant_model(h);
        const double T = 40.0;
        const auto op = evolution_operator(m, T, grid);
        CHECK(frobenius(op.matrices[0] - CMatrix::identity(2)) == 0.0);
        for (int k = 100; k <= 400; k += 100) {
            const double s = grid.point(k);
            CMatrix want(2);
            want(0, 0) = std::exp(-IM * T * h(0, 0) * s);
            want(1, 1) = std::exp(-IM * T * h(1, 1) * s);
            CHECK(frobenius(op.matrices[k] - want) < 1e-8);
        }
    }
    SECTION("columns reproduce direct propagation") {
        const auto m = two_level_pulse({1.0, 1.0, 0.5, 0.16});
        const double T = 100.0;
        const auto tr = track_eigensystem(m, grid, 0);
        const auto op = evolution_operator(m, T, grid, 1e-10);
        const auto wt = propagate(m, T, tr.right(0), grid, 1e-10);
        for (int k = 0; k <= 400; k += 40) {
            const CVector via_op = op.matrices[k].apply(tr.right(0));
            const CVector direct = wt.state(k);
            CHECK(norm(via_op - direct) <= 1e-9 * (norm(direct) + 1e-30) + 1e-14);
        }
    }
    SECTION("grid refinement consistency") {
        const auto m = two_level_pulse({1.0, 1.0, 0.5, 0.16});
        const double T = 60.0;
        const auto coarse = evolution_operator(m, T, TimeGrid{200}, 1e-10);
        const auto fine = evolution_operator(m, T, TimeGrid{400}, 1e-10);
        for (int k = 0; k <= 200; k += 20)
            CHECK(frobenius(coarse.matrices[k] - fine.matrices[2 * k]) < 1e-9);
    }
    SECTION("contraction of the full operator") {
        const auto m = two_level_pulse({1.0, 1.0, 0.5, 0.16});
        const auto op = evolution_operator(m, 100.0, grid, 1e-10);
        for (int k = 0; k <= 400; k += 10)
            CHECK(spectral_norm_2x2(op.matrices[k]) <= 1.0 + 10.0 * 1e-10);
    }
}

TEST_CASE("adiabatic intertwining defect scales as 1/T (clean gap)") {
    const auto m = two_level_pulse({1.0, 1.0, 0.5, 0.16});
    const TimeGrid grid{1000};
    const auto tr = track_eigensystem(m, grid, 0);
    const CMatrix ps0 = spectral_projector(tr, 0).matrix;
    auto defect = [&](double T) {
        const auto op = evolution_operator(m, T, grid, 1e-10);
        double sup = 0.0;
        for (int k = 0; k <= 1000; ++k)
            sup = std::max(sup, frobenius(op.matrices[k] * ps0 -
                                          spectral_projector(tr, k).matrix *
                                              op.matrices[k]));
        return sup;
    };
    const double d200 = defect(200.0), d400 = defect(400.0);
    CHECK(d400 / d200 > 0.3);
    CHECK(d400 / d200 < 0.7);
}

TEST_CASE("local section") {
    const TimeGrid grid{400};
    SECTION("stationary eigenray of a constant hamiltonian") {
        CMatrix h(2);
        h(0, 0) = Complex(0.7, 0.0);
        h(1, 1) = Complex(-0.2, -0.5);
        const auto m = constant_model(h);
        const auto tr = track_eigensystem(m, grid, 1);  // level with lambda = 0.7
        const double T = 30.0;
        const auto wt = propagate(m, T, tr.right(0), grid);
        const auto sec = build_local_section(wt, tr);
        CHECK(norm(sec.section[0] - wt.state(0)) < 1e-12);
        for (int k = 0; k <= 400; k += 50)
            CHECK(norm(sec.section[k] - sec.section[0]) < 1e-8);
        CHECK(std::abs(sec.mu - std::exp(-IM * T * h(0, 0))) < 1e-8);
        CHECK(sec.cyclicity_residual < 1e-8);
        CHECK(std::abs(sec.log_f[0]) == 0.0);
        // f(s) carries exactly the dynamical factor of the followed ray
        CHECK(std::abs(sec.log_f[200] - IM * T * h(0, 0) * 0.5) < 1e-7);
    }
    SECTION("decay-free decoupled level: the section is pinned, mu = 1") {
        const auto m = two_level_pulse({1.0, 0.0, 0.5, 0.16});
        const auto tr = track_eigensystem(m, grid, 1);  // bound level, lambda = 0
        const auto wt = propagate(m, 200.0, {1.0, 0.0}, grid);
        const auto sec = build_local_section(wt, tr);
        CHECK(std::abs(sec.mu - 1.0) < 1e-9);
        CHECK(sec.cyclicity_residual < 1e-9);
        for (int k = 0; k <= 400; k += 50)
            CHECK(norm(sec.section[k] - CVector{1.0, 0.0}) < 1e-9);
    }
    SECTION("dynamics orthogonal to the followed branch is rejected") {
        const auto m = two_level_pulse({1.0, 0.0, 0.5, 0.16});
        const auto tr = track_eigensystem(m, grid, 1);  // follows e1
        const auto wt = propagate(m, 50.0, {0.0, 1.0}, grid);  // lives on e2
        CHECK_THROWS_AS(build_local_section(wt, tr), SectionSingular);
    }
    SECTION("acyclic families are rejected unless overridden") {
        const auto m = two_level_pulse({1.0, 1.0, 0.4, 0.16});  // H(0) != H(1)
        const auto tr = track_eigensystem(m, grid, 0);
        const auto wt = propagate(m, 100.0, tr.right(0), grid);
        CHECK_THROWS_AS(build_local_section(wt, tr), Error);
        CHECK_NOTHROW(build_local_section(wt, tr, 1e-8, 1e-6, true));
    }
    SECTION("section aligns with the eigenvector at O(1/T)") {
        const auto m = two_level_pulse({1.0, 1.0, 0.5, 0.16});
        const auto tr = track_eigensystem(m, grid, 0);
        auto misalign = [&](double T) {
            const auto wt = propagate(m, T, tr.right(0), grid);
            const auto sec = build_local_section(wt, tr);
            double sup = 0.0;
            for (int k = 2; k <= 398; ++k) {
                // sin of the angle to the eigenray
                const CVector& sb = sec.section[k];
                const Complex c = inner(tr.right(k), sb);
                CVector rest = sb;
                axpy(-c, tr.right(k), rest);
                sup = std::max(sup, norm(rest) / norm(sb));
            }
            return sup;
        };
        const double a400 = misalign(400.0), a800 = misalign(800.0);
        CHECK(a800 / a400 > 0.3);
        CHECK(a800 / a400 < 0.7);
    }
}

TEST_CASE("adiabatic reference fails across the exceptional-point crossings") {
    // w0 = 0.5 drives the pulse through two eigenvalue degeneracies
    // (s ~ 0.029, 0.971); the isolated-eigenvalue assumption breaks there and
    // the spectral-convention reference stops converging to the dynamics.
    const auto m = two_level_pulse({1.0, 0.5, 0.5, 0.16});
    const TimeGrid grid{2000};
    const auto tr = track_eigensystem(m, grid, 1);
    const auto cd = build_connection_data(tr);
    const int n = grid.n_steps;
    auto err = [&](double T) {
        const auto wt = propagate(m, T, tr.right(0), grid);
        const Complex logref = -IM * T * cd.int_lambda[n] - cd.int_As[n];
        const Complex q = std::exp(logref - wt.log_scale[n]);
        CVector ref = tr.right(n);
        for (auto& z : ref) z *= q;
        return norm(wt.states[n] - ref) / std::abs(q);
    };
    CHECK(err(100.0) > 0.5);
    CHECK(err(200.0) > 0.5);
}

TEST_CASE("exact norm law through the AA decomposition") {
    const auto m = two_level_pulse({1.0, 1.0, 0.5, 0.16});
    const TimeGrid grid{2000};
    const auto tr = track_eigensystem(m, grid, 0);
    const auto wt = propagate(m, 100.0, tr.right(0), grid);
    const auto sec = build_local_section(wt, tr);
    const auto aa = aa_phase_decomposition(sec, wt, tr);
    double worst = 0.0;
    for (int k = 0; k <= 2000; ++k) {
        const double rebuilt = 2.0 * wt.log_norm(0) + 2.0 * aa.phases.dynamical_log[k].real();
        worst = std::max(worst, std::abs(std::expm1(rebuilt - 2.0 * wt.log_norm(k))));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("AA reconstruction of the full state and its convergence knobs") {
    const auto m = two_level_pulse({1.0, 1.0, 0.5, 0.16});
    const TimeGrid grid{2000};
    const auto tr = track_eigensystem(m, grid, 0);
    auto reconstruction_err = [&](double tol) {
        const auto wt = propagate(m, 100.0, tr.right(0), grid, tol);
        const auto sec = build_local_section(wt, tr);
        const auto aa = aa_phase_decomposition(sec, wt, tr);
        double worst = 0.0;
        for (int k = 0; k <= 2000; ++k) {
            const Complex q = std::exp(aa.phases.total_log[k] - wt.log_scale[k]);
            CVector rec = sec.section[k];
            for (auto& z : rec) z *= q;
            worst = std::max(worst, norm(rec - wt.states[k]) / norm(wt.states[k]));
        }
        return worst;
    };
    const double tight = reconstruction_err(1e-10);
    CHECK(tight < 1e-5);
    // the reconstruction residual is quadrature-dominated (integrator error
    // largely cancels between the section and the target state), so the
    // tolerance knob is checked on the propagated state itself
    const auto ref = propagate(m, 100.0, tr.right(0), grid, 1e-13);
    auto prop_err = [&](double tol) {
        const auto wt = propagate(m, 100.0, tr.right(0), grid, tol);
        const Complex scale = std::exp(Complex(wt.log_scale[2000] - ref.log_scale[2000]));
        CVector diff = ref.states[2000];
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= wt.states[2000][i] * scale;
        return norm(diff) / norm(ref.states[2000]);
    };
    CHECK(prop_err(1e-5) > 10.0 * prop_err(1e-11));
}

TEST_CASE("finite-difference error drops at second order under grid refinement") {
    const auto m = two_level_pulse({1.0, 1.0, 0.5, 0.16});
    auto fd_disagreement = [&](int n) {
        const TimeGrid grid{n};
        const auto tr = track_eigensystem(m, grid, 0);
        double worst = 0.0;
        for (int k = 2; k < n - 1; k += 3) {
            const Complex d1 = detail::deviation_raw(tr, k);
            const CVector& v = tr.right(k);
            const Complex d3 =
                -inner(v, derivative_projector(tr, k, ProjectorKind::spectral).apply(v)) /
                inner(v, v).real();
            worst = std::max(worst, std::abs(d1 - d3));
        }
        return worst;
    };
    const double coarse = fd_disagreement(250), fine = fd_disagreement(500);
    CHECK(fine / coarse > 0.15);
    CHECK(fine / coarse < 0.40);  // ~h^2
}
