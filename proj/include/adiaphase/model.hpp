#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "adiaphase/linalg.hpp"
#include "adiaphase/time_grid.hpp"
#include "adiaphase/types.hpp"

namespace adiaphase {

// Time-dependent hamiltonian family on the reduced interval s in [0,1].
// evaluate_derivative is optional; consumers fall back to finite differences.
struct HamiltonianModel {
    int dim = 0;
    std::string name;
    std::map<std::string, double> parameters;
    std::function<CMatrix(double)> evaluate;
    std::function<CMatrix(double)> evaluate_derivative;  // may be empty

    CMatrix derivative(double s, double h = 1e-6) const {
        if (evaluate_derivative) return evaluate_derivative(s);
        return (1.0 / (2 * h)) * (evaluate(s + h) - evaluate(s - h));
    }
};

struct TwoLevelPulseParams {
    double gamma = 1.0;   // resonance width
    double w0 = 1.0;      // Omega_0 / gamma
    double s0 = 0.5;      // pulse center
    double sigma = 0.16;  // gaussian width parameter, exponent -(s-s0)^2/(2 sigma)
};

// Bound state coupled to a resonance of width gamma by a gaussian pulse:
//   H(s) = [[0, Omega(s)], [Omega(s), -i gamma/2]],
//   Omega(s) = w0 gamma exp(-(s-s0)^2 / (2 sigma)).
inline HamiltonianModel two_level_pulse(const TwoLevelPulseParams& p) {
    if (!(p.gamma > 0.0) || p.w0 < 0.0 || !(p.sigma > 0.0) || p.s0 < 0.0 || p.s0 > 1.0)
        throw Error("two_level_pulse: parameter out of range");
    HamiltonianModel m;
    m.dim = 2;
    m.name = "two_level_pulse";
    m.parameters = {{"gamma", p.gamma}, {"w0", p.w0}, {"s0", p.s0}, {"sigma", p.sigma}};
    const double g = p.gamma, w0 = p.w0, s0 = p.s0, sig = p.sigma;
    m.evaluate = [g, w0, s0, sig](double s) {
        const double om = w0 * g * std::exp(-(s - s0) * (s - s0) / (2 * sig));
        return CMatrix{{0.0, om}, {om, Complex(0.0, -0.5 * g)}};
    };
    m.evaluate_derivative = [g, w0, s0, sig](double s) {
        const double om = w0 * g * std::exp(-(s - s0) * (s - s0) / (2 * sig));
        const double omd = -(s - s0) / sig * om;
        return CMatrix{{0.0, omd}, {omd, 0.0}};
    };
    return m;
}

// Largest eigenvalue of the hermitian dissipation part (H - H^dag)/(2i).
inline double dissipation_bound(const CMatrix& h) {
    const int n = h.dim();
    CMatrix d(n);
    const CMatrix hd = h.adjoint();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) d(i, j) = (h(i, j) - hd(i, j)) / Complex(0.0, 2.0);
    double worst = -1e308;
    for (Complex lam : detail::qr_eigenvalues(d)) worst = std::max(worst, lam.real());
    return worst;
}

// Contraction check: (H - H^dag)/(2i) <= 0 on a sampling grid.
inline void check_dissipativity(const HamiltonianModel& m, int n_samples = 512,
                                double tol = 1e-12) {
    for (int k = 0; k <= n_samples; ++k) {
        const double s = static_cast<double>(k) / n_samples;
        const double w = dissipation_bound(m.evaluate(s));
        if (w > tol)
            throw DissipativityViolation(
                "model '" + m.name + "' violates the contraction condition at s = " +
                std::to_string(s) + " (growth rate " + std::to_string(w) + ")");
    }
}

// min over the grid of the minimal pairwise eigenvalue distance.
inline double min_eigenvalue_distance(const HamiltonianModel& m, const TimeGrid& grid) {
    double best = 1e308;
    for (int k = 0; k < grid.size(); ++k) {
        const auto eig = detail::qr_eigenvalues(m.evaluate(grid.point(k)));
        for (std::size_t i = 0; i < eig.size(); ++i)
            for (std::size_t j = i + 1; j < eig.size(); ++j)
                best = std::min(best, std::abs(eig[i] - eig[j]));
    }
    return best;
}

// ---------------------------------------------------------------- config IO

namespace detail {

struct ConfigLine {
    std::string key;
    std::string value;
    int line;
    int value_column;
};

inline std::vector<ConfigLine> parse_key_values(const std::string& text) {
    std::vector<ConfigLine> out;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        if (auto pos = line.find('#'); pos != std::string::npos) line.resize(pos);
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected 'key = value'", lineno, static_cast<int>(first) + 1);
        auto keyEnd = line.find_last_not_of(" \t", eq - 1);
        if (keyEnd == std::string::npos || keyEnd < first)
            throw ParseError("missing key before '='", lineno, 1);
        std::string key = line.substr(first, keyEnd - first + 1);
        auto vbeg = line.find_first_not_of(" \t", eq + 1);
        if (vbeg == std::string::npos)
            throw ParseError("missing value for key '" + key + "'", lineno,
                             static_cast<int>(eq) + 2);
        auto vend = line.find_last_not_of(" \t\r");
        out.push_back({key, line.substr(vbeg, vend - vbeg + 1), lineno,
                       static_cast<int>(vbeg) + 1});
    }
    return out;
}

inline double parse_number(const std::string& s, int line, int col) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ParseError("expected a number, got '" + s + "'", line, col);
    }
    if (used != s.size())
        throw ParseError("trailing characters after number in '" + s + "'", line, col);
    return v;
}

// entry.<i>.<j> = <re> <im> [* gaussian(<s0>,<sigma>)]
struct TableEntry {
    int i = 0, j = 0;
    Complex coeff;
    bool gaussian = false;
    double s0 = 0.0, sigma = 1.0;
};

inline TableEntry parse_table_entry(const std::string& key, const std::string& value,
                                    int line, int col) {
    TableEntry e;
    std::istringstream k(key.substr(6));  // past "entry."
    char dot = 0;
    if (!(k >> e.i >> dot >> e.j) || dot != '.' || !k.eof())
        throw ParseError("bad entry key '" + key + "', expected entry.<i>.<j>", line, 1);
    std::istringstream v(value);
    double re = 0.0, im = 0.0;
    if (!(v >> re >> im))
        throw ParseError("entry value must start with '<re> <im>'", line, col);
    e.coeff = Complex(re, im);
    std::string rest;
    std::getline(v, rest);
    auto star = rest.find_first_not_of(" \t");
    if (star != std::string::npos) {
        double s0 = 0.0, sigma = 0.0;
        char c1 = 0;
        if (std::sscanf(rest.c_str() + star, "* gaussian(%lf,%lf%c", &s0, &sigma, &c1) != 3 ||
            c1 != ')')
            throw ParseError("expected '* gaussian(<s0>,<sigma>)', got '" +
                                 rest.substr(star) + "'",
                             line, col);
        if (!(sigma > 0.0))
            throw ParseError("gaussian sigma must be positive", line, col);
        e.gaussian = true;
        e.s0 = s0;
        e.sigma = sigma;
    }
    return e;
}

}  // namespace detail

// Build a model from config text (see README for the grammar). Dissipativity
// is verified on a 512-point grid before the model is handed out.
inline HamiltonianModel parse_model_config(const std::string& text,
                                           const std::string& name = "config") {
    const auto lines = detail::parse_key_values(text);
    std::string kind;
    int dim = -1;
    std::map<std::string, double> scalars;
    std::vector<detail::TableEntry> entries;
    std::vector<detail::ConfigLine> unknown;
    for (const auto& l : lines) {
        if (l.key == "kind") kind = l.value;
        else if (l.key == "dim")
            dim = static_cast<int>(detail::parse_number(l.value, l.line, l.value_column));
        else if (l.key == "gamma" || l.key == "w0" || l.key == "s0" || l.key == "sigma")
            scalars[l.key] = detail::parse_number(l.value, l.line, l.value_column);
        else if (l.key.rfind("entry.", 0) == 0)
            entries.push_back(detail::parse_table_entry(l.key, l.value, l.line, l.value_column));
        else
            throw ParseError("unknown key '" + l.key + "'", l.line, 1);
    }
    if (kind.empty()) throw ParseError("missing required key 'kind'", 1, 1);
    if (dim <= 0) throw ParseError("missing or invalid required key 'dim'", 1, 1);

    HamiltonianModel m;
    if (kind == "two_level_pulse") {
        if (dim != 2) throw ParseError("two_level_pulse requires dim = 2", 1, 1);
        TwoLevelPulseParams p;
        if (scalars.count("gamma")) p.gamma = scalars["gamma"];
        if (scalars.count("w0")) p.w0 = scalars["w0"];
        if (scalars.count("s0")) p.s0 = scalars["s0"];
        if (scalars.count("sigma")) p.sigma = scalars["sigma"];
        m = two_level_pulse(p);
    } else if (kind == "matrix_table") {
        for (const auto& e : entries)
            if (e.i < 0 || e.i >= dim || e.j < 0 || e.j >= dim)
                throw ParseError("entry index out of range for dim = " +
                                     std::to_string(dim),
                                 1, 1);
        auto table = entries;  // owned copy for the closures
        const int d = dim;
        m.dim = d;
        m.evaluate = [table, d](double s) {
            CMatrix h(d);
            for (const auto& e : table) {
                double f = 1.0;
                if (e.gaussian) f = std::exp(-(s - e.s0) * (s - e.s0) / (2 * e.sigma));
                h(e.i, e.j) += e.coeff * f;
            }
            return h;
        };
        m.evaluate_derivative = [table, d](double s) {
            CMatrix h(d);
            for (const auto& e : table) {
                if (!e.gaussian) continue;
                const double f = std::exp(-(s - e.s0) * (s - e.s0) / (2 * e.sigma));
                h(e.i, e.j) += e.coeff * (-(s - e.s0) / e.sigma * f);
            }
            return h;
        };
        m.name = "matrix_table";
    } else {
        throw UnknownModelKind("unknown model kind '" + kind + "'");
    }
    m.name = name + ":" + kind;
    for (auto& [k, v] : scalars) m.parameters[k] = v;
    check_dissipativity(m);
    return m;
}

inline HamiltonianModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file '" + path + "'", 0, 0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_model_config(ss.str(), path);
}

// Residual ||H(0) - H(1)|| / ||H(midpulse)||; cyclic analyses require this
// below the given threshold unless explicitly overridden.
inline double cyclicity_defect(const HamiltonianModel& m) {
    const CMatrix h0 = m.evaluate(0.0), h1 = m.evaluate(1.0);
    double scale = 0.0;
    for (int k = 0; k <= 16; ++k)
        scale = std::max(scale, frobenius(m.evaluate(k / 16.0)));
    return frobenius(h0 - h1) / std::max(scale, 1e-300);
}

}  // namespace adiaphase
