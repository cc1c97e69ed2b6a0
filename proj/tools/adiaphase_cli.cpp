// Command-line driver: simulate | tscan | consistency.
//
// Exit codes: 0 all checks pass, 1 numerical check failure,
//             2 input/parse error, 3 tracking/degeneracy error.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adiaphase/experiment.hpp"

using namespace adiaphase;

namespace {

std::vector<double> parse_list(const std::string& csv) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t comma = csv.find(',', pos);
        if (comma == std::string::npos) comma = csv.size();
        const std::string tok = csv.substr(pos, comma - pos);
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ParseError("bad number '" + tok + "' in list", 0, 0);
        }
        pos = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-time dynamics and geometric/dynamical phase decompositions "
                 "for dissipative (nonselfadjoint) hamiltonians"};
    app.require_subcommand(1);

    ExperimentSpec spec;
    std::string model_path;
    std::string builtin = "two-level";
    std::string t_csv = "100";
    std::string w0_csv;
    spec.level = -1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--model", model_path, "model config file");
        cmd->add_option("--builtin", builtin, "builtin model name (two-level)");
        cmd->add_option("--gamma", spec.builtin.gamma, "resonance width");
        cmd->add_option("--w0", spec.builtin.w0, "coupling ratio Omega_0/gamma");
        cmd->add_option("--s0", spec.builtin.s0, "pulse center");
        cmd->add_option("--sigma", spec.builtin.sigma, "gaussian width parameter");
        cmd->add_option("--steps", spec.n_steps, "analysis grid steps");
        cmd->add_option("--T", t_csv, "comma list of total durations");
        cmd->add_option("--w0-list", w0_csv, "comma list of w0 scan values");
        cmd->add_option("--level", spec.level,
                        "tracked level index (-1 = slowest-decaying branch)");
        cmd->add_option("--out", spec.out_dir, "output directory");
        cmd->add_option("--seed", spec.seed, "seed for random chi paths");
        cmd->add_option("--tol", spec.tol, "integrator relative tolerance");
        cmd->add_flag("--corrupt-lambda-eff", spec.corrupt_lambda_eff,
                      "negative-control hook: corrupt lambda_eff in the "
                      "compensation check");
    };

    CLI::App* sim = app.add_subcommand("simulate", "single runs / w0 scans");
    CLI::App* tsc = app.add_subcommand("tscan", "adiabatic-order scan over doubling T");
    CLI::App* con = app.add_subcommand("consistency", "identity and invariant audit");
    add_common(sim);
    add_common(tsc);
    add_common(con);

    CLI11_PARSE(app, argc, argv);

    try {
        if (!model_path.empty()) spec.model_path = model_path;
        if (builtin != "two-level")
            throw UnknownModelKind("unknown builtin model '" + builtin + "'");
        spec.T_list = parse_list(t_csv);
        if (!w0_csv.empty()) spec.w0_list = parse_list(w0_csv);

        RunReport rep;
        if (sim->parsed()) {
            rep = run_simulate(spec);
        } else if (tsc->parsed()) {
            rep = run_tscan(spec);
            for (const auto& v : rep.json["ratio_tests"])
                std::printf("%s %s: T=%g->%g ratio=%.4g window=[%g,%g]%s\n",
                            v["pass"].get<bool>() ? "PASS" : "FAIL",
                            v["name"].get<std::string>().c_str(),
                            v["T_low"].get<double>(), v["T_high"].get<double>(),
                            v["measured_ratio"].get<double>(),
                            v["window"][0].get<double>(), v["window"][1].get<double>(),
                            v.contains("note")
                                ? (" (" + v["note"].get<std::string>() + ")").c_str()
                                : "");
        } else {
            rep = run_consistency(spec);
            for (const auto& c : rep.json["checks"])
                std::printf("%s %s: measured=%.4g threshold=%.4g%s\n",
                            c["pass"].get<bool>() ? "PASS" : "FAIL",
                            c["name"].get<std::string>().c_str(),
                            c["measured"].get<double>(), c["threshold"].get<double>(),
                            c.contains("note")
                                ? (" (" + c["note"].get<std::string>() + ")").c_str()
                                : "");
            if (!rep.all_pass) {
                for (const auto& c : rep.json["checks"])
                    if (!c["pass"].get<bool>()) {
                        std::fprintf(stderr, "consistency: first failing check: %s\n",
                                     c["name"].get<std::string>().c_str());
                        break;
                    }
            }
        }
        return rep.all_pass ? 0 : 1;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error (input): %s\n", e.what());
        return 2;
    } catch (const UnknownModelKind& e) {
        std::fprintf(stderr, "error (input): %s\n", e.what());
        return 2;
    } catch (const DissipativityViolation& e) {
        std::fprintf(stderr, "error (input): %s\n", e.what());
        return 2;
    } catch (const TrackingLost& e) {
        std::fprintf(stderr, "error (tracking): %s\n", e.what());
        return 3;
    } catch (const NearDegenerate& e) {
        std::fprintf(stderr, "error (degeneracy): %s\n", e.what());
        return 3;
    } catch (const DefectivePair& e) {
        std::fprintf(stderr, "error (degeneracy): %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error (numerical): %s\n", e.what());
        return 1;
    }
}
