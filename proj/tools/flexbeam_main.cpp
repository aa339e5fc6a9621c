// Batch front-end: solve / search / verify / sweep / poincare pipelines over
// problem-spec files, emitting JSON results and CSV solution samples.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "flexbeam/flexbeam.hpp"

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"flexbeam: energy minimisation for reinforced clamped beams with free breaks"};
    app.require_subcommand(1);

    std::string spec_path, out_override, result_path;
    int n_override = 0;
    double tol_override = 0.0;
    int jobs = 1;
    int pc_n = 512;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--spec", spec_path, "problem spec file")->required();
        cmd->add_option("--n", n_override, "override the mesh resolution");
        cmd->add_option("--out", out_override, "output directory");
        cmd->add_option("--tol", tol_override, "override the solver tolerance");
        cmd->add_option("--jobs", jobs, "concurrent jobs (sweep mode)");
    };

    CLI::App* cmd_solve = app.add_subcommand("solve", "inner solve with the spec's fixed break set");
    add_common(cmd_solve);
    CLI::App* cmd_search = app.add_subcommand("search", "outer search over break configurations");
    add_common(cmd_search);
    CLI::App* cmd_sweep = app.add_subcommand("sweep", "one run per sweep value, plus an index CSV");
    add_common(cmd_sweep);
    CLI::App* cmd_verify = app.add_subcommand("verify", "re-check a stored result JSON");
    cmd_verify->add_option("result", result_path, "result JSON to verify")->required();
    CLI::App* cmd_poincare = app.add_subcommand("poincare", "print the clamped-beam Poincare constant");
    cmd_poincare->add_option("--n", pc_n, "eigensolve resolution");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_name() == "CallForHelp" ? 0 : 64;
    }

    using namespace flexbeam;
    try {
        if (cmd_poincare->parsed()) {
            std::printf("%.12g\n", poincare_constant(pc_n));
            return 0;
        }
        if (cmd_verify->parsed()) {
            std::ifstream in(result_path);
            if (!in) {
                std::fprintf(stderr, "cannot read '%s'\n", result_path.c_str());
                return 2;
            }
            const json stored = json::parse(in);
            std::cout << verify_stored(stored).dump(2) << "\n";
            return 0;
        }

        ProblemSpec spec = parse_spec_file(spec_path);
        CLI::App* sub = app.get_subcommands().front();
        if (sub->count("--n") > 0) {
            spec.n = n_override;
            spec.echo["n"] = std::to_string(n_override);
        }
        if (sub->count("--tol") > 0) {
            spec.tol = tol_override;
            spec.echo["tol"] = format_double(tol_override);
        }
        const std::filesystem::path out_dir = out_override.empty() ? spec.out_dir : out_override;

        if (cmd_sweep->parsed()) {
            run_sweep(spec, jobs, out_dir);
            log_line("sweep finished: %zu values -> %s", spec.sweep_values.size(), out_dir.c_str());
            std::printf("%s\n", (out_dir / "sweep_index.csv").c_str());
            return 0;
        }

        const bool do_search = cmd_search->parsed();
        RunArtifacts art = run_job(spec, do_search);
        write_atomic(out_dir / "result.json", art.result.dump(2) + "\n");
        write_atomic(out_dir / "solution.csv", art.csv);
        std::printf("%s energy=%s breaks=%zu -> %s\n", to_string(spec.problem),
                    format_double(art.result.at("energy").at("total").get<double>()).c_str(),
                    art.result.at("breaks").size(), (out_dir / "result.json").c_str());
        return 0;
    } catch (const ParamViolation& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const SpecParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "failure: %s\n", e.what());
        return 3;
    }
}
