#pragma once

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "flexbeam/search.hpp"
#include "flexbeam/verify.hpp"

namespace flexbeam {

using json = nlohmann::json;

inline bool log_enabled() {
    const char* v = std::getenv("FLEXBEAM_LOG");
    return v != nullptr && *v != '\0' && std::string(v) != "0" && std::string(v) != "quiet";
}

template <typename... Args>
void log_line(const char* fmt, Args... args) {
    if (!log_enabled()) return;
    std::fprintf(stderr, "[flexbeam] ");
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
}

// ============================================================================
// Problem specification files (structured key-value text)
// ============================================================================

/// Parsed batch job: problem kind, data, discretisation, search policy and
/// output options, plus the normalised key/value echo that reproduces it.
struct ProblemSpec {
    ProblemKind problem = ProblemKind::E1;
    bool constrained = false;
    ModelParams params;
    std::string w_text = "0";
    std::string f_r_text = "0";
    std::string f_p_text = "0";
    int n = 64;
    std::vector<Break> breaks;
    std::string mode = "solve"; ///< pipeline used by sweep jobs
    int k_max = 4;
    std::int64_t exhaustive_cap = 100000;
    bool refine = false;
    std::string candidates = "all";
    std::string sweep_field;
    std::vector<std::string> sweep_values;
    double tol = 1e-9;
    std::string out_dir = ".";
    std::map<std::string, std::string> echo;

    C2Function make_w() const { return make_function(w_text); }
    LoadField make_f_r() const { return LoadField::from_expression(f_r_text); }
    LoadField make_f_p() const { return LoadField::from_expression(f_p_text); }
    BreakConfig make_breaks() const { return BreakConfig(breaks); }

    static C2Function make_function(const std::string& text) {
        const std::string prefix = "spline:";
        if (text.rfind(prefix, 0) == 0) {
            std::vector<double> xs, ys;
            std::string body = text.substr(prefix.size());
            std::istringstream is(body);
            std::string knot;
            while (std::getline(is, knot, ';')) {
                const auto comma = knot.find(',');
                if (comma == std::string::npos)
                    throw SpecParseError("spline knot needs 'x,y': '" + knot + "'");
                xs.push_back(std::stod(knot.substr(0, comma)));
                ys.push_back(std::stod(knot.substr(comma + 1)));
            }
            return C2Function::from_spline(CubicSpline(std::move(xs), std::move(ys)));
        }
        return C2Function::from_expression(text);
    }
};

namespace detail_io {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_double(const std::string& v, const std::string& where) {
    try {
        size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw SpecParseError(where + ": malformed number '" + v + "'");
    }
}

inline bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw SpecParseError(where + ": expected a boolean, got '" + v + "'");
}

inline BreakKind parse_kind(const std::string& v, const std::string& where) {
    if (v == "crack") return BreakKind::Crack;
    if (v == "crease") return BreakKind::Crease;
    if (v == "hinge") return BreakKind::Hinge;
    throw SpecParseError(where + ": unknown break kind '" + v + "'");
}

} // namespace detail_io

inline ProblemSpec parse_spec_text(const std::string& text, const std::string& origin = "<spec>") {
    ProblemSpec spec;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    bool f_alias = false;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail_io::trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw SpecParseError(where + ": expected 'key = value'");
        const std::string key = detail_io::trim(line.substr(0, eq));
        const std::string value = detail_io::trim(line.substr(eq + 1));
        if (key.empty()) throw SpecParseError(where + ": empty key");

        if (key == "problem") {
            if (value == "E1")
                spec.problem = ProblemKind::E1;
            else if (value == "F1")
                spec.problem = ProblemKind::F1;
            else if (value == "G1")
                spec.problem = ProblemKind::G1;
            else
                throw SpecParseError(where + ": problem must be E1, F1 or G1, got '" + value + "'");
        } else if (key == "constrained") {
            spec.constrained = detail_io::parse_bool(value, where);
        } else if (key == "eta") {
            spec.params.eta = detail_io::parse_double(value, where);
        } else if (key == "mu") {
            spec.params.mu = detail_io::parse_double(value, where);
        } else if (key == "gamma") {
            spec.params.gamma = detail_io::parse_double(value, where);
        } else if (key == "alpha") {
            spec.params.alpha = detail_io::parse_double(value, where);
        } else if (key == "beta") {
            spec.params.beta = detail_io::parse_double(value, where);
        } else if (key == "sigma") {
            spec.params.sigma = detail_io::parse_double(value, where);
        } else if (key == "w") {
            spec.w_text = value;
        } else if (key == "f") {
            spec.f_r_text = value;
            f_alias = true;
        } else if (key == "f_r") {
            spec.f_r_text = value;
        } else if (key == "f_p") {
            spec.f_p_text = value;
        } else if (key == "n") {
            spec.n = static_cast<int>(detail_io::parse_double(value, where));
            if (spec.n < 2) throw SpecParseError(where + ": n must be at least 2");
        } else if (key == "breaks") {
            spec.breaks.clear();
            for (const std::string& item : detail_io::split(value, ',')) {
                const auto colon = item.find(':');
                if (colon == std::string::npos)
                    throw SpecParseError(where + ": break entries look like '0.5:crease', got '" + item + "'");
                Break b;
                b.x = detail_io::parse_double(detail_io::trim(item.substr(0, colon)), where);
                b.kind = detail_io::parse_kind(detail_io::trim(item.substr(colon + 1)), where);
                spec.breaks.push_back(b);
            }
        } else if (key == "mode") {
            if (value != "solve" && value != "search")
                throw SpecParseError(where + ": mode must be solve or search, got '" + value + "'");
            spec.mode = value;
        } else if (key == "k_max") {
            spec.k_max = static_cast<int>(detail_io::parse_double(value, where));
        } else if (key == "exhaustive_cap") {
            spec.exhaustive_cap = static_cast<std::int64_t>(detail_io::parse_double(value, where));
        } else if (key == "refine_positions") {
            spec.refine = detail_io::parse_bool(value, where);
        } else if (key == "candidates") {
            spec.candidates = value;
        } else if (key == "sweep_field") {
            spec.sweep_field = value;
        } else if (key == "sweep_values") {
            spec.sweep_values = detail_io::split(value, ',');
        } else if (key == "tol") {
            spec.tol = detail_io::parse_double(value, where);
        } else if (key == "out") {
            spec.out_dir = value;
        } else {
            throw SpecParseError(where + ": unknown key '" + key + "'");
        }
        spec.echo[key] = value;
    }
    (void)f_alias;
    validate_params(spec.params, spec.problem);
    return spec;
}

inline ProblemSpec parse_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecParseError("cannot read spec file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_spec_text(buf.str(), path);
}

/// Reconstructs spec text from an echo map (self-containment of results).
inline std::string spec_text_from_echo(const std::map<std::string, std::string>& echo) {
    std::ostringstream os;
    for (const auto& [k, v] : echo) os << k << " = " << v << "\n";
    return os.str();
}

// ============================================================================
// JSON serialisation
// ============================================================================

inline json to_json(const EnergyBreakdown& e) {
    return json{{"damage", e.damage},     {"bending_r", e.bending_r}, {"load_r", e.load_r},
                {"glue", e.glue},         {"bending_p", e.bending_p}, {"load_p", e.load_p},
                {"plastic", e.plastic},   {"total", e.total}};
}

inline json to_json(const BreakConfig& K) {
    json arr = json::array();
    for (const Break& b : K.items()) arr.push_back(json{{"x", b.x}, {"kind", to_string(b.kind)}});
    return arr;
}

inline json to_json(const BreakTraceEntry& t) {
    auto num = [](double v) -> json {
        if (std::isnan(v)) return nullptr;
        return v;
    };
    return json{{"x", t.x},
                {"kind", to_string(t.kind)},
                {"endpoint", t.endpoint},
                {"d2_minus", num(t.d2_minus)},
                {"d2_plus", num(t.d2_plus)},
                {"d3_minus", num(t.d3_minus)},
                {"d3_plus", num(t.d3_plus)},
                {"d3_jump", num(t.d3_jump)},
                {"n2_minus", num(t.n2_minus)},
                {"n2_plus", num(t.n2_plus)},
                {"n3_minus", num(t.n3_minus)},
                {"n3_plus", num(t.n3_plus)},
                {"n3_jump", num(t.n3_jump)}};
}

inline json to_json(const VerificationReport& r) {
    json out;
    out["conditions"] = r.conditions;
    out["stationarity"] = r.stationarity;
    out["energy_recomputed"] = r.energy_recomputed;
    json breaks = json::array();
    for (const auto& t : r.breaks) breaks.push_back(to_json(t));
    out["breaks"] = breaks;
    if (r.euler) {
        out["euler"] = json{{"lifted_total", r.euler->lifted_total},
                            {"lifted_r", r.euler->lifted_r},
                            {"lifted_p", r.euler->lifted_p},
                            {"per_piece", r.euler->per_piece},
                            {"distributional", r.euler->distributional},
                            {"plate", r.euler->plate},
                            {"sum_equation", r.euler->sum_equation},
                            {"distributional_sum", r.euler->distributional_sum},
                            {"combined", r.euler->combined}};
    }
    if (r.compliance) {
        out["compliance"] = json{{"lhs", r.compliance->lhs},
                                 {"rhs", r.compliance->rhs},
                                 {"gap", r.compliance->gap},
                                 {"rel_gap", r.compliance->rel_gap},
                                 {"homogeneous", r.compliance->homogeneous},
                                 {"corrections", r.compliance->corrections},
                                 {"correction_total", r.compliance->correction_total}};
    }
    if (r.threshold) {
        out["threshold"] = json{{"problem", to_string(r.threshold->problem)},
                                {"term_load_r", r.threshold->term_load_r},
                                {"term_load_sum", r.threshold->term_load_sum},
                                {"term_wbend", r.threshold->term_wbend},
                                {"term_fw", r.threshold->term_fw},
                                {"smooth_min", r.threshold->smooth_min},
                                {"beta", r.threshold->beta},
                                {"lhs", r.threshold->lhs},
                                {"rhs", r.threshold->rhs},
                                {"margin", r.threshold->margin},
                                {"holds", r.threshold->holds},
                                {"poincare", r.threshold->poincare},
                                {"poincare_n", r.threshold->poincare_n}};
    }
    if (r.vi) {
        json nodes = json::array();
        for (const auto& n : r.vi->nodes)
            nodes.push_back(json{{"node", n.node},
                                 {"side", n.side == Side::Left ? "L" : "R"},
                                 {"gap", n.gap},
                                 {"lambda", n.lambda},
                                 {"comp", n.comp}});
        json contact = json::array();
        for (const auto& t : r.vi->contact_breaks) contact.push_back(to_json(t));
        json off = json::array();
        for (const auto& t : r.vi->offcontact_breaks) off.push_back(to_json(t));
        out["vi"] = json{{"stationarity", r.vi->stationarity},
                         {"stationarity_r", r.vi->stationarity_r},
                         {"stationarity_p", r.vi->stationarity_p},
                         {"complementarity", r.vi->complementarity},
                         {"min_lambda", r.vi->min_lambda},
                         {"min_gap", r.vi->min_gap},
                         {"nodes", nodes},
                         {"contact_breaks", contact},
                         {"offcontact_breaks", off},
                         {"min_contact_d2_plus", r.vi->min_contact_d2_plus},
                         {"min_contact_d2_minus", r.vi->min_contact_d2_minus},
                         {"recorded_contact_d3", r.vi->recorded_contact_d3},
                         {"offcontact_distributional", r.vi->offcontact_distributional}};
    }
    if (!r.hinge_jumps.empty()) out["hinge_jumps"] = r.hinge_jumps;
    if (!r.hinge_gradients.empty()) out["hinge_gradients"] = r.hinge_gradients;
    return out;
}

// ============================================================================
// Artifacts
// ============================================================================

/// Solution CSV: node samples with duplicated rows at break nodes carrying
/// L/R side markers (RFC 4180, CRLF line endings).
inline std::string solution_csv(ProblemKind problem, const SolveReport& sol) {
    const Mesh& m = sol.u_r.mesh();
    std::ostringstream os;
    const bool pair = problem != ProblemKind::E1;
    os << (pair ? "x,side,u_r,du_r,u_p,du_p" : "x,side,u,du") << "\r\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    auto row = [&](int node, const char* side, Side s) {
        os << num(m.node(node)) << ',' << side;
        os << ',' << num(sol.u_r.trace(node, 0, s)) << ',' << num(sol.u_r.trace(node, 1, s));
        if (pair) os << ',' << num(sol.u_p->trace(node, 0, s)) << ',' << num(sol.u_p->trace(node, 1, s));
        os << "\r\n";
    };
    for (int i = 0; i < m.num_nodes(); ++i) {
        const bool is_break = m.break_at(i).has_value();
        const bool has_left = i > 0;
        const bool has_right = i < m.num_nodes() - 1;
        if (is_break) {
            if (has_left) row(i, "L", Side::Left);
            if (has_right) row(i, "R", Side::Right);
        } else {
            row(i, "", has_right ? Side::Right : Side::Left);
        }
    }
    return os.str();
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << content;
    }
    fs::rename(tmp, path);
}

/// Full result document for a solve or search run.
struct RunArtifacts {
    json result;
    std::string csv;
};

namespace detail_io {

inline std::vector<int> candidate_nodes(const ProblemSpec& spec, const Mesh& m) {
    if (spec.candidates == "all" || spec.candidates.empty()) return {};
    std::vector<int> nodes;
    for (const std::string& tok : split(spec.candidates, ',')) {
        const double x = parse_double(tok, "candidates");
        const int node = m.node_at(x);
        if (node < 0) throw SpecParseError("candidate position is not a mesh node: " + tok);
        nodes.push_back(node);
    }
    return nodes;
}

} // namespace detail_io

inline RunArtifacts run_job(const ProblemSpec& spec, bool do_search) {
    validate_params(spec.params, spec.problem);
    const C2Function w = spec.make_w();
    const LoadField f_r = spec.make_f_r();
    const LoadField f_p = spec.make_f_p();

    SearchProblem sp{spec.problem, spec.constrained, spec.params, w, f_r, f_p};
    SolveOptions opt{spec.tol, 500};

    BreakConfig K = spec.make_breaks();
    json search_info;
    SolveReport* solp = nullptr;
    std::optional<SolveReport> sol;
    if (do_search) {
        const Mesh base = build_mesh(spec.n, BreakConfig{});
        SearchPolicy policy;
        policy.k_max = spec.k_max;
        policy.exhaustive_cap = spec.exhaustive_cap;
        policy.refine_positions = spec.refine;
        policy.solve = opt;
        policy.candidate_nodes = detail_io::candidate_nodes(spec, base);
        SearchResult res = search(sp, base, policy);
        if (spec.refine) res = refine_positions(sp, base, policy, res);
        K = res.best;
        json near = json::array();
        for (const BreakConfig& cfg : res.near_optimal) near.push_back(to_json(cfg));
        search_info = json{{"explored", res.explored},
                           {"certificate", to_string(res.certificate)},
                           {"near_optimal", near}};
        sol = std::move(res.report);
    } else {
        const Mesh m = build_mesh(spec.n, K);
        sol = solve_fixed(sp, K, m, opt);
    }
    solp = &*sol;

    const Mesh& m = solp->u_r.mesh();
    VerifyInputs vin{spec.problem, spec.constrained, spec.params, w, f_r, f_p, K,
                     std::max(512, spec.n), true};
    const VerificationReport ver = verify_solution(vin, *solp, m);

    json out;
    out["problem"] = to_string(spec.problem);
    out["constrained"] = spec.constrained;
    out["params"] = json{{"eta", spec.params.eta},     {"mu", spec.params.mu},
                         {"gamma", spec.params.gamma}, {"alpha", spec.params.alpha},
                         {"beta", spec.params.beta},   {"sigma", spec.params.sigma}};
    out["n"] = spec.n;
    out["tol"] = spec.tol;
    out["breaks"] = to_json(K);
    out["energy"] = to_json(solp->energy);
    out["solver"] = json{{"iterations", solp->iterations},
                         {"kkt_residual", solp->kkt_residual},
                         {"active_set", solp->active_set},
                         {"hinge_jumps", solp->hinge_jumps}};
    json dofs;
    dofs["u_r"] = std::vector<double>(solp->u_r.dofs().data(), solp->u_r.dofs().data() + solp->u_r.dofs().size());
    if (solp->u_p)
        dofs["u_p"] =
            std::vector<double>(solp->u_p->dofs().data(), solp->u_p->dofs().data() + solp->u_p->dofs().size());
    out["dofs"] = dofs;
    out["verification"] = to_json(ver);
    if (do_search) out["search"] = search_info;
    out["spec_echo"] = spec.echo;

    return RunArtifacts{std::move(out), solution_csv(spec.problem, *solp)};
}

/// Re-checks a stored result document: rebuilds the problem from the spec
/// echo, reloads the stored DOFs, recomputes the energy and the full
/// verification report. Reporting only; never fails the process.
inline json verify_stored(const json& stored) {
    std::map<std::string, std::string> echo = stored.at("spec_echo").get<std::map<std::string, std::string>>();
    ProblemSpec spec = parse_spec_text(spec_text_from_echo(echo), "<echo>");
    std::vector<Break> breaks;
    for (const auto& b : stored.at("breaks"))
        breaks.push_back({b.at("x").get<double>(),
                          detail_io::parse_kind(b.at("kind").get<std::string>(), "<breaks>")});
    const BreakConfig K(breaks);
    const Mesh m = build_mesh(spec.n, K);
    const DofMap dm_r(m, true);
    const std::vector<double> ur_vals = stored.at("dofs").at("u_r").get<std::vector<double>>();
    if (static_cast<int>(ur_vals.size()) != dm_r.size())
        throw SpecParseError("stored u_r DOF vector does not match the mesh");
    Vec ur = Eigen::Map<const Vec>(ur_vals.data(), static_cast<Eigen::Index>(ur_vals.size()));
    std::optional<PiecewiseDisplacement> up;
    if (stored.at("dofs").contains("u_p")) {
        const DofMap dm_p(m, false);
        const std::vector<double> up_vals = stored.at("dofs").at("u_p").get<std::vector<double>>();
        if (static_cast<int>(up_vals.size()) != dm_p.size())
            throw SpecParseError("stored u_p DOF vector does not match the mesh");
        up = PiecewiseDisplacement(m, dm_p, Eigen::Map<const Vec>(up_vals.data(),
                                                                  static_cast<Eigen::Index>(up_vals.size())));
    }
    SolveReport sol{PiecewiseDisplacement(m, dm_r, ur), std::move(up), {}, 0.0, 0, {}, {}};
    if (stored.contains("solver") && stored.at("solver").contains("hinge_jumps"))
        sol.hinge_jumps = stored.at("solver").at("hinge_jumps").get<std::vector<double>>();

    const C2Function w = spec.make_w();
    const LoadField f_r = spec.make_f_r();
    const LoadField f_p = spec.make_f_p();
    VerifyInputs vin{spec.problem, spec.constrained, spec.params, w, f_r, f_p, K, std::max(512, spec.n),
                     true};
    const VerificationReport ver = verify_solution(vin, sol, m);

    json out;
    out["energy_stored"] = stored.at("energy").at("total").get<double>();
    out["energy_recomputed"] = ver.energy_recomputed;
    out["energy_match"] =
        std::fabs(out["energy_stored"].get<double>() - ver.energy_recomputed) <=
        1e-12 * std::max(1.0, std::fabs(ver.energy_recomputed));
    out["verification"] = to_json(ver);
    return out;
}

// ============================================================================
// Sweep
// ============================================================================

/// Applies `field = token` to a copy of the spec.
inline ProblemSpec spec_with_field(const ProblemSpec& base, const std::string& field,
                                   const std::string& token) {
    std::map<std::string, std::string> echo = base.echo;
    echo[field] = token;
    echo.erase("sweep_field");
    echo.erase("sweep_values");
    return parse_spec_text(spec_text_from_echo(echo), "<sweep>");
}

inline std::string sanitize_token(const std::string& tok) {
    std::string out;
    for (char c : tok)
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+') ? c : '_';
    return out;
}

/// Runs one job per sweep value concurrently (jobs threads), writes one
/// JSON per value plus an index CSV of (value, break count, energy).
inline void run_sweep(const ProblemSpec& spec, int jobs, const std::filesystem::path& out_dir) {
    if (spec.sweep_field.empty() || spec.sweep_values.empty())
        throw SpecParseError("sweep needs sweep_field and sweep_values");
    static const std::vector<std::string> allowed = {"eta", "mu", "gamma", "alpha", "beta", "sigma", "n", "tol"};
    if (std::find(allowed.begin(), allowed.end(), spec.sweep_field) == allowed.end())
        throw SpecParseError("sweep_field must be a scalar field (eta, mu, gamma, alpha, beta, sigma, n, tol)");

    const size_t count = spec.sweep_values.size();
    std::vector<json> results(count);
    std::vector<std::string> errors(count);
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                const ProblemSpec job = spec_with_field(spec, spec.sweep_field, spec.sweep_values[i]);
                RunArtifacts art = run_job(job, job.mode == "search");
                results[i] = std::move(art.result);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const int nthreads = std::max(1, jobs);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    for (size_t i = 0; i < count; ++i)
        if (!errors[i].empty())
            throw Error("sweep value '" + spec.sweep_values[i] + "' failed: " + errors[i]);

    std::ostringstream index;
    index << spec.sweep_field << ",breaks,energy\r\n";
    char buf[64];
    for (size_t i = 0; i < count; ++i) {
        const std::string name = "sweep_" + spec.sweep_field + "_" + sanitize_token(spec.sweep_values[i]);
        write_atomic(out_dir / (name + ".json"), results[i].dump(2) + "\n");
        std::snprintf(buf, sizeof buf, "%.17g", results[i].at("energy").at("total").get<double>());
        index << spec.sweep_values[i] << ',' << results[i].at("breaks").size() << ',' << buf << "\r\n";
    }
    write_atomic(out_dir / "sweep_index.csv", index.str());
}

} // namespace flexbeam
