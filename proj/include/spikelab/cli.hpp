#pragma once

// Batch front end: read a JSON problem description, run one task, write
// machine-readable results (JSON reports plus CSV tables for plotting).
// Outputs are deterministic for a fixed config and seed, and every output
// file embeds the FNV-1a hash of the config file it was produced from.
//
// Exit codes: 0 success, 2 validation error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spikelab/auxiliary.hpp"
#include "spikelab/errors.hpp"
#include "spikelab/expansion.hpp"
#include "spikelab/expression.hpp"
#include "spikelab/geometry.hpp"
#include "spikelab/ground_state.hpp"
#include "spikelab/math_util.hpp"
#include "spikelab/predictor.hpp"

namespace spikelab::cli {

using nlohmann::json;

inline constexpr const char* grammar_help =
    "Expression grammar (J, V and implicit domains):\n"
    "  expr   := term { ('+'|'-') term }\n"
    "  term   := unary { ('*'|'/') unary }\n"
    "  unary  := '-' unary | power\n"
    "  power  := atom [ '^' unary ]          (right-associative)\n"
    "  atom   := NUMBER | 'x'INDEX | FUNC '(' expr ')' | '(' expr ')'\n"
    "  FUNC   := 'exp' | 'sin' | 'cos' | 'sqrt'\n"
    "Variables are x1..xN. '^' binds tighter than unary minus; exponents\n"
    "must be constant for differentiation.\n";

struct RunConfig {
    int n = 0;
    double p = 0.0;
    std::string task;
    json domain;
    std::string j_src = "1";
    std::string v_src = "1";
    std::vector<double> eps_schedule{0.2, 0.1, 0.05, 0.025};
    std::optional<std::vector<double>> q_point;
    int samples = 10000;
    int n_starts = 100;
    int validate_samples = 100000;
    std::uint64_t seed = 0;
    double ground_state_tol = 1e-12;
    double fd_step = 1e-3;
    std::string functional = "auto"; // GAMMA | SIGMA_BAR | auto
    QuadratureOptions quadrature;
    std::string out_dir = "out";
    std::string config_hash;
    json raw;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline const json& need(const json& j, const char* key) {
    if (!j.contains(key))
        throw ConfigError(std::string("config: missing required field '") +
                          key + "'");
    return j.at(key);
}

template <typename T> T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: field '") + key +
                          "' has the wrong type");
    }
}

inline Vector to_vector(const json& arr, int n, const char* key) {
    if (!arr.is_array() || static_cast<int>(arr.size()) != n)
        throw ConfigError(std::string("config: field '") + key +
                          "' must be an array of length N");
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = arr.at(i).get<double>();
    return v;
}

} // namespace detail

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    RunConfig cfg;
    {
        char hex[32];
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(fnv1a64(text)));
        cfg.config_hash = hex;
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: JSON parse error: ") +
                          e.what());
    }
    cfg.raw = j;
    cfg.n = detail::need(j, "N").get<int>();
    cfg.p = detail::need(j, "p").get<double>();
    if (cfg.n < 1) throw ConfigError("config: N must be >= 1");
    if (!(cfg.p > 1.0)) throw ConfigError("config: p must be > 1");
    if (cfg.n >= 3 && !(cfg.p < double(cfg.n + 2) / double(cfg.n - 2)))
        throw ConfigError(
            "config: supercritical exponent p = " + std::to_string(cfg.p) +
            "; subcriticality requires p < (N+2)/(N-2) = " +
            std::to_string(double(cfg.n + 2) / double(cfg.n - 2)));
    cfg.task = detail::get_or<std::string>(j, "task", "");
    if (j.contains("domain")) cfg.domain = j.at("domain");
    cfg.j_src = detail::get_or<std::string>(j, "J", "1");
    cfg.v_src = detail::get_or<std::string>(j, "V", "1");
    if (j.contains("eps_schedule")) {
        cfg.eps_schedule.clear();
        for (const auto& e : j.at("eps_schedule"))
            cfg.eps_schedule.push_back(e.get<double>());
    }
    if (j.contains("Q")) {
        std::vector<double> q;
        for (const auto& e : j.at("Q")) q.push_back(e.get<double>());
        cfg.q_point = q;
    }
    cfg.samples = detail::get_or<int>(j, "samples", cfg.samples);
    cfg.n_starts = detail::get_or<int>(j, "n_starts", cfg.n_starts);
    cfg.validate_samples =
        detail::get_or<int>(j, "validate_samples", cfg.validate_samples);
    cfg.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    cfg.ground_state_tol =
        detail::get_or<double>(j, "ground_state_tol", cfg.ground_state_tol);
    cfg.fd_step = detail::get_or<double>(j, "fd_step", cfg.fd_step);
    cfg.functional =
        detail::get_or<std::string>(j, "functional", cfg.functional);
    cfg.out_dir = detail::get_or<std::string>(j, "out_dir", cfg.out_dir);
    if (j.contains("quadrature")) {
        const json& q = j.at("quadrature");
        cfg.quadrature.truncation_radius = detail::get_or<double>(
            q, "truncation_radius", cfg.quadrature.truncation_radius);
        cfg.quadrature.max_depth =
            detail::get_or<int>(q, "max_depth", cfg.quadrature.max_depth);
    }
    if (!(cfg.ground_state_tol > 0.0) || !(cfg.fd_step > 0.0))
        throw ConfigError("config: tolerances must be positive");
    for (double e : cfg.eps_schedule)
        if (!(e > 0.0))
            throw ConfigError("config: eps_schedule must be positive");
    return cfg;
}

inline DomainSpec build_domain(const RunConfig& cfg) {
    const json& d = cfg.domain;
    if (d.is_null())
        throw ConfigError("config: missing required field 'domain'");
    if (d.contains("ball")) {
        const json& b = d.at("ball");
        Vector c = d.at("ball").contains("center")
                       ? detail::to_vector(b.at("center"), cfg.n, "center")
                       : Vector::Zero(cfg.n);
        return DomainSpec::ball(c, detail::need(b, "radius").get<double>());
    }
    if (d.contains("ellipsoid")) {
        const json& b = d.at("ellipsoid");
        Vector ax =
            detail::to_vector(detail::need(b, "semi_axes"), cfg.n,
                              "semi_axes");
        Vector c = b.contains("center")
                       ? detail::to_vector(b.at("center"), cfg.n, "center")
                       : Vector::Zero(cfg.n);
        return DomainSpec::ellipsoid(ax, c);
    }
    if (d.contains("implicit")) {
        const json& b = d.at("implicit");
        PotentialField phi = PotentialField::parse(
            detail::need(b, "expression").get<std::string>(), cfg.n);
        Vector lo =
            detail::to_vector(detail::need(b, "box_lo"), cfg.n, "box_lo");
        Vector hi =
            detail::to_vector(detail::need(b, "box_hi"), cfg.n, "box_hi");
        return DomainSpec(std::move(phi), lo, hi);
    }
    throw ConfigError("config: domain must be one of 'ball', 'ellipsoid', "
                      "'implicit'");
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw Error("cannot create output directory " + dir + ": " +
                    ec.message());
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

inline json manifest(const RunConfig& cfg, const std::string& task) {
    json m;
    m["config_hash"] = cfg.config_hash;
    m["task"] = task;
    m["N"] = cfg.n;
    m["p"] = cfg.p;
    m["seed"] = cfg.seed;
    m["J"] = cfg.j_src;
    m["V"] = cfg.v_src;
    m["ground_state_tol"] = cfg.ground_state_tol;
    m["eps_schedule"] = cfg.eps_schedule;
    m["quadrature"] = {{"truncation_radius", cfg.quadrature.truncation_radius},
                       {"max_depth", cfg.quadrature.max_depth},
                       {"rel_tol", cfg.quadrature.rel_tol}};
    m["stationarity_tol"] = 1e-9;
    m["boundary_constancy_threshold"] = ProblemData::bc_threshold;
    return m;
}

inline json point_to_json(const Vector& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline std::string csv_header(const RunConfig& cfg,
                              const std::string& columns) {
    return "# config_hash=" + cfg.config_hash + " seed=" +
           std::to_string(cfg.seed) + "\n" + columns + "\n";
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline ProblemData make_problem(const RunConfig& cfg, std::ostream& log) {
    DomainSpec domain = build_domain(cfg);
    PotentialField jf = PotentialField::parse(cfg.j_src, cfg.n);
    PotentialField vf = PotentialField::parse(cfg.v_src, cfg.n);
    AssumptionCertificate cj =
        validate_assumptions(jf, domain, cfg.validate_samples);
    if (!cj.passed)
        throw ConfigError("config: field 'J' violates positivity (sampled "
                          "minimum " +
                          std::to_string(cj.min_value) + " <= 0)");
    AssumptionCertificate cv =
        validate_assumptions(vf, domain, cfg.validate_samples);
    if (!cv.passed)
        throw ConfigError("config: field 'V' violates positivity (sampled "
                          "minimum " +
                          std::to_string(cv.min_value) + " <= 0)");
    log << "validated J (min " << cj.min_value << ", max |D2| "
        << cj.max_hessian_abs << ") and V (min " << cv.min_value
        << ", max |D2| " << cv.max_hessian_abs << ")\n";
    log << "solving ground state N=" << cfg.n << " p=" << cfg.p << " tol="
        << cfg.ground_state_tol << "\n";
    return ProblemData::make(cfg.n, cfg.p, std::move(domain), std::move(jf),
                             std::move(vf), cfg.ground_state_tol);
}

inline BoundaryPoint resolve_q(const RunConfig& cfg, const ProblemData& data) {
    if (!cfg.q_point)
        throw ConfigError("config: missing required field 'Q' for this task");
    if (static_cast<int>(cfg.q_point->size()) != cfg.n)
        throw ConfigError("config: field 'Q' must have N entries");
    Vector q = Eigen::Map<const Vector>(cfg.q_point->data(),
                                        cfg.q_point->size());
    return project_to_boundary(data.domain(), q);
}

inline json report_to_json(const CriticalPointReport& rep) {
    json r;
    r["location"] = point_to_json(rep.location.q);
    r["functional"] = to_string(rep.functional);
    r["value"] = rep.value;
    r["gradient_norm"] = rep.gradient_norm;
    json ev = json::array();
    for (int i = 0; i < rep.hessian_eigenvalues.size(); ++i)
        ev.push_back(rep.hessian_eigenvalues[i]);
    r["hessian_eigenvalues"] = ev;
    r["classification"] = to_string(rep.kind);
    r["nondegenerate"] = rep.nondegenerate;
    json tags = json::array();
    if (rep.tag_thm1a) tags.push_back("Thm1a");
    if (rep.tag_thm1b) tags.push_back("Thm1b");
    if (rep.tag_thm2) tags.push_back("Thm2");
    r["theorem_tags"] = tags;
    r["converged"] = rep.converged;
    r["iterations"] = rep.iterations;
    r["hessian_check"] = rep.hessian_check;
    r["degenerate_family"] = rep.degenerate_family;
    r["family_size"] = rep.family_size;
    return r;
}

} // namespace detail

/// Run one task. Streams progress to `log`; returns the process exit code.
inline int run_task(const std::string& config_path,
                    const std::optional<std::string>& out_override,
                    const std::optional<std::uint64_t>& seed_override,
                    const std::string& task_arg, std::ostream& log) {
    RunConfig cfg;
    try {
        cfg = parse_config(config_path);
        if (seed_override) cfg.seed = *seed_override;
        if (out_override) cfg.out_dir = *out_override;
        if (!task_arg.empty()) {
            if (!cfg.task.empty() && cfg.task != task_arg)
                throw ConfigError("config: field 'task' (" + cfg.task +
                                  ") disagrees with the command line task (" +
                                  task_arg + ")");
            cfg.task = task_arg;
        }
        if (cfg.task.empty())
            throw ConfigError("config: missing required field 'task'");
    } catch (const Error& e) {
        log << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        detail::ensure_dir(cfg.out_dir);
        const std::string base = cfg.out_dir + "/";

        if (cfg.task == "ground-state") {
            RadialProfile prof =
                solve_ground_state(cfg.n, cfg.p, cfg.ground_state_tol);
            save_profile(prof, base + "profile.csv");
            json rep;
            rep["manifest"] = detail::manifest(cfg, cfg.task);
            rep["alpha"] = prof.alpha;
            rep["achieved_tol"] = prof.tol;
            rep["c_tail"] = prof.c_tail;
            rep["r_max"] = prof.r_max();
            rep["grid_points"] = prof.size();
            rep["nehari_residual"] = nehari_residual(prof);
            rep["pohozaev_residual"] = pohozaev_residual(prof);
            detail::write_text(base + "ground_state.json", rep.dump(2) + "\n");
            log << "ground state: alpha = " << prof.alpha << "\n";
            return 0;
        }

        ProblemData data = detail::make_problem(cfg, log);

        if (cfg.task == "constants") {
            BoundaryPoint q =
                cfg.q_point ? detail::resolve_q(cfg, data)
                            : sample_boundary(data.domain(), 1, cfg.seed)[0];
            ExpansionConstants k = constants(data, q);
            json rep;
            rep["manifest"] = detail::manifest(cfg, cfg.task);
            rep["Q"] = detail::point_to_json(q.q);
            rep["c0"] = k.c0;
            rep["A_bar"] = k.a_bar;
            rep["B_bar"] = k.b_bar;
            rep["C1"] = k.c1;
            rep["C2"] = k.c2;
            rep["k1"] = k.k1;
            rep["k2"] = k.k2;
            rep["k3"] = k.k3;
            rep["k4"] = k.k4;
            rep["gamma"] = gamma_value(data, q);
            rep["mean_curvature"] = q.mean_curvature;
            detail::write_text(base + "constants.json", rep.dump(2) + "\n");
            return 0;
        }

        if (cfg.task == "landscape") {
            BoundaryFunctional func;
            if (cfg.functional == "GAMMA")
                func = BoundaryFunctional::GAMMA;
            else if (cfg.functional == "SIGMA_BAR")
                func = BoundaryFunctional::SIGMA_BAR;
            else
                func = data.boundary_variation_of_gamma() >=
                               ProblemData::bc_threshold
                           ? BoundaryFunctional::GAMMA
                           : BoundaryFunctional::SIGMA_BAR;
            auto table = scan_landscape(data, func, cfg.samples, cfg.seed);
            std::string cols;
            for (int i = 0; i < cfg.n; ++i)
                cols += "x" + std::to_string(i + 1) + ",";
            cols += "value";
            std::string csv = detail::csv_header(cfg, cols);
            for (const ScanEntry& e : table) {
                for (int i = 0; i < cfg.n; ++i)
                    csv += detail::fmt(e.point.q[i]) + ",";
                csv += detail::fmt(e.value) + "\n";
            }
            detail::write_text(base + "landscape.csv", csv);
            json rep;
            rep["manifest"] = detail::manifest(cfg, cfg.task);
            rep["functional"] = to_string(func);
            rep["rows"] = table.size();
            detail::write_text(base + "landscape.json", rep.dump(2) + "\n");
            return 0;
        }

        if (cfg.task == "predict") {
            PredictorOptions popts;
            popts.n_starts = cfg.n_starts;
            popts.seed = cfg.seed;
            auto reports = predict_concentration(data, popts);
            json rep;
            rep["manifest"] = detail::manifest(cfg, cfg.task);
            json arr = json::array();
            for (const CriticalPointReport& r : reports)
                arr.push_back(detail::report_to_json(r));
            rep["reports"] = arr;
            detail::write_text(base + "predictions.json", rep.dump(2) + "\n");
            std::string cols;
            for (int i = 0; i < cfg.n; ++i)
                cols += "x" + std::to_string(i + 1) + ",";
            cols += "functional,value,gradient_norm,classification,"
                    "nondegenerate,tags,family_size";
            std::string csv = detail::csv_header(cfg, cols);
            for (const CriticalPointReport& r : reports) {
                for (int i = 0; i < cfg.n; ++i)
                    csv += detail::fmt(r.location.q[i]) + ",";
                csv += std::string(to_string(r.functional)) + "," +
                       detail::fmt(r.value) + "," +
                       detail::fmt(r.gradient_norm) + "," +
                       to_string(r.kind) + "," +
                       (r.nondegenerate ? "1" : "0") + ",";
                std::string tags;
                if (r.tag_thm1a) tags += "Thm1a";
                if (r.tag_thm1b) tags += tags.empty() ? "Thm1b" : "+Thm1b";
                if (r.tag_thm2) tags += tags.empty() ? "Thm2" : "+Thm2";
                if (tags.empty()) tags = "none";
                csv += tags + "," + std::to_string(r.family_size) + "\n";
            }
            detail::write_text(base + "predictions.csv", csv);
            log << "predict: " << reports.size() << " stationary reports\n";
            return 0;
        }

        if (cfg.task == "verify-expansion") {
            BoundaryPoint q = detail::resolve_q(cfg, data);
            ExpansionReport r =
                verify_expansion(data, q, cfg.eps_schedule, cfg.quadrature);
            json rep;
            rep["manifest"] = detail::manifest(cfg, cfg.task);
            rep["Q"] = detail::point_to_json(r.q);
            rep["c0_gamma"] = r.c0_gamma;
            rep["eps"] = r.eps;
            rep["energy"] = r.energy;
            rep["slope"] = r.slope;
            rep["slope_extrapolated"] = r.slope_extrapolated;
            rep["remainder_exponent"] = r.remainder_exponent;
            rep["target_sigma"] = r.target_sigma;
            rep["relative_mismatch"] = r.relative_mismatch;
            detail::write_text(base + "expansion.json", rep.dump(2) + "\n");
            std::string csv = detail::csv_header(
                cfg, "eps,E,slope,target_sigma,mismatch");
            for (std::size_t i = 0; i < r.eps.size(); ++i)
                csv += detail::fmt(r.eps[i]) + "," + detail::fmt(r.energy[i]) +
                       "," + detail::fmt(r.slope[i]) + "," +
                       detail::fmt(r.target_sigma) + "," +
                       detail::fmt(r.relative_mismatch) + "\n";
            detail::write_text(base + "expansion.csv", csv);
            log << "verify-expansion: slope " << r.slope_extrapolated
                << " vs Sigma " << r.target_sigma << " (mismatch "
                << r.relative_mismatch << ")\n";
            return 0;
        }

        if (cfg.task == "verify-proposition") {
            BoundaryPoint q = detail::resolve_q(cfg, data);
            auto table =
                verify_proposition(data, q, cfg.eps_schedule, cfg.quadrature);
            json rep;
            rep["manifest"] = detail::manifest(cfg, cfg.task);
            json rows = json::array();
            std::string csv =
                detail::csv_header(cfg, "estimate,eps,residual,exponent,pass");
            for (const ResidualDecay& row : table) {
                json r;
                r["estimate"] = row.name;
                r["residual"] = row.residual;
                r["exponent"] = row.identically_zero
                                    ? json("identically_zero")
                                    : json(row.exponent);
                r["pass"] = row.pass;
                rows.push_back(r);
                for (std::size_t i = 0; i < cfg.eps_schedule.size(); ++i)
                    csv += row.name + "," +
                           detail::fmt(cfg.eps_schedule[i]) + "," +
                           detail::fmt(row.residual[i]) + "," +
                           detail::fmt(row.exponent) + "," +
                           (row.pass ? "1" : "0") + "\n";
            }
            rep["estimates"] = rows;
            detail::write_text(base + "proposition.json", rep.dump(2) + "\n");
            detail::write_text(base + "proposition.csv", csv);
            return 0;
        }

        if (cfg.task == "verify-gradient") {
            BoundaryPoint q = detail::resolve_q(cfg, data);
            GradientExpansionReport r = verify_gradient_expansion(
                data, q, cfg.eps_schedule, cfg.fd_step, cfg.quadrature);
            json rep;
            rep["manifest"] = detail::manifest(cfg, cfg.task);
            rep["Q"] = detail::point_to_json(q.q);
            json rows = json::array();
            std::string csv = detail::csv_header(
                cfg, "eps,component,measured,target,mismatch");
            for (std::size_t i = 0; i < r.eps.size(); ++i) {
                json row;
                row["eps"] = r.eps[i];
                row["mismatch"] = r.mismatch[i];
                row["residual_scale"] = r.residual_scale[i];
                json mv = json::array(), tv = json::array();
                for (int c = 0; c < r.measured[i].size(); ++c) {
                    mv.push_back(r.measured[i][c]);
                    tv.push_back(r.target[i][c]);
                    csv += detail::fmt(r.eps[i]) + "," + std::to_string(c) +
                           "," + detail::fmt(r.measured[i][c]) + "," +
                           detail::fmt(r.target[i][c]) + "," +
                           detail::fmt(r.mismatch[i]) + "\n";
                }
                row["measured"] = mv;
                row["target"] = tv;
                rows.push_back(row);
            }
            rep["rows"] = rows;
            detail::write_text(base + "gradient.json", rep.dump(2) + "\n");
            detail::write_text(base + "gradient.csv", csv);
            return 0;
        }

        log << "error: unknown task '" << cfg.task << "'\n";
        return 2;
    } catch (const ConfigError& e) {
        log << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        log << "error: " << e.what() << "\n";
        return 2;
    } catch (const PreconditionError& e) {
        log << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        log << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        log << "numerical failure: " << e.what() << "\n";
        return 3;
    }
}

} // namespace spikelab::cli
