#pragma once

// Run manifests: one JSON document describes one experiment. Parsing is strict
// (unknown keys are errors) and every default is resolved, so emit() echoes the full run.

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "qpt/analysis.hpp"
#include "qpt/protocol.hpp"
#include "qpt/types.hpp"

namespace qpt {

enum class ExperimentKind {
    bj_scan,
    bj_scaling,
    ising_scan,
    ising_scaling,
    roundtrip,
    optimize_recombination,
    splitting_state,
};

inline const std::vector<std::pair<ExperimentKind, std::string>>& experiment_kind_names() {
    static const std::vector<std::pair<ExperimentKind, std::string>> names{
        {ExperimentKind::bj_scan, "bj-scan"},
        {ExperimentKind::bj_scaling, "bj-scaling"},
        {ExperimentKind::ising_scan, "ising-scan"},
        {ExperimentKind::ising_scaling, "ising-scaling"},
        {ExperimentKind::roundtrip, "roundtrip"},
        {ExperimentKind::optimize_recombination, "optimize-recombination"},
        {ExperimentKind::splitting_state, "splitting-state"},
    };
    return names;
}

inline std::string to_string(ExperimentKind k) {
    for (const auto& [kind, name] : experiment_kind_names())
        if (kind == k) return name;
    return "?";
}

/// Manifest validation failure; maps to exit code 2.
class ValidationError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

inline ExperimentKind parse_experiment_kind(const std::string& s) {
    for (const auto& [kind, name] : experiment_kind_names())
        if (name == s) return kind;
    throw ValidationError("kind: unknown experiment kind '" + s + "'");
}

using ModelConfig = std::variant<BjProtocolConfig, IsingProtocolConfig>;

struct RunManifest {
    ExperimentKind kind = ExperimentKind::bj_scan;
    ModelConfig model = BjProtocolConfig{};
    std::vector<double> phi_grid;
    std::vector<int> n_list;
    RecombinationSearch search;
    EvolutionSettings evolution;
    int fit_points = 9;
    std::string output_dir = "out";
    std::size_t workers = 1;
    std::optional<double> chi_over_n_hz; // annotation only

    bool is_bj() const noexcept { return std::holds_alternative<BjProtocolConfig>(model); }
    const BjProtocolConfig& bj() const { return std::get<BjProtocolConfig>(model); }
    const IsingProtocolConfig& ising() const { return std::get<IsingProtocolConfig>(model); }

    bool operator==(const RunManifest& o) const {
        return kind == o.kind && model == o.model && phi_grid == o.phi_grid && n_list == o.n_list &&
               search.lo == o.search.lo && search.hi == o.search.hi && search.grid_points == o.search.grid_points &&
               search.x_tolerance == o.search.x_tolerance && search.step == o.search.step &&
               evolution == o.evolution && fit_points == o.fit_points && output_dir == o.output_dir &&
               workers == o.workers && chi_over_n_hz == o.chi_over_n_hz;
    }
};

namespace detail {

using json = nlohmann::ordered_json;

inline void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items())
        if (!ok.count(key)) throw ValidationError(where + ": unknown key '" + key + "'");
}

inline double get_number(const json& obj, const std::string& where, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ValidationError(where + "." + key + ": expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError(where + "." + key + ": must be finite");
    return d;
}

inline std::optional<double> get_optional_number(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return get_number(obj, where, key, 0.0);
}

inline int get_int(const json& obj, const std::string& where, const char* key, int fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) throw ValidationError(where + "." + key + ": expected an integer");
    return v.get<int>();
}

inline std::string get_string(const json& obj, const std::string& where, const char* key, std::string fallback) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_string()) throw ValidationError(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

template <class F>
void wrap_validation(F&& f) {
    try {
        f();
    } catch (const ValidationError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw ValidationError(e.what());
    }
}

inline ModelConfig parse_model(const json& m, ExperimentKind kind) {
    const std::string where = "model";
    if (!m.is_object()) throw ValidationError("model: expected an object");
    std::string type = get_string(m, where, "type", "");
    if (type.empty()) {
        if (kind == ExperimentKind::bj_scan || kind == ExperimentKind::bj_scaling ||
            kind == ExperimentKind::optimize_recombination)
            type = "bj";
        else if (kind == ExperimentKind::ising_scan || kind == ExperimentKind::ising_scaling)
            type = "ising";
        else
            throw ValidationError("model.type: required for kind '" + to_string(kind) + "' (bj or ising)");
    }
    if (type == "bj") {
        reject_unknown(m, where, {"type", "n", "chi", "omega0", "omega_f", "beta1", "beta2", "omega_end",
                                  "pulse_axis", "pulse_angle"});
        BjProtocolConfig c;
        c.n = get_int(m, where, "n", c.n);
        c.chi = get_number(m, where, "chi", c.chi);
        c.omega0 = get_number(m, where, "omega0", c.omega0);
        c.omega_f = get_number(m, where, "omega_f", c.omega_f);
        c.beta1 = get_number(m, where, "beta1", c.beta1);
        c.beta2 = get_number(m, where, "beta2", c.beta2);
        c.omega_end = get_optional_number(m, where, "omega_end");
        wrap_validation([&] { c.pulse_axis = parse_axis(get_string(m, where, "pulse_axis", "x")); });
        c.pulse_angle = get_number(m, where, "pulse_angle", c.pulse_angle);
        return c;
    }
    if (type == "ising") {
        reject_unknown(m, where, {"type", "n", "b0", "j0", "tau", "tau_prime", "power", "coupling_range"});
        IsingProtocolConfig c;
        c.n = get_int(m, where, "n", c.n);
        c.b0 = get_number(m, where, "b0", c.b0);
        c.j0 = get_number(m, where, "j0", c.j0);
        c.tau = get_number(m, where, "tau", c.tau);
        c.tau_prime = get_optional_number(m, where, "tau_prime"); // unset: tau, or optimized in scaling runs
        c.power = get_number(m, where, "power", c.power);
        c.coupling_range = get_int(m, where, "coupling_range", c.coupling_range);
        return c;
    }
    throw ValidationError("model.type: unknown model type '" + type + "' (expected bj or ising)");
}

inline std::vector<double> parse_phi_grid(const json& g) {
    if (g.is_array()) {
        std::vector<double> out;
        for (const auto& v : g) {
            if (!v.is_number()) throw ValidationError("phi_grid: entries must be numbers");
            out.push_back(v.get<double>());
        }
        return out;
    }
    reject_unknown(g, "phi_grid", {"min", "max", "points", "values"});
    if (g.contains("values")) {
        if (g.contains("min") || g.contains("max") || g.contains("points"))
            throw ValidationError("phi_grid: give either values or min/max/points");
        return parse_phi_grid(g.at("values"));
    }
    if (!g.contains("min") || !g.contains("max") || !g.contains("points"))
        throw ValidationError("phi_grid: min, max and points are required");
    const double lo = get_number(g, "phi_grid", "min", 0.0), hi = get_number(g, "phi_grid", "max", 0.0);
    const int points = get_int(g, "phi_grid", "points", 0);
    if (points < 1) throw ValidationError("phi_grid.points: must be >= 1");
    if (hi < lo) throw ValidationError("phi_grid: max must be >= min");
    auto grid = linear_grid(lo, hi, points);
    // Exact antisymmetry when the range is symmetric about zero.
    if (lo == -hi)
        for (std::size_t i = 0; i < grid.size() / 2; ++i) grid[grid.size() - 1 - i] = -grid[i];
    if (lo == -hi && points % 2 == 1) grid[grid.size() / 2] = 0.0;
    return grid;
}

} // namespace detail

/// Checks every cross-field requirement for the manifest's kind.
inline void validate(const RunManifest& m) {
    detail::wrap_validation([&] {
        m.evolution.validate();
        if (m.workers < 1) throw ValidationError("workers: must be >= 1");
        if (m.output_dir.empty()) throw ValidationError("output_dir: must not be empty");
        if (m.fit_points < 5) throw ValidationError("fit.points: must be >= 5");
        if (m.chi_over_n_hz && !(*m.chi_over_n_hz > 0.0)) throw ValidationError("chi_over_N_hz: must be > 0");
        const bool needs_bj = m.kind == ExperimentKind::bj_scan || m.kind == ExperimentKind::bj_scaling ||
                              m.kind == ExperimentKind::optimize_recombination;
        const bool needs_ising = m.kind == ExperimentKind::ising_scan || m.kind == ExperimentKind::ising_scaling;
        if (needs_bj && !m.is_bj()) throw ValidationError("model.type: kind '" + to_string(m.kind) + "' needs a bj model");
        if (needs_ising && m.is_bj())
            throw ValidationError("model.type: kind '" + to_string(m.kind) + "' needs an ising model");
        if (m.is_bj())
            m.bj().validate(m.kind == ExperimentKind::splitting_state);
        else
            m.ising().validate();
        if (m.kind == ExperimentKind::bj_scan || m.kind == ExperimentKind::ising_scan) {
            if (m.phi_grid.empty()) throw ValidationError("phi_grid: required for kind '" + to_string(m.kind) + "'");
            if (!std::is_sorted(m.phi_grid.begin(), m.phi_grid.end()))
                throw ValidationError("phi_grid: values must be ascending");
        }
        if (m.kind == ExperimentKind::bj_scaling || m.kind == ExperimentKind::ising_scaling) {
            if (m.n_list.size() < 3) throw ValidationError("n_list: at least 3 values of N are required");
            for (int n : m.n_list) {
                if (n < 1) throw ValidationError("n_list: values must be >= 1");
                if (!m.is_bj() && n > kMaxIsingSpins)
                    throw ValidationError("n_list: Ising N must be <= " + std::to_string(kMaxIsingSpins));
            }
        }
        if (m.is_bj()) {
            const auto& c = m.bj();
            const double lo = m.search.lo.value_or(c.omega_c()), hi = m.search.hi.value_or(c.omega0);
            if (lo < c.omega_c() || hi > c.omega0 || !(hi > lo))
                throw ValidationError("omega_end_search: bracket must lie within (omega_c, omega0]");
        } else {
            const auto& c = m.ising();
            const double lo = m.search.lo.value_or(0.5 * c.tau), hi = m.search.hi.value_or(c.tau);
            if (lo < 0.5 * c.tau || hi > c.tau || !(hi > lo))
                throw ValidationError("tau_prime_search: bracket must lie within [tau/2, tau]");
        }
        const std::string search_key = m.is_bj() ? "omega_end_search" : "tau_prime_search";
        if (m.search.grid_points < 1) throw ValidationError(search_key + ".grid_points: must be >= 1");
        if (!(m.search.x_tolerance > 0.0)) throw ValidationError(search_key + ".tolerance: must be > 0");
        if (m.search.step && !(*m.search.step > 0.0)) throw ValidationError(search_key + ".step: must be > 0");
    });
}

/// Parses and validates; all defaults are filled in.
inline RunManifest parse_manifest_text(const std::string& text, std::optional<ExperimentKind> expected = {}) {
    detail::json doc;
    try {
        doc = detail::json::parse(text);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("manifest: malformed JSON: ") + e.what());
    }
    detail::reject_unknown(doc, "manifest", {"kind", "model", "phi_grid", "n_list", "omega_end_search",
                                             "tau_prime_search", "evolution", "fit", "output_dir", "workers",
                                             "chi_over_N_hz"});
    RunManifest m;
    if (doc.contains("kind")) {
        m.kind = parse_experiment_kind(detail::get_string(doc, "manifest", "kind", ""));
        if (expected && *expected != m.kind)
            throw ValidationError("kind: manifest is '" + to_string(m.kind) + "' but subcommand is '" +
                                  to_string(*expected) + "'");
    } else if (expected) {
        m.kind = *expected;
    } else {
        throw ValidationError("kind: required");
    }
    if (!doc.contains("model")) throw ValidationError("model: required");
    m.model = detail::parse_model(doc.at("model"), m.kind);
    if (doc.contains("phi_grid")) {
        m.phi_grid = detail::parse_phi_grid(doc.at("phi_grid"));
    } else if (m.kind == ExperimentKind::bj_scan || m.kind == ExperimentKind::ising_scan) {
        // One full fringe, 41 points, exactly antisymmetric.
        const int n = m.is_bj() ? m.bj().n : m.ising().n;
        detail::json g{{"min", -kPi / n}, {"max", kPi / n}, {"points", 41}};
        m.phi_grid = detail::parse_phi_grid(g);
    }
    if (doc.contains("n_list")) {
        const auto& list = doc.at("n_list");
        if (!list.is_array()) throw ValidationError("n_list: expected an array of integers");
        for (const auto& v : list) {
            if (!v.is_number_integer()) throw ValidationError("n_list: expected integers");
            m.n_list.push_back(v.get<int>());
        }
    }
    const std::string search_key = m.is_bj() ? "omega_end_search" : "tau_prime_search";
    const std::string other_key = m.is_bj() ? "tau_prime_search" : "omega_end_search";
    if (doc.contains(other_key))
        throw ValidationError(other_key + ": not applicable to a " + (m.is_bj() ? "bj" : "ising") + " model");
    if (doc.contains(search_key)) {
        const auto& s = doc.at(search_key);
        detail::reject_unknown(s, search_key, {"lo", "hi", "grid_points", "tolerance", "step"});
        m.search.lo = detail::get_optional_number(s, search_key, "lo");
        m.search.hi = detail::get_optional_number(s, search_key, "hi");
        m.search.grid_points = detail::get_int(s, search_key, "grid_points", m.search.grid_points);
        m.search.x_tolerance = detail::get_number(s, search_key, "tolerance", m.search.x_tolerance);
        m.search.step = detail::get_optional_number(s, search_key, "step");
    }
    if (m.is_bj()) {
        if (!m.search.lo) m.search.lo = m.bj().omega_c();
        if (!m.search.hi) m.search.hi = m.bj().omega0;
        if (!m.search.step) m.search.step = 0.01 / m.bj().n;
    } else {
        if (!m.search.lo) m.search.lo = 0.5 * m.ising().tau;
        if (!m.search.hi) m.search.hi = m.ising().tau;
        if (!m.search.step) m.search.step = 0.01 / m.ising().n;
        m.evolution = default_ising_settings(m.ising());
    }
    if (doc.contains("evolution")) {
        const auto& e = doc.at("evolution");
        detail::reject_unknown(e, "evolution", {"dt", "norm_tolerance", "convergence_tolerance"});
        m.evolution.dt = detail::get_number(e, "evolution", "dt", m.evolution.dt);
        m.evolution.norm_tolerance = detail::get_number(e, "evolution", "norm_tolerance", m.evolution.norm_tolerance);
        m.evolution.convergence_tolerance =
            detail::get_number(e, "evolution", "convergence_tolerance", m.evolution.convergence_tolerance);
    }
    if (doc.contains("fit")) {
        const auto& f = doc.at("fit");
        detail::reject_unknown(f, "fit", {"points"});
        m.fit_points = detail::get_int(f, "fit", "points", m.fit_points);
    }
    m.output_dir = detail::get_string(doc, "manifest", "output_dir", m.output_dir);
    const int workers = detail::get_int(doc, "manifest", "workers", 1);
    if (workers < 1) throw ValidationError("workers: must be >= 1");
    m.workers = static_cast<std::size_t>(workers);
    m.chi_over_n_hz = detail::get_optional_number(doc, "manifest", "chi_over_N_hz");
    validate(m);
    return m;
}

inline RunManifest parse_manifest(const std::string& path, std::optional<ExperimentKind> expected = {}) {
    std::ifstream in(path);
    if (!in) throw ValidationError("manifest: cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_manifest_text(buffer.str(), expected);
}

/// Fully resolved JSON form; parse_manifest_text(emit_manifest(m)) == m.
inline std::string emit_manifest(const RunManifest& m) {
    detail::json doc;
    doc["kind"] = to_string(m.kind);
    detail::json model;
    if (m.is_bj()) {
        const auto& c = m.bj();
        model["type"] = "bj";
        model["n"] = c.n;
        model["chi"] = c.chi;
        model["omega0"] = c.omega0;
        model["omega_f"] = c.omega_f;
        model["beta1"] = c.beta1;
        model["beta2"] = c.beta2;
        model["omega_end"] = c.omega_end ? detail::json(*c.omega_end) : detail::json(nullptr);
        model["pulse_axis"] = to_string(c.pulse_axis);
        model["pulse_angle"] = c.pulse_angle;
    } else {
        const auto& c = m.ising();
        model["type"] = "ising";
        model["n"] = c.n;
        model["b0"] = c.b0;
        model["j0"] = c.j0;
        model["tau"] = c.tau;
        model["tau_prime"] = c.tau_prime ? detail::json(*c.tau_prime) : detail::json(nullptr);
        model["power"] = c.power;
        model["coupling_range"] = c.coupling_range;
    }
    doc["model"] = model;
    if (!m.phi_grid.empty()) doc["phi_grid"] = detail::json{{"values", m.phi_grid}};
    if (!m.n_list.empty()) doc["n_list"] = m.n_list;
    {
        doc[m.is_bj() ? "omega_end_search" : "tau_prime_search"] = {{"lo", *m.search.lo},
                                   {"hi", *m.search.hi},
                                   {"grid_points", m.search.grid_points},
                                   {"tolerance", m.search.x_tolerance},
                                   {"step", *m.search.step}};
    }
    doc["evolution"] = {{"dt", m.evolution.dt},
                        {"norm_tolerance", m.evolution.norm_tolerance},
                        {"convergence_tolerance", m.evolution.convergence_tolerance}};
    doc["fit"] = {{"points", m.fit_points}};
    doc["output_dir"] = m.output_dir;
    doc["workers"] = m.workers;
    if (m.chi_over_n_hz) doc["chi_over_N_hz"] = *m.chi_over_n_hz;
    return doc.dump(2) + "\n";
}

} // namespace qpt
