// config.hpp — Flat dotted key = value run configuration and figure presets.
//
// Accepted syntax is the TOML subset used by the shipped configs: one
// `section.key = value` per line, `#` comments, quoted or bare strings,
// numbers, and bracketed number lists for swept parameters.

#pragma once

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pcl/bath.hpp"
#include "pcl/core.hpp"
#include "pcl/generator.hpp"
#include "pcl/hierarchy.hpp"
#include "pcl/integrator.hpp"

namespace pcl::config {

// Unreadable file, bad syntax, unknown key or a value of the wrong type.
struct parse_error : error {
    using error::error;
};

struct RawEntry {
    std::string value;
    std::size_t line{0};
};

using RawConfig = std::map<std::string, RawEntry>;

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

inline std::string where(const std::string& key, const RawEntry& e) {
    return "line " + std::to_string(e.line) + " (" + key + ")";
}

} // namespace detail

inline RawConfig parse_text(std::string_view text) {
    static const char* sections[] = {"system.", "bath.", "coupling.", "propagation.", "output."};
    RawConfig out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string body = detail::trim(detail::strip_comment(line));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw parse_error("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(std::string_view(body).substr(0, eq));
        std::string value = detail::trim(std::string_view(body).substr(eq + 1));
        bool known_section = false;
        for (const char* s : sections) known_section |= key.rfind(s, 0) == 0 && key.size() > std::strlen(s);
        if (!known_section)
            throw parse_error("config line " + std::to_string(lineno) + ": key '" + key +
                              "' is not in system.*, bath.*, coupling.*, propagation.* or output.*");
        if (value.empty()) throw parse_error("config line " + std::to_string(lineno) + ": empty value for " + key);
        if (value.front() == '"') {
            if (value.size() < 2 || value.back() != '"')
                throw parse_error("config line " + std::to_string(lineno) + ": unterminated string");
            value = value.substr(1, value.size() - 2);
        }
        if (out.count(key)) throw parse_error("config line " + std::to_string(lineno) + ": duplicate key " + key);
        out[key] = {value, lineno};
    }
    return out;
}

inline RawConfig parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw parse_error("cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str());
}

enum class ModelSelect { pcl, cl, both };
enum class BathDecomposition { matsubara, prony, exact };
enum class SteadySelect { none, propagate, dense, both };

inline const char* to_string(ModelSelect m) {
    switch (m) {
    case ModelSelect::pcl: return "pcl";
    case ModelSelect::cl: return "cl";
    default: return "both";
    }
}
inline const char* to_string(BathDecomposition d) {
    switch (d) {
    case BathDecomposition::matsubara: return "matsubara";
    case BathDecomposition::prony: return "prony";
    default: return "exact";
    }
}
inline const char* to_string(SteadySelect s) {
    switch (s) {
    case SteadySelect::none: return "none";
    case SteadySelect::propagate: return "propagate";
    case SteadySelect::dense: return "dense";
    default: return "both";
    }
}

struct RunConfig {
    std::string name{"run"};

    double epsilon_s{1.0};
    std::vector<double> alpha{1.0};
    std::string initial_state{"north"};

    std::vector<double> lambda{0.5};
    ModelSelect model{ModelSelect::both};
    hierarchy::SignConvention convention{hierarchy::SignConvention::even};

    bath::DensityKind bath_kind{bath::DensityKind::drude};
    double xi{1.0};
    double gamma_c{1.0};
    double omega0{1.0};
    double mode_c{0.2};
    double beta{0.5};
    BathDecomposition decomposition{BathDecomposition::matsubara};
    std::size_t K{2};
    std::size_t prony_samples{400};
    double prony_t_max{10.0};
    double imag_tol{1e-6};
    double quad_cutoff{0.0};
    double quad_abs_tol{1e-10};
    bool quad_tail{true};

    std::size_t L{6};
    double dt{1e-3};
    double t_final{50.0};
    std::size_t stride{10};
    std::vector<std::size_t> levels{2, 4, 6, 8};
    SteadySelect steady{SteadySelect::none};
    double steady_dt{0.01};
    double steady_t_max{1000.0};
    double steady_tol{1e-10};

    std::string out_dir{"out"};
};

namespace detail {

inline double to_number(const std::string& key, const RawEntry& e) {
    const char* s = e.value.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s, &end);
    if (end == s || *end != '\0' || errno == ERANGE)
        throw parse_error("config " + where(key, e) + ": '" + e.value + "' is not a number");
    return v;
}

inline std::size_t to_count(const std::string& key, const RawEntry& e) {
    const double v = to_number(key, e);
    if (v < 0 || v != std::floor(v) || v > 1e9)
        throw parse_error("config " + where(key, e) + ": '" + e.value + "' is not a non-negative integer");
    return static_cast<std::size_t>(v);
}

inline std::vector<double> to_list(const std::string& key, const RawEntry& e) {
    std::string body = e.value;
    if (!body.empty() && body.front() == '[') {
        if (body.back() != ']') throw parse_error("config " + where(key, e) + ": unterminated list");
        body = body.substr(1, body.size() - 2);
    }
    std::vector<double> out;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (t.empty()) continue;
        out.push_back(to_number(key, {t, e.line}));
    }
    if (out.empty()) throw parse_error("config " + where(key, e) + ": empty list");
    return out;
}

template <typename Enum>
Enum to_enum(const std::string& key, const RawEntry& e, std::initializer_list<std::pair<const char*, Enum>> options) {
    std::string allowed;
    for (const auto& [name, val] : options) {
        if (e.value == name) return val;
        allowed += allowed.empty() ? name : std::string("|") + name;
    }
    throw parse_error("config " + where(key, e) + ": '" + e.value + "' is not one of " + allowed);
}

} // namespace detail

// Values that parse but are out of range raise validation_error.
inline void validate(const RunConfig& c) {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw validation_error("config: " + msg);
    };
    require(c.epsilon_s > 0.0 && std::isfinite(c.epsilon_s), "system.epsilon_s must be > 0");
    for (double a : c.alpha) require(std::isfinite(a), "system.alpha must be finite");
    for (double l : c.lambda) require(l >= 0.0 && std::isfinite(l), "coupling.lambda must be >= 0");
    require(c.beta > 0.0 && std::isfinite(c.beta), "bath temperature must be > 0");
    if (c.bath_kind == bath::DensityKind::drude) {
        require(c.xi >= 0.0, "bath.xi must be >= 0");
        require(c.gamma_c > 0.0, "bath.gamma must be > 0");
        require(c.decomposition != BathDecomposition::exact, "bath.decomposition = exact needs bath.kind = discrete_mode");
        require(c.K >= 1, "bath.K must be >= 1");
    } else {
        require(c.omega0 > 0.0, "bath.omega0 must be > 0");
        require(c.decomposition == BathDecomposition::exact, "discrete_mode baths use bath.decomposition = exact");
    }
    if (c.decomposition == BathDecomposition::prony) {
        require(c.prony_samples >= 4 * c.K, "bath.prony.samples must be >= 4 K");
        require(c.prony_t_max > 0.0, "bath.prony.t_max must be > 0");
    }
    require(c.imag_tol > 0.0, "bath.imag_tol must be > 0");
    require(c.dt > 0.0, "propagation.dt must be > 0");
    require(c.t_final >= c.dt, "propagation.t_final must be >= dt");
    require(c.stride >= 1, "propagation.stride must be >= 1");
    require(c.levels.size() >= 2, "propagation.levels needs at least two entries");
    require(c.steady_dt > 0.0 && c.steady_t_max > 0.0 && c.steady_tol > 0.0, "steady-state settings must be > 0");
    require(c.initial_state == "north" || c.initial_state == "south" || c.initial_state == "mixed" ||
                c.initial_state == "plus_x",
            "system.initial_state must be north|south|mixed|plus_x");
    require(!c.name.empty() && c.name.find('/') == std::string::npos, "output.prefix must be a plain file stem");
}

inline RunConfig from_raw(const RawConfig& raw) {
    using namespace detail;
    RunConfig c;
    bool have_temperature = false, have_beta = false;
    for (const auto& [key, e] : raw) {
        if (key == "system.epsilon_s") c.epsilon_s = to_number(key, e);
        else if (key == "system.alpha") c.alpha = to_list(key, e);
        else if (key == "system.initial_state") c.initial_state = e.value;
        else if (key == "coupling.lambda") c.lambda = to_list(key, e);
        else if (key == "coupling.model")
            c.model = to_enum<ModelSelect>(key, e, {{"pcl", ModelSelect::pcl}, {"cl", ModelSelect::cl}, {"both", ModelSelect::both}});
        else if (key == "coupling.sign_convention")
            c.convention = to_enum<hierarchy::SignConvention>(
                key, e, {{"even", hierarchy::SignConvention::even},
                         {"odd-paper-literal", hierarchy::SignConvention::odd_paper_literal}});
        else if (key == "bath.kind")
            c.bath_kind = to_enum<bath::DensityKind>(
                key, e, {{"drude", bath::DensityKind::drude}, {"discrete_mode", bath::DensityKind::discrete_mode}});
        else if (key == "bath.xi") c.xi = to_number(key, e);
        else if (key == "bath.gamma") c.gamma_c = to_number(key, e);
        else if (key == "bath.omega0") c.omega0 = to_number(key, e);
        else if (key == "bath.c") c.mode_c = to_number(key, e);
        else if (key == "bath.temperature") {
            const double T = to_number(key, e);
            if (!(T > 0.0)) throw validation_error("config: bath.temperature must be > 0");
            c.beta = 1.0 / T;
            have_temperature = true;
        } else if (key == "bath.beta") {
            c.beta = to_number(key, e);
            have_beta = true;
        } else if (key == "bath.decomposition")
            c.decomposition = to_enum<BathDecomposition>(key, e, {{"matsubara", BathDecomposition::matsubara},
                                                                  {"prony", BathDecomposition::prony},
                                                                  {"exact", BathDecomposition::exact}});
        else if (key == "bath.K") c.K = to_count(key, e);
        else if (key == "bath.prony.samples") c.prony_samples = to_count(key, e);
        else if (key == "bath.prony.t_max") c.prony_t_max = to_number(key, e);
        else if (key == "bath.imag_tol") c.imag_tol = to_number(key, e);
        else if (key == "bath.quadrature.cutoff") c.quad_cutoff = to_number(key, e);
        else if (key == "bath.quadrature.abs_tol") c.quad_abs_tol = to_number(key, e);
        else if (key == "bath.quadrature.tail") c.quad_tail = to_enum<bool>(key, e, {{"true", true}, {"false", false}});
        else if (key == "propagation.L") c.L = to_count(key, e);
        else if (key == "propagation.dt") c.dt = to_number(key, e);
        else if (key == "propagation.t_final") c.t_final = to_number(key, e);
        else if (key == "propagation.stride") c.stride = to_count(key, e);
        else if (key == "propagation.levels") {
            c.levels.clear();
            for (double v : to_list(key, e)) c.levels.push_back(to_count(key, {format_meta(v), e.line}));
        } else if (key == "propagation.steady_state")
            c.steady = to_enum<SteadySelect>(key, e, {{"none", SteadySelect::none}, {"propagate", SteadySelect::propagate},
                                                      {"dense", SteadySelect::dense}, {"both", SteadySelect::both}});
        else if (key == "propagation.steady_dt") c.steady_dt = to_number(key, e);
        else if (key == "propagation.steady_t_max") c.steady_t_max = to_number(key, e);
        else if (key == "propagation.steady_tol") c.steady_tol = to_number(key, e);
        else if (key == "output.dir") c.out_dir = e.value;
        else if (key == "output.prefix") c.name = e.value;
        else throw parse_error("config " + where(key, e) + ": unknown key");
    }
    if (have_temperature && have_beta) throw parse_error("config: give bath.temperature or bath.beta, not both");
    if (c.bath_kind == bath::DensityKind::discrete_mode && !raw.count("bath.decomposition"))
        c.decomposition = BathDecomposition::exact;
    validate(c);
    return c;
}

inline RunConfig load_text(std::string_view text) { return from_raw(parse_text(text)); }
inline RunConfig load_file(const std::string& path) { return from_raw(parse_file(path)); }

// ---------------------------------------------------------------------------
// Presets, in units of epsilon_S.

inline std::string preset_text(const std::string& name) {
    const std::string common =
        "system.epsilon_s = 1.0\n"
        "system.initial_state = \"north\"\n"
        "coupling.model = \"both\"\n"
        "coupling.sign_convention = \"even\"\n"
        "bath.kind = \"drude\"\n"
        "bath.xi = 1.0\n"
        "bath.gamma = 1.0\n"
        "bath.temperature = 2.0\n"
        "bath.decomposition = \"matsubara\"\n"
        "bath.K = 2\n"
        "propagation.L = 6\n"
        "propagation.dt = 0.001\n"
        "propagation.t_final = 50.0\n"
        "propagation.stride = 10\n"
        "propagation.levels = [2, 4, 6, 8]\n";
    if (name == "fig2")
        return "# Two-level benchmark: PCL vs CL dynamics\n" + common +
               "system.alpha = 1.0\n"
               "coupling.lambda = 0.5\n"
               "propagation.steady_state = \"none\"\n"
               "output.prefix = \"fig2\"\n";
    if (name == "fig3")
        return "# Steady-state entropy versus coupling strength lambda\n" + common +
               "system.alpha = 2.0\n"
               "coupling.lambda = [0.5, 1.0, 2.0]\n"
               "propagation.steady_state = \"both\"\n"
               "propagation.steady_dt = 0.01\n"
               "propagation.steady_t_max = 1000.0\n"
               "output.prefix = \"fig3\"\n";
    if (name == "fig4")
        return "# Steady-state entropy versus system-bath prefactor alpha\n" + common +
               "system.alpha = [0.5, 1.0, 1.5, 2.0]\n"
               "coupling.lambda = 0.5\n"
               "propagation.steady_state = \"both\"\n"
               "propagation.steady_dt = 0.01\n"
               "propagation.steady_t_max = 1000.0\n"
               "output.prefix = \"fig4\"\n";
    throw validation_error("unknown preset '" + name + "' (expected fig2, fig3 or fig4)");
}

inline RunConfig preset(const std::string& name) { return load_text(preset_text(name)); }

// ---------------------------------------------------------------------------
// Resolution into library objects.

struct Member {
    double alpha{0.0};
    double lambda{0.0};
    std::string tag; // empty for a single-member run
};

inline std::vector<Member> members(const RunConfig& c) {
    std::vector<Member> out;
    const bool sweep = c.alpha.size() * c.lambda.size() > 1;
    for (double a : c.alpha)
        for (double l : c.lambda) {
            Member m{a, l, {}};
            if (sweep) {
                if (c.alpha.size() > 1) m.tag += "_alpha" + format_meta(a);
                if (c.lambda.size() > 1) m.tag += "_lambda" + format_meta(l);
            }
            out.push_back(m);
        }
    return out;
}

inline SystemModel system_model(const RunConfig& c, const Member& m) {
    // H_S = eps sigma_z, S = alpha sigma_x
    return SystemModel::two_level(c.epsilon_s, m.alpha, m.lambda);
}

inline Matrix initial_state(const RunConfig& c) {
    Matrix rho = Matrix::Zero(2, 2);
    if (c.initial_state == "north") rho(0, 0) = 1.0;
    else if (c.initial_state == "south") rho(1, 1) = 1.0;
    else if (c.initial_state == "mixed") rho(0, 0) = rho(1, 1) = 0.5;
    else rho.setConstant(0.5);
    return rho;
}

inline bath::SpectralDensity spectral_density(const RunConfig& c) {
    return c.bath_kind == bath::DensityKind::drude ? bath::SpectralDensity::drude(c.xi, c.gamma_c)
                                                   : bath::SpectralDensity::discrete(c.omega0, c.mode_c);
}

inline bath::QuadratureOptions quadrature(const RunConfig& c) {
    bath::QuadratureOptions q;
    q.cutoff = c.quad_cutoff;
    q.abs_tol = c.quad_abs_tol;
    q.include_tail = c.quad_tail;
    return q;
}

struct ResolvedBath {
    bath::DissipatonSpectrum spectrum;
    bath::SpectrumReport report;
    double fit_residual{std::numeric_limits<double>::quiet_NaN()};
};

inline ResolvedBath resolve_bath(const RunConfig& c) {
    ResolvedBath out;
    const auto sd = spectral_density(c);
    sd.validate();
    switch (c.decomposition) {
    case BathDecomposition::matsubara:
        out.spectrum = bath::matsubara_decompose_drude(sd, c.beta, c.K);
        break;
    case BathDecomposition::exact:
        out.spectrum = bath::discrete_mode_decompose(c.omega0, c.mode_c, c.beta);
        break;
    case BathDecomposition::prony: {
        std::vector<std::pair<double, cplx>> samples;
        const double h = c.prony_t_max / static_cast<double>(c.prony_samples - 1);
        for (std::size_t i = 0; i < c.prony_samples; ++i) {
            const double t = static_cast<double>(i) * h;
            samples.emplace_back(t, bath::correlation_fdt(sd, c.beta, t, quadrature(c)));
        }
        auto fit = bath::prony_fit(samples, c.K, c.beta);
        out.spectrum = fit.spectrum;
        out.fit_residual = fit.residual;
        break;
    }
    }
    out.report = bath::validate_spectrum(out.spectrum, c.imag_tol);
    return out;
}

inline std::vector<ModelKind> selected_models(ModelSelect s) {
    if (s == ModelSelect::pcl) return {ModelKind::pcl};
    if (s == ModelSelect::cl) return {ModelKind::cl};
    return {ModelKind::pcl, ModelKind::cl};
}

inline EvolveSettings evolve_settings(const RunConfig& c, ModelKind which) {
    EvolveSettings s;
    s.which = which;
    s.L = c.L;
    s.dt = c.dt;
    s.t_final = c.t_final;
    s.stride = c.stride;
    s.convention = c.convention;
    s.rho0 = initial_state(c);
    return s;
}

inline SteadyStateOptions steady_options(const RunConfig& c) {
    SteadyStateOptions o;
    o.method = c.steady == SteadySelect::dense ? SteadyMethod::dense
               : c.steady == SteadySelect::both ? SteadyMethod::both
                                                 : SteadyMethod::propagate;
    o.dt = c.steady_dt;
    o.t_max = c.steady_t_max;
    o.tolerance = c.steady_tol;
    o.convention = c.convention;
    o.rho0 = initial_state(c);
    return o;
}

inline std::string list_text(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_meta(v[i]);
    return s + "]";
}

// Fully resolved parameters, one `key = value` per line, in parseable form.
inline std::string to_text(const RunConfig& c) {
    std::ostringstream os;
    os << "system.epsilon_s = " << format_meta(c.epsilon_s) << "\n"
       << "system.alpha = " << list_text(c.alpha) << "\n"
       << "system.initial_state = \"" << c.initial_state << "\"\n"
       << "coupling.lambda = " << list_text(c.lambda) << "\n"
       << "coupling.model = \"" << to_string(c.model) << "\"\n"
       << "coupling.sign_convention = \"" << hierarchy::to_string(c.convention) << "\"\n"
       << "bath.kind = \"" << (c.bath_kind == bath::DensityKind::drude ? "drude" : "discrete_mode") << "\"\n";
    if (c.bath_kind == bath::DensityKind::drude)
        os << "bath.xi = " << format_meta(c.xi) << "\n" << "bath.gamma = " << format_meta(c.gamma_c) << "\n";
    else
        os << "bath.omega0 = " << format_meta(c.omega0) << "\n" << "bath.c = " << format_meta(c.mode_c) << "\n";
    os << "bath.beta = " << format_meta(c.beta) << "\n"
       << "bath.decomposition = \"" << to_string(c.decomposition) << "\"\n"
       << "bath.K = " << c.K << "\n";
    if (c.decomposition == BathDecomposition::prony)
        os << "bath.prony.samples = " << c.prony_samples << "\n"
           << "bath.prony.t_max = " << format_meta(c.prony_t_max) << "\n";
    os << "bath.imag_tol = " << format_meta(c.imag_tol) << "\n"
       << "bath.quadrature.cutoff = " << format_meta(c.quad_cutoff) << "\n"
       << "bath.quadrature.abs_tol = " << format_meta(c.quad_abs_tol) << "\n"
       << "bath.quadrature.tail = " << (c.quad_tail ? "true" : "false") << "\n"
       << "propagation.L = " << c.L << "\n"
       << "propagation.dt = " << format_meta(c.dt) << "\n"
       << "propagation.t_final = " << format_meta(c.t_final) << "\n"
       << "propagation.stride = " << c.stride << "\n"
       << "propagation.levels = [";
    for (std::size_t i = 0; i < c.levels.size(); ++i) os << (i ? ", " : "") << c.levels[i];
    os << "]\n"
       << "propagation.steady_state = \"" << to_string(c.steady) << "\"\n"
       << "propagation.steady_dt = " << format_meta(c.steady_dt) << "\n"
       << "propagation.steady_t_max = " << format_meta(c.steady_t_max) << "\n"
       << "propagation.steady_tol = " << format_meta(c.steady_tol) << "\n"
       << "output.dir = \"" << c.out_dir << "\"\n"
       << "output.prefix = \"" << c.name << "\"\n";
    return os.str();
}

} // namespace pcl::config
