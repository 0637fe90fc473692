// bath.hpp — Spectral densities, bath correlation functions and their
// exponential (dissipaton) decompositions

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include "pcl/core.hpp"

namespace pcl::bath {

enum class DensityKind { drude, discrete_mode };

// J(w) = xi*w/(w^2 + gamma_c^2) for Drude; a single undamped mode
// (frequency omega0, coupling c) for discrete_mode.
struct SpectralDensity {
    DensityKind kind{DensityKind::drude};
    double xi{1.0};
    double gamma_c{1.0};
    double omega0{0.0};
    double c{0.0};

    static SpectralDensity drude(double xi, double gamma_c) {
        SpectralDensity sd;
        sd.kind = DensityKind::drude;
        sd.xi = xi;
        sd.gamma_c = gamma_c;
        sd.validate();
        return sd;
    }

    static SpectralDensity discrete(double omega0, double c) {
        SpectralDensity sd;
        sd.kind = DensityKind::discrete_mode;
        sd.omega0 = omega0;
        sd.c = c;
        sd.validate();
        return sd;
    }

    void validate() const {
        if (kind == DensityKind::drude) {
            if (!(xi >= 0.0)) throw validation_error("spectral density: xi must be >= 0");
            if (!(gamma_c > 0.0)) throw validation_error("spectral density: gamma_c must be > 0");
        } else if (!(omega0 > 0.0)) {
            throw validation_error("spectral density: discrete mode needs omega0 > 0");
        }
    }
};

inline double spectral_density_eval(const SpectralDensity& sd, double omega) {
    if (sd.kind != DensityKind::drude)
        throw unsupported_error("spectral density: a discrete mode has no pointwise J(w)");
    return sd.xi * omega / (omega * omega + sd.gamma_c * sd.gamma_c);
}

// C(t) = sum_k eta_k exp(-gamma_k t), with pair[k] the index whose exponent is
// conj(gamma_k).
struct DissipatonSpectrum {
    std::vector<cplx> eta;
    std::vector<cplx> gamma;
    std::vector<std::size_t> pair;
    double beta{std::numeric_limits<double>::infinity()};

    std::size_t K() const { return eta.size(); }

    cplx eta_sum() const { return std::accumulate(eta.begin(), eta.end(), cplx{0.0}); }

    cplx correlation(double t) const {
        cplx acc{0.0};
        for (std::size_t k = 0; k < K(); ++k) acc += eta[k] * std::exp(-gamma[k] * t);
        return acc;
    }

    // <F(0)F(t)> = conj(C(t)) = sum_k conj(eta_{pair(k)}) exp(-gamma_k t)
    cplx backward_correlation(double t) const {
        cplx acc{0.0};
        for (std::size_t k = 0; k < K(); ++k) acc += std::conj(eta[pair[k]]) * std::exp(-gamma[k] * t);
        return acc;
    }
};

struct QuadratureOptions {
    double cutoff{0.0}; // 0 selects 200*max(gamma_c, 1/beta)
    double abs_tol{1e-10};
    std::size_t max_subdivisions{20000};
    // For t > 0, add the oscillatory tail beyond the cutoff so the result is
    // the infinite-band value. C(0) diverges and is always truncated.
    bool include_tail{true};
};

namespace detail {

// x*coth(x), finite at x = 0.
inline double x_coth_x(double x) {
    if (std::abs(x) < 1e-4) return 1.0 + x * x / 3.0;
    return x / std::tanh(x);
}

inline double default_cutoff(const SpectralDensity& sd, double beta) {
    return 200.0 * std::max(sd.gamma_c, 1.0 / beta);
}

struct GslWorkspace {
    gsl_integration_workspace* ws;
    explicit GslWorkspace(std::size_t n) : ws(gsl_integration_workspace_alloc(n)) {}
    ~GslWorkspace() { gsl_integration_workspace_free(ws); }
    GslWorkspace(const GslWorkspace&) = delete;
    GslWorkspace& operator=(const GslWorkspace&) = delete;
};

struct GslCycleWorkspace {
    gsl_integration_workspace* cycles;
    explicit GslCycleWorkspace(std::size_t n) : cycles(gsl_integration_workspace_alloc(n)) {}
    ~GslCycleWorkspace() { gsl_integration_workspace_free(cycles); }
    GslCycleWorkspace(const GslCycleWorkspace&) = delete;
    GslCycleWorkspace& operator=(const GslCycleWorkspace&) = delete;
};

struct GslQawoTable {
    gsl_integration_qawo_table* table;
    GslQawoTable(double omega, double length, enum gsl_integration_qawo_enum kind, std::size_t levels)
        : table(gsl_integration_qawo_table_alloc(omega, length, kind, levels)) {}
    ~GslQawoTable() { gsl_integration_qawo_table_free(table); }
    GslQawoTable(const GslQawoTable&) = delete;
    GslQawoTable& operator=(const GslQawoTable&) = delete;
};

template <typename F>
double gsl_trampoline(double x, void* params) {
    return (*static_cast<F*>(params))(x);
}

inline void check_gsl(int status, double result, double abserr, const char* what) {
    if (status == GSL_SUCCESS) return;
    std::ostringstream os;
    os << "correlation_fdt: " << what << " quadrature failed (" << gsl_strerror(status)
       << "), estimate " << result << " +/- " << abserr;
    throw accuracy_error(os.str(), result, abserr);
}

} // namespace detail

// Fluctuation-dissipation route to the bath correlation function,
//   C(t) = (1/pi) int dw exp(-i w t) J(w) / (1 - exp(-beta w)),
// folded onto [0, cutoff] using the odd symmetry of J:
//   Re C = (1/pi) int_0^L cos(wt) J(w) coth(beta w/2) dw,
//   Im C = -(1/pi) int_0^L sin(wt) J(w) dw,
// plus the Fourier tail on [L, inf) when t > 0 and include_tail is set.
// With backward = true returns C(-t) = conj(C(t)).
inline cplx correlation_fdt(const SpectralDensity& sd, double beta, double t,
                            const QuadratureOptions& opts = {}, bool backward = false) {
    if (sd.kind != DensityKind::drude)
        throw unsupported_error("correlation_fdt: quadrature needs a continuous spectral density");
    if (!(beta > 0.0)) throw config_error("correlation_fdt: beta must be > 0");
    if (t < 0.0) throw config_error("correlation_fdt: t must be >= 0 (use backward flag)");
    sd.validate();

    gsl_set_error_handler_off();
    const double cutoff = opts.cutoff > 0.0 ? opts.cutoff : detail::default_cutoff(sd, beta);
    const double g2 = sd.gamma_c * sd.gamma_c;

    // J(w) coth(beta w/2) with the w -> 0 limit 2 xi/(beta gamma^2)
    auto symmetric = [&](double w) {
        return sd.xi / (w * w + g2) * (2.0 / beta) * detail::x_coth_x(0.5 * beta * w);
    };
    auto antisymmetric = [&](double w) { return sd.xi * w / (w * w + g2); };

    detail::GslWorkspace ws(opts.max_subdivisions);
    double re = 0.0, im = 0.0, err = 0.0;

    if (t == 0.0) {
        gsl_function f{&detail::gsl_trampoline<decltype(symmetric)>, &symmetric};
        int status = gsl_integration_qag(&f, 0.0, cutoff, opts.abs_tol, 0.0, opts.max_subdivisions,
                                         GSL_INTEG_GAUSS61, ws.ws, &re, &err);
        detail::check_gsl(status, re / pi, err / pi, "Re C(0)");
    } else {
        const std::size_t levels = 60;
        {
            detail::GslQawoTable tab(t, cutoff, GSL_INTEG_COSINE, levels);
            gsl_function f{&detail::gsl_trampoline<decltype(symmetric)>, &symmetric};
            int status = gsl_integration_qawo(&f, 0.0, opts.abs_tol, 0.0, opts.max_subdivisions, ws.ws,
                                              tab.table, &re, &err);
            detail::check_gsl(status, re / pi, err / pi, "Re C(t)");
        }
        if (opts.include_tail) {
            detail::GslQawoTable tab(t, 1.0, GSL_INTEG_COSINE, levels);
            detail::GslCycleWorkspace cyc(opts.max_subdivisions);
            gsl_function f{&detail::gsl_trampoline<decltype(symmetric)>, &symmetric};
            double tail = 0.0;
            int status = gsl_integration_qawf(&f, cutoff, opts.abs_tol, opts.max_subdivisions, ws.ws, cyc.cycles,
                                              tab.table, &tail, &err);
            detail::check_gsl(status, tail / pi, err / pi, "Re C(t) tail");
            re += tail;
        }
        {
            detail::GslQawoTable tab(t, cutoff, GSL_INTEG_SINE, levels);
            gsl_function f{&detail::gsl_trampoline<decltype(antisymmetric)>, &antisymmetric};
            int status = gsl_integration_qawo(&f, 0.0, opts.abs_tol, 0.0, opts.max_subdivisions, ws.ws,
                                              tab.table, &im, &err);
            detail::check_gsl(status, im / pi, err / pi, "Im C(t)");
        }
        if (opts.include_tail) {
            detail::GslQawoTable tab(t, 1.0, GSL_INTEG_SINE, levels);
            detail::GslCycleWorkspace cyc(opts.max_subdivisions);
            gsl_function f{&detail::gsl_trampoline<decltype(antisymmetric)>, &antisymmetric};
            double tail = 0.0;
            int status = gsl_integration_qawf(&f, cutoff, opts.abs_tol, opts.max_subdivisions, ws.ws, cyc.cycles,
                                              tab.table, &tail, &err);
            detail::check_gsl(status, tail / pi, err / pi, "Im C(t) tail");
            im += tail;
        }
        im = -im;
    }
    cplx value{re / pi, im / pi};
    return backward ? std::conj(value) : value;
}

// Quadrature at cutoffs L, 2L, 4L. For Drude, C(0) grows like (xi/pi) ln L, so
// the successive differences stay near (xi/pi) ln 2 instead of shrinking. At
// t > 0 they shrink like 1/(L t) without the tail and vanish with it.
struct CutoffDependence {
    std::vector<double> cutoffs;
    std::vector<cplx> values;
    std::vector<cplx> differences;
};

inline CutoffDependence cutoff_dependence(const SpectralDensity& sd, double beta, double t,
                                          QuadratureOptions opts = {}) {
    const double base = opts.cutoff > 0.0 ? opts.cutoff : detail::default_cutoff(sd, beta);
    CutoffDependence out;
    for (double scale : {1.0, 2.0, 4.0}) {
        opts.cutoff = base * scale;
        out.cutoffs.push_back(opts.cutoff);
        out.values.push_back(correlation_fdt(sd, beta, t, opts));
    }
    for (std::size_t i = 1; i < out.values.size(); ++i)
        out.differences.push_back(out.values[i] - out.values[i - 1]);
    return out;
}

// Drude pole plus the first K-1 Matsubara poles of the FDT integrand.
inline DissipatonSpectrum matsubara_decompose_drude(const SpectralDensity& sd, double beta, std::size_t K) {
    if (sd.kind != DensityKind::drude)
        throw unsupported_error("matsubara_decompose_drude: needs a Drude spectral density");
    if (K < 1) throw config_error("matsubara_decompose_drude: K must be >= 1");
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw config_error("matsubara_decompose_drude: beta must be finite and > 0");
    sd.validate();

    const double half = 0.5 * beta * sd.gamma_c;
    const double turns = half / pi;
    if (std::abs(turns - std::round(turns)) * pi < 1e-9)
        throw validation_error("matsubara_decompose_drude: beta*gamma/2 sits on a cot pole");

    DissipatonSpectrum out;
    out.beta = beta;
    out.eta.push_back(0.5 * sd.xi * cplx{1.0 / std::tan(half), -1.0});
    out.gamma.push_back(sd.gamma_c);
    for (std::size_t n = 1; n < K; ++n) {
        const double nu = 2.0 * pi * static_cast<double>(n) / beta;
        if (std::abs(nu - sd.gamma_c) <= 1e-12 * nu)
            throw validation_error("matsubara_decompose_drude: Matsubara frequency coincides with gamma_c");
        out.eta.push_back(2.0 * sd.xi * nu / (beta * (nu * nu - sd.gamma_c * sd.gamma_c)));
        out.gamma.push_back(nu);
    }
    out.pair.resize(K);
    std::iota(out.pair.begin(), out.pair.end(), std::size_t{0});
    return out;
}

// Single harmonic mode H_B = w0 (p^2 + x^2)/2, F = c x: annihilation-like
// (gamma = i w0) and creation-like (gamma = -i w0) dissipatons.
inline DissipatonSpectrum discrete_mode_decompose(double omega0, double c, double beta) {
    if (!(omega0 > 0.0)) throw config_error("discrete_mode_decompose: omega0 must be > 0");
    if (!(beta > 0.0)) throw config_error("discrete_mode_decompose: beta must be > 0");
    const double nbar = std::isinf(beta) ? 0.0 : 1.0 / std::expm1(beta * omega0);
    DissipatonSpectrum out;
    out.beta = beta;
    out.eta = {0.5 * c * c * (nbar + 1.0), 0.5 * c * c * nbar};
    out.gamma = {cplx{0.0, omega0}, cplx{0.0, -omega0}};
    out.pair = {1, 0};
    return out;
}

struct PronyResult {
    DissipatonSpectrum spectrum;
    double residual{0.0}; // relative L2 misfit on the samples
    std::vector<double> singular_values;
};

namespace detail {

inline void assign_pairs(DissipatonSpectrum& s, double match_tol) {
    const std::size_t K = s.gamma.size();
    s.pair.assign(K, K);
    for (std::size_t k = 0; k < K; ++k) {
        if (s.pair[k] != K) continue;
        if (s.gamma[k].imag() == 0.0) {
            s.pair[k] = k;
            continue;
        }
        std::size_t best = K;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t j = k + 1; j < K; ++j) {
            if (s.pair[j] != K) continue;
            double d = std::abs(s.gamma[j] - std::conj(s.gamma[k]));
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        if (best == K || best_d > match_tol * std::max(1.0, std::abs(s.gamma[k])))
            throw fit_error("prony_fit: complex exponent without a conjugate partner", 0.0);
        s.gamma[best] = std::conj(s.gamma[k]);
        s.pair[k] = best;
        s.pair[best] = k;
    }
}

} // namespace detail

// Matrix-pencil fit of C(t) ~ sum_k eta_k exp(-gamma_k t). The pencil is built
// from the real and imaginary parts stacked as real sequences, so the
// recovered exponents are real or come in exact conjugate pairs. Amplitudes
// are a complex least-squares solve against the raw samples.
inline PronyResult prony_fit(const std::vector<std::pair<double, cplx>>& samples, std::size_t K,
                             double beta = std::numeric_limits<double>::infinity()) {
    const std::size_t N = samples.size();
    if (K < 1) throw config_error("prony_fit: K must be >= 1");
    if (N < 4 * K) throw config_error("prony_fit: need at least 4K samples");
    const double dt = samples[1].first - samples[0].first;
    if (!(dt > 0.0)) throw config_error("prony_fit: time grid must be increasing");
    for (std::size_t j = 1; j < N; ++j)
        if (std::abs(samples[j].first - samples[j - 1].first - dt) > 1e-9 * dt)
            throw config_error("prony_fit: time grid must be uniform");

    const std::size_t P = N / 2; // pencil parameter
    const std::size_t rows = N - P;
    Eigen::MatrixXd Y(2 * rows, P + 1);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c <= P; ++c) {
            Y(r, c) = samples[r + c].second.real();
            Y(rows + r, c) = samples[r + c].second.imag();
        }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Y, Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    PronyResult result;
    result.singular_values.assign(sv.data(), sv.data() + sv.size());
    if (sv.size() < static_cast<Eigen::Index>(K) || !(sv(K - 1) > 1e-12 * sv(0))) {
        double ratio = sv.size() >= static_cast<Eigen::Index>(K) && sv(0) > 0 ? sv(K - 1) / sv(0) : 0.0;
        std::ostringstream os;
        os << "prony_fit: Hankel system rank-deficient for K=" << K << " (sigma_K/sigma_1 = " << ratio << ")";
        throw fit_error(os.str(), ratio);
    }

    const Eigen::MatrixXd V = svd.matrixV().leftCols(K);
    const Eigen::MatrixXd V1 = V.topRows(P);
    const Eigen::MatrixXd V2 = V.bottomRows(P);
    const Eigen::MatrixXd Z = V1.completeOrthogonalDecomposition().solve(V2);
    Eigen::EigenSolver<Eigen::MatrixXd> es(Z);
    const Eigen::VectorXcd z = es.eigenvalues();

    DissipatonSpectrum& s = result.spectrum;
    s.beta = beta;
    for (std::size_t k = 0; k < K; ++k) {
        const cplx zk = z(k);
        if (zk.imag() == 0.0 && zk.real() <= 0.0)
            throw fit_error("prony_fit: non-positive real pencil root", 0.0);
        cplx g = -std::log(zk) / dt;
        if (g.real() < 0.0) g = cplx{-g.real(), g.imag()};
        s.gamma.push_back(g);
    }
    detail::assign_pairs(s, 1e-8);

    Eigen::MatrixXcd A(N, K);
    Eigen::VectorXcd b(N);
    for (std::size_t j = 0; j < N; ++j) {
        b(j) = samples[j].second;
        for (std::size_t k = 0; k < K; ++k) A(j, k) = std::exp(-s.gamma[k] * samples[j].first);
    }
    const Eigen::VectorXcd eta = A.colPivHouseholderQr().solve(b);
    s.eta.assign(eta.data(), eta.data() + K);
    const double bn = b.norm();
    result.residual = bn > 0.0 ? (A * eta - b).norm() / bn : (A * eta - b).norm();
    return result;
}

struct SpectrumReport {
    cplx eta_sum;
    double imag_relative{0.0};
    std::vector<std::string> warnings;

    // exp(-lambda^2 Re(sum_k eta_k) / 2), always from the working spectrum.
    double g(double lambda) const { return std::exp(-lambda * lambda * eta_sum.real() / 2.0); }
};

// Hard failures: sizes, pairing involution, conjugate exponents, Re gamma >= 0.
// An imaginary residue in sum_k eta_k above imag_tol (relative) is dropped from
// g and reported as a warning.
inline SpectrumReport validate_spectrum(const DissipatonSpectrum& s, double imag_tol = 1e-6) {
    const std::size_t K = s.K();
    if (K == 0) throw validation_error("validate_spectrum: empty spectrum");
    if (s.gamma.size() != K || s.pair.size() != K)
        throw validation_error("validate_spectrum: eta/gamma/pair size mismatch");
    for (std::size_t k = 0; k < K; ++k) {
        if (s.pair[k] >= K) throw validation_error("validate_spectrum: pair index out of range");
        if (s.pair[s.pair[k]] != k) throw validation_error("validate_spectrum: pairing is not an involution");
        if (s.gamma[s.pair[k]] != std::conj(s.gamma[k]))
            throw validation_error("validate_spectrum: gamma[pair(k)] != conj(gamma[k])");
        if (s.gamma[k].real() < 0.0) throw validation_error("validate_spectrum: Re gamma_k < 0");
        if (!std::isfinite(std::abs(s.eta[k])) || !std::isfinite(std::abs(s.gamma[k])))
            throw validation_error("validate_spectrum: non-finite coefficient");
    }
    SpectrumReport rep;
    rep.eta_sum = s.eta_sum();
    const double re = std::abs(rep.eta_sum.real());
    rep.imag_relative = re > 0.0 ? std::abs(rep.eta_sum.imag()) / re
                                 : (rep.eta_sum.imag() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    if (rep.imag_relative > imag_tol) {
        std::ostringstream os;
        os << "Im(sum eta) / Re(sum eta) = " << rep.imag_relative << " exceeds " << imag_tol
           << "; imaginary part dropped from g";
        rep.warnings.push_back(os.str());
    }
    return rep;
}

// Text form:
//   K = <count>
//   beta = <value>
//   term.<k> = <Re eta> <Im eta> <Re gamma> <Im gamma> <pair>
inline std::string to_text(const DissipatonSpectrum& s) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "K = " << s.K() << "\n";
    os << "beta = " << s.beta << "\n";
    for (std::size_t k = 0; k < s.K(); ++k)
        os << "term." << k << " = " << s.eta[k].real() << ' ' << s.eta[k].imag() << ' ' << s.gamma[k].real()
           << ' ' << s.gamma[k].imag() << ' ' << s.pair[k] << "\n";
    return os.str();
}

inline DissipatonSpectrum spectrum_from_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    DissipatonSpectrum s;
    std::size_t K = 0;
    bool have_K = false;
    std::vector<bool> seen;
    auto trim = [](std::string v) {
        const auto b = v.find_first_not_of(" \t\r");
        const auto e = v.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string{} : v.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error("spectrum text: missing '=' in: " + line);
        const std::string key = trim(line.substr(0, eq));
        std::istringstream val(line.substr(eq + 1));
        if (key == "K") {
            if (!(val >> K)) throw config_error("spectrum text: bad K");
            have_K = true;
            s.eta.assign(K, 0.0);
            s.gamma.assign(K, 0.0);
            s.pair.assign(K, 0);
            seen.assign(K, false);
        } else if (key == "beta") {
            std::string b;
            val >> b;
            try {
                s.beta = std::stod(b);
            } catch (const std::exception&) {
                throw config_error("spectrum text: bad beta");
            }
        } else if (key.rfind("term.", 0) == 0) {
            if (!have_K) throw config_error("spectrum text: term before K");
            std::size_t k = std::stoul(key.substr(5));
            if (k >= K) throw config_error("spectrum text: term index out of range");
            double a, b, c, d;
            std::size_t p;
            if (!(val >> a >> b >> c >> d >> p)) throw config_error("spectrum text: malformed term " + key);
            s.eta[k] = {a, b};
            s.gamma[k] = {c, d};
            s.pair[k] = p;
            seen[k] = true;
        } else {
            throw config_error("spectrum text: unknown key " + key);
        }
    }
    if (!have_K) throw config_error("spectrum text: missing K");
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
        throw config_error("spectrum text: missing term");
    return s;
}

// Logarithmic grid of n points on [t0, t1].
inline std::vector<double> log_grid(double t0, double t1, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = t0 * std::pow(t1 / t0, static_cast<double>(i) / static_cast<double>(n - 1));
    return out;
}

struct ReconstructionReport {
    double max_abs_error{0.0};
    double max_relative_error{0.0}; // max |diff| / max |C_quad| over the grid
    double backward_max_abs_error{0.0};
};

// Compares sum_k eta_k exp(-gamma_k t) (and its backward counterpart) with
// quadrature on the supplied grid.
inline ReconstructionReport reconstruction_error(const DissipatonSpectrum& s, const SpectralDensity& sd,
                                                 const std::vector<double>& grid,
                                                 const QuadratureOptions& opts = {}) {
    ReconstructionReport rep;
    double scale = 0.0;
    for (double t : grid) {
        const cplx q = correlation_fdt(sd, s.beta, t, opts);
        scale = std::max(scale, std::abs(q));
        rep.max_abs_error = std::max(rep.max_abs_error, std::abs(s.correlation(t) - q));
        rep.backward_max_abs_error =
            std::max(rep.backward_max_abs_error, std::abs(s.backward_correlation(t) - std::conj(q)));
    }
    rep.max_relative_error = scale > 0.0 ? rep.max_abs_error / scale : rep.max_abs_error;
    return rep;
}

} // namespace pcl::bath
