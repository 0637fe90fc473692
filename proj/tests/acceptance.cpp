// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pcl/bath.hpp"
#include "pcl/config.hpp"
#include "pcl/hierarchy.hpp"
#include "pcl/integrator.hpp"
#include "pcl/observables.hpp"
#include "pcl/oracle.hpp"

using namespace pcl;
namespace ref = pcl::reference;

namespace {

struct Outcome {
    bool pass{false};
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix unitary_evolve(const Matrix& H, const Matrix& rho, double t) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    Vector phase(H.rows());
    for (Eigen::Index i = 0; i < H.rows(); ++i) phase(i) = std::exp(-I * es.eigenvalues()(i) * t);
    const Matrix U = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
    return U * rho * U.adjoint();
}

bath::DissipatonSpectrum preset_spectrum(const config::RunConfig& c) { return config::resolve_bath(c).spectrum; }

// ---------------------------------------------------------------------------

Outcome lambda_zero_exactness() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cfg = config::preset("fig2");
    const auto model = SystemModel::two_level(cfg.epsilon_s, cfg.alpha[0], 0.0);
    EvolveSettings s = config::evolve_settings(cfg, ModelKind::pcl);
    s.t_final = 10.0;
    s.dt = 1e-3;
    s.stride = 1;
    const auto res = evolve(model, preset_spectrum(cfg), s);
    const Matrix H = model.H + 2.0 * model.S;
    double err = 0.0;
    for (const auto& row : res.trajectory.rows) {
        const auto b = obs::pauli_expectations(unitary_evolve(H, s.rho0, row.t));
        err = std::max({err, std::abs(row.sx - b.x), std::abs(row.sy - b.y), std::abs(row.sz - b.z)});
    }
    const double secs = elapsed(t0);
    return {err <= 1e-6 && secs < 10.0, "max Bloch error " + fmt("%.3g", err) + " (<= 1e-6), " + fmt("%.2f", secs) + " s (< 10 s)"};
}

// Self-converged hierarchy run against the exact single-mode dynamics.
Outcome oracle_equivalence(ModelKind which, oracle::Coupling coupling) {
    const auto t0 = std::chrono::steady_clock::now();
    const double eps = 1.0, omega0 = eps, c = 0.2 * eps, lambda = 0.5, beta = 0.5 / eps;
    const auto model = SystemModel::two_level(eps, 1.0, lambda);
    const auto spec = bath::discrete_mode_decompose(omega0, c, beta);

    oracle::DiscreteBath bath;
    bath.modes = {{omega0, c}};
    bath.n_max = 30;
    bath.beta = beta;
    bath.adequacy_tol = 1e-6;

    EvolveSettings s;
    s.which = which;
    s.dt = 1e-3;
    s.t_final = 5.0;
    s.stride = 50;

    const double self_tol = 1e-6;
    std::optional<EvolveResult> prev;
    std::size_t L_conv = 0;
    double last_change = 0.0;
    for (std::size_t L = 2; L <= 14; L += 2) {
        s.L = L;
        auto cur = evolve(model, spec, s);
        if (prev) {
            last_change = 0.0;
            for (std::size_t i = 0; i < cur.rho_samples.size(); ++i)
                last_change = std::max(last_change, ref::trace_distance(cur.rho_samples[i], prev->rho_samples[i]));
            if (last_change <= self_tol) {
                L_conv = L;
                prev = std::move(cur);
                break;
            }
        }
        prev = std::move(cur);
    }
    if (L_conv == 0) return {false, "hierarchy did not self-converge by L=14 (last change " + fmt("%.3g", last_change) + ")"};

    std::vector<double> grid;
    for (const auto& r : prev->trajectory.rows) grid.push_back(r.t);
    const auto exact = oracle::propagate_exact(model, bath, coupling, s.rho0, grid);
    double dist = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) dist = std::max(dist, ref::trace_distance(prev->rho_samples[i], exact.rho_s[i]));
    const double secs = elapsed(t0);
    return {dist <= 1e-3 && secs < 120.0, "self-converged at L=" + std::to_string(L_conv) + ", max trace distance " +
                                              fmt("%.3g", dist) + " (<= 1e-3), " + fmt("%.1f", secs) + " s (< 120 s)"};
}

Outcome conservation_suite() {
    double trace = 0.0, herm = 0.0;
    std::size_t runs = 0;
    for (const char* name : {"fig2", "fig3", "fig4"}) {
        const auto cfg = config::preset(name);
        const auto spec = preset_spectrum(cfg);
        for (const auto& m : config::members(cfg))
            for (auto which : {ModelKind::pcl, ModelKind::cl}) {
                auto s = config::evolve_settings(cfg, which);
                s.stride = 1;
                const auto res = evolve(config::system_model(cfg, m), spec, s);
                trace = std::max(trace, res.max_trace_defect);
                herm = std::max(herm, res.max_hermiticity_defect);
                ++runs;
            }
    }
    return {trace <= 1e-10 && herm <= 1e-8, std::to_string(runs) + " runs, max |tr rho_0 - 1| " + fmt("%.3g", trace) +
                                                " (<= 1e-10), max Hermiticity defect " + fmt("%.3g", herm) + " (<= 1e-8)"};
}

Outcome algebra_suite() {
    const cplx etas[] = {cplx{0.7, 0.0}, cplx{1.958, -0.5}, cplx{-0.3, 1.1}};
    double round_trip = 0.0, product = 0.0, contraction = 0.0;
    for (cplx eta : etas) {
        for (std::size_t n = 0; n <= 10; ++n) {
            const auto ordered = algebra::power_to_ordered(n, eta);
            const auto back = ref::to_plain(ordered, eta);
            const double scale = ref::to_plain_scale(ordered, eta);
            for (std::size_t j = 0; j <= n; ++j)
                round_trip = std::max(round_trip, std::abs(back[j] - cplx(j == n ? 1.0 : 0.0)) / scale);
        }
        for (std::size_t m = 0; m <= 6; ++m)
            for (std::size_t n = 0; n <= 6; ++n) {
                const auto brute = ref::to_ordered(ref::multiply(algebra::hermite_expand(m, eta), algebra::hermite_expand(n, eta)), eta);
                product = std::max(product, ref::max_diff(algebra::ordered_product(m, n, eta), brute) /
                                                std::max(1.0, std::norm(eta) * 1e3));
            }
        for (double lambda : {0.3, 1.0})
            for (int sign : {+1, -1})
                for (std::size_t n = 0; n <= 5; ++n)
                    contraction = std::max(contraction, ref::max_diff(algebra::exp_contraction(n, lambda, eta, sign, 12),
                                                                      [&] {
                                                                          auto s = ref::contraction_series(n, lambda, eta, sign, 60);
                                                                          s.coeffs.resize(13);
                                                                          return s;
                                                                      }()));
    }
    const bool ok = round_trip <= 1e-12 && product <= 1e-12 && contraction <= 1e-12;
    return {ok, "Hermite round trip " + fmt("%.2g", round_trip) + ", product rule " + fmt("%.2g", product) +
                    ", contraction " + fmt("%.2g", contraction) + " (each <= 1e-12)"};
}

Outcome table_oracle() {
    const auto s = bath::matsubara_decompose_drude(bath::SpectralDensity::drude(1.0, 1.0), 0.5, 1);
    double err = 0.0;
    for (auto conv : {hierarchy::SignConvention::even, hierarchy::SignConvention::odd_paper_literal})
        for (double lambda : {0.5, 1.3}) {
            const auto t = hierarchy::build_pcl_coupling(s, lambda, 6, conv);
            for (std::size_t n = 0; n <= 3; ++n)
                for (std::size_t np = 0; np <= 6; ++np) {
                    err = std::max(err, std::abs(t.left(n, np) - ref::composed(n, np, lambda, s.eta[0], t.g, conv)));
                    err = std::max(err, std::abs(t.right(n, np) -
                                                 ref::composed(n, np, lambda, std::conj(s.eta[s.pair[0]]), t.g, conv)));
                }
        }
    return {err <= 1e-12, "max entry deviation " + fmt("%.2g", err) + " (<= 1e-12), even and odd-paper-literal"};
}

Outcome tier_convergence() {
    const auto cfg = config::preset("fig2");
    const auto scan = tier_convergence_scan(config::system_model(cfg, config::members(cfg)[0]), preset_spectrum(cfg),
                                            config::evolve_settings(cfg, ModelKind::pcl), {2, 4, 6, 8});
    std::string d;
    for (std::size_t i = 0; i < scan.deviations.size(); ++i)
        d += (i ? ", " : "") + std::to_string(scan.levels[i]) + "->" + std::to_string(scan.levels[i + 1]) + " " +
             fmt("%.3g", scan.deviations[i]);
    const double last = scan.deviations.back();
    return {last <= 1e-4 && scan.monotone, "deviations " + d + "; L=6->8 " + (last <= 1e-4 ? "<=" : ">") +
                                               " 1e-4, monotone " + (scan.monotone ? "yes" : "no")};
}

Outcome fig2_qualitative() {
    const auto cfg = config::preset("fig2");
    const auto spec = preset_spectrum(cfg);
    const auto model = config::system_model(cfg, config::members(cfg)[0]);
    auto opts = config::steady_options(cfg);
    opts.method = SteadyMethod::both;
    const auto cl = steady_state(model, spec, cfg.L, ModelKind::cl, opts);
    const auto pcl = steady_state(model, spec, cfg.L, ModelKind::pcl, opts);
    const auto bcl = obs::pauli_expectations(cl.rho);
    const double comm = (pcl.rho * model.H - model.H * pcl.rho).norm();

    auto s = config::evolve_settings(cfg, ModelKind::pcl);
    s.t_final = 10.0;
    s.stride = 10;
    const auto run = evolve(model, spec, s);
    std::vector<double> sz;
    for (const auto& r : run.trajectory.rows) sz.push_back(r.sz);
    const double peak = obs::dominant_frequency(sz, s.dt * static_cast<double>(s.stride));
    const double predicted = obs::frequency_estimate(model, run.g);
    const double rel = std::abs(peak - predicted) / predicted;

    const bool ok = std::abs(bcl.x) <= 0.02 && std::abs(bcl.y) <= 0.02 && comm > 0.01 * cfg.epsilon_s && rel <= 0.15;
    return {ok, "CL steady |sx|=" + fmt("%.2g", std::abs(bcl.x)) + " |sy|=" + fmt("%.2g", std::abs(bcl.y)) +
                    " (<= 0.02); PCL ||[rho,H_S]||=" + fmt("%.3g", comm) + " (> 0.01); sz peak " + fmt("%.4g", peak) +
                    " vs " + fmt("%.4g", predicted) + " (" + fmt("%.1f", 100.0 * rel) + "% <= 15%)"};
}

struct SteadyEntropy {
    double value{0.0};
    std::string error;
};

std::vector<SteadyEntropy> steady_entropies(const config::RunConfig& cfg) {
    const auto spec = preset_spectrum(cfg);
    const auto opts = config::steady_options(cfg);
    const auto ms = config::members(cfg);
    return parallel_map(ms.size(), worker_count(), [&](std::size_t i) {
        SteadyEntropy out;
        try {
            const auto res = steady_state(config::system_model(cfg, ms[i]), spec, cfg.L, ModelKind::pcl, opts);
            out.value = obs::vn_entropy(res.rho);
        } catch (const error& e) {
            out.error = e.what();
        }
        return out;
    });
}

std::string entropy_list(const std::vector<SteadyEntropy>& e, const std::vector<double>& x, const char* label) {
    std::string s;
    for (std::size_t i = 0; i < e.size(); ++i)
        s += (i ? ", " : "") + std::string(label) + "=" + fmt("%g", x[i]) + ": " +
             (e[i].error.empty() ? fmt("%.4f", e[i].value) : "error (" + e[i].error + ")");
    return s;
}

Outcome fig3_qualitative() {
    const auto cfg = config::preset("fig3");
    const auto e = steady_entropies(cfg);
    bool ok = e.size() == 3;
    for (const auto& v : e) ok = ok && v.error.empty();
    ok = ok && e[1].value > e[0].value && e[1].value > e[2].value;
    return {ok, "S_vN " + entropy_list(e, cfg.lambda, "lambda") + "; need S(1) > S(0.5) and S(1) > S(2)"};
}

Outcome fig4_qualitative() {
    const auto cfg = config::preset("fig4");
    const auto e = steady_entropies(cfg);
    bool ok = e.size() == 4;
    for (std::size_t i = 0; i < e.size(); ++i) {
        ok = ok && e[i].error.empty();
        if (i > 0) ok = ok && e[i].value < e[i - 1].value;
    }
    return {ok, "S_vN " + entropy_list(e, cfg.alpha, "alpha") + "; need strictly decreasing"};
}

Outcome bath_suite() {
    const double gamma = 1.0, beta = 0.5;
    const auto sd = bath::SpectralDensity::drude(1.0, gamma);
    const auto spec = bath::matsubara_decompose_drude(sd, beta, 6);
    const auto rec = bath::reconstruction_error(spec, sd, bath::log_grid(0.1 / gamma, 10.0 / gamma, 40), {});

    const std::vector<cplx> eta{{1.0, 0.3}, {1.0, -0.3}};
    const std::vector<cplx> gam{{0.5, -2.0}, {0.5, 2.0}};
    std::vector<std::pair<double, cplx>> samples;
    for (std::size_t i = 0; i < 200; ++i) {
        const double t = 0.04 * static_cast<double>(i);
        cplx c{0.0};
        for (std::size_t k = 0; k < eta.size(); ++k) c += eta[k] * std::exp(-gam[k] * t);
        samples.emplace_back(t, c);
    }
    const auto fit = bath::prony_fit(samples, 2);
    double prony = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < 2; ++j)
            best = std::min(best, std::max(std::abs(fit.spectrum.eta[j] - eta[k]) / std::abs(eta[k]),
                                           std::abs(fit.spectrum.gamma[j] - gam[k]) / std::abs(gam[k])));
        prony = std::max(prony, best);
    }
    return {rec.max_relative_error <= 0.01 && prony <= 1e-6,
            "K=6 reconstruction " + fmt("%.3g", 100.0 * rec.max_relative_error) + "% (<= 1%), Prony relative recovery " +
                fmt("%.2g", prony) + " (<= 1e-6)"};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"lambda=0 exactness", lambda_zero_exactness},
        {"oracle equivalence (PCL)", [] { return oracle_equivalence(ModelKind::pcl, oracle::Coupling::pcl); }},
        {"oracle equivalence (CL)", [] { return oracle_equivalence(ModelKind::cl, oracle::Coupling::cl); }},
        {"conservation", conservation_suite},
        {"algebra", algebra_suite},
        {"coupling-table oracle", table_oracle},
        {"tier convergence (fig2)", tier_convergence},
        {"fig2 qualitative", fig2_qualitative},
        {"fig3 qualitative", fig3_qualitative},
        {"fig4 qualitative", fig4_qualitative},
        {"bath", bath_suite},
    };
    const auto t0 = std::chrono::steady_clock::now();
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto c0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), elapsed(c0));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed, total %.1f s\n", failures, criteria.size(), elapsed(t0));
    return failures == 0 ? 0 : 1;
}
