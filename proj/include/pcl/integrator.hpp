// integrator.hpp — Fixed-step RK4 propagation of the hierarchy, steady states
// and truncation-level scans.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pcl/bath.hpp"
#include "pcl/core.hpp"
#include "pcl/generator.hpp"
#include "pcl/hierarchy.hpp"
#include "pcl/observables.hpp"

namespace pcl {

enum class ModelKind { pcl, cl };

inline const char* to_string(ModelKind m) { return m == ModelKind::pcl ? "pcl" : "cl"; }

// Scratch buffers for in-place RK4 on a d^2 x N block.
struct Rk4Workspace {
    Eigen::MatrixXcd k1, k2, k3, k4, tmp;
};

namespace detail {

inline void throw_if_nonfinite(const HierarchyState& s) {
    if (s.data.allFinite()) return;
    for (Eigen::Index c = 0; c < s.data.cols(); ++c)
        if (!s.data.col(c).allFinite()) {
            std::ostringstream os;
            os << "propagation diverged at t=" << s.time << " (hierarchy row " << c
               << "); try a smaller dt or a larger truncation level L";
            throw numerical_error(os.str());
        }
}

} // namespace detail

// Classical RK4. rhs(X, dX) writes the derivative of X into dX. On return
// ws.k1 holds the derivative at the start of the step.
template <typename Rhs>
void rk4_step_inplace(HierarchyState& s, double dt, const Rhs& rhs, Rk4Workspace& ws) {
    if (!(dt > 0.0)) throw config_error("rk4_step: dt must be > 0");
    auto& X = s.data;
    ws.k1.resize(X.rows(), X.cols());
    ws.k2.resize(X.rows(), X.cols());
    ws.k3.resize(X.rows(), X.cols());
    ws.k4.resize(X.rows(), X.cols());
    rhs(X, ws.k1);
    ws.tmp = X + (0.5 * dt) * ws.k1;
    rhs(ws.tmp, ws.k2);
    ws.tmp = X + (0.5 * dt) * ws.k2;
    rhs(ws.tmp, ws.k3);
    ws.tmp = X + dt * ws.k3;
    rhs(ws.tmp, ws.k4);
    X += (dt / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
    s.time += dt;
    detail::throw_if_nonfinite(s);
}

template <typename Rhs>
HierarchyState rk4_step(const HierarchyState& s, double dt, const Rhs& rhs) {
    HierarchyState out = s;
    Rk4Workspace ws;
    rk4_step_inplace(out, dt, rhs, ws);
    return out;
}

inline Matrix north_pole() {
    Matrix rho = Matrix::Zero(2, 2);
    rho(0, 0) = 1.0;
    return rho;
}

struct EvolveSettings {
    ModelKind which{ModelKind::pcl};
    std::size_t L{6};
    double dt{1e-3};
    double t_final{50.0};
    std::size_t stride{10}; // output every stride steps
    hierarchy::SignConvention convention{hierarchy::SignConvention::even};
    Matrix rho0{north_pole()};
};

inline hierarchy::CouplingTable build_table(const SystemModel& model, const bath::DissipatonSpectrum& spectrum,
                                            ModelKind which, std::size_t L, hierarchy::SignConvention convention) {
    return which == ModelKind::pcl ? hierarchy::build_pcl_coupling(spectrum, model.lambda, L, convention)
                                   : hierarchy::build_cl_coupling(spectrum, L);
}

struct EvolveResult {
    obs::Trajectory trajectory;
    std::vector<Matrix> rho_samples; // rho_0 at each output row
    HierarchyState final_state;
    double g{1.0};
    std::size_t hierarchy_size{0};
    std::size_t table_nnz{0};
    double max_trace_defect{0.0};
    double max_hermiticity_defect{0.0};
    double min_eigenvalue{1.0}; // smallest eigenvalue of rho_0 over the samples
};

inline std::string format_meta(double v) { return obs::format_double(v); }

// Propagates from rho_0 = rho0, rho_{n>0} = 0, sampling observables at times
// step * dt for step = 0, stride, 2*stride, ...
inline EvolveResult evolve(const SystemModel& model, const bath::DissipatonSpectrum& spectrum,
                           const EvolveSettings& cfg) {
    if (!(cfg.dt > 0.0)) throw config_error("evolve: dt must be > 0");
    if (!(cfg.t_final >= 0.0)) throw config_error("evolve: t_final must be >= 0");
    if (cfg.stride < 1) throw config_error("evolve: stride must be >= 1");
    if (cfg.rho0.rows() != model.dim() || cfg.rho0.cols() != model.dim())
        throw config_error("evolve: initial state dimension differs from the system");
    const auto table = build_table(model, spectrum, cfg.which, cfg.L, cfg.convention);
    const HierarchyGenerator gen(model, spectrum, table);
    const auto conj = conjugate_offsets(table.indices, spectrum);

    EvolveResult res;
    res.g = table.g;
    res.hierarchy_size = table.size();
    res.table_nnz = table.nnz();
    auto& traj = res.trajectory;
    traj.set_meta("model", to_string(cfg.which));
    traj.set_meta("epsilon_s", format_meta(model.epsilon_s));
    traj.set_meta("alpha", format_meta(model.alpha));
    traj.set_meta("lambda", format_meta(model.lambda));
    traj.set_meta("beta", format_meta(spectrum.beta));
    traj.set_meta("K", std::to_string(spectrum.K()));
    traj.set_meta("L", std::to_string(cfg.L));
    traj.set_meta("dt", format_meta(cfg.dt));
    traj.set_meta("convention", hierarchy::to_string(cfg.convention));
    traj.set_meta("g", format_meta(cfg.which == ModelKind::pcl ? table.g : 1.0));

    HierarchyState state = HierarchyState::initial(cfg.rho0, table.size());
    const auto steps = static_cast<std::size_t>(std::llround(cfg.t_final / cfg.dt));
    auto rhs = [&gen](const Eigen::MatrixXcd& X, Eigen::MatrixXcd& dX) { gen.apply(X, dX); };
    Rk4Workspace ws;

    auto sample = [&](std::size_t step) {
        const double t = static_cast<double>(step) * cfg.dt;
        const Matrix rho = state.rho(0);
        const double trace_defect = std::abs(rho.trace() - 1.0);
        if (!(trace_defect <= 1e-6)) {
            std::ostringstream os;
            os << "propagation diverged at t=" << t << " (trace of rho_0 drifted by " << trace_defect
               << "); try a smaller dt or a larger truncation level L";
            throw numerical_error(os.str());
        }
        res.max_trace_defect = std::max(res.max_trace_defect, trace_defect);
        res.max_hermiticity_defect = std::max(res.max_hermiticity_defect, hermiticity_defect(state, conj));
        res.min_eigenvalue = std::min(res.min_eigenvalue, obs::min_eigenvalue(rho));
        res.rho_samples.push_back(rho);
        traj.rows.push_back(obs::make_row(t, 0.5 * (rho + rho.adjoint())));
    };

    sample(0);
    for (std::size_t step = 1; step <= steps; ++step) {
        rk4_step_inplace(state, cfg.dt, rhs, ws);
        state.time = static_cast<double>(step) * cfg.dt;
        if (step % cfg.stride == 0) sample(step);
    }
    res.final_state = std::move(state);
    return res;
}

struct steady_state_timeout : numerical_error {
    Matrix last_iterate;
    double residual;
    steady_state_timeout(const std::string& what, Matrix rho, double res)
        : numerical_error(what), last_iterate(std::move(rho)), residual(res) {}
};

enum class SteadyMethod { propagate, dense, both };

struct SteadyStateOptions {
    SteadyMethod method{SteadyMethod::propagate};
    double dt{1e-3};
    double t_max{500.0};
    double tolerance{1e-10};   // ||d rho_0/dt||_F
    double agreement{1e-6};    // propagate vs dense, max-abs entry
    hierarchy::SignConvention convention{hierarchy::SignConvention::even};
    Matrix rho0{north_pole()};
};

struct SteadyStateResult {
    Matrix rho;
    double residual{0.0};
    double t_reached{0.0};
    std::optional<Matrix> rho_dense;
    std::optional<double> spectral_abscissa;
    double agreement{0.0};
};

namespace detail {

struct DenseSteady {
    Matrix rho;
    double abscissa;
};

inline DenseSteady dense_steady_state(const HierarchyGenerator& gen) {
    const Matrix M = gen.assemble_dense();
    const Eigen::Index D = M.rows();
    const Eigen::Index d = gen.dim();

    Eigen::ComplexEigenSolver<Matrix> ces(M, false);
    const double abscissa = ces.eigenvalues().real().maxCoeff();
    if (abscissa > 1e-8) {
        std::ostringstream os;
        os << "steady_state: generator has growing modes (spectral abscissa " << abscissa << ")";
        throw numerical_error(os.str());
    }
    std::vector<double> moduli;
    for (Eigen::Index i = 0; i < D; ++i) moduli.push_back(std::abs(ces.eigenvalues()(i)));
    std::sort(moduli.begin(), moduli.end());
    if (D >= 2 && moduli[1] < 1e-8)
        throw numerical_error("steady_state: generator null space is degenerate (no unique steady state)");

    // M x = 0 with tr(rho_0) = 1
    Matrix A(D + 1, D);
    A.topRows(D) = M;
    A.row(D).setZero();
    for (Eigen::Index i = 0; i < d; ++i) A(D, i * d + i) = 1.0;
    Vector b = Vector::Zero(D + 1);
    b(D) = 1.0;
    const Vector x = A.colPivHouseholderQr().solve(b);
    Matrix rho = Eigen::Map<const Matrix>(x.data(), d, d);
    return {0.5 * (rho + rho.adjoint()), abscissa};
}

} // namespace detail

// Long-time limit of rho_0. Propagation stops once ||d rho_0/dt||_F drops
// below the tolerance; the dense route solves the generator null space.
inline SteadyStateResult steady_state(const SystemModel& model, const bath::DissipatonSpectrum& spectrum,
                                      std::size_t L, ModelKind which, const SteadyStateOptions& opts = {}) {
    const auto table = build_table(model, spectrum, which, L, opts.convention);
    const HierarchyGenerator gen(model, spectrum, table);
    SteadyStateResult res;

    if (opts.method != SteadyMethod::propagate) {
        auto dense = detail::dense_steady_state(gen);
        res.rho_dense = dense.rho;
        res.spectral_abscissa = dense.abscissa;
        if (opts.method == SteadyMethod::dense) {
            res.rho = dense.rho;
            return res;
        }
    }

    HierarchyState state = HierarchyState::initial(opts.rho0, table.size());
    auto rhs = [&gen](const Eigen::MatrixXcd& X, Eigen::MatrixXcd& dX) { gen.apply(X, dX); };
    Rk4Workspace ws;
    const auto max_steps = static_cast<std::size_t>(std::llround(opts.t_max / opts.dt));
    const Eigen::Index d2 = model.dim() * model.dim();
    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t step = 0; step < max_steps; ++step) {
        rk4_step_inplace(state, opts.dt, rhs, ws);
        residual = ws.k1.col(0).head(d2).norm();
        // rho_0 alone can be momentarily stationary (e.g. an H_S eigenstate at
        // t = 0), so the whole hierarchy must have stopped moving as well.
        const double scale = std::max(1.0, state.data.norm());
        if (residual <= opts.tolerance && ws.k1.norm() <= opts.tolerance * scale) {
            res.t_reached = static_cast<double>(step) * opts.dt;
            break;
        }
    }
    Matrix rho = state.rho(0);
    if (!(residual <= opts.tolerance)) {
        std::ostringstream os;
        os << "steady_state: not converged by t=" << opts.t_max << " (residual " << residual << ")";
        throw steady_state_timeout(os.str(), rho, residual);
    }
    res.rho = 0.5 * (rho + rho.adjoint());
    res.residual = residual;
    if (res.rho_dense) {
        res.agreement = (res.rho - *res.rho_dense).cwiseAbs().maxCoeff();
        if (res.agreement > opts.agreement) {
            std::ostringstream os;
            os << "steady_state: propagated and dense steady states differ by " << res.agreement;
            throw numerical_error(os.str());
        }
    }
    return res;
}

// Worker count: PCL_DYN_THREADS when set, otherwise hardware concurrency.
inline std::size_t worker_count() {
    if (const char* env = std::getenv("PCL_DYN_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v >= 1) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Runs f(0..n-1) with at most `workers` concurrent tasks; results in order.
template <typename F>
auto parallel_map(std::size_t n, std::size_t workers, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
    using R = decltype(f(std::size_t{}));
    std::vector<R> out;
    out.reserve(n);
    workers = std::max<std::size_t>(1, workers);
    for (std::size_t start = 0; start < n; start += workers) {
        std::vector<std::future<R>> batch;
        for (std::size_t i = start; i < std::min(n, start + workers); ++i)
            batch.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, f, i));
        for (auto& fut : batch) out.push_back(fut.get());
    }
    return out;
}

// Largest Euclidean distance between the Bloch vectors of two trajectories
// sampled on the same grid.
inline double max_bloch_deviation(const obs::Trajectory& a, const obs::Trajectory& b) {
    if (a.rows.size() != b.rows.size()) throw config_error("bloch deviation: trajectories differ in length");
    double dev = 0.0;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        if (a.rows[i].t != b.rows[i].t) throw config_error("bloch deviation: time grids differ");
        const double dx = a.rows[i].sx - b.rows[i].sx;
        const double dy = a.rows[i].sy - b.rows[i].sy;
        const double dz = a.rows[i].sz - b.rows[i].sz;
        dev = std::max(dev, std::sqrt(dx * dx + dy * dy + dz * dz));
    }
    return dev;
}

struct ScanResult {
    std::vector<std::size_t> levels;
    std::vector<obs::Trajectory> trajectories;
    std::vector<double> deviations; // deviations[i] between levels[i] and levels[i+1]
    bool monotone{true};
};

inline ScanResult tier_convergence_scan(const SystemModel& model, const bath::DissipatonSpectrum& spectrum,
                                        const EvolveSettings& base, const std::vector<std::size_t>& levels,
                                        std::size_t workers = 1) {
    if (levels.size() < 2) throw config_error("tier_convergence_scan: need at least two levels");
    ScanResult res;
    res.levels = levels;
    res.trajectories = parallel_map(levels.size(), workers, [&](std::size_t i) {
        EvolveSettings cfg = base;
        cfg.L = levels[i];
        return evolve(model, spectrum, cfg).trajectory;
    });
    for (std::size_t i = 0; i + 1 < levels.size(); ++i)
        res.deviations.push_back(max_bloch_deviation(res.trajectories[i], res.trajectories[i + 1]));
    for (std::size_t i = 0; i + 1 < res.deviations.size(); ++i)
        if (!(res.deviations[i + 1] < res.deviations[i])) res.monotone = false;
    return res;
}

} // namespace pcl
