// observables.hpp — Contractions of the reduced density matrix: Bloch vector,
// entropy, eigen-populations, Hamiltonian of mean force, and the trajectory
// CSV format.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fftw3.h>

#include "pcl/core.hpp"
#include "pcl/generator.hpp"

namespace pcl::obs {

struct BlochVector {
    double x{0.0}, y{0.0}, z{0.0}, norm{0.0};
};

namespace detail {

inline void check_density(const Matrix& rho, double trace_tol, const char* who) {
    if (rho.rows() != rho.cols()) throw config_error(std::string(who) + ": matrix not square");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
        throw validation_error(std::string(who) + ": matrix not Hermitian");
    if (std::abs(rho.trace() - 1.0) > trace_tol)
        throw validation_error(std::string(who) + ": trace deviates from 1");
}

inline Matrix hermitian_part(const Matrix& rho) { return 0.5 * (rho + rho.adjoint()); }

} // namespace detail

inline BlochVector pauli_expectations(const Matrix& rho) {
    if (rho.rows() != 2 || rho.cols() != 2) throw unsupported_error("pauli_expectations: needs a 2x2 matrix");
    detail::check_density(rho, 1e-8, "pauli_expectations");
    BlochVector b;
    b.x = 2.0 * rho(0, 1).real();
    b.y = -2.0 * rho(0, 1).imag();
    b.z = (rho(0, 0) - rho(1, 1)).real();
    b.norm = std::sqrt(b.x * b.x + b.y * b.y + b.z * b.z);
    return b;
}

inline Eigen::VectorXd checked_eigenvalues(const Matrix& rho, const char* who) {
    detail::check_density(rho, 1e-6, who);
    Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitian_part(rho), Eigen::EigenvaluesOnly);
    Eigen::VectorXd p = es.eigenvalues();
    if (p.minCoeff() < -1e-10) throw validation_error(std::string(who) + ": matrix not positive semidefinite");
    return p.cwiseMax(0.0);
}

inline double vn_entropy(const Matrix& rho) {
    const Eigen::VectorXd p = checked_eigenvalues(rho, "vn_entropy");
    double s = 0.0;
    for (double v : p)
        if (v > 0.0) s -= v * std::log(v);
    return s;
}

inline double min_eigenvalue(const Matrix& rho) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitian_part(rho), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

struct EigenPopulations {
    Eigen::VectorXd P;  // descending
    Matrix vectors;     // column i pairs with P(i)
};

namespace detail {

inline void fix_phase(Matrix& vecs) {
    for (Eigen::Index c = 0; c < vecs.cols(); ++c)
        for (Eigen::Index r = 0; r < vecs.rows(); ++r) {
            const cplx v = vecs(r, c);
            if (std::abs(v) > 1e-12) {
                vecs.col(c) *= std::conj(v) / std::abs(v);
                break;
            }
        }
}

} // namespace detail

// Descending eigenvalues with eigenvectors whose first non-negligible
// component is real positive.
inline EigenPopulations eigen_populations(const Matrix& rho) {
    detail::check_density(rho, 1e-6, "eigen_populations");
    Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitian_part(rho));
    const Eigen::Index d = rho.rows();
    EigenPopulations out;
    out.P.resize(d);
    out.vectors.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        out.P(i) = std::clamp(es.eigenvalues()(d - 1 - i), 0.0, 1.0);
        out.vectors.col(i) = es.eigenvectors().col(d - 1 - i);
    }
    detail::fix_phase(out.vectors);
    return out;
}

// Reorders a fresh eigen-decomposition so that each eigenvector follows the
// previous sample by maximal overlap, and aligns phases with it. Only the
// trajectory CSV uses magnitude ordering.
class EigenTracker {
public:
    EigenPopulations update(const Matrix& rho) {
        EigenPopulations cur = eigen_populations(rho);
        if (m_prev.vectors.size() == 0) {
            m_prev = cur;
            return cur;
        }
        const Eigen::Index d = cur.P.size();
        std::vector<Eigen::Index> perm(static_cast<std::size_t>(d));
        std::vector<bool> used(static_cast<std::size_t>(d), false);
        for (Eigen::Index i = 0; i < d; ++i) {
            Eigen::Index best = -1;
            double best_ov = -1.0;
            for (Eigen::Index j = 0; j < d; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double ov = std::abs(m_prev.vectors.col(i).dot(cur.vectors.col(j)));
                if (ov > best_ov) {
                    best_ov = ov;
                    best = j;
                }
            }
            used[static_cast<std::size_t>(best)] = true;
            perm[static_cast<std::size_t>(i)] = best;
        }
        EigenPopulations out;
        out.P.resize(d);
        out.vectors.resize(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            const Eigen::Index j = perm[static_cast<std::size_t>(i)];
            out.P(i) = cur.P(j);
            Vector v = cur.vectors.col(j);
            const cplx ov = m_prev.vectors.col(i).dot(v);
            if (std::abs(ov) > 1e-12) v *= std::conj(ov) / std::abs(ov);
            out.vectors.col(i) = v;
        }
        m_prev = out;
        return out;
    }

private:
    EigenPopulations m_prev;
};

struct MeanForceHamiltonian {
    Matrix H_eff; // traceless
    double log_Z{0.0};
};

// rho = exp(-beta H_eff)/Z_eff with tr H_eff = 0:
//   H_eff = -(ln rho - tr(ln rho)/d) / beta,  ln Z_eff = -tr(ln rho)/d.
inline MeanForceHamiltonian hamiltonian_of_mean_force(const Matrix& rho_st, double beta) {
    if (!(beta > 0.0)) throw config_error("hamiltonian_of_mean_force: beta must be > 0");
    detail::check_density(rho_st, 1e-6, "hamiltonian_of_mean_force");
    Eigen::SelfAdjointEigenSolver<Matrix> es(detail::hermitian_part(rho_st));
    const Eigen::VectorXd p = es.eigenvalues();
    if (p.minCoeff() <= 1e-12) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "hamiltonian_of_mean_force: rank-deficient steady state (min eigenvalue %.3e)",
                      p.minCoeff());
        throw validation_error(buf);
    }
    const Eigen::VectorXd logp = p.array().log();
    const double mean = logp.mean();
    MeanForceHamiltonian out;
    out.log_Z = -mean;
    out.H_eff = es.eigenvectors() * ((logp.array() - mean) * (-1.0 / beta)).matrix().asDiagonal() *
                es.eigenvectors().adjoint();
    return out;
}

// Splitting estimate 2 sqrt(eps^2 + 4 alpha^2 g^2) of H_S + 2 g S for the
// two-level benchmark H_S = eps sigma_z, S = alpha sigma_x.
inline double frequency_estimate(const SystemModel& model, double g) {
    const Matrix& H = model.H;
    const Matrix& S = model.S;
    const bool benchmark = H.rows() == 2 && std::abs(H(0, 1)) < 1e-12 && std::abs(H(0, 0) + H(1, 1)) < 1e-12 &&
                           std::abs(H(0, 0).imag()) < 1e-12 && std::abs(S(0, 0)) < 1e-12 &&
                           std::abs(S(1, 1)) < 1e-12 && std::abs(S(0, 1).imag()) < 1e-12 &&
                           std::abs(S(0, 1) - S(1, 0)) < 1e-12;
    if (!benchmark) throw unsupported_error("frequency_estimate: model is not eps*sigma_z + alpha*sigma_x");
    const double eps = H(0, 0).real();
    const double alpha = S(0, 1).real();
    return 2.0 * std::sqrt(eps * eps + 4.0 * alpha * alpha * g * g);
}

// Angular frequency of the largest spectral peak of a uniformly sampled
// signal (mean removed, Hann window, zero padded, parabolic refinement).
inline double dominant_frequency(std::span<const double> signal, double dt, std::size_t pad_to = 1u << 18) {
    const std::size_t n = signal.size();
    if (n < 4) throw config_error("dominant_frequency: need at least 4 samples");
    std::size_t N = std::max(pad_to, n);
    double* in = fftw_alloc_real(N);
    fftw_complex* out = fftw_alloc_complex(N / 2 + 1);
    double mean = 0.0;
    for (double v : signal) mean += v;
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < N; ++i) {
        if (i < n) {
            const double w = 0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(n - 1));
            in[i] = (signal[i] - mean) * w;
        } else {
            in[i] = 0.0;
        }
    }
    // FFTW planning is not re-entrant
    static std::mutex planner;
    fftw_plan plan;
    {
        std::lock_guard lock(planner);
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(N), in, out, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::vector<double> mag(N / 2 + 1);
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::hypot(out[i][0], out[i][1]);
    {
        std::lock_guard lock(planner);
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);

    std::size_t k = static_cast<std::size_t>(std::max_element(mag.begin() + 1, mag.end()) - mag.begin());
    double shift = 0.0;
    if (k > 0 && k + 1 < mag.size()) {
        const double a = mag[k - 1], b = mag[k], c = mag[k + 1];
        const double den = a - 2.0 * b + c;
        if (den != 0.0) shift = 0.5 * (a - c) / den;
    }
    return 2.0 * pi * (static_cast<double>(k) + shift) / (static_cast<double>(N) * dt);
}

struct TrajectoryRow {
    double t{0.0};
    double sx{0.0}, sy{0.0}, sz{0.0}, bloch_norm{0.0};
    double entropy{0.0};
    double p_plus{0.0}, p_minus{0.0};
};

struct Trajectory {
    std::vector<std::pair<std::string, std::string>> metadata;
    std::vector<TrajectoryRow> rows;

    void set_meta(const std::string& key, const std::string& value) {
        for (auto& kv : metadata)
            if (kv.first == key) {
                kv.second = value;
                return;
            }
        metadata.emplace_back(key, value);
    }
};

// Trajectory rows tolerate the small negative eigenvalues a truncated
// hierarchy can produce: populations are clamped to [0, 1] before the entropy
// is taken. Callers track the raw minimum eigenvalue separately.
inline TrajectoryRow make_row(double t, const Matrix& rho) {
    const BlochVector b = pauli_expectations(rho);
    const EigenPopulations ep = eigen_populations(rho);
    TrajectoryRow row;
    row.t = t;
    row.sx = b.x;
    row.sy = b.y;
    row.sz = b.z;
    row.bloch_norm = b.norm;
    row.entropy = 0.0;
    for (Eigen::Index i = 0; i < ep.P.size(); ++i)
        if (ep.P(i) > 0.0) row.entropy -= ep.P(i) * std::log(ep.P(i));
    row.p_plus = ep.P(0);
    row.p_minus = ep.P(1);
    return row;
}

inline constexpr const char* csv_header = "t,sx,sy,sz,bloch_norm,entropy,p_plus,p_minus";

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v == 0.0 ? 0.0 : v); // no "-0"
    return buf;
}

inline std::string format_row(const TrajectoryRow& r) {
    std::string s;
    for (double v : {r.t, r.sx, r.sy, r.sz, r.bloch_norm, r.entropy, r.p_plus, r.p_minus}) {
        if (!s.empty()) s += ',';
        s += format_double(v);
    }
    return s;
}

inline std::string to_csv(const Trajectory& traj) {
    std::string out;
    for (const auto& [k, v] : traj.metadata) out += "# " + k + "=" + v + "\n";
    out += csv_header;
    out += '\n';
    for (const auto& r : traj.rows) {
        out += format_row(r);
        out += '\n';
    }
    return out;
}

} // namespace pcl::obs
