// oracle.hpp — Exact dynamics of system (x) truncated Fock modes, used to
// check the hierarchies against brute force.

#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include <unsupported/Eigen/KroneckerProduct>

#include "pcl/bath.hpp"
#include "pcl/core.hpp"
#include "pcl/generator.hpp"

namespace pcl::oracle {

struct BathMode {
    double omega{1.0};
    double c{0.0};
};

struct DiscreteBath {
    std::vector<BathMode> modes;
    std::size_t n_max{30};
    double beta{1.0};
    double adequacy_tol{1e-8};

    std::size_t levels() const { return n_max + 1; }

    std::size_t dim() const {
        std::size_t d = 1;
        for (std::size_t j = 0; j < modes.size(); ++j) d *= levels();
        return d;
    }

    // max_j nbar_j exp(-beta w_j n_max)
    double truncation_tail() const {
        double tail = 0.0;
        for (const auto& m : modes) {
            const double nbar = 1.0 / std::expm1(beta * m.omega);
            tail = std::max(tail, nbar * std::exp(-beta * m.omega * static_cast<double>(n_max)));
        }
        return tail;
    }

    void validate() const {
        if (modes.empty() || modes.size() > 2) throw config_error("oracle: one or two bath modes supported");
        if (n_max < 2) throw config_error("oracle: n_max must be >= 2");
        if (!(beta > 0.0)) throw config_error("oracle: beta must be > 0");
        for (const auto& m : modes)
            if (!(m.omega > 0.0)) throw config_error("oracle: mode frequency must be > 0");
        const double tail = truncation_tail();
        if (tail > adequacy_tol) {
            std::ostringstream os;
            os << "oracle: Fock truncation n_max=" << n_max << " inadequate (thermal tail " << tail << " > "
               << adequacy_tol << ")";
            throw validation_error(os.str());
        }
    }
};

enum class Coupling { pcl, cl };

namespace detail {

inline Matrix annihilation(std::size_t levels) {
    Matrix a = Matrix::Zero(static_cast<Eigen::Index>(levels), static_cast<Eigen::Index>(levels));
    for (std::size_t n = 1; n < levels; ++n)
        a(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n)) = std::sqrt(static_cast<double>(n));
    return a;
}

// Embeds a single-mode operator as mode j of the bath.
inline Matrix embed(const Matrix& op, std::size_t j, const DiscreteBath& bath) {
    Matrix out = Matrix::Identity(1, 1);
    const auto lv = static_cast<Eigen::Index>(bath.levels());
    for (std::size_t i = 0; i < bath.modes.size(); ++i) {
        const Matrix f = i == j ? op : Matrix::Identity(lv, lv);
        out = Eigen::kroneckerProduct(out, f).eval();
    }
    return out;
}

// f(A) for Hermitian A through its eigendecomposition.
template <typename F>
Matrix hermitian_function(const Matrix& A, F&& f) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(A);
    Vector vals(A.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i) vals(i) = f(es.eigenvalues()(i));
    return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
}

} // namespace detail

// x_j = (a_j + a_j^dagger)/sqrt(2); F = sum_j c_j x_j
inline Matrix collective_coordinate(const DiscreteBath& bath) {
    const Matrix a = detail::annihilation(bath.levels());
    const Matrix x = (a + a.adjoint()) / std::sqrt(2.0);
    const auto D = static_cast<Eigen::Index>(bath.dim());
    Matrix F = Matrix::Zero(D, D);
    for (std::size_t j = 0; j < bath.modes.size(); ++j) F += bath.modes[j].c * detail::embed(x, j, bath);
    return F;
}

// H_B = sum_j w_j n_j (zero-point energy dropped)
inline Matrix bath_hamiltonian(const DiscreteBath& bath) {
    const Matrix a = detail::annihilation(bath.levels());
    const Matrix n = a.adjoint() * a;
    const auto D = static_cast<Eigen::Index>(bath.dim());
    Matrix H = Matrix::Zero(D, D);
    for (std::size_t j = 0; j < bath.modes.size(); ++j) H += bath.modes[j].omega * detail::embed(n, j, bath);
    return H;
}

// B = exp(i lambda F) + exp(-i lambda F) = 2 cos(lambda F) in the truncated space.
inline Matrix phase_coupling_operator(const DiscreteBath& bath, double lambda) {
    return detail::hermitian_function(collective_coordinate(bath),
                                      [lambda](double f) { return cplx{2.0 * std::cos(lambda * f), 0.0}; });
}

// H_T = H_S (x) 1 + S (x) B + 1 (x) H_B with B = 2cos(lambda F) (pcl) or F (cl).
inline Matrix build_total_hamiltonian(const SystemModel& model, const DiscreteBath& bath, Coupling coupling) {
    bath.validate();
    model.validate();
    if (model.dim() * static_cast<Eigen::Index>(bath.dim()) > 100000)
        throw config_error("oracle: total dimension exceeds 1e5");
    const auto D = static_cast<Eigen::Index>(bath.dim());
    const Matrix Ib = Matrix::Identity(D, D);
    const Matrix Is = Matrix::Identity(model.dim(), model.dim());
    const Matrix B = coupling == Coupling::pcl ? phase_coupling_operator(bath, model.lambda) : collective_coordinate(bath);
    return Eigen::kroneckerProduct(model.H, Ib).eval() + Eigen::kroneckerProduct(model.S, B).eval() +
           Eigen::kroneckerProduct(Is, bath_hamiltonian(bath)).eval();
}

// prod_j exp(-beta w_j n_j) / Z_j, renormalized after truncation.
inline Matrix thermal_bath_state(const DiscreteBath& bath) {
    bath.validate();
    const Matrix Hb = bath_hamiltonian(bath);
    Matrix rho = Matrix::Zero(Hb.rows(), Hb.cols());
    const double e0 = Hb.diagonal().real().minCoeff();
    for (Eigen::Index i = 0; i < Hb.rows(); ++i) rho(i, i) = std::exp(-bath.beta * (Hb(i, i).real() - e0));
    return rho / rho.trace();
}

inline Matrix partial_trace_bath(const Matrix& rho_total, Eigen::Index ds, Eigen::Index db) {
    Matrix out = Matrix::Zero(ds, ds);
    for (Eigen::Index a = 0; a < ds; ++a)
        for (Eigen::Index b = 0; b < ds; ++b) out(a, b) = rho_total.block(a * db, b * db, db, db).trace();
    return out;
}

struct ExactPropagation {
    std::vector<Matrix> rho_s;
    std::vector<double> energy; // tr(H_T rho_T(t))
};

// rho_S(t) = tr_B[U(t) (rho_S(0) (x) rho_B^eq) U(t)^dagger], U from the eigendecomposition of H_T.
inline ExactPropagation propagate_exact(const SystemModel& model, const DiscreteBath& bath, Coupling coupling,
                                        const Matrix& rho_s0, const std::vector<double>& t_grid) {
    const Matrix H = build_total_hamiltonian(model, bath, coupling);
    const Matrix rho0 = Eigen::kroneckerProduct(rho_s0, thermal_bath_state(bath)).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    const Matrix& V = es.eigenvectors();
    const Eigen::VectorXd& E = es.eigenvalues();
    const Matrix rho_eig = V.adjoint() * rho0 * V;
    const Eigen::Index ds = model.dim();
    const auto db = static_cast<Eigen::Index>(bath.dim());

    ExactPropagation out;
    for (double t : t_grid) {
        Matrix r = rho_eig;
        for (Eigen::Index i = 0; i < r.rows(); ++i)
            for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) *= std::exp(-I * (E(i) - E(j)) * t);
        const Matrix rho_t = V * r * V.adjoint();
        out.rho_s.push_back(partial_trace_bath(rho_t, ds, db));
        out.energy.push_back((H * rho_t).trace().real());
    }
    return out;
}

// <F(t) F(0)> in the truncated thermal mode.
inline std::vector<cplx> exact_mode_correlation(const DiscreteBath& bath, const std::vector<double>& t_grid) {
    bath.validate();
    const Matrix F = collective_coordinate(bath);
    const Matrix Hb = bath_hamiltonian(bath);
    const Matrix rho = thermal_bath_state(bath);
    const Eigen::VectorXd e = Hb.diagonal().real();
    std::vector<cplx> out;
    for (double t : t_grid) {
        // F(t)_{ab} = exp(i (e_a - e_b) t) F_{ab}, H_B diagonal
        Matrix Ft = F;
        for (Eigen::Index a = 0; a < F.rows(); ++a)
            for (Eigen::Index b = 0; b < F.cols(); ++b) Ft(a, b) *= std::exp(I * (e(a) - e(b)) * t);
        out.push_back((Ft * F * rho).trace());
    }
    return out;
}

// Largest |<F(t)F(0)>_exact - sum_k eta_k exp(-gamma_k t)| for a single mode.
inline double mode_correlation_check(const DiscreteBath& bath, const std::vector<double>& t_grid) {
    if (bath.modes.size() != 1) throw config_error("mode_correlation_check: single mode only");
    const auto spec = bath::discrete_mode_decompose(bath.modes[0].omega, bath.modes[0].c, bath.beta);
    const auto exact = exact_mode_correlation(bath, t_grid);
    double dev = 0.0;
    for (std::size_t i = 0; i < t_grid.size(); ++i) dev = std::max(dev, std::abs(exact[i] - spec.correlation(t_grid[i])));
    return dev;
}

} // namespace pcl::oracle
