// generator.hpp — Right-hand side of the hierarchical equations of motion
//
// Both the exponential (PCL) and linear (CL) hierarchies share one form,
//   d rho_n = -i[H_S, rho_n] - (sum_k n_k gamma_k) rho_n
//             - i sum_{n'} left(n,n') S rho_{n'} + i sum_{n'} right(n,n') rho_{n'} S,
// and differ only in the coupling table.

#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>

#include <Eigen/Sparse>
#include <unsupported/Eigen/KroneckerProduct>

#include "pcl/bath.hpp"
#include "pcl/core.hpp"
#include "pcl/hierarchy.hpp"

namespace pcl {

struct SystemModel {
    Matrix H; // system Hamiltonian H_S
    Matrix S; // coupling operator
    double lambda{0.0};
    double alpha{0.0};
    double epsilon_s{1.0};

    Eigen::Index dim() const { return H.rows(); }

    // H_S = eps sigma_z, S = alpha sigma_x
    static SystemModel two_level(double epsilon_s, double alpha, double lambda) {
        SystemModel m;
        m.H = Matrix::Zero(2, 2);
        m.H(0, 0) = epsilon_s;
        m.H(1, 1) = -epsilon_s;
        m.S = Matrix::Zero(2, 2);
        m.S(0, 1) = alpha;
        m.S(1, 0) = alpha;
        m.lambda = lambda;
        m.alpha = alpha;
        m.epsilon_s = epsilon_s;
        return m;
    }

    void validate() const {
        if (H.rows() < 1 || H.rows() != H.cols()) throw config_error("system: H_S must be square");
        if (S.rows() != H.rows() || S.cols() != H.cols()) throw config_error("system: S shape differs from H_S");
        if ((H - H.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw validation_error("system: H_S not Hermitian");
        if ((S - S.adjoint()).cwiseAbs().maxCoeff() > 1e-12) throw validation_error("system: S not Hermitian");
    }
};

// One d x d block per multi-index, stored as vec(rho_n) (column-major) in
// column n of a d^2 x N matrix.
struct HierarchyState {
    Eigen::MatrixXcd data;
    Eigen::Index dim{0};
    double time{0.0};

    HierarchyState() = default;
    HierarchyState(Eigen::Index d, std::size_t count)
        : data(Eigen::MatrixXcd::Zero(d * d, static_cast<Eigen::Index>(count))), dim(d) {}

    std::size_t size() const { return static_cast<std::size_t>(data.cols()); }

    Eigen::Map<Matrix> rho(std::size_t n) { return {data.col(static_cast<Eigen::Index>(n)).data(), dim, dim}; }
    Eigen::Map<const Matrix> rho(std::size_t n) const {
        return {data.col(static_cast<Eigen::Index>(n)).data(), dim, dim};
    }

    // rho_0(0) = rho_S(0), all auxiliary blocks zero.
    static HierarchyState initial(const Matrix& rho_s, std::size_t count) {
        HierarchyState s(rho_s.rows(), count);
        s.rho(0) = rho_s;
        return s;
    }
};

class HierarchyGenerator {
public:
    HierarchyGenerator(const SystemModel& model, const bath::DissipatonSpectrum& spectrum,
                       const hierarchy::CouplingTable& table)
        : m_dim(model.dim()), m_size(table.size()), m_kind(table.kind) {
        model.validate();
        if (table.indices.K() != spectrum.K())
            throw config_error("generator: coupling table and spectrum disagree on K");
        const Eigen::Index d = m_dim;
        const Matrix Id = Matrix::Identity(d, d);
        // vec(A X B) = (B^T kron A) vec(X)
        m_unitary = -I * (Eigen::kroneckerProduct(Id, model.H).eval() -
                          Eigen::kroneckerProduct(model.H.transpose(), Id).eval());
        m_left = -I * Eigen::kroneckerProduct(Id, model.S).eval();
        m_right = I * Eigen::kroneckerProduct(model.S.transpose(), Id).eval();
        m_damping.resize(static_cast<Eigen::Index>(m_size));
        for (std::size_t r = 0; r < m_size; ++r) {
            cplx acc{0.0};
            const auto& n = table.indices[r].counts;
            for (std::size_t k = 0; k < n.size(); ++k) acc += static_cast<double>(n[k]) * spectrum.gamma[k];
            m_damping(static_cast<Eigen::Index>(r)) = acc;
        }
        m_left_weights = hierarchy::transposed_weights(table, true);
        m_right_weights = hierarchy::transposed_weights(table, false);
    }

    Eigen::Index dim() const { return m_dim; }
    std::size_t size() const { return m_size; }
    hierarchy::TableKind kind() const { return m_kind; }

    void apply(const Eigen::MatrixXcd& X, Eigen::MatrixXcd& dX) const {
        if (X.rows() != m_dim * m_dim || X.cols() != static_cast<Eigen::Index>(m_size))
            throw config_error("generator: state shape does not match the hierarchy");
        m_gather = X * m_left_weights;
        dX.noalias() = m_left * m_gather;
        m_gather = X * m_right_weights;
        dX.noalias() += m_right * m_gather;
        dX.noalias() += m_unitary * X;
        dX -= X * m_damping.asDiagonal();
    }

    HierarchyState operator()(const HierarchyState& s) const {
        HierarchyState out(s.dim, s.size());
        out.time = s.time;
        apply(s.data, out.data);
        return out;
    }

    // Dense superoperator on the stacked vector of all blocks.
    Matrix assemble_dense() const {
        const Eigen::Index D = m_dim * m_dim * static_cast<Eigen::Index>(m_size);
        Matrix M(D, D);
        Eigen::MatrixXcd X = Eigen::MatrixXcd::Zero(m_dim * m_dim, static_cast<Eigen::Index>(m_size));
        Eigen::MatrixXcd dX(X.rows(), X.cols());
        for (Eigen::Index j = 0; j < D; ++j) {
            X.data()[j] = 1.0;
            apply(X, dX);
            M.col(j) = Eigen::Map<const Vector>(dX.data(), D);
            X.data()[j] = 0.0;
        }
        return M;
    }

private:
    Eigen::Index m_dim;
    std::size_t m_size;
    hierarchy::TableKind m_kind;
    Matrix m_unitary, m_left, m_right;
    Vector m_damping;
    Eigen::SparseMatrix<cplx> m_left_weights, m_right_weights;
    mutable Eigen::MatrixXcd m_gather;
};

namespace detail {

inline void check_rhs_inputs(const HierarchyState& state, const SystemModel& model,
                             const bath::DissipatonSpectrum& spectrum, const hierarchy::CouplingTable& table,
                             hierarchy::TableKind expected) {
    if (table.kind != expected)
        throw config_error(std::string("rhs: coupling table kind is ") + hierarchy::to_string(table.kind));
    if (expected == hierarchy::TableKind::pcl && table.lambda != model.lambda)
        throw config_error("pcl_rhs: table built for a different lambda");
    if (state.size() != table.size() || state.dim != model.dim())
        throw config_error("rhs: state shape does not match model/table");
    if (table.indices.K() != spectrum.K()) throw config_error("rhs: table K differs from spectrum K");
}

} // namespace detail

inline HierarchyState pcl_rhs(const HierarchyState& state, const SystemModel& model,
                              const bath::DissipatonSpectrum& spectrum, const hierarchy::CouplingTable& table) {
    detail::check_rhs_inputs(state, model, spectrum, table, hierarchy::TableKind::pcl);
    return HierarchyGenerator(model, spectrum, table)(state);
}

inline HierarchyState cl_rhs(const HierarchyState& state, const SystemModel& model,
                             const bath::DissipatonSpectrum& spectrum, const hierarchy::CouplingTable& table) {
    detail::check_rhs_inputs(state, model, spectrum, table, hierarchy::TableKind::cl);
    return HierarchyGenerator(model, spectrum, table)(state);
}

// Offsets of the conjugate partner n-bar (counts swapped along k <-> pair(k)).
inline std::vector<std::size_t> conjugate_offsets(const hierarchy::IndexSet& idx, const bath::DissipatonSpectrum& s) {
    std::vector<std::size_t> out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        hierarchy::Counts bar(s.K());
        for (std::size_t k = 0; k < s.K(); ++k) bar[s.pair[k]] = idx[r].counts[k];
        out[r] = *idx.lookup(bar);
    }
    return out;
}

// max_n || rho_{n-bar} - rho_n^dagger ||_max
inline double hermiticity_defect(const HierarchyState& state, const std::vector<std::size_t>& conjugate) {
    double defect = 0.0;
    for (std::size_t r = 0; r < state.size(); ++r)
        defect = std::max(defect, (state.rho(conjugate[r]) - state.rho(r).adjoint()).cwiseAbs().maxCoeff());
    return defect;
}

} // namespace pcl
