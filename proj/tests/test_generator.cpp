#include <random>

#include <gtest/gtest.h>

#include "pcl/generator.hpp"
#include "pcl/integrator.hpp"

using namespace pcl;

namespace {

bath::DissipatonSpectrum fig2_spectrum() {
    return bath::matsubara_decompose_drude(bath::SpectralDensity::drude(1.0, 1.0), 0.5, 2);
}

HierarchyState random_state(Eigen::Index d, std::size_t n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    HierarchyState s(d, n);
    for (Eigen::Index i = 0; i < s.data.size(); ++i) s.data.data()[i] = cplx{nd(rng), nd(rng)};
    return s;
}

} // namespace

TEST(SystemModel, TwoLevelBenchmark) {
    const auto m = SystemModel::two_level(1.0, 0.5, 0.3);
    EXPECT_EQ(m.dim(), 2);
    EXPECT_EQ(m.H(0, 0), cplx(1.0));
    EXPECT_EQ(m.H(1, 1), cplx(-1.0));
    EXPECT_EQ(m.S(0, 1), cplx(0.5));
    EXPECT_NO_THROW(m.validate());
    auto bad = m;
    bad.S(0, 1) = cplx{0.0, 1.0};
    EXPECT_THROW(bad.validate(), validation_error);
}

TEST(PclRhs, ZeroStateHasZeroDerivative) {
    const auto s = fig2_spectrum();
    const auto m = SystemModel::two_level(1.0, 1.0, 0.5);
    const auto t = hierarchy::build_pcl_coupling(s, 0.5, 4);
    const HierarchyState zero(2, t.size());
    EXPECT_EQ(pcl_rhs(zero, m, s, t).data.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PclRhs, Linearity) {
    const auto s = fig2_spectrum();
    const auto m = SystemModel::two_level(1.0, 1.0, 0.5);
    const auto t = hierarchy::build_pcl_coupling(s, 0.5, 4);
    const auto x = random_state(2, t.size(), 1), y = random_state(2, t.size(), 2);
    const cplx a{0.3, -1.2}, b{2.0, 0.5};
    HierarchyState z(2, t.size());
    z.data = a * x.data + b * y.data;
    const Eigen::MatrixXcd lhs = pcl_rhs(z, m, s, t).data;
    const Eigen::MatrixXcd rhs = a * pcl_rhs(x, m, s, t).data + b * pcl_rhs(y, m, s, t).data;
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12 * rhs.cwiseAbs().maxCoeff());
}

TEST(PclRhs, TraceOfRhoZeroIsConserved) {
    const auto s = fig2_spectrum();
    const auto m = SystemModel::two_level(1.0, 1.0, 0.8);
    for (auto conv : {hierarchy::SignConvention::even, hierarchy::SignConvention::odd_paper_literal}) {
        const auto t = hierarchy::build_pcl_coupling(s, 0.8, 5, conv);
        for (unsigned seed = 0; seed < 5; ++seed) {
            const auto d = pcl_rhs(random_state(2, t.size(), seed), m, s, t);
            EXPECT_LT(std::abs(d.rho(0).trace()), 1e-12);
        }
    }
}

TEST(PclRhs, LambdaZeroIsUnitaryUnderShiftedHamiltonian) {
    const auto s = fig2_spectrum();
    const auto m = SystemModel::two_level(1.0, 0.7, 0.0);
    const auto t = hierarchy::build_pcl_coupling(s, 0.0, 3);
    const auto x = random_state(2, t.size(), 7);
    const auto d = pcl_rhs(x, m, s, t);
    const Matrix H = m.H + 2.0 * m.S;
    for (std::size_t r = 0; r < t.size(); ++r) {
        cplx damp{0.0};
        for (std::size_t k = 0; k < s.K(); ++k) damp += static_cast<double>(t.indices[r].counts[k]) * s.gamma[k];
        const Matrix expect = -I * (H * x.rho(r) - x.rho(r) * H) - damp * x.rho(r);
        EXPECT_LT((d.rho(r) - expect).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(PclRhs, ShapeAndKindChecks) {
    const auto s = fig2_spectrum();
    const auto m = SystemModel::two_level(1.0, 1.0, 0.5);
    const auto t = hierarchy::build_pcl_coupling(s, 0.5, 3);
    EXPECT_THROW(pcl_rhs(HierarchyState(2, t.size() + 1), m, s, t), config_error);
    EXPECT_THROW(cl_rhs(HierarchyState(2, t.size()), m, s, t), config_error);
    const auto other = SystemModel::two_level(1.0, 1.0, 0.6);
    EXPECT_THROW(pcl_rhs(HierarchyState(2, t.size()), other, s, t), config_error);
}

TEST(ClRhs, ZeroCouplingSpectrum) {
    // With every eta_k = 0 only the upward commutators survive: rho_n sees
    // -i [S, rho_{n+e_k}] and nothing from below.
    auto s = fig2_spectrum();
    for (auto& e : s.eta) e = 0.0;
    const auto m = SystemModel::two_level(1.0, 1.0, 0.0);
    const auto t = hierarchy::build_cl_coupling(s, 3);
    auto x = random_state(2, t.size(), 3);
    for (std::size_t r = 0; r < t.size(); ++r)
        if (t.indices[r].tier() > 1) x.rho(r).setZero();
    const auto d = cl_rhs(x, m, s, t);
    auto comm = [](const Matrix& A, const Matrix& B) { return Matrix(A * B - B * A); };
    Matrix expect0 = -I * comm(m.H, x.rho(0));
    for (std::size_t k = 0; k < 2; ++k) {
        hierarchy::Counts e(2, 0);
        e[k] = 1;
        const std::size_t r = *t.indices.lookup(e);
        expect0 += -I * comm(m.S, x.rho(r));
        const Matrix expect = -I * comm(m.H, x.rho(r)) - s.gamma[k] * x.rho(r);
        EXPECT_LT((d.rho(r) - expect).cwiseAbs().maxCoeff(), 1e-13);
    }
    EXPECT_LT((d.rho(0) - expect0).cwiseAbs().maxCoeff(), 1e-13);
    for (std::size_t r = 0; r < t.size(); ++r)
        if (t.indices[r].tier() == 2) {
            EXPECT_LT(d.rho(r).cwiseAbs().maxCoeff(), 1e-15);
        }
}

TEST(ClRhs, TierDampingRates) {
    auto s = fig2_spectrum();
    for (auto& e : s.eta) e = 0.0;
    const auto m = SystemModel::two_level(1.0, 0.0, 0.0);
    const auto t = hierarchy::build_cl_coupling(s, 3);
    HierarchyState x(2, t.size());
    const std::size_t r = *t.indices.lookup({2, 1});
    x.rho(r) = Matrix::Identity(2, 2);
    const auto d = cl_rhs(x, m, s, t);
    EXPECT_LT(std::abs(d.rho(r)(0, 0) + (2.0 * s.gamma[0] + s.gamma[1])), 1e-13);
}

TEST(ClRhs, TraceConserved) {
    const auto s = fig2_spectrum();
    const auto m = SystemModel::two_level(1.0, 1.0, 0.0);
    const auto t = hierarchy::build_cl_coupling(s, 5);
    for (unsigned seed = 10; seed < 14; ++seed)
        EXPECT_LT(std::abs(cl_rhs(random_state(2, t.size(), seed), m, s, t).rho(0).trace()), 1e-12);
}

TEST(Generator, DenseAssemblyMatchesApply) {
    const auto s = fig2_spectrum();
    const auto m = SystemModel::two_level(1.0, 1.0, 0.5);
    const auto t = hierarchy::build_pcl_coupling(s, 0.5, 3);
    const HierarchyGenerator gen(m, s, t);
    const Matrix M = gen.assemble_dense();
    const auto x = random_state(2, t.size(), 5);
    Eigen::MatrixXcd dx(x.data.rows(), x.data.cols());
    gen.apply(x.data, dx);
    const Vector v = Eigen::Map<const Vector>(x.data.data(), x.data.size());
    const Vector mv = M * v;
    EXPECT_LT((mv - Eigen::Map<const Vector>(dx.data(), dx.size())).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Generator, ConjugateOffsetsAreAnInvolution) {
    const auto s = bath::discrete_mode_decompose(1.0, 0.2, 0.5);
    const auto idx = hierarchy::enumerate_indices(2, 5);
    const auto conj = conjugate_offsets(idx, s);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        EXPECT_EQ(conj[conj[r]], r);
        EXPECT_EQ(idx[conj[r]].counts[0], idx[r].counts[1]);
    }
}
