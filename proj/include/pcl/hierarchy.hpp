// hierarchy.hpp — Truncated multi-index space and the precomputed coupling
// tables that drive the equations of motion.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "pcl/bath.hpp"
#include "pcl/core.hpp"
#include "pcl/dissipaton_algebra.hpp"

namespace pcl::hierarchy {

using Counts = std::vector<std::size_t>;

struct MultiIndex {
    Counts counts;

    std::size_t tier() const {
        std::size_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
    bool operator==(const MultiIndex&) const = default;
};

// All multi-indices with tier <= L, ordered by tier and, within a tier, by
// descending lexicographic order: (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
class IndexSet {
public:
    IndexSet() = default;

    IndexSet(std::size_t K, std::size_t L) : m_K(K), m_L(L) {
        if (K < 1) throw config_error("enumerate_indices: K must be >= 1");
        Counts cur(K, 0);
        for (std::size_t tier = 0; tier <= L; ++tier) fill(cur, 0, tier);
        for (std::size_t i = 0; i < m_indices.size(); ++i) m_offsets.emplace(m_indices[i].counts, i);
    }

    std::size_t K() const { return m_K; }
    std::size_t L() const { return m_L; }
    std::size_t size() const { return m_indices.size(); }
    const MultiIndex& operator[](std::size_t i) const { return m_indices[i]; }
    auto begin() const { return m_indices.begin(); }
    auto end() const { return m_indices.end(); }

    // Offset of counts, or nullopt when the index lies outside the truncation.
    std::optional<std::size_t> lookup(const Counts& counts) const {
        if (counts.size() != m_K) return std::nullopt;
        auto it = m_offsets.find(counts);
        if (it == m_offsets.end()) return std::nullopt;
        return it->second;
    }

private:
    void fill(Counts& cur, std::size_t k, std::size_t remaining) {
        if (k + 1 == m_K) {
            cur[k] = remaining;
            m_indices.push_back({cur});
            return;
        }
        for (std::size_t v = remaining + 1; v-- > 0;) {
            cur[k] = v;
            fill(cur, k + 1, remaining - v);
        }
        cur[k] = 0;
    }

    std::size_t m_K{0};
    std::size_t m_L{0};
    std::vector<MultiIndex> m_indices;
    std::map<Counts, std::size_t> m_offsets;
};

inline IndexSet enumerate_indices(std::size_t K, std::size_t L) { return IndexSet(K, L); }

enum class SignConvention { even, odd_paper_literal };
enum class TableKind { pcl, cl };

inline const char* to_string(SignConvention c) { return c == SignConvention::even ? "even" : "odd-paper-literal"; }
inline const char* to_string(TableKind k) { return k == TableKind::pcl ? "pcl" : "cl"; }

struct CouplingEntry {
    std::size_t column;
    cplx left;  // multiplies S rho_{n'} (left action)
    cplx right; // multiplies rho_{n'} S (right action)
};

// Row n holds the terms -i sum_{n'} left(n,n') S rho_{n'} + i sum_{n'} right(n,n') rho_{n'} S.
struct CouplingTable {
    TableKind kind{TableKind::pcl};
    SignConvention convention{SignConvention::even};
    double g{1.0};
    double lambda{0.0};
    IndexSet indices;
    std::vector<std::vector<CouplingEntry>> rows;

    std::size_t size() const { return rows.size(); }

    std::size_t nnz() const {
        std::size_t n = 0;
        for (const auto& r : rows) n += r.size();
        return n;
    }

    const CouplingEntry* find(std::size_t row, std::size_t column) const {
        for (const auto& e : rows[row])
            if (e.column == column) return &e;
        return nullptr;
    }

    cplx left(std::size_t row, std::size_t column) const {
        const auto* e = find(row, column);
        return e ? e->left : cplx{0.0};
    }
    cplx right(std::size_t row, std::size_t column) const {
        const auto* e = find(row, column);
        return e ? e->right : cplx{0.0};
    }

    // Text dump, one line per entry: row column Re(left) Im(left) Re(right) Im(right)
    std::string dump() const {
        std::ostringstream os;
        os << "# kind=" << to_string(kind) << " convention=" << to_string(convention) << " g=";
        char buf[160];
        std::snprintf(buf, sizeof buf, "%.17g lambda=%.17g", g, lambda);
        os << buf << " size=" << size() << " nnz=" << nnz() << "\n";
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (const auto& e : rows[r]) {
                std::snprintf(buf, sizeof buf, "%zu %zu %.17g %.17g %.17g %.17g\n", r, e.column, e.left.real(),
                              e.left.imag(), e.right.real(), e.right.imag());
                os << buf;
            }
        return os.str();
    }
};

namespace detail {

// sum over admissible l of (i lambda)^{m} eta^{l} C(n,l) / (m-l)!, m = n' - n + 2l,
// for one dissipaton component.
inline cplx component_factor(std::size_t n, std::size_t np, cplx eta, double lambda) {
    const cplx z = I * lambda;
    const std::size_t l_min = n > np ? n - np : 0;
    cplx acc{0.0};
    for (std::size_t l = l_min; l <= n; ++l) {
        const std::size_t m = np + 2 * l - n;
        acc += algebra::ipow(z, m) * algebra::ipow(eta, l) * algebra::binomial(n, l) / algebra::factorial(m - l);
    }
    return acc;
}

inline void prune(std::vector<std::vector<CouplingEntry>>& rows) {
    double amax = 0.0;
    for (const auto& r : rows)
        for (const auto& e : r) amax = std::max({amax, std::abs(e.left), std::abs(e.right)});
    const double floor = 1e-14 * amax;
    for (auto& r : rows) {
        for (auto& e : r) {
            if (std::abs(e.left) < floor) e.left = 0.0;
            if (std::abs(e.right) < floor) e.right = 0.0;
        }
        std::erase_if(r, [](const CouplingEntry& e) { return e.left == cplx{0.0} && e.right == cplx{0.0}; });
    }
}

} // namespace detail

// Exponential-coupling table. The m-sum of the PCL equations is re-indexed by
// the target column n': for each component the admissible l_k run over
// max(0, n_k - n'_k) .. n_k with m_k = n'_k - n_k + 2 l_k, so every entry is a
// finite sum. Since (i lambda)^m = prod_k (i lambda)^{m_k} and
// (-i lambda)^m = (-1)^{sum_k (n'_k - n_k)} (i lambda)^m, the sign factor reduces to
// a parity selection times 2:
//   even:               (i lambda)^m + (-i lambda)^m
//   odd-paper-literal:  (i lambda)^m - (-i lambda)^m
// Right weights use conj(eta_{pair(k)}).
inline CouplingTable build_pcl_coupling(const bath::DissipatonSpectrum& spec, double lambda, std::size_t L,
                                        SignConvention convention = SignConvention::even) {
    const auto report = bath::validate_spectrum(spec);
    const std::size_t K = spec.K();
    CouplingTable table;
    table.kind = TableKind::pcl;
    table.convention = convention;
    table.g = report.g(lambda);
    table.lambda = lambda;
    table.indices = IndexSet(K, L);
    const auto& idx = table.indices;
    table.rows.resize(idx.size());

    std::vector<cplx> eta_right(K);
    for (std::size_t k = 0; k < K; ++k) eta_right[k] = std::conj(spec.eta[spec.pair[k]]);

    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& n = idx[r].counts;
        for (std::size_t c = 0; c < idx.size(); ++c) {
            const auto& np = idx[c].counts;
            long delta = 0;
            for (std::size_t k = 0; k < K; ++k) delta += static_cast<long>(np[k]) - static_cast<long>(n[k]);
            const bool even_delta = delta % 2 == 0;
            if (even_delta != (convention == SignConvention::even)) continue;

            cplx left{1.0}, right{1.0};
            for (std::size_t k = 0; k < K; ++k) {
                left *= detail::component_factor(n[k], np[k], spec.eta[k], lambda);
                right *= detail::component_factor(n[k], np[k], eta_right[k], lambda);
            }
            left *= 2.0 * table.g;
            right *= 2.0 * table.g;
            if (left == cplx{0.0} && right == cplx{0.0}) continue;
            table.rows[r].push_back({c, left, right});
        }
    }
    detail::prune(table.rows);
    return table;
}

// Linear-coupling hierarchy: nearest-tier entries only.
//   up   (n -> n_k^+):  left = right = 1
//   down (n -> n_k^-):  left = n_k eta_k, right = n_k conj(eta_{pair(k)})
inline CouplingTable build_cl_coupling(const bath::DissipatonSpectrum& spec, std::size_t L) {
    bath::validate_spectrum(spec);
    const std::size_t K = spec.K();
    CouplingTable table;
    table.kind = TableKind::cl;
    table.indices = IndexSet(K, L);
    const auto& idx = table.indices;
    table.rows.resize(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        Counts n = idx[r].counts;
        for (std::size_t k = 0; k < K; ++k) {
            ++n[k];
            if (auto c = idx.lookup(n)) table.rows[r].push_back({*c, 1.0, 1.0});
            --n[k];
            if (n[k] > 0) {
                --n[k];
                const double nk = static_cast<double>(n[k] + 1);
                if (auto c = idx.lookup(n))
                    table.rows[r].push_back({*c, nk * spec.eta[k], nk * std::conj(spec.eta[spec.pair[k]])});
                ++n[k];
            }
        }
        std::sort(table.rows[r].begin(), table.rows[r].end(),
                  [](const CouplingEntry& a, const CouplingEntry& b) { return a.column < b.column; });
    }
    return table;
}

// Sparse transposes used by the generator: Y = X * A^T gathers
// sum_{n'} A(n,n') x_{n'} into column n.
inline Eigen::SparseMatrix<cplx> transposed_weights(const CouplingTable& table, bool left) {
    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(table.nnz());
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        for (const auto& e : table.rows[r]) {
            const cplx w = left ? e.left : e.right;
            if (w != cplx{0.0})
                trip.emplace_back(static_cast<int>(e.column), static_cast<int>(r), w);
        }
    const auto n = static_cast<Eigen::Index>(table.size());
    Eigen::SparseMatrix<cplx> m(n, n);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

} // namespace pcl::hierarchy
