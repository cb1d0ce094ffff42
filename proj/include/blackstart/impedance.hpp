#pragma once

// Nodal impedance matrix of the energized network, grown one branch at a time
// with the classical Z-bus building rules:
//
//   tree branch p -> q (q new):    z_qq = z_pp + z_a,  z_qk = z_pk
//   link between restored p, q:    Z -= (Z_p - Z_q)(Z_p - Z_q)^T / (z_a + z_pp + z_qq - 2 z_pq)
//   grounded link at p (a source): Z -= Z_p Z_p^T / (z_a + z_pp)
//
// Ground is reached only through generator transient reactances. The matrix is
// a plain value: copying it snapshots the state.

#include "blackstart/errors.hpp"

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <vector>

namespace blackstart {

class ImpedanceMatrix {
public:
    using Complex = std::complex<double>;
    static constexpr double degenerate_denominator = 1e-12;

    ImpedanceMatrix() = default;

    /// Seeds the matrix with the black-start source at node `p`. `capacity`
    /// reserves room for that many nodes (optional).
    static ImpedanceMatrix init_with_source(int p, Complex source_impedance, std::size_t capacity = 0) {
        if (!(source_impedance.imag() > 0.0))
            throw NonpositiveReactance("source reactance must be positive, got " +
                                       std::to_string(source_impedance.imag()));
        ImpedanceMatrix m;
        m.reserve(std::max<std::size_t>(capacity, 1));
        m.append_node(p);
        m.z_(0, 0) = source_impedance;
        m.grounded_ = true;
        return m;
    }

    [[nodiscard]] std::size_t size() const { return nodes_.size(); }
    [[nodiscard]] bool grounded() const { return grounded_; }
    [[nodiscard]] const std::vector<int>& restored_nodes() const { return nodes_; }
    [[nodiscard]] bool restored(int node) const {
        return node >= 0 && static_cast<std::size_t>(node) < local_.size() && local_[node] >= 0;
    }

    [[nodiscard]] Complex at(int p, int q) const { return z_(local(p), local(q)); }

    /// Driving-point (Thevenin) impedance at node d.
    [[nodiscard]] Complex thevenin(int d) const {
        const int k = local(d);
        if (!grounded_) throw Ungrounded();
        return z_(k, k);
    }

    /// Restored-node block of the matrix, rows/columns in restoration order.
    [[nodiscard]] Eigen::MatrixXcd dense() const {
        const auto n = static_cast<Eigen::Index>(size());
        return z_.topLeftCorner(n, n);
    }

    void add_tree_branch(int p, int q, Complex z_branch) {
        const int kp = local(p);
        if (restored(q)) throw AlreadyRestored(q);
        const auto n = static_cast<Eigen::Index>(size());
        append_node(q);
        z_.row(n).head(n) = z_.row(kp).head(n);
        z_.col(n).head(n) = z_.col(kp).head(n);
        z_(n, n) = z_(kp, kp) + z_branch;
    }

    void add_link_ungrounded(int p, int q, Complex z_branch) {
        const int kp = local(p);
        const int kq = local(q);
        const auto n = static_cast<Eigen::Index>(size());
        const Complex den = z_branch + z_(kp, kp) + z_(kq, kq) - z_(kp, kq) - z_(kq, kp);
        if (std::abs(den) < degenerate_denominator)
            throw DegenerateLoop("loop closure between nodes " + std::to_string(p) + " and " + std::to_string(q) +
                                 " has a vanishing loop impedance");
        const Eigen::VectorXcd u = z_.col(kp).head(n) - z_.col(kq).head(n);
        rank_one_downdate(u, den);
    }

    void add_link_grounded(int p, Complex z_branch) {
        const int kp = local(p);
        const auto n = static_cast<Eigen::Index>(size());
        const Complex den = z_branch + z_(kp, kp);
        if (std::abs(den) < degenerate_denominator)
            throw DegenerateLoop("grounded link at node " + std::to_string(p) + " has a vanishing loop impedance");
        const Eigen::VectorXcd u = z_.col(kp).head(n);
        rank_one_downdate(u, den);
        grounded_ = true;
    }

private:
    int local(int node) const {
        if (!restored(node)) throw NotRestored(node);
        return local_[node];
    }

    void reserve(std::size_t capacity) {
        const auto c = static_cast<Eigen::Index>(capacity);
        if (z_.rows() >= c) return;
        Eigen::MatrixXcd grown = Eigen::MatrixXcd::Zero(c, c);
        const auto n = static_cast<Eigen::Index>(size());
        grown.topLeftCorner(n, n) = z_.topLeftCorner(n, n);
        z_.swap(grown);
    }

    void append_node(int node) {
        if (node < 0) throw NotRestored(node);
        if (static_cast<std::size_t>(node) >= local_.size()) local_.resize(node + 1, -1);
        if (static_cast<Eigen::Index>(size()) == z_.rows()) reserve(std::max<std::size_t>(2 * size(), 4));
        local_[node] = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
    }

    // Z -= u u^T / den, written element-wise so that symmetric entries see
    // identical operations and stay bit-symmetric.
    void rank_one_downdate(const Eigen::VectorXcd& u, Complex den) {
        const auto n = u.size();
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = j; i < n; ++i) {
                const Complex d = (u(i) * u(j)) / den;
                z_(i, j) -= d;
                if (i != j) z_(j, i) = z_(i, j);
            }
        }
    }

    Eigen::MatrixXcd z_;
    std::vector<int> nodes_;
    std::vector<int> local_;
    bool grounded_ = false;
};

}  // namespace blackstart
