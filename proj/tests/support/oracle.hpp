#pragma once

// Reference computations built from explicit matrices, kept independent of
// the simulator's index arithmetic.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "cqp/qstate.hpp"

namespace oracle {

using Complex = std::complex<double>;

inline Eigen::VectorXcd toEigen(const cqp::StateVector& s) {
    Eigen::VectorXcd v(static_cast<Eigen::Index>(s.dimension()));
    for (std::size_t i = 0; i < s.dimension(); ++i) v(static_cast<Eigen::Index>(i)) = s[i];
    return v;
}

inline Eigen::MatrixXcd toEigen(const cqp::Gate& g) {
    const auto d = static_cast<Eigen::Index>(g.dimension());
    Eigen::MatrixXcd m(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) m(r, c) = g.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    return m;
}

inline Eigen::MatrixXcd toEigen(const cqp::DensityMatrix& rho) {
    const auto d = static_cast<Eigen::Index>(rho.dimension());
    Eigen::MatrixXcd m(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) m(r, c) = rho(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    return m;
}

/// Full 2^n operator for `g` on `targets`: reorder qubits so the targets are
/// the most significant (first target highest), take G (x) I, reorder back.
inline Eigen::MatrixXcd expandGate(const Eigen::MatrixXcd& g, const std::vector<std::size_t>& targets, std::size_t n) {
    std::vector<std::size_t> order = targets;
    for (std::size_t q = n; q-- > 0;)
        if (std::find(targets.begin(), targets.end(), q) == targets.end()) order.push_back(q);

    const Eigen::Index dim = Eigen::Index{1} << n;
    Eigen::MatrixXcd perm = Eigen::MatrixXcd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        Eigen::Index j = 0;
        for (std::size_t m = 0; m < n; ++m)
            if ((i >> order[m]) & 1) j |= Eigen::Index{1} << (n - 1 - m);
        perm(j, i) = 1.0;
    }
    const Eigen::Index rest = dim / g.rows();
    const Eigen::MatrixXcd local = Eigen::kroneckerProduct(g, Eigen::MatrixXcd::Identity(rest, rest)).eval();
    return perm.transpose() * local * perm;
}

inline Eigen::VectorXcd randomVector(std::mt19937_64& rng, Eigen::Index dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::VectorXcd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = Complex(n(rng), n(rng));
    return v.normalized();
}

inline cqp::StateVector randomState(std::mt19937_64& rng, std::size_t n) {
    const Eigen::VectorXcd v = randomVector(rng, Eigen::Index{1} << n);
    return cqp::StateVector::normalized(std::vector<cqp::Amplitude>(v.data(), v.data() + v.size()));
}

/// Haar-ish random unitary: Q factor of a complex Gaussian matrix.
inline cqp::Gate randomGate(std::mt19937_64& rng, std::size_t arity) {
    const Eigen::Index d = Eigen::Index{1} << arity;
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXcd a(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) a(r, c) = Complex(n(rng), n(rng));
    const Eigen::MatrixXcd q = Eigen::HouseholderQR<Eigen::MatrixXcd>(a).householderQ();
    std::vector<cqp::Amplitude> m;
    for (Eigen::Index r = 0; r < d; ++r)
        for (Eigen::Index c = 0; c < d; ++c) m.push_back(q(r, c));
    return {"U", arity, std::move(m)};
}

/// One measurement branch of teleporting `psi`, computed on the tensor
/// product u (x) x (x) y with textbook matrices.
struct TeleportBranch {
    int mu = 0;
    int mx = 0;
    double probability = 0.0;
    Eigen::Matrix2cd bob;  ///< reduced state of y after the correction
};

inline std::vector<TeleportBranch> teleportBranches(const Eigen::Vector2cd& psi) {
    const double h = 1.0 / std::sqrt(2.0);
    Eigen::Matrix2cd I = Eigen::Matrix2cd::Identity(), X, Z, H;
    X << 0, 1, 1, 0;
    Z << 1, 0, 0, -1;
    H << h, h, h, -h;
    Eigen::Matrix4cd cnot;
    cnot << 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0;

    Eigen::Vector4cd bell;
    bell << h, 0, 0, h;
    Eigen::VectorXcd s = Eigen::kroneckerProduct(psi, bell).eval();
    s = Eigen::kroneckerProduct(cnot, I).eval() * s;         // CNot u -> x
    s = Eigen::kroneckerProduct(H, Eigen::Matrix4cd::Identity()).eval() * s;  // H on u

    const std::array<Eigen::Matrix2cd, 4> correction{I, X, Z, Z * X};
    std::vector<TeleportBranch> out;
    for (int mu = 0; mu < 2; ++mu)
        for (int mx = 0; mx < 2; ++mx) {
            Eigen::Vector2cd y;
            for (int b = 0; b < 2; ++b) y(b) = s(mu * 4 + mx * 2 + b);
            const double p = y.squaredNorm();
            y = correction[mu * 2 + mx] * (y / std::sqrt(p));
            out.push_back({mu, mx, p, y * y.adjoint()});
        }
    return out;
}

}  // namespace oracle
