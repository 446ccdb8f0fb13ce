#pragma once

// Two-qubit operator algebra for the source (s) x probe (p) system.
//
// Basis order is fixed once and used everywhere:
//   index 0: |g_s g_p>,  1: |g_s e_p>,  2: |e_s g_p>,  3: |e_s e_p>
// so the source qubit is the left (slow) tensor factor.
//
// Conventions: sigma_z|e> = +|e>, sigma_minus|e> = |g>.

#include "qwm/errors.hpp"
#include "qwm/units.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>

namespace qwm {

// Dense complex matrix with runtime dimensions. Dimension compatibility of
// every operation is checked at the call sites below (Eigen asserts in debug;
// the helpers here check unconditionally).
using ComplexMatrix = Eigen::MatrixXcd;
using Matrix2c = Eigen::Matrix2cd;
using Matrix4c = Eigen::Matrix4cd;

enum class Subsystem { source, probe };
enum class PauliKind { sigma_plus, sigma_minus, sigma_z, identity };

inline void require_dims(const ComplexMatrix& m, Eigen::Index rows, Eigen::Index cols,
                         const char* what) {
    if (m.rows() != rows || m.cols() != cols)
        throw param_error(std::string(what) + ": dimension mismatch");
}

inline Matrix2c pauli2(PauliKind which) {
    Matrix2c m = Matrix2c::Zero();
    // basis {|g>, |e>}
    switch (which) {
    case PauliKind::sigma_plus: m(1, 0) = 1.0; break;
    case PauliKind::sigma_minus: m(0, 1) = 1.0; break;
    case PauliKind::sigma_z: m(0, 0) = -1.0; m(1, 1) = 1.0; break;
    case PauliKind::identity: m.setIdentity(); break;
    }
    return m;
}

inline Matrix4c kron2(const Matrix2c& a, const Matrix2c& b) {
    Matrix4c out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

// Pauli/ladder operator on one factor of the two-qubit space.
inline Matrix4c pauli_operator(PauliKind which, Subsystem sub) {
    const Matrix2c op = pauli2(which);
    const Matrix2c id = Matrix2c::Identity();
    return sub == Subsystem::source ? kron2(op, id) : kron2(id, op);
}

inline Matrix2c partial_trace(const Matrix4c& rho, Subsystem keep) {
    Matrix2c out = Matrix2c::Zero();
    if (keep == Subsystem::source) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                out(i, j) = rho(2 * i, 2 * j) + rho(2 * i + 1, 2 * j + 1);
    } else {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                out(i, j) = rho(i, j) + rho(i + 2, j + 2);
    }
    return out;
}

struct StateTolerances {
    double hermiticity = 1e-12;
    double trace = 1e-9;
    double min_eigenvalue = -1e-8;
};

// Cyclic Jacobi eigensolver for Hermitian matrices. Dimensions here are 2 or
// 4, so robustness matters more than speed. Returns eigenvalues ascending,
// with eigenvectors as the columns of `vectors`.
template <int N>
struct JacobiEigen {
    Eigen::Matrix<double, N, 1> values;
    Eigen::Matrix<complexd, N, N> vectors;

    explicit JacobiEigen(const Eigen::Matrix<complexd, N, N>& h, double tol = 1e-14) {
        Eigen::Matrix<complexd, N, N> a = 0.5 * (h + h.adjoint());
        vectors.setIdentity();
        const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
        for (int sweep = 0; sweep < 64; ++sweep) {
            double off = 0.0;
            for (int p = 0; p < N; ++p)
                for (int q = p + 1; q < N; ++q)
                    off = std::max(off, std::abs(a(p, q)));
            if (off <= tol * scale) break;
            for (int p = 0; p < N; ++p) {
                for (int q = p + 1; q < N; ++q) {
                    const complexd apq = a(p, q);
                    if (std::abs(apq) <= 1e-300) continue;
                    // Unitary 2x2 rotation that zeroes a(p,q).
                    const double app = a(p, p).real();
                    const double aqq = a(q, q).real();
                    const double theta = 0.5 * std::atan2(2.0 * std::abs(apq), aqq - app);
                    const double c = std::cos(theta);
                    const complexd s = std::sin(theta) * (apq / std::abs(apq));
                    for (int k = 0; k < N; ++k) {
                        const complexd akp = a(k, p), akq = a(k, q);
                        a(k, p) = c * akp - std::conj(s) * akq;
                        a(k, q) = s * akp + c * akq;
                    }
                    for (int k = 0; k < N; ++k) {
                        const complexd apk = a(p, k), aqk = a(q, k);
                        a(p, k) = c * apk - s * aqk;
                        a(q, k) = std::conj(s) * apk + c * aqk;
                    }
                    for (int k = 0; k < N; ++k) {
                        const complexd vkp = vectors(k, p), vkq = vectors(k, q);
                        vectors(k, p) = c * vkp - std::conj(s) * vkq;
                        vectors(k, q) = s * vkp + c * vkq;
                    }
                }
            }
        }
        // Sort ascending, carrying eigenvectors along.
        std::array<int, N> idx{};
        for (int i = 0; i < N; ++i) idx[i] = i;
        Eigen::Matrix<double, N, 1> diag;
        for (int i = 0; i < N; ++i) diag(i) = a(i, i).real();
        std::sort(idx.begin(), idx.end(), [&](int l, int r) { return diag(l) < diag(r); });
        Eigen::Matrix<complexd, N, N> sorted_vecs;
        for (int i = 0; i < N; ++i) {
            values(i) = diag(idx[i]);
            sorted_vecs.col(i) = vectors.col(idx[i]);
        }
        vectors = sorted_vecs;
    }
};

inline double hermiticity_defect(const Matrix4c& rho) {
    return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

inline double min_eigenvalue(const Matrix4c& rho) {
    return JacobiEigen<4>(rho).values(0);
}

// Density matrix of the source (x) probe pair in the fixed basis order.
struct TwoQubitState {
    Matrix4c rho;

    static TwoQubitState ground() {
        TwoQubitState s;
        s.rho = Matrix4c::Zero();
        s.rho(0, 0) = 1.0;
        return s;
    }

    static TwoQubitState from_density(const Matrix4c& rho,
                                      const StateTolerances& tol = {}) {
        TwoQubitState s{rho};
        s.check_valid(tol);
        return s;
    }

    double trace_defect() const { return std::abs(rho.trace() - 1.0); }

    bool is_valid(const StateTolerances& tol = {}) const {
        return hermiticity_defect(rho) <= tol.hermiticity &&
               trace_defect() <= tol.trace &&
               min_eigenvalue(rho) >= tol.min_eigenvalue;
    }

    void check_valid(const StateTolerances& tol = {}) const {
        if (hermiticity_defect(rho) > tol.hermiticity)
            throw invalid_state_error("state is not Hermitian within tolerance");
        if (trace_defect() > tol.trace)
            throw invalid_state_error("state trace differs from 1 beyond tolerance");
        if (min_eigenvalue(rho) < tol.min_eigenvalue)
            throw invalid_state_error("state has negative eigenvalue beyond tolerance");
    }
};

// Wootters concurrence. Uses the Hermitian form sqrt(rho)*rho_tilde*sqrt(rho),
// whose eigenvalues equal those of the non-Hermitian product rho*rho_tilde;
// round-off negatives are clamped to zero.
inline double concurrence(const TwoQubitState& state, const StateTolerances& tol = {}) {
    state.check_valid(tol);
    const Matrix4c rho = 0.5 * (state.rho + state.rho.adjoint());

    Matrix4c yy = Matrix4c::Zero();
    yy(0, 3) = -1.0; yy(1, 2) = 1.0; yy(2, 1) = 1.0; yy(3, 0) = -1.0;
    const Matrix4c rho_tilde = yy * rho.conjugate() * yy;

    const JacobiEigen<4> ed(rho);
    Matrix4c sqrt_rho = Matrix4c::Zero();
    for (int i = 0; i < 4; ++i) {
        const double ev = std::max(0.0, ed.values(i));
        sqrt_rho += std::sqrt(ev) * (ed.vectors.col(i) * ed.vectors.col(i).adjoint());
    }

    const Matrix4c m = sqrt_rho * rho_tilde * sqrt_rho;
    JacobiEigen<4> em(m);
    std::array<double, 4> lam{};
    for (int i = 0; i < 4; ++i)
        lam[i] = std::sqrt(std::max(0.0, em.values(i)));
    std::sort(lam.begin(), lam.end(), std::greater<>());
    return std::max(0.0, lam[0] - lam[1] - lam[2] - lam[3]);
}

} // namespace qwm
