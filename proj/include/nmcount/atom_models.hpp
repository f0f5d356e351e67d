#pragma once

// Driven few-level atoms with a single radiative channel |e_j> -> |g>.
// Basis order: excited levels first, ground level last.

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmcount/linalg.hpp"

namespace nmcount {

struct AtomModel {
    Eigen::Index dim = 0;
    CMatrix hamiltonian;  ///< H_S in rate units (hbar = 1)
    CMatrix jump_op;      ///< sigma^- = |g><e_j|
    std::vector<std::string> level_labels;
    CVector initial_state;
    Eigen::Index emitting_level = 0;  ///< index of |e_j> in the basis

    Eigen::Index ground_level() const { return dim - 1; }

    CMatrix initial_density() const { return initial_state * initial_state.adjoint(); }

    void validate() const {
        std::ostringstream os;
        if (dim < 2) {
            os << "AtomModel: need at least two levels";
        } else if (hamiltonian.rows() != dim || hamiltonian.cols() != dim) {
            os << "AtomModel: hamiltonian is not " << dim << "x" << dim;
        } else if (jump_op.rows() != dim || jump_op.cols() != dim) {
            os << "AtomModel: jump_op is not " << dim << "x" << dim;
        } else if (!hamiltonian.allFinite() || !jump_op.allFinite()) {
            os << "AtomModel: non-finite operator entries";
        } else if (!is_hermitian(hamiltonian)) {
            os << "AtomModel: hamiltonian not Hermitian (defect " << hermiticity_defect(hamiltonian)
               << ")";
        } else if (initial_state.size() != dim) {
            os << "AtomModel: initial_state has wrong length";
        } else if (std::abs(initial_state.norm() - 1.0) > 1e-12) {
            os << "AtomModel: initial_state not normalized";
        } else if (static_cast<Eigen::Index>(level_labels.size()) != dim) {
            os << "AtomModel: level_labels has wrong length";
        } else if (emitting_level < 0 || emitting_level >= dim) {
            os << "AtomModel: emitting_level out of range";
        }
        if (!os.str().empty()) {
            throw std::invalid_argument(os.str());
        }
    }

    AtomModel with_initial_state(CVector psi) const {
        AtomModel m = *this;
        m.initial_state = std::move(psi);
        m.validate();
        return m;
    }
};

inline CVector basis_state(Eigen::Index dim, Eigen::Index k) {
    CVector v = CVector::Zero(dim);
    v(k) = 1.0;
    return v;
}

/// H = (delta/2) sigma_z + omega sigma_x over (|e>, |g>).
inline AtomModel two_level(double delta, double omega) {
    AtomModel m;
    m.dim = 2;
    m.hamiltonian = CMatrix::Zero(2, 2);
    m.hamiltonian(0, 0) = 0.5 * delta;
    m.hamiltonian(1, 1) = -0.5 * delta;
    m.hamiltonian(0, 1) = omega;
    m.hamiltonian(1, 0) = omega;
    m.jump_op = CMatrix::Zero(2, 2);
    m.jump_op(1, 0) = 1.0;
    m.level_labels = {"e", "g"};
    m.initial_state = basis_state(2, 1);
    m.emitting_level = 0;
    m.validate();
    return m;
}

/// V-type atom over (|e1>, |e2>, |g>); both transitions driven, only |e1>
/// decays. sigma_jz = |e_j><e_j| - |g><g|.
inline AtomModel three_level(double delta1, double delta2, double omega1, double omega2) {
    AtomModel m;
    m.dim = 3;
    m.hamiltonian = CMatrix::Zero(3, 3);
    const Eigen::Index g = 2;
    const double deltas[2] = {delta1, delta2};
    const double omegas[2] = {omega1, omega2};
    for (Eigen::Index j = 0; j < 2; ++j) {
        m.hamiltonian(j, j) += 0.5 * deltas[j];
        m.hamiltonian(g, g) -= 0.5 * deltas[j];
        m.hamiltonian(j, g) += omegas[j];
        m.hamiltonian(g, j) += omegas[j];
    }
    m.jump_op = CMatrix::Zero(3, 3);
    m.jump_op(g, 0) = 1.0;
    m.level_labels = {"e1", "e2", "g"};
    m.initial_state = basis_state(3, g);
    m.emitting_level = 0;
    m.validate();
    return m;
}

/// User-defined model. The jump operator is |ground><emitting|.
inline AtomModel custom_model(CMatrix hamiltonian, Eigen::Index emitting_level,
                              std::vector<std::string> labels, CVector initial_state) {
    AtomModel m;
    m.dim = hamiltonian.rows();
    m.hamiltonian = std::move(hamiltonian);
    m.jump_op = CMatrix::Zero(m.dim, m.dim);
    if (emitting_level < 0 || emitting_level >= m.dim - 1) {
        throw std::invalid_argument("custom_model: emitting level must be an excited level");
    }
    m.jump_op(m.dim - 1, emitting_level) = 1.0;
    m.level_labels = std::move(labels);
    m.initial_state = std::move(initial_state);
    m.emitting_level = emitting_level;
    m.validate();
    return m;
}

}  // namespace nmcount
