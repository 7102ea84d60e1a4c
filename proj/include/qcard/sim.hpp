#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qcard/errors.hpp"

namespace qcard::sim {

using cdouble = std::complex<double>;

inline constexpr int kMaxQubits = 12;

// Dense state vector of an n-qubit register. Qubit 0 is the least-significant
// bit of the basis-state index, so |q1 q0> = |10> lives at index 2.
struct StateVector {
    int n_qubits = 0;
    std::vector<cdouble> amps;

    std::size_t dim() const { return amps.size(); }

    double norm_squared() const {
        double total = 0.0;
        for (const cdouble& a : amps) total += std::norm(a);
        return total;
    }
};

// |00...0>
inline StateVector init_zero(int n_qubits) {
    if (n_qubits < 1 || n_qubits > kMaxQubits) {
        throw ConfigError("init_zero: n_qubits must be in [1, " +
                          std::to_string(kMaxQubits) + "], got " +
                          std::to_string(n_qubits));
    }
    StateVector state;
    state.n_qubits = n_qubits;
    state.amps.assign(std::size_t{1} << n_qubits, cdouble{0.0, 0.0});
    state.amps[0] = cdouble{1.0, 0.0};
    return state;
}

enum class GateKind { RX, RY, RZ, X, CY, CNOT };

inline const char* gate_name(GateKind kind) {
    switch (kind) {
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::X: return "X";
    case GateKind::CY: return "CY";
    case GateKind::CNOT: return "CNOT";
    }
    return "?";
}

// One circuit instruction. control is meaningful only for CY/CNOT, angle only
// for the rotation kinds; the factories below keep those pairings valid.
struct Gate {
    GateKind kind = GateKind::X;
    int target = 0;
    int control = -1;
    double angle = 0.0;

    bool is_rotation() const {
        return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ;
    }
    bool is_controlled() const {
        return kind == GateKind::CY || kind == GateKind::CNOT;
    }

    static Gate rx(int target, double angle) { return Gate{GateKind::RX, target, -1, angle}; }
    static Gate ry(int target, double angle) { return Gate{GateKind::RY, target, -1, angle}; }
    static Gate rz(int target, double angle) { return Gate{GateKind::RZ, target, -1, angle}; }
    static Gate x(int target) { return Gate{GateKind::X, target, -1, 0.0}; }

    static Gate cy(int control, int target) {
        if (control == target) {
            throw UsageError("CY: control and target must differ");
        }
        return Gate{GateKind::CY, target, control, 0.0};
    }
    static Gate cnot(int control, int target) {
        if (control == target) {
            throw UsageError("CNOT: control and target must differ");
        }
        return Gate{GateKind::CNOT, target, control, 0.0};
    }

    Gate with_angle(double new_angle) const {
        Gate g = *this;
        g.angle = new_angle;
        return g;
    }
};

namespace detail {

inline void check_qubit_index(const StateVector& state, int qubit, const char* what) {
    if (qubit < 0 || qubit >= state.n_qubits) {
        throw UsageError(std::string(what) + " index " + std::to_string(qubit) +
                         " out of range for " + std::to_string(state.n_qubits) +
                         " qubits");
    }
}

// Applies the 2x2 matrix [[m00, m01], [m10, m11]] to the target qubit,
// restricted to basis states whose control bit is 1 when control >= 0.
inline void apply_single_qubit_matrix(StateVector& state, int target, int control,
                                      cdouble m00, cdouble m01, cdouble m10,
                                      cdouble m11) {
    const std::size_t stride = std::size_t{1} << target;
    const std::size_t dim = state.dim();
    const std::size_t control_mask =
        control >= 0 ? (std::size_t{1} << control) : std::size_t{0};
    for (std::size_t block = 0; block < dim; block += stride << 1) {
        for (std::size_t low = block; low < block + stride; ++low) {
            if (control_mask != 0 && (low & control_mask) == 0) continue;
            const std::size_t high = low + stride;
            const cdouble a0 = state.amps[low];
            const cdouble a1 = state.amps[high];
            state.amps[low] = m00 * a0 + m01 * a1;
            state.amps[high] = m10 * a0 + m11 * a1;
        }
    }
}

} // namespace detail

inline void apply_gate_in_place(StateVector& state, const Gate& gate) {
    detail::check_qubit_index(state, gate.target, "target");
    if (gate.is_controlled()) {
        detail::check_qubit_index(state, gate.control, "control");
    }
    const double half = gate.angle * 0.5;
    switch (gate.kind) {
    case GateKind::RX: {
        const cdouble c{std::cos(half), 0.0};
        const cdouble ms{0.0, -std::sin(half)};
        detail::apply_single_qubit_matrix(state, gate.target, -1, c, ms, ms, c);
        break;
    }
    case GateKind::RY: {
        const cdouble c{std::cos(half), 0.0};
        const cdouble s{std::sin(half), 0.0};
        detail::apply_single_qubit_matrix(state, gate.target, -1, c, -s, s, c);
        break;
    }
    case GateKind::RZ: {
        const cdouble phase_lo{std::cos(half), -std::sin(half)};
        const cdouble phase_hi{std::cos(half), std::sin(half)};
        detail::apply_single_qubit_matrix(state, gate.target, -1, phase_lo, 0.0, 0.0,
                                          phase_hi);
        break;
    }
    case GateKind::X:
        detail::apply_single_qubit_matrix(state, gate.target, -1, 0.0, 1.0, 1.0, 0.0);
        break;
    case GateKind::CY:
        detail::apply_single_qubit_matrix(state, gate.target, gate.control, 0.0,
                                          cdouble{0.0, -1.0}, cdouble{0.0, 1.0}, 0.0);
        break;
    case GateKind::CNOT:
        detail::apply_single_qubit_matrix(state, gate.target, gate.control, 0.0, 1.0,
                                          1.0, 0.0);
        break;
    }
}

inline StateVector apply_gate(StateVector state, const Gate& gate) {
    apply_gate_in_place(state, gate);
    return state;
}

inline void apply_gates_in_place(StateVector& state, const std::vector<Gate>& gates) {
    for (const Gate& g : gates) apply_gate_in_place(state, g);
}

// |a_i|^2 per basis state.
inline std::vector<double> probabilities(const StateVector& state) {
    std::vector<double> probs(state.dim());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        probs[i] = std::norm(state.amps[i]);
    }
    return probs;
}

inline cdouble inner_product(const StateVector& a, const StateVector& b) {
    if (a.dim() != b.dim()) {
        throw UsageError("inner_product: dimension mismatch");
    }
    cdouble result{0.0, 0.0};
    for (std::size_t i = 0; i < a.dim(); ++i) {
        result += std::conj(a.amps[i]) * b.amps[i];
    }
    return result;
}

// |<a|b>|^2
inline double fidelity(const StateVector& a, const StateVector& b) {
    return std::norm(inner_product(a, b));
}

// Uniform (Haar) random pure state: independent standard complex Gaussian
// amplitudes, normalized. Deterministic for a given seed.
inline StateVector haar_random_state(int n_qubits, std::uint64_t seed) {
    StateVector state = init_zero(n_qubits);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double norm_sq = 0.0;
    for (cdouble& a : state.amps) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        a = cdouble{re, im};
        norm_sq += re * re + im * im;
    }
    const double inv_norm = 1.0 / std::sqrt(norm_sq);
    for (cdouble& a : state.amps) a *= inv_norm;
    return state;
}

} // namespace qcard::sim
