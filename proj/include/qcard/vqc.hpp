#pragma once

#include <algorithm>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "qcard/errors.hpp"
#include "qcard/sim.hpp"

namespace qcard::vqc {

// One encoded table of a query: its schema id and the fraction of its rows
// passing all filters.
struct TableSlot {
    int table_id = 0;
    double selectivity = 1.0;

    friend bool operator==(const TableSlot&, const TableSlot&) = default;
};

// Rotation encoding: one qubit per table slot. Table ids rotate around the
// x-axis, selectivities around the z-axis, both scaled to stay below a full
// Bloch-sphere turn.
struct EncodingSpec {
    int n_qubits = 6;
    int max_table_id = 1;
};

// Per layer: a CY ring (qubit i controls qubit (i+1) mod n) followed by a
// trainable RY and RZ on every qubit.
struct AnsatzSpec {
    int n_qubits = 6;
    int n_layers = 16;
};

using ParamVector = std::vector<double>;

inline std::size_t param_count(const AnsatzSpec& spec) {
    return static_cast<std::size_t>(spec.n_layers) * spec.n_qubits * 2;
}

// Gates for one query: per slot i, RX(pi * t_i / T) then RZ(pi * s_i) on
// qubit i. Slots are canonicalized to ascending table id; unused qubits stay
// untouched. RX comes first because RZ alone is a pure phase on |0>.
inline std::vector<sim::Gate> encode_query(const EncodingSpec& spec,
                                           std::vector<TableSlot> slots) {
    if (spec.max_table_id < 1) {
        throw ConfigError("encoding: max_table_id must be >= 1");
    }
    if (slots.size() > static_cast<std::size_t>(spec.n_qubits)) {
        throw WorkloadError("query has " + std::to_string(slots.size()) +
                            " tables but the encoding provides only " +
                            std::to_string(spec.n_qubits) + " qubits");
    }
    std::sort(slots.begin(), slots.end(),
              [](const TableSlot& a, const TableSlot& b) { return a.table_id < b.table_id; });
    std::vector<sim::Gate> gates;
    gates.reserve(slots.size() * 2);
    int previous_id = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const TableSlot& slot = slots[i];
        if (slot.table_id < 1 || slot.table_id > spec.max_table_id) {
            throw WorkloadError("table id " + std::to_string(slot.table_id) +
                                " outside schema range [1, " +
                                std::to_string(spec.max_table_id) + "]");
        }
        if (slot.table_id == previous_id) {
            throw WorkloadError("duplicate table id " + std::to_string(slot.table_id) +
                                " in query slots");
        }
        previous_id = slot.table_id;
        if (slot.selectivity < 0.0 || slot.selectivity > 1.0) {
            throw WorkloadError("selectivity " + std::to_string(slot.selectivity) +
                                " outside [0, 1]");
        }
        const int qubit = static_cast<int>(i);
        const double table_angle =
            std::numbers::pi * slot.table_id / spec.max_table_id;
        const double selectivity_angle = std::numbers::pi * slot.selectivity;
        gates.push_back(sim::Gate::rx(qubit, table_angle));
        gates.push_back(sim::Gate::rz(qubit, selectivity_angle));
    }
    return gates;
}

// Full ansatz gate list. Parameter order is (layer, qubit, RY-then-RZ),
// matching the flattened theta index (layer * n_qubits + qubit) * 2 + rot.
inline std::vector<sim::Gate> build_ansatz(const AnsatzSpec& spec,
                                           const ParamVector& params) {
    if (spec.n_qubits < 1 || spec.n_layers < 1) {
        throw ConfigError("ansatz needs at least 1 qubit and 1 layer");
    }
    if (params.size() != param_count(spec)) {
        throw ConfigError("ansatz expects " + std::to_string(param_count(spec)) +
                          " parameters, got " + std::to_string(params.size()));
    }
    std::vector<sim::Gate> gates;
    const int n = spec.n_qubits;
    const int ring = n > 1 ? n : 0; // a one-qubit ring has no entanglers
    gates.reserve(static_cast<std::size_t>(spec.n_layers) * (ring + 2 * n));
    std::size_t k = 0;
    for (int layer = 0; layer < spec.n_layers; ++layer) {
        for (int q = 0; q < ring; ++q) {
            gates.push_back(sim::Gate::cy(q, (q + 1) % n));
        }
        for (int q = 0; q < n; ++q) {
            gates.push_back(sim::Gate::ry(q, params[k++]));
            gates.push_back(sim::Gate::rz(q, params[k++]));
        }
    }
    return gates;
}

// Measurement distribution of U(theta) U_e(x) |0...0>.
inline std::vector<double> forward(int n_qubits, const std::vector<sim::Gate>& encoding,
                                   const std::vector<sim::Gate>& ansatz) {
    sim::StateVector state = sim::init_zero(n_qubits);
    sim::apply_gates_in_place(state, encoding);
    sim::apply_gates_in_place(state, ansatz);
    return sim::probabilities(state);
}

// Loss evaluated on a probability vector, together with its gradient with
// respect to every probability entry.
struct LossEval {
    double value = 0.0;
    std::vector<double> dprob;
};

using LossTail = std::function<LossEval(const std::vector<double>&)>;

struct GradResult {
    double loss = 0.0;
    std::vector<double> dtheta;
};

// Gradient of loss_tail(forward(...)) with respect to every ansatz angle.
//
// Each probability is an observable expectation, so its derivative in a
// rotation angle is exactly [p(theta + pi/2) - p(theta - pi/2)] / 2; the
// chain rule then contracts those shifted evaluations with dloss/dprob taken
// at the unshifted point. States just before each trainable gate are cached
// so every shifted evaluation only replays the tail of the circuit.
inline GradResult parameter_shift_grad(const std::vector<sim::Gate>& encoding,
                                       const AnsatzSpec& spec,
                                       const ParamVector& params,
                                       const LossTail& loss_tail) {
    const std::vector<sim::Gate> ansatz = build_ansatz(spec, params);
    std::vector<sim::Gate> gates;
    gates.reserve(encoding.size() + ansatz.size());
    gates.insert(gates.end(), encoding.begin(), encoding.end());
    gates.insert(gates.end(), ansatz.begin(), ansatz.end());

    std::vector<std::size_t> positions;
    positions.reserve(params.size());
    for (std::size_t i = encoding.size(); i < gates.size(); ++i) {
        if (gates[i].is_rotation()) positions.push_back(i);
    }

    std::vector<sim::StateVector> prefixes;
    prefixes.reserve(positions.size());
    sim::StateVector state = sim::init_zero(spec.n_qubits);
    std::size_t next_position = 0;
    for (std::size_t i = 0; i < gates.size(); ++i) {
        if (next_position < positions.size() && positions[next_position] == i) {
            prefixes.push_back(state);
            ++next_position;
        }
        sim::apply_gate_in_place(state, gates[i]);
    }

    const std::vector<double> base_probs = sim::probabilities(state);
    const LossEval base = loss_tail(base_probs);
    if (base.dprob.size() != base_probs.size()) {
        throw UsageError("loss gradient has " + std::to_string(base.dprob.size()) +
                         " entries for " + std::to_string(base_probs.size()) +
                         " probabilities");
    }

    constexpr double kShift = std::numbers::pi / 2.0;
    GradResult result;
    result.loss = base.value;
    result.dtheta.assign(params.size(), 0.0);
    for (std::size_t k = 0; k < positions.size(); ++k) {
        const std::size_t pos = positions[k];
        const sim::Gate& gate = gates[pos];
        double contracted[2];
        for (int side = 0; side < 2; ++side) {
            const double delta = side == 0 ? kShift : -kShift;
            sim::StateVector shifted = prefixes[k];
            sim::apply_gate_in_place(shifted, gate.with_angle(gate.angle + delta));
            for (std::size_t i = pos + 1; i < gates.size(); ++i) {
                sim::apply_gate_in_place(shifted, gates[i]);
            }
            double dot = 0.0;
            for (std::size_t i = 0; i < shifted.dim(); ++i) {
                dot += base.dprob[i] * std::norm(shifted.amps[i]);
            }
            contracted[side] = dot;
        }
        result.dtheta[k] = (contracted[0] - contracted[1]) * 0.5;
    }
    return result;
}

} // namespace qcard::vqc
