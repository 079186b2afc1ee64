#pragma once

#include "qsp/errors.hpp"
#include "qsp/fft.hpp"
#include "qsp/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace qsp {

// Dense statevector with qubit 0 as the least significant bit of the basis
// index. The hard cap of 26 qubits (1 GiB of amplitudes) is a resource guard,
// not a tuning knob; everything in this project is sized to stay under it.
inline constexpr int kMaxQubits = 26;

class QuantumState {
public:
    QuantumState() = default;
    QuantumState(int num_qubits, std::vector<cdouble> amplitudes);

    int num_qubits() const { return num_qubits_; }
    std::size_t dim() const { return amps_.size(); }
    const std::vector<cdouble>& amplitudes() const { return amps_; }
    std::vector<cdouble>& amplitudes() { return amps_; }
    cdouble amplitude(std::uint64_t index) const { return amps_.at(index); }

    double norm() const;
    void normalize();

    // Appends k qubits in |0...0> above the current most significant qubit.
    void append_qubits(int k);

    // Removes the listed qubits, which must each carry the given classical bit
    // value (all amplitude mass on the complement is required to be < 1e-12;
    // throws verification_error otherwise). Used to retire measured or
    // uncomputed registers so later stages stay inside the dense guard.
    void remove_qubits(const std::vector<int>& qubits, std::uint64_t values);

private:
    int num_qubits_ = 0;
    std::vector<cdouble> amps_;
};

enum class GateKind {
    Hadamard,
    PauliX,
    ControlledPhase,
    CNOT,
    Swap,
    ControlledSwap,
    RBS,
    ControlledRotationY,
};

std::string gate_kind_name(GateKind kind);

// One primitive gate. `param` is the rotation angle for RBS and
// ControlledRotationY and the phase for ControlledPhase; ignored otherwise.
// Target qubits are ordered: (control, target) for two-qubit controlled kinds,
// (control, a, b) for ControlledSwap, (left rail, right rail) for RBS with the
// convention that cos(theta) stays on the left rail.
struct GateOp {
    GateKind kind;
    double param = 0.0;
    std::vector<int> qubits;
};

struct MeasurementRecord {
    std::vector<int> qubits;   // measured qubits, in the order given
    std::uint64_t outcome = 0; // bit i = observed value of qubits[i]
    double probability = 0.0;
};

QuantumState new_basis_state(int num_qubits, std::uint64_t index);

void apply_gate(QuantumState& state, const GateOp& gate);

// Gate conditioned on every listed control qubit being |1>.
void apply_gate_controlled(QuantumState& state, const GateOp& gate,
                           const std::vector<int>& controls);

// Measures the listed qubits in the computational basis. Returns the
// collapsed, renormalized state and the outcome record.
std::pair<QuantumState, MeasurementRecord> measure_subset(const QuantumState& state,
                                                          const std::vector<int>& qubits,
                                                          RngStream& rng);

// Projects one qubit onto |outcome> and renormalizes; returns the branch
// probability. Throws degenerate_branch_error below 1e-14.
std::pair<QuantumState, double> postselect(const QuantumState& state, int qubit, int outcome);

// Marginal probabilities over the kept qubits (<= 12).
std::vector<double> reduced_diagonal(const QuantumState& state, const std::vector<int>& keep);

// Reduced density matrix over the kept qubits (<= 8).
Eigen::MatrixXcd reduced_density(const QuantumState& state, const std::vector<int>& keep);

// --- structured helpers used by the circuits layer ---

// Applies a dense unitary on the subspace of the listed qubits (<= 12 of them).
// The matrix is indexed by bit i of the subspace index = value of qubits[i].
void apply_unitary_block(QuantumState& state, const std::vector<int>& qubits,
                         const Eigen::MatrixXcd& u,
                         const std::vector<int>& controls = {});

// Applies a permutation of the subspace indices of the listed qubits:
// amplitude at x moves to perm[x]. Throws domain_error if perm is not a
// bijection.
void apply_index_permutation(QuantumState& state, const std::vector<int>& qubits,
                             const std::vector<std::uint64_t>& perm,
                             const std::vector<int>& controls = {});

// For every subspace index i of `index_qubits`, rotates `flag_qubit` (which
// must start anywhere) by the 2x2 unitary [[b_i, -g_i], [g_i, conj(b_i)]] with
// g_i = sqrt(1 - |b_i|^2). Requires |b_i| <= 1. With adjoint set, applies the
// inverse rotation instead.
void apply_select_rotation(QuantumState& state, const std::vector<int>& index_qubits,
                           int flag_qubit, const std::vector<cdouble>& b,
                           bool adjoint = false);

// Throws verification_error if the norm drifted more than tol from 1.
void check_norm(const QuantumState& state, double tol = 1e-10);

// Dense matrix of a gate kind on its own qubits (for unitarity tests).
Eigen::MatrixXcd gate_matrix(const GateOp& gate);

} // namespace qsp
