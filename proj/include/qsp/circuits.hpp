#pragma once

#include "qsp/statevector.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace qsp {

// A circuit instruction is normally a primitive gate, optionally wrapped in
// extra control qubits. Composite constructions the source algorithms treat as
// named steps but never decompose (index negation inside the sine-transform
// bracket, test-function completions, Algorithm 2's coefficient rotation) are
// carried as structured blocks; everything that has an explicit gate-level
// recipe (loaders, converters, QFT) uses primitive gates only.
struct GateInstr {
    GateOp gate;
    std::vector<int> controls; // usually empty
};

struct PermutationInstr {
    std::vector<int> qubits;
    std::vector<std::uint64_t> perm;
    std::vector<int> controls;
    std::string label;
};

struct UnitaryInstr {
    std::vector<int> qubits;
    Eigen::MatrixXcd matrix;
    std::vector<int> controls;
    std::string label;
};

struct SelectRotationInstr {
    std::vector<int> index_qubits;
    int flag_qubit = 0;
    std::vector<cdouble> coeffs;
    bool adjoint = false;
    std::string label;
};

using Instruction = std::variant<GateInstr, PermutationInstr, UnitaryInstr, SelectRotationInstr>;

class Circuit {
public:
    Circuit() = default;
    explicit Circuit(int num_qubits) : num_qubits_(num_qubits) {}

    int num_qubits() const { return num_qubits_; }
    const std::vector<Instruction>& instructions() const { return instrs_; }

    void add(GateOp gate, std::vector<int> controls = {});
    void add(Instruction instr);
    void append(const Circuit& other); // other must have <= num_qubits()

    // Number of primitive gates (structured blocks count as one each).
    std::size_t gate_count() const { return instrs_.size(); }
    std::size_t primitive_gate_count() const;

    // Depth over qubit-disjoint layers (controls count as occupancy).
    int depth() const;

    Circuit inverse() const;

    // Returns a copy acting on wire_map[i] wherever this circuit says i.
    Circuit remapped(const std::vector<int>& wire_map, int new_num_qubits) const;

    void apply_to(QuantumState& state) const;

    nlohmann::json to_json() const;

private:
    int num_qubits_ = 0;
    std::vector<Instruction> instrs_;
};

// --- angle trees (binary-heap description of a unary data loader) ---

// Heap layout: node 1 is the root, node j has children 2j and 2j+1, leaves sit
// at indices leaf_count..2*leaf_count-1. node_norms[j] is the squared-mass
// r(j) of node j's subtree; node_angles[j] (internal nodes only) satisfies
// cos^2 = r(left)/r(parent), sin^2 = r(right)/r(parent), in [0, pi/2].
// Signs of the encoded vector live in leaf_signs and are folded into the
// deepest rotation layer when a circuit is emitted.
struct AngleTree {
    int leaf_count = 0;
    std::vector<double> node_angles; // size 2*leaf_count, internal slots used
    std::vector<int> leaf_signs;     // size leaf_count, each +1 or -1
    std::vector<double> node_norms;  // size 2*leaf_count

    int num_internal() const { return leaf_count - 1; }
};

// Builds the angle tree of x (length a power of two >= 2, nonzero norm).
// Norms are stored for the normalized vector, so the root mass is 1.
AngleTree compute_loader_angles(const std::vector<double>& x);

// Leaf values implied by the tree: the unit vector the loader prepares.
std::vector<double> reconstruct_leaf_values(const AngleTree& tree);

// Log-depth RBS cascade on leaf_count rails preparing
// sum_i x_i |e_i> from |0...0>. Rail i is qubit i.
Circuit unary_loader_circuit(const AngleTree& tree);

// Householder completion: a real orthogonal matrix whose first column is v
// normalized. Used for the structured loader blocks.
Eigen::MatrixXcd column_completion(const std::vector<double>& v);

// Maps sum_i x_i |e_i> (one-hot on n rails) to x_i |i> on ceil(log2 n) binary
// qubits, leaving rails and ancillas at |0>. Qubit layout: rails [0, n),
// binary [n, n + log2 n), ancillas above. n must be a power of two >= 2.
Circuit unary_to_binary_circuit(int n);
int unary_to_binary_total_qubits(int n);

// QFT on k qubits implementing the unitary with kernel e^{+2 pi i jk / 2^k},
// little-endian indices. 1 <= k <= 24 (dense checks are only feasible for
// small k; construction itself is cheap).
Circuit qft_circuit(int k);

// Orthonormal sine transform of order size-1 applied in place to a value
// register of log2(size) qubits (the lowest qubits by default). The input must
// be a real vector supported on indices 1..size-1 per garbage branch; index 0
// mass above 1e-9 is a domain error. Realized by the odd-extension bracket
// around a QFT on log2(2*size) wires; the bracket's probabilistic branch from
// the source construction is resolved deterministically (the output is exact).
void dst_apply(QuantumState& state, std::size_t size, std::vector<int> register_qubits = {});

// The odd-extension bracket behind dst_apply as a reusable circuit on
// explicit wires, including the global phase correction (a one-qubit block
// on the ancilla). The ancilla must enter |0> and returns to |0>.
Circuit dst_bracket_circuit(std::size_t size, const std::vector<int>& register_qubits,
                            int ancilla, int total_qubits);

// Cosine companion of dst_apply, for completeness: orthonormal DCT-I of order
// size+1. The register holds log2(2*size) qubits with support on 0..size.
void dct_apply(QuantumState& state, std::size_t size, std::vector<int> register_qubits = {});

// Dense matrix oracles used by tests and verification commands.
Eigen::MatrixXd dst1_matrix(std::size_t size);  // (size-1) x (size-1)
Eigen::MatrixXd dct1_matrix(std::size_t size);  // (size+1) x (size+1)

} // namespace qsp
