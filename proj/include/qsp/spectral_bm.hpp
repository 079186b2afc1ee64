#pragma once

#include "qsp/circuits.hpp"
#include "qsp/rng.hpp"
#include "qsp/statevector.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace qsp {

// Time grid is t_i = i * pi / steps on [0, pi]. The stochastic sine series
// B(t) = sqrt(2/pi) * sum_{k=1..terms} a_k sin(k t) / k^alpha with iid
// standard Gaussians a_k and alpha = hurst + 1/2.
struct ProcessSpec {
    double hurst = 0.5;
    int terms = 8;  // L, power of two
    int steps = 32; // T, power of two, >= terms

    double alpha() const { return hurst + 0.5; }
    void validate() const;
};

struct Trajectory {
    std::vector<double> values;         // B(t_i) for i = 1..T-1
    double norm = 0.0;                  // l2 norm of values
    std::vector<double> fourier_coeffs; // length L; orthonormal DST-I of the
                                        // zero-padded coefficients reproduces
                                        // values exactly
    std::vector<double> gaussians;      // raw a_k before the index shift
    int shift = 0;                      // XOR shift applied to the indices
};

// Smallest L with truncation tail sum_{k>L} k^{-(1+2H)} <= eps^ ... the
// closed form ceil(eps^{-1/(2H)}). Throws for hurst <= 0 (divergent tail).
std::int64_t terms_for_accuracy(double epsilon, double hurst);

// Same, rounded up to a power of two for register use.
std::int64_t terms_for_accuracy_pow2(double epsilon, double hurst);

// Deterministic core shared by every path: coefficients from a Gaussian
// vector plus an XOR index shift, then the fast sine transform.
Trajectory trajectory_from_gaussians(const ProcessSpec& spec, const std::vector<double>& gaussians,
                                     int shift);

// Plain classical sampler: a_k ~ N(0,1) iid straight from the stream.
Trajectory classical_wiener_trajectory(const ProcessSpec& spec, RngStream& rng);

// Unit direction on the leaf sphere for a vector of per-node angles indexed
// in heap order (angles[j] for node j, 1 <= j < L). Bottom-level angles may
// span the full circle and then carry the leaf signs.
std::vector<double> branch_unit_vector(int leaf_count, const std::vector<double>& node_angles);

struct DenseRunResult {
    Trajectory trajectory;     // classical shadow of the run
    QuantumState state;        // log2(T)-qubit value register after the DST
    int shift = 0;             // measured XOR shift
    double shift_probability = 0.0;
};

// Gate-level staged pipeline on the dense simulator: amplitude loaders,
// unary-to-binary conversion for both registers, transversal-CNOT index XOR,
// shift measurement, zero padding, index increment, sine transform.
DenseRunResult simulate_trajectory_dense(const ProcessSpec& spec, RngStream& rng,
                                         std::optional<int> forced_shift = std::nullopt);

// Same draw discipline and output law, evaluated by classical arithmetic.
// With equal seeds it reproduces the dense run's trajectory exactly.
Trajectory simulate_trajectory_fast(const ProcessSpec& spec, RngStream& rng,
                                    std::optional<int> forced_shift = std::nullopt);

// Exact shift law P(j) given the unit Gaussian direction, shared by both
// paths: P(j) proportional to sum_k k^{-2 alpha} u_{(k-1) xor j}^2.
std::vector<double> shift_distribution(const ProcessSpec& spec, const std::vector<double>& unit);

// Coherent discretized encoding: every internal node angle is held in a
// precision_bits register, bottom-level cells span the full circle (mass
// exactly 2^-K each, carrying the signs), upper-level cells discretize
// [0, pi/2] under the exact Beta angle law. The pipeline is kept unitary;
// the shift register stays entangled instead of being measured.
struct CoherentEncoding {
    ProcessSpec spec;
    int precision_bits = 0;
    QuantumState state; // registers: value [0,logT), shift, then angle nodes
    std::vector<int> value_qubits;
    std::vector<int> shift_qubits;
    std::vector<std::vector<int>> angle_qubits;  // per node 1..L-1
    std::vector<std::vector<double>> cell_mass;  // per node, 2^K cell masses
    std::vector<std::vector<double>> cell_angle; // per node, cell midpoints
};

CoherentEncoding coherent_encoding_build(const ProcessSpec& spec, int precision_bits);

// Per-node discretization tables (midpoint angle and mass of each of the 2^K
// cells, nodes 1..L-1 in heap order) without building any circuit, so they
// stay available past the simulator's qubit budget.
void coherent_cell_tables(const ProcessSpec& spec, int precision_bits,
                          std::vector<std::vector<double>>& cell_mass,
                          std::vector<std::vector<double>>& cell_angle);

// Wire layout of the full-width coherent circuit (working rails included).
struct CoherentLayout {
    int total_qubits = 0;
    std::vector<int> value_qubits;
    std::vector<int> shift_qubits;
    std::vector<std::vector<int>> angle_qubits;
    std::vector<int> rail_qubits;
    std::vector<int> ancilla_qubits; // scratch; first one doubles as DST ancilla
};

// The full unitary preparation circuit used by coherent_encoding_build and by
// the estimation oracles. All rails and ancillas return to |0>.
Circuit coherent_pipeline_circuit(const ProcessSpec& spec, int precision_bits,
                                  CoherentLayout& layout,
                                  std::vector<std::vector<double>>* cell_mass = nullptr,
                                  std::vector<std::vector<double>>* cell_angle = nullptr);

struct TruncationRow {
    int terms = 0;
    double analytic_tail = 0.0;     // sum_{k>L} k^{-(1+2H)}
    double empirical_error = 0.0;   // mean of ||B_ref - B_L||^2 over pairs
    double empirical_se = 0.0;
    double relative_error = 0.0;    // analytic tail / total mean-square mass
};

// Paired-draw truncation study against a high-order reference expansion.
std::vector<TruncationRow> truncation_error_report(double hurst, const std::vector<int>& terms_list,
                                                   int pairs, int reference_terms, RngStream& rng);

double truncation_tail(double hurst, int terms);

} // namespace qsp
