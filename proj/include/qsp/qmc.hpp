#pragma once

#include "qsp/spectral_bm.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace qsp {

// Test function f(t_i), i = 1..T-1, together with the loader V preparing
// |f> = (1/||f||) sum_i f(t_i) |i> on the log2(T)-qubit value register
// (index 0 stays empty, matching the path encoding).
struct TestFunction {
    std::vector<double> values;
    double norm = 0.0;
    Circuit loader;
};

// values.size() + 1 must be a power of two >= 2 and the function nonzero.
TestFunction make_test_function(std::vector<double> values);

// sin(mode * t_i) on the grid t_i = i pi / T. Orthogonal to every other mode.
TestFunction sine_mode_function(int steps, int mode);

// Indicator of the time window [lo, hi) given as fractions of the interval:
// f(t_i) = 1 when lo <= i/T < hi.
TestFunction window_function(int steps, double lo, double hi);

enum class EstimationMethod { DirectAmplitude, PhaseEstimationAE, ClassicalMC };

// The stated target E[<f|B>/(||B|| ||f||)] is zero for every f: the coefficient
// ensemble (and its discretized cell grid) is closed under a global sign flip.
// The informative quantity the same oracle carries is the squared overlap,
// E[<f|B>^2/(||B||^2 ||f||^2)], read off the value register density.
enum class InnerEstimand { SignedMean, SquaredOverlap };

struct EstimationResult {
    double estimate = 0.0;
    double error_bound = 0.0;
    std::uint64_t oracle_queries = 0; // per shot for AE: 2^m - 1 Grover + one A
    std::uint64_t shots = 0;
    EstimationMethod method = EstimationMethod::DirectAmplitude;
};

// Preparation followed by the inverse test-function loader on the value
// register. Per garbage branch (angle cells, shift) the amplitude left on
// value |0> is <B_branch|f> / (||B_branch|| ||f||).
Circuit build_oracle_A(const ProcessSpec& spec, const TestFunction& f, int precision_bits,
                       CoherentLayout& layout,
                       std::vector<std::vector<double>>* cell_mass = nullptr,
                       std::vector<std::vector<double>>* cell_angle = nullptr);

// Same with an extra flag wire on top (the returned circuit has
// layout.total_qubits + 1 wires, flag = layout.total_qubits). The flag |0>
// amplitude per branch is ||B||/b_max, so the joint (value=0, flag=0)
// amplitude is <B|f>/(b_max ||f||). A norm window [lo, hi] zeroes the flag
// amplitude outside it, realizing postselection on the physical path norm.
// Any branch norm above b_max is a parameter error.
Circuit build_oracle_A_norm(const ProcessSpec& spec, const TestFunction& f, int precision_bits,
                            double b_max, CoherentLayout& layout,
                            std::optional<std::pair<double, double>> norm_window = std::nullopt,
                            std::vector<std::vector<double>>* cell_mass = nullptr,
                            std::vector<std::vector<double>>* cell_angle = nullptr);

// 3 sqrt(E ||B||^2) for the truncated series on the grid. Every discretized
// branch norm is at most sqrt(T/pi) * Z_1, one third of this.
double default_norm_bound(const ProcessSpec& spec);

// Exact maximum physical norm over the discretized angle grid (enumerates all
// cell combinations; (L-1) * precision_bits beyond 20 bits is a resource
// error).
double grid_norm_max(const ProcessSpec& spec, int precision_bits);

// Garbage-marginal preparation W on the pipeline layout: W|0> carries
// amplitude sqrt(m_branch) on every (angle cells, shift) combination and
// leaves value, rails and ancillas alone. A followed by W^{-1} therefore has
// <0...0| amplitude equal to the signed mean E[<f|B>/(||B|| ||f||)], which
// phase estimation can bound in magnitude.
Circuit garbage_marginal_circuit(const ProcessSpec& spec, int precision_bits,
                                 const CoherentLayout& layout);

// Standalone norm-flag preparation on its own wires: shift [0, log2 L),
// angle registers above, flag on top. With uniform_shift the shift register
// is an even superposition instead of the pipeline's conditional law, giving
// the exact identity L * b_max^2 * P(flag = 0) = E ||B||^2 on the grid.
// With indicator the flag carries window membership (1 inside, 0 outside)
// rather than nu / b_max.
Circuit norm_flag_circuit(const ProcessSpec& spec, int precision_bits, double b_max,
                          bool uniform_shift,
                          std::optional<std::pair<double, double>> norm_window = std::nullopt,
                          bool indicator = false);

// Coherent pipeline with the norm rotation on a flag wire at
// layout.total_qubits and no test function, so the value register stays an
// amplitude encoding of the branch trajectory. With indicator = true the
// flag carries the window membership itself (amplitude 1 inside, 0 outside)
// instead of nu / b_max, which turns P(flag = 0) into the plain branch
// probability of the window.
Circuit coherent_norm_circuit(const ProcessSpec& spec, int precision_bits, double b_max,
                              CoherentLayout& layout,
                              std::optional<std::pair<double, double>> norm_window = std::nullopt,
                              bool indicator = false);

// Canonical phase-estimation amplitude estimation on the Grover operator of
// A, sampled from the exact outcome law of the m-bit phase register. The
// estimate is of the squared amplitude on the target set; with shots > 1 the
// median of the per-shot estimates is reported, which amplifies the standard
// per-shot guarantee |estimate - a| <= pi/2^m + pi^2/2^(2m) (held with
// probability 8/pi^2 per shot) to near certainty. oracle_queries counts one
// shot: 2^m - 1 Grover iterates plus the initial preparation.
EstimationResult amplitude_estimate(const Circuit& a, const std::vector<std::uint64_t>& target,
                                    int ancilla_bits, RngStream& rng, int shots = 25);

// Target given as allowed values of a subregister (qubit q = register bit i).
EstimationResult amplitude_estimate_on_register(const Circuit& a,
                                                const std::vector<int>& register_qubits,
                                                const std::vector<std::uint64_t>& register_values,
                                                int ancilla_bits, RngStream& rng, int shots = 25);

// Exact squared target mass of A|0...0>, for oracle cross-checks and the
// DirectAmplitude mode.
double exact_target_mass(const Circuit& a, const std::vector<std::uint64_t>& target);
double exact_target_mass(const Circuit& a, const std::vector<int>& register_qubits,
                         const std::vector<std::uint64_t>& register_values);

// Exact expected |estimate - a| of a single phase-estimation shot at the
// given precision, from the closed-form outcome law.
double expected_ae_error(double amplitude_sq, int ancilla_bits);

// One draw from the discretized branch measure: per-node cells from the cell
// tables, then the shift from its conditional law given the angles.
struct BranchDraw {
    std::vector<int> cells;      // per node 1..L-1
    int shift = 0;
    std::vector<double> weights; // w_k = k^{-alpha} u_{(k-1) xor shift}
    double norm2 = 0.0;          // ||w||^2
    double nu2 = 0.0;            // (T/pi) ||w||^2, squared physical norm
};

BranchDraw sample_coherent_branch(const ProcessSpec& spec,
                                  const std::vector<std::vector<double>>& cell_mass,
                                  const std::vector<std::vector<double>>& cell_angle,
                                  RngStream& rng);

// Normalized inner product <f|B_branch> / (||f|| ||B_branch||) of a draw.
double branch_overlap(const ProcessSpec& spec, const TestFunction& f, const BranchDraw& draw);

// Closed form of the squared overlap under the discretized measure,
// sum_k k^{-2 alpha} (S f)_k^2 / (Z_1^2 ||f||^2) with S the order T-1 sine
// transform. Exact for precision_bits >= 2 (the cell midpoints are symmetric
// enough that the value-register density is diagonal in the mode basis).
double squared_overlap_closed_form(const ProcessSpec& spec, const TestFunction& f);

struct InnerEstimateOptions {
    InnerEstimand estimand = InnerEstimand::SignedMean;
    int precision_bits = 4; // K, angle register width; >= 2
    // Physical-norm window: switches to the postselected squared overlap
    // (flag-conditioned), verified against rejection sampling; no analytic
    // error claim beyond the estimation term.
    std::optional<std::pair<double, double>> norm_window;
    std::optional<double> norm_bound; // b_max override for the flag oracle
    int ae_shots = 25;
    std::int64_t mc_samples = 0; // 0: derived from epsilon
};

// Estimate the chosen functional of the truncated, discretized ensemble with
// target accuracy epsilon (truncation is the caller's choice of spec.terms;
// the reported bound adds its contribution). Quantum modes that exceed the
// dense qubit budget raise a budget error naming ClassicalMC as the fallback.
// ClassicalMC here samples the same discretized branch measure the circuits
// prepare; classical_mc_estimate below is the continuum-series baseline.
EstimationResult estimate_normalized_inner(const ProcessSpec& spec, const TestFunction& f,
                                           double epsilon, EstimationMethod method,
                                           RngStream& rng,
                                           const InnerEstimateOptions& options = {});

// Plain classical Monte Carlo over full series draws: mean of
// <f|B>/(||B|| ||f||) with a 3 standard error bound. One substream per
// sample, so results are independent of threading and draw order.
EstimationResult classical_mc_estimate(const ProcessSpec& spec, const TestFunction& f,
                                       std::int64_t samples, RngStream& rng);

} // namespace qsp
