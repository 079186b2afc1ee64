#include "qsp/spectral_bm.hpp"

#include "qsp/errors.hpp"
#include "qsp/fft.hpp"
#include "qsp/randgauss.hpp"
#include "qsp/stats.hpp"

#include <boost/math/special_functions/zeta.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

namespace qsp {

namespace {

constexpr double kPi = std::numbers::pi;

int checked_log2(int n, const char* what) {
    const int k = log2_exact(static_cast<std::size_t>(n));
    if (k < 0) throw domain_error(std::string(what) + ": not a power of two");
    return k;
}

std::size_t sample_index(const std::vector<double>& probs, double u) {
    double cum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cum += probs[i];
        if (u < cum) return i;
    }
    return probs.size() - 1;
}

} // namespace

void ProcessSpec::validate() const {
    if (!(hurst > 0.0) || hurst > 1.0)
        throw domain_error("ProcessSpec: hurst must lie in (0, 1]");
    if (terms < 2 || !is_power_of_two(static_cast<std::size_t>(terms)))
        throw domain_error("ProcessSpec: terms must be a power of two >= 2");
    if (steps < 2 || !is_power_of_two(static_cast<std::size_t>(steps)))
        throw domain_error("ProcessSpec: steps must be a power of two >= 2");
    if (steps < terms) throw domain_error("ProcessSpec: steps must be >= terms");
}

std::int64_t terms_for_accuracy(double epsilon, double hurst) {
    if (!(epsilon > 0.0)) throw domain_error("terms_for_accuracy: epsilon must be positive");
    if (!(hurst > 0.0) || hurst > 1.0)
        throw domain_error("terms_for_accuracy: tail diverges as hurst approaches 0");
    double raw = std::pow(epsilon, -1.0 / (2.0 * hurst));
    // Snap near-integers so exact formula values (e.g. 10^-2 at H = 1/2)
    // do not round up by a floating-point hair.
    const double snapped = std::round(raw);
    if (std::abs(raw - snapped) <= 1e-9 * std::max(1.0, snapped)) raw = snapped;
    if (raw > 9.0e15) throw budget_error("terms_for_accuracy: term count overflows the budget");
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(raw)));
}

std::int64_t terms_for_accuracy_pow2(double epsilon, double hurst) {
    const std::int64_t raw = terms_for_accuracy(epsilon, hurst);
    return static_cast<std::int64_t>(std::bit_ceil(static_cast<std::uint64_t>(std::max<std::int64_t>(raw, 2))));
}

Trajectory trajectory_from_gaussians(const ProcessSpec& spec, const std::vector<double>& gaussians,
                                     int shift) {
    spec.validate();
    const int L = spec.terms, T = spec.steps;
    if (static_cast<int>(gaussians.size()) != L)
        throw domain_error("trajectory_from_gaussians: coefficient count mismatch");
    if (shift < 0 || shift >= L) throw domain_error("trajectory_from_gaussians: shift out of range");

    const double alpha = spec.alpha();
    const double scale = std::sqrt(static_cast<double>(T) / kPi);
    // When L == T the top mode k = T is identically zero on the grid (the
    // dropped row of the order T-1 transform), so only modes up to T-1 enter.
    const int modes = std::min(L, T - 1);
    std::vector<double> coeffs(static_cast<std::size_t>(modes), 0.0);
    for (int k = 1; k <= modes; ++k) {
        const int src = (k - 1) ^ shift;
        coeffs[static_cast<std::size_t>(k - 1)] =
            scale * gaussians[static_cast<std::size_t>(src)] / std::pow(static_cast<double>(k), alpha);
    }
    std::vector<double> padded(static_cast<std::size_t>(T - 1), 0.0);
    std::copy(coeffs.begin(), coeffs.end(), padded.begin());

    Trajectory traj;
    traj.values = dst1(padded, static_cast<std::size_t>(T));
    double n2 = 0.0;
    for (double v : traj.values) n2 += v * v;
    traj.norm = std::sqrt(n2);
    traj.fourier_coeffs = std::move(coeffs);
    traj.gaussians = gaussians;
    traj.shift = shift;
    return traj;
}

Trajectory classical_wiener_trajectory(const ProcessSpec& spec, RngStream& rng) {
    spec.validate();
    std::vector<double> a(static_cast<std::size_t>(spec.terms));
    for (auto& v : a) v = rng.normal();
    return trajectory_from_gaussians(spec, a, 0);
}

std::vector<double> branch_unit_vector(int leaf_count, const std::vector<double>& node_angles) {
    if (leaf_count < 2 || !is_power_of_two(static_cast<std::size_t>(leaf_count)))
        throw domain_error("branch_unit_vector: leaf count must be a power of two >= 2");
    if (static_cast<int>(node_angles.size()) != leaf_count)
        throw domain_error("branch_unit_vector: need angles indexed 1..leaf_count-1");
    std::vector<double> amp(static_cast<std::size_t>(2 * leaf_count), 0.0);
    amp[1] = 1.0;
    for (int j = 1; j < leaf_count; ++j) {
        const double t = node_angles[static_cast<std::size_t>(j)];
        amp[static_cast<std::size_t>(2 * j)] = amp[static_cast<std::size_t>(j)] * std::cos(t);
        amp[static_cast<std::size_t>(2 * j + 1)] = amp[static_cast<std::size_t>(j)] * std::sin(t);
    }
    return {amp.begin() + leaf_count, amp.end()};
}

std::vector<double> shift_distribution(const ProcessSpec& spec, const std::vector<double>& unit) {
    spec.validate();
    const int L = spec.terms;
    if (static_cast<int>(unit.size()) != L)
        throw domain_error("shift_distribution: direction length mismatch");
    const double alpha = spec.alpha();
    std::vector<double> probs(static_cast<std::size_t>(L), 0.0);
    double total = 0.0;
    for (int j = 0; j < L; ++j) {
        double p = 0.0;
        for (int k = 1; k <= L; ++k) {
            const double u = unit[static_cast<std::size_t>((k - 1) ^ j)];
            p += std::pow(static_cast<double>(k), -2.0 * alpha) * u * u;
        }
        probs[static_cast<std::size_t>(j)] = p;
        total += p;
    }
    if (total <= 0.0) throw domain_error("shift_distribution: degenerate direction");
    for (auto& p : probs) p /= total;
    return probs;
}

namespace {

struct SharedDraws {
    double chi_norm = 0.0;
    AngleTree tree;
    std::vector<double> unit;
    std::vector<double> gaussians;
};

// Both trajectory paths consume the stream identically: substream 0 for the
// chi norm, 1 for the angle tree, 2 for the shift draw.
SharedDraws draw_shared(const ProcessSpec& spec, RngStream& rng) {
    SharedDraws d;
    auto s0 = rng.substream(0);
    auto s1 = rng.substream(1);
    d.chi_norm = std::sqrt(2.0 * sample_gamma(spec.terms / 2.0, s0));
    d.tree = sample_angle_tree(spec.terms, s1);
    d.unit = reconstruct_leaf_values(d.tree);
    d.gaussians.resize(d.unit.size());
    for (std::size_t i = 0; i < d.unit.size(); ++i) d.gaussians[i] = d.chi_norm * d.unit[i];
    return d;
}

int resolve_shift(const ProcessSpec& spec, const std::vector<double>& probs,
                  std::optional<int> forced, RngStream& rng) {
    if (forced) {
        if (*forced < 0 || *forced >= spec.terms)
            throw domain_error("forced shift out of range");
        return *forced;
    }
    auto s2 = rng.substream(2);
    return static_cast<int>(sample_index(probs, s2.uniform()));
}

} // namespace

Trajectory simulate_trajectory_fast(const ProcessSpec& spec, RngStream& rng,
                                    std::optional<int> forced_shift) {
    spec.validate();
    if (spec.terms >= spec.steps)
        throw domain_error("simulate_trajectory_fast: pipeline requires terms < steps");
    SharedDraws d = draw_shared(spec, rng);
    const auto probs = shift_distribution(spec, d.unit);
    const int j = resolve_shift(spec, probs, forced_shift, rng);
    return trajectory_from_gaussians(spec, d.gaussians, j);
}

DenseRunResult simulate_trajectory_dense(const ProcessSpec& spec, RngStream& rng,
                                         std::optional<int> forced_shift) {
    spec.validate();
    if (spec.terms >= spec.steps)
        throw domain_error("simulate_trajectory_dense: pipeline requires terms < steps");
    const int L = spec.terms, T = spec.steps;
    const int k = checked_log2(L, "simulate_trajectory_dense");
    const int m = checked_log2(T, "simulate_trajectory_dense");
    const int stage_total = unary_to_binary_total_qubits(L);
    const int peak = std::max({stage_total, k + stage_total, m + 1});
    if (peak > kMaxQubits)
        throw resource_error("simulate_trajectory_dense: staged pipeline needs " +
                             std::to_string(peak) + " qubits");

    SharedDraws d = draw_shared(spec, rng);

    // Stage 1: value register gets the k^{-alpha} profile.
    std::vector<double> kvec(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i)
        kvec[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i + 1), -spec.alpha());
    QuantumState state = new_basis_state(stage_total, 0);
    {
        Circuit c(stage_total);
        c.append(unary_loader_circuit(compute_loader_angles(kvec)));
        c.append(unary_to_binary_circuit(L));
        c.apply_to(state);
    }
    std::vector<int> scratch;
    for (int q = 0; q < L; ++q) scratch.push_back(q);
    for (int q = L + k; q < stage_total; ++q) scratch.push_back(q);
    state.remove_qubits(scratch, 0);

    // Stage 2: Gaussian register, loaded from the sampled angle tree.
    state.append_qubits(stage_total);
    {
        std::vector<int> lmap(static_cast<std::size_t>(L));
        for (int q = 0; q < L; ++q) lmap[static_cast<std::size_t>(q)] = k + q;
        std::vector<int> map(static_cast<std::size_t>(stage_total));
        for (int q = 0; q < stage_total; ++q) map[static_cast<std::size_t>(q)] = k + q;
        Circuit c(k + stage_total);
        c.append(unary_loader_circuit(d.tree).remapped(lmap, k + stage_total));
        c.append(unary_to_binary_circuit(L).remapped(map, k + stage_total));
        c.apply_to(state);
    }
    scratch.clear();
    for (int q = k; q < k + L; ++q) scratch.push_back(q);
    for (int q = k + L + k; q < k + stage_total; ++q) scratch.push_back(q);
    state.remove_qubits(scratch, 0);

    // Index XOR, transversal onto the Gaussian register.
    for (int q = 0; q < k; ++q) apply_gate(state, {GateKind::CNOT, 0.0, {q, k + q}});

    // Shift register marginal, cross-checked against the subspace formula.
    std::vector<int> shift_regs;
    for (int q = k; q < 2 * k; ++q) shift_regs.push_back(q);
    const auto probs = shift_distribution(spec, d.unit);
    const auto marginal = reduced_diagonal(state, shift_regs);
    for (int j = 0; j < L; ++j) {
        if (std::abs(probs[static_cast<std::size_t>(j)] - marginal[static_cast<std::size_t>(j)]) > 1e-10)
            throw verification_error("simulate_trajectory_dense: shift marginal mismatch");
    }
    const int j = resolve_shift(spec, probs, forced_shift, rng);
    const double pj = probs[static_cast<std::size_t>(j)];
    for (int q = 0; q < k; ++q)
        state = postselect(state, k + q, (j >> q) & 1).first;
    state.remove_qubits(shift_regs, static_cast<std::uint64_t>(j));

    // Zero-pad the value register to log2(T) bits, shift mode indices up by
    // one so mode k sits at transform index k, then apply the sine transform.
    state.append_qubits(m - k);
    {
        std::vector<int> value_regs;
        for (int q = 0; q < m; ++q) value_regs.push_back(q);
        std::vector<std::uint64_t> perm(static_cast<std::size_t>(T));
        for (int i = 0; i < T; ++i)
            perm[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>((i + 1) % T);
        Circuit c(m);
        c.add(Instruction{PermutationInstr{value_regs, perm, {}, "increment-index"}});
        c.apply_to(state);
        dst_apply(state, static_cast<std::size_t>(T), value_regs);
    }

    DenseRunResult result;
    result.trajectory = trajectory_from_gaussians(spec, d.gaussians, j);
    result.state = std::move(state);
    result.shift = j;
    result.shift_probability = pj;
    return result;
}

void coherent_cell_tables(const ProcessSpec& spec, int precision_bits,
                          std::vector<std::vector<double>>& cell_mass,
                          std::vector<std::vector<double>>& cell_angle) {
    spec.validate();
    if (spec.terms >= spec.steps)
        throw domain_error("coherent_cell_tables: requires terms < steps");
    if (precision_bits < 1 || precision_bits > 10)
        throw domain_error("coherent_cell_tables: precision bits out of range");
    const int L = spec.terms, K = precision_bits;
    const int cells = 1 << K;
    // Bottom-level nodes carry the signs: their angle spans the full circle
    // with exactly uniform cell mass. Upper nodes discretize the Beta angle
    // law on [0, pi/2]. Cells are represented by midpoint and mass.
    cell_mass.assign(static_cast<std::size_t>(L - 1), {});
    cell_angle.assign(static_cast<std::size_t>(L - 1), {});
    for (int j = 1; j < L; ++j) {
        const int depth = std::bit_width(static_cast<unsigned>(j)) - 1;
        const int span = L >> depth;
        auto& mj = cell_mass[static_cast<std::size_t>(j - 1)];
        auto& aj = cell_angle[static_cast<std::size_t>(j - 1)];
        mj.resize(static_cast<std::size_t>(cells));
        aj.resize(static_cast<std::size_t>(cells));
        if (span == 2) {
            const double delta = 2.0 * kPi / static_cast<double>(cells);
            for (int c = 0; c < cells; ++c) {
                mj[static_cast<std::size_t>(c)] = 1.0 / static_cast<double>(cells);
                aj[static_cast<std::size_t>(c)] = -kPi + (c + 0.5) * delta;
            }
        } else {
            const double delta = (kPi / 2.0) / static_cast<double>(cells);
            AngleDistribution dist{span / 2, span / 2};
            double sum = 0.0;
            for (int c = 0; c < cells; ++c) {
                const double lo = c * delta, hi = (c + 1) * delta;
                mj[static_cast<std::size_t>(c)] = integrate_adaptive(
                    [&](double t) { return angle_density(dist, t); }, lo, hi, 1e-12);
                aj[static_cast<std::size_t>(c)] = (c + 0.5) * delta;
                sum += mj[static_cast<std::size_t>(c)];
            }
            for (auto& v : mj) v /= sum;
        }
    }
}

Circuit coherent_pipeline_circuit(const ProcessSpec& spec, int precision_bits,
                                  CoherentLayout& layout,
                                  std::vector<std::vector<double>>* cell_mass_out,
                                  std::vector<std::vector<double>>* cell_angle_out) {
    spec.validate();
    if (spec.terms >= spec.steps)
        throw domain_error("coherent_pipeline_circuit: pipeline requires terms < steps");
    if (precision_bits < 1 || precision_bits > 10)
        throw domain_error("coherent_pipeline_circuit: precision bits out of range");
    const int L = spec.terms, T = spec.steps, K = precision_bits;
    const int k = checked_log2(L, "coherent_pipeline_circuit");
    const int m = checked_log2(T, "coherent_pipeline_circuit");
    const int retained = (L - 1) * K + k + m;
    if (retained > 24)
        throw resource_error("coherent_pipeline_circuit: angle/shift/value registers need " +
                             std::to_string(retained) + " qubits (cap 24)");
    const int u2b_anc = unary_to_binary_total_qubits(L) - L - k;
    const int anc_count = std::max(1, u2b_anc);
    const int total = retained + L + anc_count;
    if (total > kMaxQubits)
        throw resource_error("coherent_pipeline_circuit: full pipeline needs " +
                             std::to_string(total) + " qubits");

    layout = CoherentLayout{};
    layout.total_qubits = total;
    for (int q = 0; q < m; ++q) layout.value_qubits.push_back(q);
    for (int q = m; q < m + k; ++q) layout.shift_qubits.push_back(q);
    layout.angle_qubits.resize(static_cast<std::size_t>(L - 1));
    for (int j = 1; j < L; ++j) {
        auto& regs = layout.angle_qubits[static_cast<std::size_t>(j - 1)];
        const int base = m + k + (j - 1) * K;
        for (int b = 0; b < K; ++b) regs.push_back(base + b);
    }
    const int rail_base = m + k + (L - 1) * K;
    for (int q = rail_base; q < rail_base + L; ++q) layout.rail_qubits.push_back(q);
    for (int q = rail_base + L; q < total; ++q) layout.ancilla_qubits.push_back(q);

    std::vector<std::vector<double>> mass;
    std::vector<std::vector<double>> angle;
    coherent_cell_tables(spec, K, mass, angle);
    const int cells = 1 << K;
    std::vector<double> node_offset(static_cast<std::size_t>(L), 0.0);
    std::vector<double> node_delta(static_cast<std::size_t>(L), 0.0);
    for (int j = 1; j < L; ++j) {
        const int depth = std::bit_width(static_cast<unsigned>(j)) - 1;
        const int span = L >> depth;
        if (span == 2) {
            node_delta[static_cast<std::size_t>(j)] = 2.0 * kPi / static_cast<double>(cells);
            node_offset[static_cast<std::size_t>(j)] = -kPi + node_delta[static_cast<std::size_t>(j)] / 2.0;
        } else {
            node_delta[static_cast<std::size_t>(j)] = (kPi / 2.0) / static_cast<double>(cells);
            node_offset[static_cast<std::size_t>(j)] = node_delta[static_cast<std::size_t>(j)] / 2.0;
        }
    }
    if (cell_mass_out) *cell_mass_out = mass;
    if (cell_angle_out) *cell_angle_out = angle;

    Circuit circuit(total);

    // 1. Angle registers: superpose sqrt(cell mass) per node.
    for (int j = 1; j < L; ++j) {
        std::vector<double> amps(static_cast<std::size_t>(cells));
        for (int c = 0; c < cells; ++c)
            amps[static_cast<std::size_t>(c)] = std::sqrt(mass[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(c)]);
        circuit.add(Instruction{UnitaryInstr{layout.angle_qubits[static_cast<std::size_t>(j - 1)],
                                             column_completion(amps),
                                             {},
                                             "angle-cells"}});
    }

    // 2. Value register: fixed k^{-alpha} loader, then unary-to-binary.
    std::vector<double> kvec(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i)
        kvec[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i + 1), -spec.alpha());
    std::vector<int> u2b_map = layout.rail_qubits;
    for (int b = 0; b < k; ++b) u2b_map.push_back(layout.value_qubits[static_cast<std::size_t>(b)]);
    for (int a = 0; a < u2b_anc; ++a) u2b_map.push_back(layout.ancilla_qubits[static_cast<std::size_t>(a)]);
    std::vector<int> rail_map = layout.rail_qubits;
    circuit.append(unary_loader_circuit(compute_loader_angles(kvec)).remapped(rail_map, total));
    circuit.append(unary_to_binary_circuit(L).remapped(u2b_map, total));

    // 3. Gaussian register: angle-controlled loader cascade on the rails.
    circuit.add({GateKind::PauliX, 0.0, {layout.rail_qubits[0]}});
    for (int j = 1; j < L; ++j) {
        const int depth = std::bit_width(static_cast<unsigned>(j)) - 1;
        const int span = L >> depth;
        const int lo = (j - (1 << depth)) * span;
        const int mid = lo + span / 2;
        const int left = layout.rail_qubits[static_cast<std::size_t>(lo)];
        const int right = layout.rail_qubits[static_cast<std::size_t>(mid)];
        const double offset = node_offset[static_cast<std::size_t>(j)];
        const double delta = node_delta[static_cast<std::size_t>(j)];
        circuit.add({GateKind::RBS, offset, {left, right}});
        for (int b = 0; b < K; ++b) {
            circuit.add({GateKind::RBS, delta * static_cast<double>(1 << b), {left, right}},
                        {layout.angle_qubits[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(b)]});
        }
    }
    std::vector<int> u2b_map_shift = layout.rail_qubits;
    for (int b = 0; b < k; ++b) u2b_map_shift.push_back(layout.shift_qubits[static_cast<std::size_t>(b)]);
    for (int a = 0; a < u2b_anc; ++a) u2b_map_shift.push_back(layout.ancilla_qubits[static_cast<std::size_t>(a)]);
    circuit.append(unary_to_binary_circuit(L).remapped(u2b_map_shift, total));

    // 4. Index XOR onto the shift register.
    for (int b = 0; b < k; ++b)
        circuit.add({GateKind::CNOT, 0.0,
                     {layout.value_qubits[static_cast<std::size_t>(b)], layout.shift_qubits[static_cast<std::size_t>(b)]}});

    // 5. Mode alignment and the sine transform on the value register.
    std::vector<std::uint64_t> perm(static_cast<std::size_t>(T));
    for (int i = 0; i < T; ++i) perm[static_cast<std::size_t>(i)] = static_cast<std::uint64_t>((i + 1) % T);
    circuit.add(Instruction{PermutationInstr{layout.value_qubits, perm, {}, "increment-index"}});
    circuit.append(dst_bracket_circuit(static_cast<std::size_t>(T), layout.value_qubits,
                                       layout.ancilla_qubits[0], total));
    return circuit;
}

CoherentEncoding coherent_encoding_build(const ProcessSpec& spec, int precision_bits) {
    CoherentLayout layout;
    CoherentEncoding enc;
    enc.spec = spec;
    enc.precision_bits = precision_bits;
    Circuit circuit = coherent_pipeline_circuit(spec, precision_bits, layout, &enc.cell_mass, &enc.cell_angle);

    QuantumState state = new_basis_state(layout.total_qubits, 0);
    circuit.apply_to(state);

    // All rails and scratch ancillas must uncompute; removal enforces it.
    std::vector<int> drop = layout.rail_qubits;
    drop.insert(drop.end(), layout.ancilla_qubits.begin(), layout.ancilla_qubits.end());
    state.remove_qubits(drop, 0);

    enc.state = std::move(state);
    enc.value_qubits = layout.value_qubits;
    enc.shift_qubits = layout.shift_qubits;
    enc.angle_qubits = layout.angle_qubits;
    return enc;
}

double truncation_tail(double hurst, int terms) {
    if (!(hurst > 0.0) || hurst > 1.0) throw domain_error("truncation_tail: hurst out of range");
    if (terms < 1) throw domain_error("truncation_tail: terms must be positive");
    const double s = 1.0 + 2.0 * hurst;
    double head = 0.0;
    for (int j = 1; j <= terms; ++j) head += std::pow(static_cast<double>(j), -s);
    return boost::math::zeta(s) - head;
}

std::vector<TruncationRow> truncation_error_report(double hurst, const std::vector<int>& terms_list,
                                                   int pairs, int reference_terms, RngStream& rng) {
    if (!(hurst > 0.0) || hurst > 1.0)
        throw domain_error("truncation_error_report: hurst out of range");
    if (terms_list.empty()) throw domain_error("truncation_error_report: no term counts");
    if (pairs < 2) throw domain_error("truncation_error_report: need at least two paired draws");
    for (int L : terms_list)
        if (L < 1 || L >= reference_terms)
            throw domain_error("truncation_error_report: reference expansion must exceed every L");

    std::vector<int> sorted = terms_list;
    std::sort(sorted.begin(), sorted.end());
    const double alpha = hurst + 0.5;
    const double s = 1.0 + 2.0 * hurst;
    const double total_mass = boost::math::zeta(s);

    // Parseval: || B_ref - B_L ||^2 over the continuum time norm equals
    // sum_{L < k <= ref} a_k^2 k^{-2 alpha}, so no transform is needed.
    std::vector<double> weight(static_cast<std::size_t>(reference_terms) + 1, 0.0);
    for (int j = 1; j <= reference_terms; ++j)
        weight[static_cast<std::size_t>(j)] = std::pow(static_cast<double>(j), -2.0 * alpha);

    std::vector<double> sum(sorted.size(), 0.0), sum2(sorted.size(), 0.0);
    std::vector<double> draws(static_cast<std::size_t>(reference_terms) + 1, 0.0);
    std::vector<double> suffix(sorted.size(), 0.0);
    for (int p = 0; p < pairs; ++p) {
        auto sp = rng.substream(static_cast<std::uint64_t>(p));
        for (int j = 1; j <= reference_terms; ++j) draws[static_cast<std::size_t>(j)] = sp.normal();
        // Suffix accumulation from the top mode down to each truncation point.
        double acc = 0.0;
        std::size_t li = sorted.size();
        for (int j = reference_terms; j >= 1; --j) {
            while (li > 0 && sorted[li - 1] == j) suffix[--li] = acc;
            acc += draws[static_cast<std::size_t>(j)] * draws[static_cast<std::size_t>(j)] *
                   weight[static_cast<std::size_t>(j)];
        }
        while (li > 0) suffix[--li] = acc;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            sum[i] += suffix[i];
            sum2[i] += suffix[i] * suffix[i];
        }
    }

    std::vector<TruncationRow> rows;
    for (std::size_t li = 0; li < sorted.size(); ++li) {
        TruncationRow row;
        row.terms = sorted[li];
        row.analytic_tail = truncation_tail(hurst, sorted[li]);
        row.empirical_error = sum[li] / static_cast<double>(pairs);
        const double var =
            (sum2[li] - sum[li] * sum[li] / static_cast<double>(pairs)) / (static_cast<double>(pairs) - 1.0);
        row.empirical_se = std::sqrt(std::max(var, 0.0) / static_cast<double>(pairs));
        row.relative_error = row.analytic_tail / total_mass;
        rows.push_back(row);
    }
    return rows;
}

} // namespace qsp
