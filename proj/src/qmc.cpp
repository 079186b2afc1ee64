#include "qsp/qmc.hpp"

#include "qsp/errors.hpp"
#include "qsp/fft.hpp"

#include <boost/math/special_functions/zeta.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

namespace qsp {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Everything the branch measure needs, enumerated over the angle grid:
// combo c runs over all per-node cell choices (node-major, K bits each),
// w2[c * L + s] = ||w(c, s)||^2 for the shifted weight vector
// w_k = k^{-alpha} u_{(k-1) xor s}.
struct BranchTables {
    int terms = 0;
    int precision_bits = 0;
    int angle_bits = 0;
    std::vector<std::vector<double>> mass;
    std::vector<std::vector<double>> angle;
    std::vector<double> combo_mass;
    std::vector<double> w2;
    double z1sq = 0.0;
    double t_over_pi = 0.0;
};

BranchTables build_branch_tables(const ProcessSpec& spec, int precision_bits) {
    BranchTables t;
    coherent_cell_tables(spec, precision_bits, t.mass, t.angle);
    const int L = spec.terms;
    const int K = precision_bits;
    t.terms = L;
    t.precision_bits = K;
    t.angle_bits = (L - 1) * K;
    if (t.angle_bits > 20)
        throw resource_error("branch tables: enumeration needs " + std::to_string(t.angle_bits) +
                             " angle bits (cap 20)");
    t.t_over_pi = static_cast<double>(spec.steps) / kPi;

    std::vector<double> pk(static_cast<std::size_t>(L));
    for (int k = 1; k <= L; ++k) {
        pk[static_cast<std::size_t>(k - 1)] = std::pow(static_cast<double>(k), -2.0 * spec.alpha());
        t.z1sq += pk[static_cast<std::size_t>(k - 1)];
    }

    const std::uint64_t combos = 1ull << t.angle_bits;
    t.combo_mass.resize(combos);
    t.w2.resize(combos * static_cast<std::uint64_t>(L));
    std::vector<double> node_angles(static_cast<std::size_t>(L), 0.0);
    for (std::uint64_t c = 0; c < combos; ++c) {
        double m = 1.0;
        for (int j = 1; j < L; ++j) {
            const auto cell = static_cast<std::size_t>((c >> ((j - 1) * K)) & ((1u << K) - 1));
            m *= t.mass[static_cast<std::size_t>(j - 1)][cell];
            node_angles[static_cast<std::size_t>(j)] = t.angle[static_cast<std::size_t>(j - 1)][cell];
        }
        t.combo_mass[c] = m;
        const auto unit = branch_unit_vector(L, node_angles);
        for (int s = 0; s < L; ++s) {
            double w2 = 0.0;
            for (int k = 1; k <= L; ++k) {
                const double u = unit[static_cast<std::size_t>((k - 1) ^ s)];
                w2 += pk[static_cast<std::size_t>(k - 1)] * u * u;
            }
            t.w2[c * static_cast<std::uint64_t>(L) + static_cast<std::uint64_t>(s)] = w2;
        }
    }
    return t;
}

// Cell amplitude loaders, one per internal node, shared by the pipeline and
// the garbage-marginal circuit.
void append_angle_loaders(Circuit& c, const BranchTables& t,
                          const std::vector<std::vector<int>>& angle_regs) {
    for (std::size_t j = 0; j < t.mass.size(); ++j) {
        std::vector<double> amps(t.mass[j].size());
        for (std::size_t i = 0; i < amps.size(); ++i) amps[i] = std::sqrt(t.mass[j][i]);
        c.add(Instruction{UnitaryInstr{angle_regs[j], column_completion(amps), {}, "angle-cells"}});
    }
}

// Loads the conditional shift law P(s | angle cells) bit by bit from the top:
// each shift bit is rotated by a select rotation indexed on the angle
// registers and the already-loaded higher bits.
void append_shift_law(Circuit& c, const BranchTables& t, const std::vector<int>& angle_list,
                      const std::vector<int>& shift_qubits) {
    const int L = t.terms;
    const int k = static_cast<int>(shift_qubits.size());
    const int A = t.angle_bits;
    const std::uint64_t combos = 1ull << A;
    for (int b = k - 1; b >= 0; --b) {
        std::vector<int> idx = angle_list;
        for (int i = b + 1; i < k; ++i) idx.push_back(shift_qubits[static_cast<std::size_t>(i)]);
        const int prefix_bits = k - 1 - b;
        std::vector<cdouble> coeffs(combos << prefix_bits);
        for (std::uint64_t combo = 0; combo < combos; ++combo) {
            for (std::uint64_t prefix = 0; prefix < (1ull << prefix_bits); ++prefix) {
                double num = 0.0, den = 0.0;
                for (int s = 0; s < L; ++s) {
                    bool match = true;
                    for (int i = b + 1; i < k; ++i)
                        if (((static_cast<std::uint64_t>(s) >> i) & 1) !=
                            ((prefix >> (i - b - 1)) & 1)) {
                            match = false;
                            break;
                        }
                    if (!match) continue;
                    const double v = t.w2[combo * static_cast<std::uint64_t>(L) +
                                          static_cast<std::uint64_t>(s)];
                    den += v;
                    if (((s >> b) & 1) == 0) num += v;
                }
                coeffs[combo | (prefix << A)] =
                    den > 0.0 ? std::sqrt(std::min(1.0, num / den)) : 1.0;
            }
        }
        c.add(Instruction{SelectRotationInstr{idx, shift_qubits[static_cast<std::size_t>(b)],
                                              std::move(coeffs), false, "shift-law"}});
    }
}

// Flag coefficients nu(c, s) / b_max, zeroed outside the norm window.
std::vector<cdouble> norm_flag_coeffs(const BranchTables& t, double b_max,
                                      const std::optional<std::pair<double, double>>& window) {
    if (!(b_max > 0.0)) throw domain_error("norm flag: b_max must be positive");
    if (window && !(window->first <= window->second))
        throw domain_error("norm flag: empty norm window");
    const int L = t.terms;
    const std::uint64_t combos = 1ull << t.angle_bits;
    std::vector<cdouble> coeffs(combos << static_cast<unsigned>(log2_exact(static_cast<std::size_t>(L))));
    for (std::uint64_t c = 0; c < combos; ++c) {
        for (int s = 0; s < L; ++s) {
            const double nu = std::sqrt(
                t.t_over_pi *
                t.w2[c * static_cast<std::uint64_t>(L) + static_cast<std::uint64_t>(s)]);
            if (nu > b_max * (1.0 + 1e-12))
                throw domain_error("norm flag: branch norm " + std::to_string(nu) +
                                   " exceeds b_max " + std::to_string(b_max));
            double beta = std::min(1.0, nu / b_max);
            if (window && (nu < window->first || nu > window->second)) beta = 0.0;
            coeffs[c | (static_cast<std::uint64_t>(s) << t.angle_bits)] = beta;
        }
    }
    return coeffs;
}

// Window-membership coefficients: 1 when the branch norm lies inside, else 0.
std::vector<cdouble> indicator_flag_coeffs(const BranchTables& t,
                                           const std::pair<double, double>& window) {
    if (!(window.first <= window.second)) throw domain_error("norm flag: empty norm window");
    const int L = t.terms;
    const std::uint64_t combos = 1ull << t.angle_bits;
    std::vector<cdouble> coeffs(combos
                                << static_cast<unsigned>(log2_exact(static_cast<std::size_t>(L))));
    for (std::uint64_t c = 0; c < combos; ++c) {
        for (int s = 0; s < L; ++s) {
            const double nu = std::sqrt(
                t.t_over_pi *
                t.w2[c * static_cast<std::uint64_t>(L) + static_cast<std::uint64_t>(s)]);
            const bool in = nu >= window.first && nu <= window.second;
            coeffs[c | (static_cast<std::uint64_t>(s) << t.angle_bits)] = in ? 1.0 : 0.0;
        }
    }
    return coeffs;
}

std::vector<int> flatten_angle_regs(const std::vector<std::vector<int>>& regs) {
    std::vector<int> out;
    for (const auto& r : regs) out.insert(out.end(), r.begin(), r.end());
    return out;
}

// First min(L, T-1) mode coefficients of the normalized test function under
// the order T-1 sine transform.
std::vector<double> mode_profile(const ProcessSpec& spec, const TestFunction& f) {
    const int T = spec.steps;
    if (static_cast<int>(f.values.size()) + 1 != T)
        throw domain_error("test function: length " + std::to_string(f.values.size()) +
                           " does not match steps " + std::to_string(T));
    if (!(f.norm > 0.0)) throw domain_error("test function: zero norm");
    std::vector<double> fhat(static_cast<std::size_t>(T - 1));
    for (std::size_t i = 0; i < fhat.size(); ++i) fhat[i] = f.values[i] / f.norm;
    auto ft = dst1(fhat, static_cast<std::size_t>(T));
    ft.resize(static_cast<std::size_t>(std::min(spec.terms, T - 1)));
    return ft;
}

double mass_on_register(const QuantumState& state, const std::vector<int>& register_qubits,
                        const std::vector<std::uint64_t>& register_values) {
    const int n = state.num_qubits();
    for (int q : register_qubits)
        if (q < 0 || q >= n) throw domain_error("target register: qubit out of range");
    std::vector<std::uint64_t> sorted = register_values;
    std::sort(sorted.begin(), sorted.end());
    double mass = 0.0;
    const std::uint64_t dim = 1ull << n;
    for (std::uint64_t i = 0; i < dim; ++i) {
        std::uint64_t rv = 0;
        for (std::size_t b = 0; b < register_qubits.size(); ++b)
            rv |= ((i >> register_qubits[b]) & 1ull) << b;
        if (!std::binary_search(sorted.begin(), sorted.end(), rv)) continue;
        const cdouble a = state.amplitude(i);
        mass += std::norm(a);
    }
    return mass;
}

// Squared phase-estimation kernel (sin(Mx) / (M sin x))^2 at M = 2^m.
double pe_kernel(int m, double x) {
    const double big = std::ldexp(1.0, m);
    const double s = std::sin(x);
    if (std::abs(s) < 1e-12) return 1.0;
    const double r = std::sin(big * x) / (big * s);
    return r * r;
}

// Exact outcome law of m-bit phase estimation on the Grover operator with
// rotation angle 2 theta: the two eigenphases contribute symmetrically.
std::vector<double> pe_outcome_law(int m, double theta) {
    const std::uint64_t big = 1ull << m;
    std::vector<double> law(big);
    for (std::uint64_t y = 0; y < big; ++y) {
        const double x = kPi * static_cast<double>(y) / static_cast<double>(big);
        law[y] = 0.5 * pe_kernel(m, x - theta) + 0.5 * pe_kernel(m, x + theta);
    }
    return law;
}

EstimationResult ae_from_mass(double mass, int ancilla_bits, RngStream& rng, int shots) {
    if (ancilla_bits < 1 || ancilla_bits > 20)
        throw domain_error("amplitude_estimate: ancilla bits out of range [1, 20]");
    if (shots < 1) throw domain_error("amplitude_estimate: shots must be positive");
    const double a = std::clamp(mass, 0.0, 1.0);
    const double theta = std::asin(std::sqrt(a));
    const auto law = pe_outcome_law(ancilla_bits, theta);
    std::vector<double> prefix(law.size());
    std::partial_sum(law.begin(), law.end(), prefix.begin());
    const double total = prefix.back();
    const std::uint64_t big = 1ull << ancilla_bits;

    std::vector<double> estimates(static_cast<std::size_t>(shots));
    for (int s = 0; s < shots; ++s) {
        const double r = rng.uniform() * total;
        const auto it = std::upper_bound(prefix.begin(), prefix.end(), r);
        const auto y = static_cast<std::uint64_t>(std::distance(prefix.begin(), it));
        const double ang = kPi * static_cast<double>(std::min(y, big - 1)) / static_cast<double>(big);
        const double sn = std::sin(ang);
        estimates[static_cast<std::size_t>(s)] = sn * sn;
    }
    std::sort(estimates.begin(), estimates.end());
    const std::size_t mid = estimates.size() / 2;
    const double median = estimates.size() % 2 == 1
                              ? estimates[mid]
                              : 0.5 * (estimates[mid - 1] + estimates[mid]);

    EstimationResult r;
    r.estimate = median;
    r.error_bound = kPi / static_cast<double>(big) +
                    kPi * kPi / (static_cast<double>(big) * static_cast<double>(big));
    r.oracle_queries = big;
    r.shots = static_cast<std::uint64_t>(shots);
    r.method = EstimationMethod::PhaseEstimationAE;
    return r;
}

std::int64_t mc_samples_for(double epsilon, std::int64_t requested) {
    if (requested > 0) return requested;
    const double raw = std::ceil(81.0 / (epsilon * epsilon));
    return std::clamp(static_cast<std::int64_t>(raw), std::int64_t{100}, std::int64_t{4000000});
}

int ae_bits_for(double target) {
    // smallest m with pi/2^m below the target, clamped to the sampling range
    const double raw = std::ceil(std::log2(kPi / target));
    return std::clamp(static_cast<int>(raw), 3, 20);
}

} // namespace

TestFunction make_test_function(std::vector<double> values) {
    const std::size_t steps = values.size() + 1;
    if (values.empty() || !is_power_of_two(steps))
        throw domain_error("make_test_function: need T-1 values with T a power of two >= 2");
    double n2 = 0.0;
    for (double v : values) n2 += v * v;
    if (!(n2 > 0.0)) throw domain_error("make_test_function: zero function");
    TestFunction f;
    f.norm = std::sqrt(n2);
    const int m = log2_exact(steps);
    std::vector<double> target(steps, 0.0);
    for (std::size_t i = 0; i + 1 < steps; ++i) target[i + 1] = values[i] / f.norm;
    std::vector<int> qubits(static_cast<std::size_t>(m));
    std::iota(qubits.begin(), qubits.end(), 0);
    Circuit c(m);
    c.add(Instruction{UnitaryInstr{qubits, column_completion(target), {}, "test-function"}});
    f.loader = std::move(c);
    f.values = std::move(values);
    return f;
}

TestFunction sine_mode_function(int steps, int mode) {
    if (steps < 2 || !is_power_of_two(static_cast<std::size_t>(steps)))
        throw domain_error("sine_mode_function: steps must be a power of two >= 2");
    if (mode < 1 || mode > steps - 1)
        throw domain_error("sine_mode_function: mode out of range [1, T-1]");
    std::vector<double> values(static_cast<std::size_t>(steps - 1));
    for (int i = 1; i < steps; ++i)
        values[static_cast<std::size_t>(i - 1)] =
            std::sin(static_cast<double>(mode) * kPi * static_cast<double>(i) /
                     static_cast<double>(steps));
    return make_test_function(std::move(values));
}

TestFunction window_function(int steps, double lo, double hi) {
    if (steps < 2 || !is_power_of_two(static_cast<std::size_t>(steps)))
        throw domain_error("window_function: steps must be a power of two >= 2");
    if (!(lo < hi) || lo < 0.0 || hi > 1.0)
        throw domain_error("window_function: need 0 <= lo < hi <= 1");
    std::vector<double> values(static_cast<std::size_t>(steps - 1), 0.0);
    bool any = false;
    for (int i = 1; i < steps; ++i) {
        const double frac = static_cast<double>(i) / static_cast<double>(steps);
        if (frac >= lo && frac < hi) {
            values[static_cast<std::size_t>(i - 1)] = 1.0;
            any = true;
        }
    }
    if (!any) throw domain_error("window_function: window contains no grid point");
    return make_test_function(std::move(values));
}

Circuit build_oracle_A(const ProcessSpec& spec, const TestFunction& f, int precision_bits,
                       CoherentLayout& layout, std::vector<std::vector<double>>* cell_mass,
                       std::vector<std::vector<double>>* cell_angle) {
    if (static_cast<int>(f.values.size()) + 1 != spec.steps)
        throw domain_error("build_oracle_A: test function length does not match steps");
    Circuit c = coherent_pipeline_circuit(spec, precision_bits, layout, cell_mass, cell_angle);
    c.append(f.loader.inverse().remapped(layout.value_qubits, layout.total_qubits));
    return c;
}

Circuit build_oracle_A_norm(const ProcessSpec& spec, const TestFunction& f, int precision_bits,
                            double b_max, CoherentLayout& layout,
                            std::optional<std::pair<double, double>> norm_window,
                            std::vector<std::vector<double>>* cell_mass,
                            std::vector<std::vector<double>>* cell_angle) {
    Circuit base = build_oracle_A(spec, f, precision_bits, layout, cell_mass, cell_angle);
    const BranchTables tables = build_branch_tables(spec, precision_bits);
    auto coeffs = norm_flag_coeffs(tables, b_max, norm_window);

    const int flag = layout.total_qubits;
    Circuit c(layout.total_qubits + 1);
    c.append(base);
    std::vector<int> idx = flatten_angle_regs(layout.angle_qubits);
    idx.insert(idx.end(), layout.shift_qubits.begin(), layout.shift_qubits.end());
    c.add(Instruction{SelectRotationInstr{std::move(idx), flag, std::move(coeffs), false,
                                          "norm-rotation"}});
    return c;
}

double default_norm_bound(const ProcessSpec& spec) {
    spec.validate();
    const int modes = std::min(spec.terms, spec.steps - 1);
    double z1sq = 0.0;
    for (int k = 1; k <= modes; ++k)
        z1sq += std::pow(static_cast<double>(k), -2.0 * spec.alpha());
    return 3.0 * std::sqrt(static_cast<double>(spec.steps) / kPi * z1sq);
}

double grid_norm_max(const ProcessSpec& spec, int precision_bits) {
    const BranchTables t = build_branch_tables(spec, precision_bits);
    double best = 0.0;
    for (double w2 : t.w2) best = std::max(best, w2);
    return std::sqrt(t.t_over_pi * best);
}

Circuit garbage_marginal_circuit(const ProcessSpec& spec, int precision_bits,
                                 const CoherentLayout& layout) {
    const BranchTables tables = build_branch_tables(spec, precision_bits);
    Circuit c(layout.total_qubits);
    append_angle_loaders(c, tables, layout.angle_qubits);
    append_shift_law(c, tables, flatten_angle_regs(layout.angle_qubits), layout.shift_qubits);
    return c;
}

Circuit coherent_norm_circuit(const ProcessSpec& spec, int precision_bits, double b_max,
                              CoherentLayout& layout,
                              std::optional<std::pair<double, double>> norm_window,
                              bool indicator) {
    Circuit base = coherent_pipeline_circuit(spec, precision_bits, layout);
    const BranchTables tables = build_branch_tables(spec, precision_bits);
    if (indicator && !norm_window)
        throw domain_error("coherent norm circuit: indicator needs a window");
    std::vector<cdouble> coeffs = indicator ? indicator_flag_coeffs(tables, *norm_window)
                                            : norm_flag_coeffs(tables, b_max, norm_window);

    const int flag = layout.total_qubits;
    Circuit c(layout.total_qubits + 1);
    c.append(base);
    std::vector<int> idx = flatten_angle_regs(layout.angle_qubits);
    idx.insert(idx.end(), layout.shift_qubits.begin(), layout.shift_qubits.end());
    c.add(Instruction{SelectRotationInstr{std::move(idx), flag, std::move(coeffs), false,
                                          indicator ? "window-indicator" : "norm-rotation"}});
    return c;
}

Circuit norm_flag_circuit(const ProcessSpec& spec, int precision_bits, double b_max,
                          bool uniform_shift,
                          std::optional<std::pair<double, double>> norm_window, bool indicator) {
    if (indicator && !norm_window) throw domain_error("norm flag: indicator needs a window");
    const BranchTables tables = build_branch_tables(spec, precision_bits);
    const int L = spec.terms;
    const int k = log2_exact(static_cast<std::size_t>(L));
    const int K = precision_bits;
    const int angle_bits = tables.angle_bits;
    const int flag = k + angle_bits;
    Circuit c(flag + 1);

    std::vector<int> shift_qubits(static_cast<std::size_t>(k));
    std::iota(shift_qubits.begin(), shift_qubits.end(), 0);
    std::vector<std::vector<int>> angle_regs(static_cast<std::size_t>(L - 1));
    for (int j = 1; j < L; ++j) {
        for (int b = 0; b < K; ++b)
            angle_regs[static_cast<std::size_t>(j - 1)].push_back(k + (j - 1) * K + b);
    }

    append_angle_loaders(c, tables, angle_regs);
    if (uniform_shift) {
        for (int q : shift_qubits) c.add({GateKind::Hadamard, 0.0, {q}});
    } else {
        append_shift_law(c, tables, flatten_angle_regs(angle_regs), shift_qubits);
    }
    std::vector<int> idx = flatten_angle_regs(angle_regs);
    idx.insert(idx.end(), shift_qubits.begin(), shift_qubits.end());
    c.add(Instruction{SelectRotationInstr{std::move(idx), flag,
                                          indicator ? indicator_flag_coeffs(tables, *norm_window)
                                                    : norm_flag_coeffs(tables, b_max, norm_window),
                                          false, indicator ? "window-indicator" : "norm-rotation"}});
    return c;
}

double exact_target_mass(const Circuit& a, const std::vector<std::uint64_t>& target) {
    std::vector<int> all(static_cast<std::size_t>(a.num_qubits()));
    std::iota(all.begin(), all.end(), 0);
    return exact_target_mass(a, all, target);
}

double exact_target_mass(const Circuit& a, const std::vector<int>& register_qubits,
                         const std::vector<std::uint64_t>& register_values) {
    if (register_values.empty()) throw domain_error("target mass: empty target set");
    QuantumState state = new_basis_state(a.num_qubits(), 0);
    a.apply_to(state);
    return mass_on_register(state, register_qubits, register_values);
}

EstimationResult amplitude_estimate(const Circuit& a, const std::vector<std::uint64_t>& target,
                                    int ancilla_bits, RngStream& rng, int shots) {
    return ae_from_mass(exact_target_mass(a, target), ancilla_bits, rng, shots);
}

EstimationResult amplitude_estimate_on_register(const Circuit& a,
                                                const std::vector<int>& register_qubits,
                                                const std::vector<std::uint64_t>& register_values,
                                                int ancilla_bits, RngStream& rng, int shots) {
    return ae_from_mass(exact_target_mass(a, register_qubits, register_values), ancilla_bits, rng,
                        shots);
}

double expected_ae_error(double amplitude_sq, int ancilla_bits) {
    if (ancilla_bits < 1 || ancilla_bits > 20)
        throw domain_error("expected_ae_error: ancilla bits out of range [1, 20]");
    const double a = std::clamp(amplitude_sq, 0.0, 1.0);
    const auto law = pe_outcome_law(ancilla_bits, std::asin(std::sqrt(a)));
    const std::uint64_t big = 1ull << ancilla_bits;
    double err = 0.0;
    for (std::uint64_t y = 0; y < big; ++y) {
        const double sn = std::sin(kPi * static_cast<double>(y) / static_cast<double>(big));
        err += law[y] * std::abs(sn * sn - a);
    }
    return err;
}

BranchDraw sample_coherent_branch(const ProcessSpec& spec,
                                  const std::vector<std::vector<double>>& cell_mass,
                                  const std::vector<std::vector<double>>& cell_angle,
                                  RngStream& rng) {
    spec.validate();
    const int L = spec.terms;
    if (static_cast<int>(cell_mass.size()) != L - 1 ||
        static_cast<int>(cell_angle.size()) != L - 1)
        throw domain_error("sample_coherent_branch: table size mismatch");

    BranchDraw d;
    d.cells.resize(static_cast<std::size_t>(L - 1));
    std::vector<double> node_angles(static_cast<std::size_t>(L), 0.0);
    for (int j = 1; j < L; ++j) {
        const auto& mj = cell_mass[static_cast<std::size_t>(j - 1)];
        const double r = rng.uniform();
        double acc = 0.0;
        std::size_t cell = mj.size() - 1;
        for (std::size_t ci = 0; ci < mj.size(); ++ci) {
            acc += mj[ci];
            if (r < acc) {
                cell = ci;
                break;
            }
        }
        d.cells[static_cast<std::size_t>(j - 1)] = static_cast<int>(cell);
        node_angles[static_cast<std::size_t>(j)] = cell_angle[static_cast<std::size_t>(j - 1)][cell];
    }
    const auto unit = branch_unit_vector(L, node_angles);
    const auto probs = shift_distribution(spec, unit);
    const double r = rng.uniform();
    double acc = 0.0;
    int s = L - 1;
    for (int j = 0; j < L; ++j) {
        acc += probs[static_cast<std::size_t>(j)];
        if (r < acc) {
            s = j;
            break;
        }
    }
    d.shift = s;
    d.weights.resize(static_cast<std::size_t>(L));
    const double alpha = spec.alpha();
    for (int k = 1; k <= L; ++k) {
        const double w = std::pow(static_cast<double>(k), -alpha) *
                         unit[static_cast<std::size_t>((k - 1) ^ s)];
        d.weights[static_cast<std::size_t>(k - 1)] = w;
        d.norm2 += w * w;
    }
    d.nu2 = static_cast<double>(spec.steps) / kPi * d.norm2;
    return d;
}

double branch_overlap(const ProcessSpec& spec, const TestFunction& f, const BranchDraw& draw) {
    if (static_cast<int>(draw.weights.size()) != spec.terms)
        throw domain_error("branch_overlap: draw does not match spec");
    if (!(draw.norm2 > 0.0)) throw domain_error("branch_overlap: degenerate branch");
    const auto ft = mode_profile(spec, f);
    double dot = 0.0;
    for (std::size_t k = 0; k < ft.size(); ++k) dot += ft[k] * draw.weights[k];
    return dot / std::sqrt(draw.norm2);
}

double squared_overlap_closed_form(const ProcessSpec& spec, const TestFunction& f) {
    spec.validate();
    const auto ft = mode_profile(spec, f);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < ft.size(); ++k) {
        const double pk = std::pow(static_cast<double>(k + 1), -2.0 * spec.alpha());
        num += pk * ft[k] * ft[k];
        den += pk;
    }
    return num / den;
}

EstimationResult estimate_normalized_inner(const ProcessSpec& spec, const TestFunction& f,
                                           double epsilon, EstimationMethod method,
                                           RngStream& rng, const InnerEstimateOptions& options) {
    spec.validate();
    if (!(epsilon > 0.0)) throw domain_error("estimate_normalized_inner: epsilon must be positive");
    if (static_cast<int>(f.values.size()) + 1 != spec.steps)
        throw domain_error("estimate_normalized_inner: test function length does not match steps");
    if (spec.terms >= spec.steps)
        throw domain_error("estimate_normalized_inner: requires terms < steps");
    if (options.precision_bits < 2 || options.precision_bits > 10)
        throw domain_error("estimate_normalized_inner: precision bits out of range [2, 10]");
    if (options.norm_window && options.estimand == InnerEstimand::SignedMean)
        throw domain_error("estimate_normalized_inner: norm window requires SquaredOverlap");
    if (options.ae_shots < 1)
        throw domain_error("estimate_normalized_inner: ae_shots must be positive");

    const int K = options.precision_bits;
    const double zeta_full = boost::math::zeta(1.0 + 2.0 * spec.hurst);
    const double tail = truncation_tail(spec.hurst, spec.terms);
    // Truncation contribution relative to the full series; the discretization
    // contribution is zero for the quantities below (the squared overlap is
    // exact on the cell grid for K >= 2, the signed mean is exactly zero both
    // ways). Norm-window runs report the estimation term only.
    double trunc = options.estimand == InnerEstimand::SquaredOverlap
                       ? std::min(1.0, 2.0 * tail / zeta_full)
                       : std::min(1.0, std::sqrt(tail / zeta_full));
    if (options.norm_window) trunc = 0.0;

    if (method == EstimationMethod::ClassicalMC) {
        const std::int64_t samples = mc_samples_for(epsilon, options.mc_samples);
        std::vector<std::vector<double>> mass, angle;
        coherent_cell_tables(spec, K, mass, angle);
        const auto ft = mode_profile(spec, f);
        const double b_max =
            options.norm_window ? options.norm_bound.value_or(default_norm_bound(spec)) : 0.0;

        double sum = 0.0, sum2 = 0.0;
        std::int64_t kept = 0;
        for (std::int64_t i = 0; i < samples; ++i) {
            RngStream sub = rng.substream(static_cast<std::uint64_t>(i));
            const BranchDraw draw = sample_coherent_branch(spec, mass, angle, sub);
            double dot = 0.0;
            for (std::size_t k = 0; k < ft.size(); ++k) dot += ft[k] * draw.weights[k];
            const double alpha = dot / std::sqrt(draw.norm2);
            double x = 0.0;
            if (options.norm_window) {
                const double nu = std::sqrt(draw.nu2);
                if (nu > b_max * (1.0 + 1e-12))
                    throw domain_error("estimate_normalized_inner: branch norm exceeds b_max");
                if (nu < options.norm_window->first || nu > options.norm_window->second) continue;
                if (sub.uniform() >= draw.nu2 / (b_max * b_max)) continue;
                x = alpha * alpha;
            } else {
                x = options.estimand == InnerEstimand::SignedMean ? alpha : alpha * alpha;
            }
            sum += x;
            sum2 += x * x;
            ++kept;
        }
        if (kept < 2)
            throw degenerate_branch_error(
                "estimate_normalized_inner: norm window rejected nearly all samples");
        const double mean = sum / static_cast<double>(kept);
        const double var =
            std::max(0.0, (sum2 - static_cast<double>(kept) * mean * mean) /
                              static_cast<double>(kept - 1));
        EstimationResult r;
        r.estimate = mean;
        r.error_bound = 3.0 * std::sqrt(var / static_cast<double>(kept)) + trunc;
        r.oracle_queries = static_cast<std::uint64_t>(samples);
        r.shots = static_cast<std::uint64_t>(kept);
        r.method = EstimationMethod::ClassicalMC;
        return r;
    }

    // Quantum modes: dense statevector work, so the simulator qubit budget
    // applies. Surface the classical fallback by name.
    try {
        CoherentLayout layout;
        if (!options.norm_window) {
            if (options.estimand == InnerEstimand::SquaredOverlap) {
                const Circuit a = build_oracle_A(spec, f, K, layout);
                if (method == EstimationMethod::DirectAmplitude) {
                    EstimationResult r;
                    r.estimate = exact_target_mass(a, layout.value_qubits, {0});
                    r.error_bound = trunc;
                    r.oracle_queries = 1;
                    r.shots = 1;
                    r.method = method;
                    return r;
                }
                const int m = ae_bits_for(epsilon / 3.0);
                EstimationResult r = amplitude_estimate_on_register(a, layout.value_qubits, {0}, m,
                                                                    rng, options.ae_shots);
                r.error_bound += trunc;
                return r;
            }
            Circuit o = build_oracle_A(spec, f, K, layout);
            o.append(garbage_marginal_circuit(spec, K, layout).inverse());
            if (method == EstimationMethod::DirectAmplitude) {
                QuantumState state = new_basis_state(o.num_qubits(), 0);
                o.apply_to(state);
                EstimationResult r;
                r.estimate = state.amplitude(0).real();
                r.error_bound = trunc;
                r.oracle_queries = 1;
                r.shots = 1;
                r.method = method;
                return r;
            }
            // AE sees the squared amplitude; sqrt maps its additive bound
            // through |sqrt(x) - sqrt(y)| <= sqrt(|x - y|). Magnitude only.
            const int m = ae_bits_for(epsilon * epsilon / 9.0);
            const EstimationResult ae = amplitude_estimate(o, {0}, m, rng, options.ae_shots);
            EstimationResult r = ae;
            r.estimate = std::sqrt(std::max(0.0, ae.estimate));
            r.error_bound = std::sqrt(ae.error_bound) + trunc;
            return r;
        }

        const double b_max = options.norm_bound.value_or(default_norm_bound(spec));
        const Circuit an = build_oracle_A_norm(spec, f, K, b_max, layout, options.norm_window);
        const int flag = layout.total_qubits;
        std::vector<int> joint = layout.value_qubits;
        joint.push_back(flag);
        if (method == EstimationMethod::DirectAmplitude) {
            QuantumState state = new_basis_state(an.num_qubits(), 0);
            an.apply_to(state);
            const double q = mass_on_register(state, joint, {0});
            const double p = mass_on_register(state, {flag}, {0});
            if (p < 1e-12)
                throw degenerate_branch_error(
                    "estimate_normalized_inner: norm window has no surviving mass");
            EstimationResult r;
            r.estimate = q / p;
            r.error_bound = trunc;
            r.oracle_queries = 1;
            r.shots = 1;
            r.method = method;
            return r;
        }
        // Two estimates compose the postselected ratio; the reported bound is
        // the post hoc first-order propagation.
        const int m = std::min(20, ae_bits_for(epsilon / 3.0) + 2);
        const EstimationResult rq =
            amplitude_estimate_on_register(an, joint, {0}, m, rng, options.ae_shots);
        const EstimationResult rp =
            amplitude_estimate_on_register(an, {flag}, {0}, m, rng, options.ae_shots);
        if (!(rp.estimate > 0.0))
            throw degenerate_branch_error(
                "estimate_normalized_inner: norm window has no surviving mass");
        const double est = rq.estimate / rp.estimate;
        const double denom = std::max(rp.estimate - rp.error_bound, 1e-12);
        EstimationResult r;
        r.estimate = est;
        r.error_bound = (rq.error_bound + est * rp.error_bound) / denom;
        r.oracle_queries = rq.oracle_queries + rp.oracle_queries;
        r.shots = rq.shots + rp.shots;
        r.method = method;
        return r;
    } catch (const resource_error& e) {
        throw budget_error(std::string(e.what()) + "; use ClassicalMC for this setting");
    }
}

EstimationResult classical_mc_estimate(const ProcessSpec& spec, const TestFunction& f,
                                       std::int64_t samples, RngStream& rng) {
    spec.validate();
    if (samples < 2) throw domain_error("classical_mc_estimate: need at least two samples");
    if (static_cast<int>(f.values.size()) + 1 != spec.steps)
        throw domain_error("classical_mc_estimate: test function length does not match steps");
    double sum = 0.0, sum2 = 0.0;
    for (std::int64_t i = 0; i < samples; ++i) {
        RngStream sub = rng.substream(static_cast<std::uint64_t>(i));
        const Trajectory traj = classical_wiener_trajectory(spec, sub);
        double alpha = 0.0;
        if (traj.norm > 0.0) {
            double dot = 0.0;
            for (std::size_t j = 0; j < f.values.size(); ++j) dot += f.values[j] * traj.values[j];
            alpha = dot / (traj.norm * f.norm);
        }
        sum += alpha;
        sum2 += alpha * alpha;
    }
    const double mean = sum / static_cast<double>(samples);
    const double var = std::max(
        0.0, (sum2 - static_cast<double>(samples) * mean * mean) / static_cast<double>(samples - 1));
    EstimationResult r;
    r.estimate = mean;
    r.error_bound = 3.0 * std::sqrt(var / static_cast<double>(samples));
    r.oracle_queries = static_cast<std::uint64_t>(samples);
    r.shots = static_cast<std::uint64_t>(samples);
    r.method = EstimationMethod::ClassicalMC;
    return r;
}

} // namespace qsp
