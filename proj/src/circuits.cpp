#include "qsp/circuits.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

namespace qsp {

namespace {

constexpr double kPi = std::numbers::pi;

int gate_arity(GateKind kind) {
    switch (kind) {
        case GateKind::Hadamard:
        case GateKind::PauliX: return 1;
        case GateKind::ControlledPhase:
        case GateKind::CNOT:
        case GateKind::Swap:
        case GateKind::RBS:
        case GateKind::ControlledRotationY: return 2;
        case GateKind::ControlledSwap: return 3;
    }
    return 0;
}

bool gate_parametric(GateKind kind) {
    return kind == GateKind::ControlledPhase || kind == GateKind::RBS ||
           kind == GateKind::ControlledRotationY;
}

void collect_qubits(const Instruction& instr, std::vector<int>& out) {
    out.clear();
    if (const auto* g = std::get_if<GateInstr>(&instr)) {
        out = g->gate.qubits;
        out.insert(out.end(), g->controls.begin(), g->controls.end());
    } else if (const auto* p = std::get_if<PermutationInstr>(&instr)) {
        out = p->qubits;
        out.insert(out.end(), p->controls.begin(), p->controls.end());
    } else if (const auto* u = std::get_if<UnitaryInstr>(&instr)) {
        out = u->qubits;
        out.insert(out.end(), u->controls.begin(), u->controls.end());
    } else if (const auto* s = std::get_if<SelectRotationInstr>(&instr)) {
        out = s->index_qubits;
        out.push_back(s->flag_qubit);
    }
}

std::uint64_t gather(std::uint64_t index, const std::vector<int>& qubits) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < qubits.size(); ++i)
        v |= ((index >> qubits[i]) & 1ull) << i;
    return v;
}

} // namespace

void Circuit::add(GateOp gate, std::vector<int> controls) {
    if (static_cast<int>(gate.qubits.size()) != gate_arity(gate.kind))
        throw domain_error("Circuit::add: wrong target count for " + gate_kind_name(gate.kind));
    add(Instruction{GateInstr{std::move(gate), std::move(controls)}});
}

void Circuit::add(Instruction instr) {
    std::vector<int> qs;
    collect_qubits(instr, qs);
    for (int q : qs)
        if (q < 0 || q >= num_qubits_)
            throw domain_error("Circuit::add: qubit index out of range");
    std::sort(qs.begin(), qs.end());
    if (std::adjacent_find(qs.begin(), qs.end()) != qs.end())
        throw domain_error("Circuit::add: repeated qubit in instruction");
    instrs_.push_back(std::move(instr));
}

void Circuit::append(const Circuit& other) {
    if (other.num_qubits_ > num_qubits_)
        throw domain_error("Circuit::append: appended circuit is wider");
    for (const auto& instr : other.instrs_) instrs_.push_back(instr);
}

std::size_t Circuit::primitive_gate_count() const {
    std::size_t n = 0;
    for (const auto& instr : instrs_)
        if (std::holds_alternative<GateInstr>(instr)) ++n;
    return n;
}

int Circuit::depth() const {
    std::vector<int> level(num_qubits_, 0);
    int depth = 0;
    std::vector<int> qs;
    for (const auto& instr : instrs_) {
        collect_qubits(instr, qs);
        int layer = 0;
        for (int q : qs) layer = std::max(layer, level[q]);
        ++layer;
        for (int q : qs) level[q] = layer;
        depth = std::max(depth, layer);
    }
    return depth;
}

Circuit Circuit::inverse() const {
    Circuit inv(num_qubits_);
    for (auto it = instrs_.rbegin(); it != instrs_.rend(); ++it) {
        Instruction instr = *it;
        if (auto* g = std::get_if<GateInstr>(&instr)) {
            if (gate_parametric(g->gate.kind)) g->gate.param = -g->gate.param;
        } else if (auto* p = std::get_if<PermutationInstr>(&instr)) {
            std::vector<std::uint64_t> ip(p->perm.size());
            for (std::size_t i = 0; i < p->perm.size(); ++i) ip[p->perm[i]] = i;
            p->perm = std::move(ip);
        } else if (auto* u = std::get_if<UnitaryInstr>(&instr)) {
            u->matrix = Eigen::MatrixXcd(u->matrix.adjoint());
        } else if (auto* s = std::get_if<SelectRotationInstr>(&instr)) {
            s->adjoint = !s->adjoint;
        }
        inv.instrs_.push_back(std::move(instr));
    }
    return inv;
}

Circuit Circuit::remapped(const std::vector<int>& wire_map, int new_num_qubits) const {
    if (static_cast<int>(wire_map.size()) != num_qubits_)
        throw domain_error("Circuit::remapped: wire map size mismatch");
    for (int w : wire_map)
        if (w < 0 || w >= new_num_qubits)
            throw domain_error("Circuit::remapped: wire out of range");
    auto map_all = [&](std::vector<int>& qs) {
        for (int& q : qs) q = wire_map[q];
    };
    Circuit out(new_num_qubits);
    for (Instruction instr : instrs_) {
        if (auto* g = std::get_if<GateInstr>(&instr)) {
            map_all(g->gate.qubits);
            map_all(g->controls);
        } else if (auto* p = std::get_if<PermutationInstr>(&instr)) {
            map_all(p->qubits);
            map_all(p->controls);
        } else if (auto* u = std::get_if<UnitaryInstr>(&instr)) {
            map_all(u->qubits);
            map_all(u->controls);
        } else if (auto* s = std::get_if<SelectRotationInstr>(&instr)) {
            map_all(s->index_qubits);
            s->flag_qubit = wire_map[s->flag_qubit];
        }
        out.instrs_.push_back(std::move(instr));
    }
    return out;
}

void Circuit::apply_to(QuantumState& state) const {
    if (state.num_qubits() < num_qubits_)
        throw domain_error("Circuit::apply_to: state narrower than circuit");
    for (const auto& instr : instrs_) {
        if (const auto* g = std::get_if<GateInstr>(&instr)) {
            if (g->controls.empty())
                apply_gate(state, g->gate);
            else
                apply_gate_controlled(state, g->gate, g->controls);
        } else if (const auto* p = std::get_if<PermutationInstr>(&instr)) {
            apply_index_permutation(state, p->qubits, p->perm, p->controls);
        } else if (const auto* u = std::get_if<UnitaryInstr>(&instr)) {
            apply_unitary_block(state, u->qubits, u->matrix, u->controls);
        } else if (const auto* s = std::get_if<SelectRotationInstr>(&instr)) {
            apply_select_rotation(state, s->index_qubits, s->flag_qubit, s->coeffs, s->adjoint);
        }
    }
    check_norm(state);
}

nlohmann::json Circuit::to_json() const {
    nlohmann::json instrs = nlohmann::json::array();
    for (const auto& instr : instrs_) {
        nlohmann::json j;
        if (const auto* g = std::get_if<GateInstr>(&instr)) {
            j["op"] = gate_kind_name(g->gate.kind);
            j["qubits"] = g->gate.qubits;
            if (gate_parametric(g->gate.kind)) j["param"] = g->gate.param;
            if (!g->controls.empty()) j["controls"] = g->controls;
        } else if (const auto* p = std::get_if<PermutationInstr>(&instr)) {
            j["op"] = "IndexPermutation";
            j["qubits"] = p->qubits;
            j["perm"] = p->perm;
            if (!p->controls.empty()) j["controls"] = p->controls;
            if (!p->label.empty()) j["label"] = p->label;
        } else if (const auto* u = std::get_if<UnitaryInstr>(&instr)) {
            j["op"] = "UnitaryBlock";
            j["qubits"] = u->qubits;
            j["dim"] = u->matrix.rows();
            if (u->matrix.rows() <= 16) {
                nlohmann::json rows = nlohmann::json::array();
                for (Eigen::Index r = 0; r < u->matrix.rows(); ++r) {
                    nlohmann::json row = nlohmann::json::array();
                    for (Eigen::Index c = 0; c < u->matrix.cols(); ++c)
                        row.push_back({u->matrix(r, c).real(), u->matrix(r, c).imag()});
                    rows.push_back(std::move(row));
                }
                j["matrix"] = std::move(rows);
            }
            if (!u->controls.empty()) j["controls"] = u->controls;
            if (!u->label.empty()) j["label"] = u->label;
        } else if (const auto* s = std::get_if<SelectRotationInstr>(&instr)) {
            j["op"] = "SelectRotation";
            j["index_qubits"] = s->index_qubits;
            j["flag"] = s->flag_qubit;
            nlohmann::json cs = nlohmann::json::array();
            for (const auto& c : s->coeffs) cs.push_back({c.real(), c.imag()});
            j["coeffs"] = std::move(cs);
            if (s->adjoint) j["adjoint"] = true;
            if (!s->label.empty()) j["label"] = s->label;
        }
        instrs.push_back(std::move(j));
    }
    return nlohmann::json{{"num_qubits", num_qubits_}, {"instructions", std::move(instrs)}};
}

// --- angle trees and loaders ---

AngleTree compute_loader_angles(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n < 2 || !is_power_of_two(n))
        throw domain_error("compute_loader_angles: length must be a power of two >= 2");
    double norm2 = 0.0;
    for (double v : x) norm2 += v * v;
    if (!(norm2 > 0.0) || !std::isfinite(norm2))
        throw domain_error("compute_loader_angles: input must have finite nonzero norm");

    AngleTree tree;
    tree.leaf_count = static_cast<int>(n);
    tree.node_norms.assign(2 * n, 0.0);
    tree.node_angles.assign(2 * n, 0.0);
    tree.leaf_signs.assign(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x[i] / std::sqrt(norm2);
        tree.node_norms[n + i] = v * v;
        tree.leaf_signs[i] = std::signbit(x[i]) && x[i] != 0.0 ? -1 : 1;
    }
    for (std::size_t j = n - 1; j >= 1; --j)
        tree.node_norms[j] = tree.node_norms[2 * j] + tree.node_norms[2 * j + 1];
    for (std::size_t j = 1; j < n; ++j) {
        const double r = tree.node_norms[j];
        tree.node_angles[j] =
            r > 0.0 ? std::atan2(std::sqrt(tree.node_norms[2 * j + 1]),
                                 std::sqrt(tree.node_norms[2 * j]))
                    : 0.0;
    }
    return tree;
}

std::vector<double> reconstruct_leaf_values(const AngleTree& tree) {
    const int n = tree.leaf_count;
    std::vector<double> amp(2 * n, 0.0);
    amp[1] = 1.0;
    for (int j = 1; j < n; ++j) {
        amp[2 * j] = amp[j] * std::cos(tree.node_angles[j]);
        amp[2 * j + 1] = amp[j] * std::sin(tree.node_angles[j]);
    }
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = tree.leaf_signs[i] * amp[n + i];
    return out;
}

Circuit unary_loader_circuit(const AngleTree& tree) {
    const int n = tree.leaf_count;
    if (n < 2 || !is_power_of_two(static_cast<std::size_t>(n)))
        throw domain_error("unary_loader_circuit: bad leaf count");
    Circuit c(n);
    c.add({GateKind::PauliX, 0.0, {0}});
    for (int j = 1; j < n; ++j) {
        const int depth_j = std::bit_width(static_cast<unsigned>(j)) - 1;
        const int width = n >> depth_j; // rails spanned by node j
        const int lo = (j - (1 << depth_j)) * width;
        const int mid = lo + width / 2;
        double theta = tree.node_angles[j];
        if (width == 2) {
            const double sl = tree.leaf_signs[lo];
            const double sr = tree.leaf_signs[lo + 1];
            theta = std::atan2(sr * std::sin(theta), sl * std::cos(theta));
        }
        if (theta != 0.0) c.add({GateKind::RBS, theta, {lo, mid}});
    }
    return c;
}

Eigen::MatrixXcd column_completion(const std::vector<double>& v) {
    const auto n = static_cast<Eigen::Index>(v.size());
    if (n < 1) throw domain_error("column_completion: empty target");
    Eigen::VectorXd target(n);
    for (Eigen::Index i = 0; i < n; ++i) target(i) = v[static_cast<std::size_t>(i)];
    const double nv = target.norm();
    if (!(nv > 0.0)) throw domain_error("column_completion: zero target");
    target /= nv;
    Eigen::VectorXd w = target;
    w(0) -= 1.0;
    const double wn2 = w.squaredNorm();
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n);
    if (wn2 > 1e-24) h -= (2.0 / wn2) * (w * w.transpose());
    return h.cast<cdouble>();
}

int unary_to_binary_total_qubits(int n) {
    if (n < 2 || !is_power_of_two(static_cast<std::size_t>(n)))
        throw domain_error("unary_to_binary_total_qubits: n must be a power of two >= 2");
    const int k = log2_exact(static_cast<std::size_t>(n));
    return n + k + (n >= 4 ? n / 2 - 1 : 0);
}

Circuit unary_to_binary_circuit(int n) {
    const int total = unary_to_binary_total_qubits(n);
    const int k = log2_exact(static_cast<std::size_t>(n));
    const int anc0 = n + k;
    Circuit c(total);

    for (int ncur = n; ncur > 1; ncur /= 2) {
        const int h = ncur / 2;
        const int bit = n + log2_exact(static_cast<std::size_t>(ncur)) - 1;

        // Parity of the upper-half rails [h, ncur) into the binary bit,
        // through a balanced ancilla tree that is then uncomputed.
        if (h == 1) {
            c.add({GateKind::CNOT, 0.0, {1, bit}});
            c.add({GateKind::ControlledSwap, 0.0, {bit, 0, 1}});
        } else {
            std::vector<GateOp> anc_ops;
            for (int i = 0; i < h / 2; ++i) {
                anc_ops.push_back({GateKind::CNOT, 0.0, {h + 2 * i, anc0 + i}});
                anc_ops.push_back({GateKind::CNOT, 0.0, {h + 2 * i + 1, anc0 + i}});
            }
            for (int width = h / 2; width > 1; width /= 2)
                for (int i = 0; i < width / 2; ++i)
                    anc_ops.push_back({GateKind::CNOT, 0.0, {anc0 + i + width / 2, anc0 + i}});
            for (const auto& g : anc_ops) c.add(g);
            c.add({GateKind::CNOT, 0.0, {anc0, bit}});
            for (auto it = anc_ops.rbegin(); it != anc_ops.rend(); ++it) c.add(*it);

            // Fan the control out so the half-swaps run in parallel.
            std::vector<int> ctrl = {bit};
            std::vector<GateOp> fan;
            while (static_cast<int>(ctrl.size()) < h) {
                const int have = static_cast<int>(ctrl.size());
                const int want = std::min(2 * have, h);
                for (int i = 0; have + i < want; ++i) {
                    const int dst = anc0 + have + i - 1;
                    fan.push_back({GateKind::CNOT, 0.0, {ctrl[i], dst}});
                    ctrl.push_back(dst);
                }
            }
            for (const auto& g : fan) c.add(g);
            for (int j = 0; j < h; ++j)
                c.add({GateKind::ControlledSwap, 0.0, {ctrl[j], j, j + h}});
            for (auto it = fan.rbegin(); it != fan.rend(); ++it) c.add(*it);
        }
    }
    c.add({GateKind::PauliX, 0.0, {0}});
    return c;
}

Circuit qft_circuit(int k) {
    if (k < 1 || k > 24) throw domain_error("qft_circuit: k outside [1, 24]");
    Circuit c(k);
    for (int j = k - 1; j >= 0; --j) {
        c.add({GateKind::Hadamard, 0.0, {j}});
        for (int m = j - 1; m >= 0; --m)
            c.add({GateKind::ControlledPhase, kPi / double(1ull << (j - m)), {m, j}});
    }
    for (int i = 0; i < k / 2; ++i) c.add({GateKind::Swap, 0.0, {i, k - 1 - i}});
    return c;
}

// --- sine and cosine transforms ---

namespace {

std::vector<int> default_register(const QuantumState& state, int width, const char* who) {
    if (state.num_qubits() < width)
        throw domain_error(std::string(who) + ": state narrower than the value register");
    std::vector<int> regs(width);
    std::iota(regs.begin(), regs.end(), 0);
    return regs;
}

double register_mass(const QuantumState& state, const std::vector<int>& regs,
                     std::uint64_t value) {
    double mass = 0.0;
    const auto& a = state.amplitudes();
    for (std::size_t i = 0; i < a.size(); ++i)
        if (gather(i, regs) == value) mass += std::norm(a[i]);
    return mass;
}

// Negation mod T of the register value, as a permutation block.
PermutationInstr negation_perm(const std::vector<int>& regs, std::size_t size, int control) {
    PermutationInstr p;
    p.qubits = regs;
    p.perm.resize(size);
    for (std::size_t j = 0; j < size; ++j) p.perm[j] = (size - j) % size;
    p.controls = {control};
    p.label = "negate-index";
    return p;
}

} // namespace

Circuit dst_bracket_circuit(std::size_t size, const std::vector<int>& register_qubits,
                            int ancilla, int total_qubits) {
    if (size < 2 || !is_power_of_two(size))
        throw domain_error("dst_bracket_circuit: size must be a power of two >= 2");
    const int m = log2_exact(size);
    if (static_cast<int>(register_qubits.size()) != m)
        throw domain_error("dst_bracket_circuit: register width mismatch");

    Circuit bracket(total_qubits);
    const int anc = ancilla;
    const std::vector<int>& regs = register_qubits;
    bracket.add({GateKind::Hadamard, 0.0, {anc}});
    // Z on the ancilla, spelled in the primitive set.
    auto add_z = [&](Circuit& c) {
        c.add({GateKind::Hadamard, 0.0, {anc}});
        c.add({GateKind::PauliX, 0.0, {anc}});
        c.add({GateKind::Hadamard, 0.0, {anc}});
    };
    add_z(bracket);
    bracket.add(Instruction{negation_perm(regs, size, anc)});

    std::vector<int> ext = regs;
    ext.push_back(anc);
    bracket.append(qft_circuit(m + 1).remapped(ext, total_qubits));

    bracket.add(Instruction{negation_perm(regs, size, anc)});
    add_z(bracket);
    bracket.add({GateKind::Hadamard, 0.0, {anc}});

    // The bracket leaves the transform multiplied by i; a one-qubit block on
    // the ancilla carries the global phase correction.
    Eigen::MatrixXcd phase = Eigen::MatrixXcd::Zero(2, 2);
    phase(0, 0) = phase(1, 1) = cdouble(0.0, -1.0);
    bracket.add(Instruction{UnitaryInstr{{anc}, phase, {}, "phase-fix"}});
    return bracket;
}

void dst_apply(QuantumState& state, std::size_t size, std::vector<int> register_qubits) {
    if (size < 2 || !is_power_of_two(size))
        throw domain_error("dst_apply: size must be a power of two >= 2");
    const int m = log2_exact(size);
    std::vector<int> regs = register_qubits.empty()
                                ? default_register(state, m, "dst_apply")
                                : std::move(register_qubits);
    if (static_cast<int>(regs.size()) != m)
        throw domain_error("dst_apply: register width mismatch");
    if (register_mass(state, regs, 0) > 1e-9)
        throw domain_error("dst_apply: input has mass on index 0");

    const int anc = state.num_qubits();
    state.append_qubits(1);
    dst_bracket_circuit(size, regs, anc, state.num_qubits()).apply_to(state);
    state.remove_qubits({anc}, 0);
}

void dct_apply(QuantumState& state, std::size_t size, std::vector<int> register_qubits) {
    if (size < 2 || !is_power_of_two(size))
        throw domain_error("dct_apply: size must be a power of two >= 2");
    const int m2 = log2_exact(2 * size);
    std::vector<int> regs = register_qubits.empty()
                                ? default_register(state, m2, "dct_apply")
                                : std::move(register_qubits);
    if (static_cast<int>(regs.size()) != m2)
        throw domain_error("dct_apply: register width mismatch (holds log2(2*size) qubits)");

    double outside = 0.0;
    const auto& amps = state.amplitudes();
    for (std::size_t i = 0; i < amps.size(); ++i) {
        const std::uint64_t v = gather(i, regs);
        if (v > size) outside += std::norm(amps[i]);
    }
    if (outside > 1e-9) throw domain_error("dct_apply: input has mass outside 0..size");

    const int msb = regs.back();
    std::vector<int> low(regs.begin(), regs.end() - 1);

    // Hadamard on the top wire restricted to nonzero low index: the even
    // extension isometry, completed unitarily on the orthogonal half.
    auto half_hadamard = [&]() {
        auto& a = state.amplitudes();
        const std::uint64_t mbit = std::uint64_t{1} << msb;
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (i & mbit) continue;
            if (gather(i, low) == 0) continue;
            const cdouble x = a[i], y = a[i | mbit];
            a[i] = (x + y) * inv_sqrt2;
            a[i | mbit] = (x - y) * inv_sqrt2;
        }
    };

    auto neg_low = [&]() {
        PermutationInstr p = negation_perm(low, size, msb);
        apply_index_permutation(state, p.qubits, p.perm, p.controls);
    };

    half_hadamard();
    neg_low();
    qft_circuit(m2).remapped(regs, state.num_qubits()).apply_to(state);
    neg_low();
    half_hadamard();
    check_norm(state);
}

Eigen::MatrixXd dst1_matrix(std::size_t size) {
    const Eigen::Index n = static_cast<Eigen::Index>(size) - 1;
    Eigen::MatrixXd m(n, n);
    const double s = std::sqrt(2.0 / double(size));
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index j = 0; j < n; ++j)
            m(k, j) = s * std::sin(kPi * double(j + 1) * double(k + 1) / double(size));
    return m;
}

Eigen::MatrixXd dct1_matrix(std::size_t size) {
    const Eigen::Index n = static_cast<Eigen::Index>(size) + 1;
    Eigen::MatrixXd m(n, n);
    const double s = std::sqrt(2.0 / double(size));
    auto c = [&](Eigen::Index i) {
        return (i == 0 || i == static_cast<Eigen::Index>(size)) ? 1.0 / std::sqrt(2.0) : 1.0;
    };
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index j = 0; j < n; ++j)
            m(k, j) = s * c(k) * c(j) * std::cos(kPi * double(j) * double(k) / double(size));
    return m;
}

} // namespace qsp
