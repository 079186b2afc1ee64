#include "qsp/statevector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qsp {

namespace {

void require_distinct(const std::vector<int>& qubits, int num_qubits, const char* who) {
    for (std::size_t i = 0; i < qubits.size(); ++i) {
        if (qubits[i] < 0 || qubits[i] >= num_qubits)
            throw domain_error(std::string(who) + ": qubit index out of range");
        for (std::size_t j = i + 1; j < qubits.size(); ++j)
            if (qubits[i] == qubits[j]) throw domain_error(std::string(who) + ": duplicate qubit");
    }
}

std::uint64_t control_mask(const std::vector<int>& controls) {
    std::uint64_t m = 0;
    for (int c : controls) m |= (std::uint64_t{1} << c);
    return m;
}

// Scatters the low bits of `sub` into the listed qubit positions.
std::uint64_t scatter_bits(std::uint64_t sub, const std::vector<int>& qubits) {
    std::uint64_t out = 0;
    for (std::size_t i = 0; i < qubits.size(); ++i)
        if (sub & (std::uint64_t{1} << i)) out |= (std::uint64_t{1} << qubits[i]);
    return out;
}

std::uint64_t gather_bits(std::uint64_t index, const std::vector<int>& qubits) {
    std::uint64_t out = 0;
    for (std::size_t i = 0; i < qubits.size(); ++i)
        if (index & (std::uint64_t{1} << qubits[i])) out |= (std::uint64_t{1} << i);
    return out;
}

} // namespace

QuantumState::QuantumState(int num_qubits, std::vector<cdouble> amplitudes)
    : num_qubits_(num_qubits), amps_(std::move(amplitudes)) {
    if (num_qubits < 1 || num_qubits > kMaxQubits)
        throw resource_error("QuantumState: qubit count outside [1, 26]");
    if (amps_.size() != (std::size_t{1} << num_qubits))
        throw domain_error("QuantumState: amplitude vector has wrong length");
}

double QuantumState::norm() const {
    double s = 0.0;
    for (const auto& a : amps_) s += std::norm(a);
    return std::sqrt(s);
}

void QuantumState::normalize() {
    const double n = norm();
    if (n < 1e-14) throw degenerate_branch_error("normalize: vanishing norm");
    for (auto& a : amps_) a /= n;
}

void QuantumState::append_qubits(int k) {
    if (k <= 0) return;
    if (num_qubits_ + k > kMaxQubits)
        throw resource_error("append_qubits: would exceed the 26-qubit guard");
    amps_.resize(std::size_t{1} << (num_qubits_ + k), cdouble(0.0, 0.0));
    num_qubits_ += k;
}

void QuantumState::remove_qubits(const std::vector<int>& qubits, std::uint64_t values) {
    require_distinct(qubits, num_qubits_, "remove_qubits");
    const std::uint64_t mask = control_mask(qubits);
    const std::uint64_t want = scatter_bits(values, qubits);
    double off_mass = 0.0;
    for (std::size_t i = 0; i < amps_.size(); ++i)
        if ((i & mask) != want) off_mass += std::norm(amps_[i]);
    if (off_mass > 1e-12)
        throw verification_error("remove_qubits: register is not in the expected product state");

    std::vector<int> kept;
    for (int q = 0; q < num_qubits_; ++q)
        if (!(mask & (std::uint64_t{1} << q))) kept.push_back(q);
    std::vector<cdouble> out(std::size_t{1} << kept.size());
    for (std::uint64_t sub = 0; sub < out.size(); ++sub)
        out[sub] = amps_[scatter_bits(sub, kept) | want];
    amps_ = std::move(out);
    num_qubits_ = static_cast<int>(kept.size());
}

std::string gate_kind_name(GateKind kind) {
    switch (kind) {
        case GateKind::Hadamard: return "Hadamard";
        case GateKind::PauliX: return "PauliX";
        case GateKind::ControlledPhase: return "ControlledPhase";
        case GateKind::CNOT: return "CNOT";
        case GateKind::Swap: return "Swap";
        case GateKind::ControlledSwap: return "ControlledSwap";
        case GateKind::RBS: return "RBS";
        case GateKind::ControlledRotationY: return "ControlledRotationY";
    }
    return "?";
}

QuantumState new_basis_state(int num_qubits, std::uint64_t index) {
    if (num_qubits < 1 || num_qubits > kMaxQubits)
        throw resource_error("new_basis_state: qubit count outside [1, 26]");
    if (index >= (std::uint64_t{1} << num_qubits))
        throw domain_error("new_basis_state: index out of range");
    std::vector<cdouble> amps(std::size_t{1} << num_qubits, cdouble(0.0, 0.0));
    amps[index] = cdouble(1.0, 0.0);
    return QuantumState(num_qubits, std::move(amps));
}

namespace {

int expected_arity(GateKind kind) {
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

void apply_gate_masked(QuantumState& state, const GateOp& gate, std::uint64_t cmask) {
    auto& a = state.amplitudes();
    const std::size_t dim = a.size();
    const auto& q = gate.qubits;

    switch (gate.kind) {
        case GateKind::Hadamard: {
            const std::uint64_t t = std::uint64_t{1} << q[0];
            const double inv = 1.0 / std::sqrt(2.0);
            for (std::size_t i = 0; i < dim; ++i) {
                if ((i & t) || (i & cmask) != cmask) continue;
                const cdouble x = a[i], y = a[i | t];
                a[i] = (x + y) * inv;
                a[i | t] = (x - y) * inv;
            }
            break;
        }
        case GateKind::PauliX: {
            const std::uint64_t t = std::uint64_t{1} << q[0];
            for (std::size_t i = 0; i < dim; ++i)
                if (!(i & t) && (i & cmask) == cmask) std::swap(a[i], a[i | t]);
            break;
        }
        case GateKind::ControlledPhase: {
            const std::uint64_t both =
                (std::uint64_t{1} << q[0]) | (std::uint64_t{1} << q[1]);
            const cdouble ph(std::cos(gate.param), std::sin(gate.param));
            for (std::size_t i = 0; i < dim; ++i)
                if ((i & both) == both && (i & cmask) == cmask) a[i] *= ph;
            break;
        }
        case GateKind::CNOT: {
            const std::uint64_t c = std::uint64_t{1} << q[0];
            const std::uint64_t t = std::uint64_t{1} << q[1];
            for (std::size_t i = 0; i < dim; ++i)
                if ((i & c) && !(i & t) && (i & cmask) == cmask) std::swap(a[i], a[i | t]);
            break;
        }
        case GateKind::Swap: {
            const std::uint64_t x = std::uint64_t{1} << q[0];
            const std::uint64_t y = std::uint64_t{1} << q[1];
            for (std::size_t i = 0; i < dim; ++i)
                if ((i & x) && !(i & y) && (i & cmask) == cmask)
                    std::swap(a[i], a[(i & ~x) | y]);
            break;
        }
        case GateKind::ControlledSwap: {
            const std::uint64_t c = std::uint64_t{1} << q[0];
            const std::uint64_t x = std::uint64_t{1} << q[1];
            const std::uint64_t y = std::uint64_t{1} << q[2];
            for (std::size_t i = 0; i < dim; ++i)
                if ((i & c) && (i & x) && !(i & y) && (i & cmask) == cmask)
                    std::swap(a[i], a[(i & ~x) | y]);
            break;
        }
        case GateKind::RBS: {
            // Acts on span{|01>, |10>} labeled |x_left x_right>; cos(theta)
            // keeps amplitude on the left rail.
            const std::uint64_t p = std::uint64_t{1} << q[0];
            const std::uint64_t r = std::uint64_t{1} << q[1];
            const double c = std::cos(gate.param), s = std::sin(gate.param);
            for (std::size_t i = 0; i < dim; ++i) {
                if ((i & p) || (i & r) || (i & cmask) != cmask) continue;
                const std::size_t i01 = i | r; // left=0, right=1
                const std::size_t i10 = i | p; // left=1, right=0
                const cdouble a01 = a[i01], a10 = a[i10];
                a[i01] = c * a01 + s * a10;
                a[i10] = -s * a01 + c * a10;
            }
            break;
        }
        case GateKind::ControlledRotationY: {
            const std::uint64_t c = std::uint64_t{1} << q[0];
            const std::uint64_t t = std::uint64_t{1} << q[1];
            const double ch = std::cos(gate.param / 2.0), sh = std::sin(gate.param / 2.0);
            for (std::size_t i = 0; i < dim; ++i) {
                if (!(i & c) || (i & t) || (i & cmask) != cmask) continue;
                const cdouble a0 = a[i], a1 = a[i | t];
                a[i] = ch * a0 - sh * a1;
                a[i | t] = sh * a0 + ch * a1;
            }
            break;
        }
    }
}

} // namespace

void apply_gate(QuantumState& state, const GateOp& gate) {
    if (static_cast<int>(gate.qubits.size()) != expected_arity(gate.kind))
        throw domain_error("apply_gate: wrong number of target qubits for " +
                           gate_kind_name(gate.kind));
    require_distinct(gate.qubits, state.num_qubits(), "apply_gate");
    apply_gate_masked(state, gate, 0);
}

void apply_gate_controlled(QuantumState& state, const GateOp& gate,
                           const std::vector<int>& controls) {
    if (controls.empty()) {
        apply_gate(state, gate);
        return;
    }
    std::vector<int> all = gate.qubits;
    all.insert(all.end(), controls.begin(), controls.end());
    require_distinct(all, state.num_qubits(), "apply_gate_controlled");
    apply_gate_masked(state, gate, control_mask(controls));
}

std::pair<QuantumState, MeasurementRecord> measure_subset(const QuantumState& state,
                                                          const std::vector<int>& qubits,
                                                          RngStream& rng) {
    require_distinct(qubits, state.num_qubits(), "measure_subset");
    QuantumState out = state;
    MeasurementRecord rec;
    rec.qubits = qubits;
    rec.probability = 1.0;
    // Chain rule: one qubit at a time, collapsing as we go. Identical joint
    // distribution to a simultaneous measurement, no 2^k outcome table.
    for (std::size_t k = 0; k < qubits.size(); ++k) {
        const std::uint64_t bit = std::uint64_t{1} << qubits[k];
        auto& a = out.amplitudes();
        double p1 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (i & bit) p1 += std::norm(a[i]);
        const int outcome = rng.uniform() < p1 ? 1 : 0;
        const double p = outcome ? p1 : 1.0 - p1;
        if (p < 1e-300) throw degenerate_branch_error("measure_subset: impossible branch drawn");
        const double scale = 1.0 / std::sqrt(p);
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (((i & bit) != 0) != (outcome != 0))
                a[i] = cdouble(0.0, 0.0);
            else
                a[i] *= scale;
        }
        if (outcome) rec.outcome |= (std::uint64_t{1} << k);
        rec.probability *= p;
    }
    return {std::move(out), rec};
}

std::pair<QuantumState, double> postselect(const QuantumState& state, int qubit, int outcome) {
    require_distinct({qubit}, state.num_qubits(), "postselect");
    if (outcome != 0 && outcome != 1) throw domain_error("postselect: outcome must be 0 or 1");
    const std::uint64_t bit = std::uint64_t{1} << qubit;
    double p = 0.0;
    for (std::size_t i = 0; i < state.dim(); ++i)
        if (((i & bit) != 0) == (outcome != 0)) p += std::norm(state.amplitudes()[i]);
    if (p < 1e-14)
        throw degenerate_branch_error("postselect: branch probability below 1e-14");
    QuantumState out = state;
    auto& a = out.amplitudes();
    const double scale = 1.0 / std::sqrt(p);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (((i & bit) != 0) != (outcome != 0))
            a[i] = cdouble(0.0, 0.0);
        else
            a[i] *= scale;
    }
    return {std::move(out), p};
}

std::vector<double> reduced_diagonal(const QuantumState& state, const std::vector<int>& keep) {
    require_distinct(keep, state.num_qubits(), "reduced_diagonal");
    if (keep.size() > 12) throw resource_error("reduced_diagonal: more than 12 kept qubits");
    std::vector<double> probs(std::size_t{1} << keep.size(), 0.0);
    for (std::size_t i = 0; i < state.dim(); ++i)
        probs[gather_bits(i, keep)] += std::norm(state.amplitudes()[i]);
    return probs;
}

Eigen::MatrixXcd reduced_density(const QuantumState& state, const std::vector<int>& keep) {
    require_distinct(keep, state.num_qubits(), "reduced_density");
    if (keep.size() > 8) throw resource_error("reduced_density: more than 8 kept qubits");
    std::vector<int> rest;
    for (int q = 0; q < state.num_qubits(); ++q)
        if (std::find(keep.begin(), keep.end(), q) == keep.end()) rest.push_back(q);
    const std::size_t dk = std::size_t{1} << keep.size();
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dk, dk);
    std::vector<cdouble> v(dk);
    for (std::uint64_t r = 0; r < (std::uint64_t{1} << rest.size()); ++r) {
        const std::uint64_t base = scatter_bits(r, rest);
        for (std::uint64_t s = 0; s < dk; ++s) v[s] = state.amplitudes()[base | scatter_bits(s, keep)];
        for (std::uint64_t x = 0; x < dk; ++x) {
            if (v[x] == cdouble(0.0, 0.0)) continue;
            for (std::uint64_t y = 0; y < dk; ++y) rho(x, y) += v[x] * std::conj(v[y]);
        }
    }
    return rho;
}

void apply_unitary_block(QuantumState& state, const std::vector<int>& qubits,
                         const Eigen::MatrixXcd& u, const std::vector<int>& controls) {
    std::vector<int> all = qubits;
    all.insert(all.end(), controls.begin(), controls.end());
    require_distinct(all, state.num_qubits(), "apply_unitary_block");
    if (qubits.size() > 12) throw resource_error("apply_unitary_block: more than 12 qubits");
    const std::size_t dk = std::size_t{1} << qubits.size();
    if (static_cast<std::size_t>(u.rows()) != dk || static_cast<std::size_t>(u.cols()) != dk)
        throw domain_error("apply_unitary_block: matrix dimension mismatch");
    const std::uint64_t cmask = control_mask(controls);
    const std::uint64_t qmask = control_mask(qubits);
    auto& a = state.amplitudes();
    std::vector<cdouble> x(dk), y(dk);
    for (std::size_t base = 0; base < a.size(); ++base) {
        if ((base & qmask) != 0 || (base & cmask) != cmask) continue;
        for (std::uint64_t s = 0; s < dk; ++s) x[s] = a[base | scatter_bits(s, qubits)];
        for (std::uint64_t r = 0; r < dk; ++r) {
            cdouble acc(0.0, 0.0);
            for (std::uint64_t s = 0; s < dk; ++s) acc += u(r, s) * x[s];
            y[r] = acc;
        }
        for (std::uint64_t s = 0; s < dk; ++s) a[base | scatter_bits(s, qubits)] = y[s];
    }
}

void apply_index_permutation(QuantumState& state, const std::vector<int>& qubits,
                             const std::vector<std::uint64_t>& perm,
                             const std::vector<int>& controls) {
    std::vector<int> all = qubits;
    all.insert(all.end(), controls.begin(), controls.end());
    require_distinct(all, state.num_qubits(), "apply_index_permutation");
    const std::size_t dk = std::size_t{1} << qubits.size();
    if (perm.size() != dk) throw domain_error("apply_index_permutation: wrong permutation size");
    std::vector<bool> seen(dk, false);
    for (auto p : perm) {
        if (p >= dk || seen[p]) throw domain_error("apply_index_permutation: not a bijection");
        seen[p] = true;
    }
    const std::uint64_t cmask = control_mask(controls);
    const std::uint64_t qmask = control_mask(qubits);
    auto& a = state.amplitudes();
    std::vector<cdouble> buf(dk);
    for (std::size_t base = 0; base < a.size(); ++base) {
        if ((base & qmask) != 0 || (base & cmask) != cmask) continue;
        for (std::uint64_t s = 0; s < dk; ++s) buf[s] = a[base | scatter_bits(s, qubits)];
        for (std::uint64_t s = 0; s < dk; ++s) a[base | scatter_bits(perm[s], qubits)] = buf[s];
    }
}

void apply_select_rotation(QuantumState& state, const std::vector<int>& index_qubits,
                           int flag_qubit, const std::vector<cdouble>& b, bool adjoint) {
    std::vector<int> all = index_qubits;
    all.push_back(flag_qubit);
    require_distinct(all, state.num_qubits(), "apply_select_rotation");
    if (b.size() != (std::size_t{1} << index_qubits.size()))
        throw domain_error("apply_select_rotation: coefficient count mismatch");
    for (const auto& bi : b)
        if (std::abs(bi) > 1.0 + 1e-12)
            throw domain_error("apply_select_rotation: |b_i| exceeds 1");
    const std::uint64_t fbit = std::uint64_t{1} << flag_qubit;
    auto& a = state.amplitudes();
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i & fbit) continue;
        const std::uint64_t sub = gather_bits(i, index_qubits);
        const cdouble beta = b[sub];
        const double g = std::sqrt(std::max(0.0, 1.0 - std::norm(beta)));
        const cdouble a0 = a[i], a1 = a[i | fbit];
        if (adjoint) {
            a[i] = std::conj(beta) * a0 + g * a1;
            a[i | fbit] = -g * a0 + beta * a1;
        } else {
            a[i] = beta * a0 - g * a1;
            a[i | fbit] = g * a0 + std::conj(beta) * a1;
        }
    }
}

void check_norm(const QuantumState& state, double tol) {
    const double n = state.norm();
    if (std::abs(n - 1.0) > tol)
        throw verification_error("check_norm: state norm drifted to " + std::to_string(n));
}

Eigen::MatrixXcd gate_matrix(const GateOp& gate) {
    const int k = expected_arity(gate.kind);
    const std::size_t d = std::size_t{1} << k;
    std::vector<int> qubits(k);
    std::iota(qubits.begin(), qubits.end(), 0);
    Eigen::MatrixXcd m(d, d);
    for (std::uint64_t col = 0; col < d; ++col) {
        QuantumState s = new_basis_state(k, col);
        GateOp g = gate;
        g.qubits = qubits;
        apply_gate(s, g);
        for (std::uint64_t row = 0; row < d; ++row) m(row, col) = s.amplitude(row);
    }
    return m;
}

} // namespace qsp
