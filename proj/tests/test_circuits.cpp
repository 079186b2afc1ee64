#include <doctest.h>

#include "qsp/circuits.hpp"

#include <fstream>
#include <numbers>
#include <sstream>

using namespace qsp;

namespace {

QuantumState amplitudes_state(int n, std::vector<double> vals) {
    std::vector<cdouble> amps(std::size_t{1} << n, 0.0);
    double norm2 = 0.0;
    for (double v : vals) norm2 += v * v;
    for (std::size_t i = 0; i < vals.size(); ++i) amps[i] = vals[i] / std::sqrt(norm2);
    return QuantumState(n, std::move(amps));
}

std::vector<double> random_signed(std::size_t n, RngStream& rng, double zero_frac = 0.0) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform() < zero_frac ? 0.0 : rng.normal();
    bool any = false;
    for (double v : x) any |= v != 0.0;
    if (!any) x[0] = 1.0;
    return x;
}

} // namespace

TEST_CASE("loader angle tree round-trips signed vectors") {
    RngStream rng(41);
    for (std::size_t n : {2, 4, 8, 16, 64}) {
        for (int rep = 0; rep < 4; ++rep) {
            const auto x = random_signed(n, rng, rep == 2 ? 0.4 : 0.0);
            const auto tree = compute_loader_angles(x);
            double norm2 = 0.0;
            for (double v : x) norm2 += v * v;
            const auto back = reconstruct_leaf_values(tree);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(back[i] == doctest::Approx(x[i] / std::sqrt(norm2)).epsilon(1e-10));
            for (int j = 1; j < tree.leaf_count; ++j) {
                CHECK(tree.node_angles[j] >= 0.0);
                CHECK(tree.node_angles[j] <= std::numbers::pi / 2.0 + 1e-15);
            }
        }
    }
    CHECK_THROWS_AS(compute_loader_angles({1.0, 2.0, 3.0}), domain_error);
    CHECK_THROWS_AS(compute_loader_angles({0.0, 0.0}), domain_error);
}

TEST_CASE("unary loader prepares the normalized vector on one-hot rails") {
    RngStream rng(42);
    for (int n : {2, 4, 8, 16}) {
        const auto x = random_signed(std::size_t(n), rng, n == 8 ? 0.3 : 0.0);
        const auto tree = compute_loader_angles(x);
        const auto circ = unary_loader_circuit(tree);
        CHECK(circ.depth() <= log2_exact(std::size_t(n)) + 1);

        QuantumState s = new_basis_state(n, 0);
        circ.apply_to(s);

        double norm2 = 0.0;
        for (double v : x) norm2 += v * v;
        double onehot_mass = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto a = s.amplitude(std::uint64_t{1} << i);
            onehot_mass += std::norm(a);
            CHECK(a.imag() == doctest::Approx(0.0).epsilon(1e-12));
            CHECK(a.real() == doctest::Approx(x[std::size_t(i)] / std::sqrt(norm2)).epsilon(1e-10));
        }
        CHECK(onehot_mass == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("unary to binary conversion on every basis rail") {
    for (int n : {2, 4, 8}) {
        const auto circ = unary_to_binary_circuit(n);
        const int total = unary_to_binary_total_qubits(n);
        CHECK(circ.num_qubits() == total);
        if (n >= 4) CHECK(total == n + log2_exact(std::size_t(n)) + n / 2 - 1);

        for (int i = 0; i < n; ++i) {
            QuantumState s = new_basis_state(total, std::uint64_t{1} << i);
            circ.apply_to(s);
            const std::uint64_t want = std::uint64_t(i) << n;
            CHECK(std::abs(s.amplitude(want) - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("unary to binary conversion preserves loaded superpositions") {
    RngStream rng(43);
    const int n = 8;
    const auto x = random_signed(n, rng);
    const auto tree = compute_loader_angles(x);
    const int total = unary_to_binary_total_qubits(n);

    QuantumState s = new_basis_state(total, 0);
    unary_loader_circuit(tree).remapped({0, 1, 2, 3, 4, 5, 6, 7}, total).apply_to(s);
    unary_to_binary_circuit(n).apply_to(s);

    double norm2 = 0.0;
    for (double v : x) norm2 += v * v;
    for (int i = 0; i < n; ++i) {
        const auto a = s.amplitude(std::uint64_t(i) << n);
        CHECK(a.real() == doctest::Approx(x[std::size_t(i)] / std::sqrt(norm2)).epsilon(1e-10));
    }
    // Rails and ancillas are fully retired.
    QuantumState copy = s;
    std::vector<int> retire;
    for (int q = 0; q < n; ++q) retire.push_back(q);
    for (int q = n + 3; q < total; ++q) retire.push_back(q);
    CHECK_NOTHROW(copy.remove_qubits(retire, 0));
}

TEST_CASE("unary to binary cost scales as promised") {
    for (int n : {8, 16, 32, 64, 128}) {
        const auto circ = unary_to_binary_circuit(n);
        const double k = double(log2_exact(std::size_t(n)));
        CHECK(double(circ.depth()) <= 6.0 * k * k);
        CHECK(double(circ.primitive_gate_count()) <= 8.0 * double(n) * k);
    }
}

TEST_CASE("qft circuit implements the positive-kernel transform") {
    RngStream rng(44);
    for (int k = 1; k <= 6; ++k) {
        std::vector<cdouble> amps(std::size_t{1} << k);
        double norm2 = 0.0;
        for (auto& a : amps) {
            a = cdouble(rng.normal(), rng.normal());
            norm2 += std::norm(a);
        }
        for (auto& a : amps) a /= std::sqrt(norm2);
        const auto expect = unitary_dft(amps);

        QuantumState s(k, std::move(amps));
        qft_circuit(k).apply_to(s);
        for (std::size_t i = 0; i < s.dim(); ++i)
            CHECK(std::abs(s.amplitude(i) - expect[i]) < 1e-10);
    }
}

TEST_CASE("circuit inverse undoes a mixed instruction stream") {
    RngStream rng(45);
    Circuit c(4);
    c.add({GateKind::Hadamard, 0.0, {0}});
    c.add({GateKind::RBS, 0.83, {1, 3}});
    c.add({GateKind::ControlledPhase, 0.37, {0, 2}});
    c.add({GateKind::ControlledRotationY, 1.2, {3, 1}}, {0});
    PermutationInstr p;
    p.qubits = {0, 1};
    p.perm = {1, 2, 3, 0};
    p.controls = {3};
    c.add(Instruction{p});
    Eigen::MatrixXcd u(2, 2);
    u << cdouble(0.6, 0.0), cdouble(0.0, 0.8), cdouble(0.0, 0.8), cdouble(0.6, 0.0);
    c.add(Instruction{UnitaryInstr{{2}, u, {}, "test-block"}});
    SelectRotationInstr sr;
    sr.index_qubits = {0, 1};
    sr.flag_qubit = 2;
    sr.coeffs = {0.3, cdouble(0.1, 0.7), 0.95, 0.0};
    c.add(Instruction{sr});

    std::vector<cdouble> amps(16);
    double norm2 = 0.0;
    for (auto& a : amps) {
        a = cdouble(rng.normal(), rng.normal());
        norm2 += std::norm(a);
    }
    for (auto& a : amps) a /= std::sqrt(norm2);
    QuantumState s(4, amps);
    c.apply_to(s);
    c.inverse().apply_to(s);
    for (std::size_t i = 0; i < s.dim(); ++i) CHECK(std::abs(s.amplitude(i) - amps[i]) < 1e-9);
}

TEST_CASE("depth counts qubit-disjoint layers") {
    Circuit c(3);
    c.add({GateKind::Hadamard, 0.0, {0}});
    c.add({GateKind::Hadamard, 0.0, {1}});
    CHECK(c.depth() == 1);
    c.add({GateKind::CNOT, 0.0, {0, 1}});
    CHECK(c.depth() == 2);
    c.add({GateKind::Hadamard, 0.0, {2}});
    CHECK(c.depth() == 2);
}

TEST_CASE("dst_apply equals the orthonormal sine matrix") {
    RngStream rng(46);
    for (std::size_t size : {2, 4, 8, 32}) {
        const int m = log2_exact(size);
        std::vector<double> vals(size, 0.0);
        for (std::size_t j = 1; j < size; ++j) vals[j] = rng.normal();
        QuantumState s = amplitudes_state(m, vals);
        const std::vector<cdouble> before(s.amplitudes());

        dst_apply(s, size);

        const auto d = dst1_matrix(size);
        for (std::size_t k = 1; k < size; ++k) {
            cdouble want = 0.0;
            for (std::size_t j = 1; j < size; ++j) want += d(k - 1, j - 1) * before[j];
            CHECK(std::abs(s.amplitude(k) - want) < 1e-10);
        }
        CHECK(std::abs(s.amplitude(0)) < 1e-10);
    }
}

TEST_CASE("dst_apply acts per branch against spectator registers") {
    RngStream rng(47);
    const std::size_t size = 8;
    std::vector<double> v(size, 0.0), w(size, 0.0);
    for (std::size_t j = 1; j < size; ++j) {
        v[j] = rng.normal();
        w[j] = rng.normal();
    }
    std::vector<cdouble> amps(16, 0.0);
    double norm2 = 0.0;
    for (std::size_t j = 1; j < size; ++j) norm2 += v[j] * v[j] + w[j] * w[j];
    for (std::size_t j = 1; j < size; ++j) {
        amps[j] = v[j] / std::sqrt(norm2);
        amps[8 + j] = w[j] / std::sqrt(norm2);
    }
    QuantumState s(4, amps);
    dst_apply(s, size, {0, 1, 2});

    const auto d = dst1_matrix(size);
    for (std::size_t k = 1; k < size; ++k) {
        cdouble wantv = 0.0, wantw = 0.0;
        for (std::size_t j = 1; j < size; ++j) {
            wantv += d(k - 1, j - 1) * amps[j];
            wantw += d(k - 1, j - 1) * amps[8 + j];
        }
        CHECK(std::abs(s.amplitude(k) - wantv) < 1e-10);
        CHECK(std::abs(s.amplitude(8 + k) - wantw) < 1e-10);
    }
}

TEST_CASE("dst_apply rejects mass on index zero") {
    QuantumState s = new_basis_state(2, 0);
    CHECK_THROWS_AS(dst_apply(s, 4), domain_error);
}

TEST_CASE("dct_apply equals the orthonormal cosine matrix") {
    RngStream rng(48);
    for (std::size_t size : {2, 4, 16}) {
        const int m2 = log2_exact(2 * size);
        std::vector<double> vals(2 * size, 0.0);
        for (std::size_t j = 0; j <= size; ++j) vals[j] = rng.normal();
        QuantumState s = amplitudes_state(m2, vals);
        const std::vector<cdouble> before(s.amplitudes());

        dct_apply(s, size);

        const auto d = dct1_matrix(size);
        for (std::size_t k = 0; k <= size; ++k) {
            cdouble want = 0.0;
            for (std::size_t j = 0; j <= size; ++j) want += d(k, j) * before[j];
            CHECK(std::abs(s.amplitude(k) - want) < 1e-10);
        }
        for (std::size_t k = size + 1; k < 2 * size; ++k) CHECK(std::abs(s.amplitude(k)) < 1e-10);
    }
}

TEST_CASE("sine and cosine matrices are involutory") {
    for (std::size_t size : {4, 16}) {
        const auto d = dst1_matrix(size);
        const auto errs = (d * d - Eigen::MatrixXd::Identity(d.rows(), d.cols())).cwiseAbs().maxCoeff();
        CHECK(errs < 1e-12);
        const auto c = dct1_matrix(size);
        const auto errc = (c * c - Eigen::MatrixXd::Identity(c.rows(), c.cols())).cwiseAbs().maxCoeff();
        CHECK(errc < 1e-12);
    }
}

TEST_CASE("circuit json export matches the golden file") {
    const auto j = qft_circuit(3).to_json();
    std::ifstream in(std::string(QSP_TEST_DATA_DIR) + "/qft3.json");
    REQUIRE_MESSAGE(in.good(), "golden file missing");
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(j.dump(2) + "\n" == buf.str());
}
