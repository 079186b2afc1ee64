#include "qsp/levy.hpp"

#include "qsp/circuits.hpp"
#include "qsp/errors.hpp"
#include "qsp/fft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace qsp {

namespace {

constexpr int kRetryCap = 10000;

void require_kernel(const LevySpec& spec, const std::vector<double>& kernel) {
    if (static_cast<int>(kernel.size()) != spec.steps)
        throw domain_error("kernel length must equal the step count");
    double n2 = 0.0;
    for (double v : kernel) n2 += v * v;
    if (n2 <= 0.0) throw domain_error("kernel must be nonzero");
}

} // namespace

void LevySpec::validate() const {
    if (steps < 2 || !is_power_of_two(static_cast<std::size_t>(steps)))
        throw domain_error("LevySpec: steps must be a power of two >= 2");
    if (!(sigma > 0.0)) throw domain_error("LevySpec: sigma must be positive");
    if (!(rate > 0.0)) throw domain_error("LevySpec: rate must be positive");
    if (!(jump_std > 0.0)) throw domain_error("LevySpec: jump_std must be positive");
}

std::vector<double> sample_levy_noise(const LevySpec& spec, RngStream& rng) {
    spec.validate();
    std::vector<double> out(static_cast<std::size_t>(spec.steps), 0.0);
    if (spec.noise == NoiseKind::GaussianWhite) {
        for (auto& v : out) v = spec.sigma * rng.normal();
        return out;
    }
    std::poisson_distribution<int> pois(spec.rate);
    for (auto& v : out) {
        const int jumps = pois(rng.engine());
        double acc = 0.0;
        for (int j = 0; j < jumps; ++j) acc += spec.jump_std * rng.normal();
        v = acc;
    }
    return out;
}

std::vector<double> stochastic_integral_classical(const std::vector<double>& kernel,
                                                  const std::vector<double>& noise) {
    if (kernel.size() != noise.size())
        throw domain_error("stochastic_integral_classical: length mismatch");
    const std::size_t n = kernel.size();
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j <= i; ++j) acc += kernel[i - j] * noise[j];
        y[i] = acc;
    }
    return y;
}

std::vector<double> ito_process(const std::vector<double>& kernel, const std::vector<double>& drift,
                                const std::vector<double>& noise) {
    if (drift.size() != noise.size()) throw domain_error("ito_process: length mismatch");
    std::vector<double> x = stochastic_integral_classical(kernel, noise);
    double cum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cum += drift[i];
        x[i] += cum;
    }
    return x;
}

std::vector<cdouble> circulant_embed(const std::vector<double>& kernel) {
    if (kernel.empty() || !is_power_of_two(kernel.size()))
        throw domain_error("circulant_embed: kernel length must be a power of two");
    std::vector<cdouble> col(2 * kernel.size(), 0.0);
    for (std::size_t i = 0; i < kernel.size(); ++i) col[i] = kernel[i];
    fft(col);
    return col;
}

std::vector<double> periodogram(const std::vector<double>& x) {
    if (x.empty() || !is_power_of_two(x.size()))
        throw domain_error("periodogram: length must be a power of two");
    std::vector<cdouble> spec(x.begin(), x.end());
    fft(spec);
    std::vector<double> out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::norm(spec[k]) / static_cast<double>(x.size());
    return out;
}

std::vector<double> power_spectrum(const LevySpec& spec, const std::vector<double>& kernel,
                                   int ensemble, RngStream& rng) {
    spec.validate();
    require_kernel(spec, kernel);
    if (ensemble < 100) throw domain_error("power_spectrum: ensemble must be at least 100");
    std::vector<double> acc(static_cast<std::size_t>(spec.steps), 0.0);
    for (int e = 0; e < ensemble; ++e) {
        auto sub = rng.substream(static_cast<std::uint64_t>(e));
        const auto noise = sample_levy_noise(spec, sub);
        const auto y = stochastic_integral_classical(kernel, noise);
        const auto p = periodogram(y);
        for (std::size_t k = 0; k < p.size(); ++k) acc[k] += p[k] / ensemble;
    }
    return acc;
}

LevyRunResult stochastic_integral_quantum(const LevySpec& spec, const std::vector<double>& kernel,
                                          const std::vector<double>& noise, RngStream& rng,
                                          int truncate_to) {
    spec.validate();
    require_kernel(spec, kernel);
    if (static_cast<int>(noise.size()) != spec.steps)
        throw domain_error("stochastic_integral_quantum: noise length mismatch");
    const int T = spec.steps;
    const int m = log2_exact(static_cast<std::size_t>(T));
    if (m + 2 > kMaxQubits)
        throw resource_error("stochastic_integral_quantum: register exceeds the simulator cap");

    // Rotation coefficients: the noise spectrum over the embedding circle.
    // Convolution commutes, so rotating by the noise spectrum against a
    // kernel-amplitude state gives the same integral as the converse split.
    std::vector<cdouble> b(static_cast<std::size_t>(2 * T), 0.0);
    for (int i = 0; i < T; ++i) b[static_cast<std::size_t>(i)] = noise[static_cast<std::size_t>(i)];
    fft(b);
    double bmax = 0.0, bmin = 0.0;
    for (const auto& v : b) bmax = std::max(bmax, std::abs(v));
    if (bmax <= 0.0) throw degenerate_branch_error("stochastic_integral_quantum: zero noise");
    if (truncate_to > 0 && truncate_to < 2 * T) {
        std::vector<double> mags(b.size());
        for (std::size_t k = 0; k < b.size(); ++k) mags[k] = std::abs(b[k]);
        std::vector<std::size_t> order(b.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t p, std::size_t q) { return mags[p] > mags[q]; });
        for (std::size_t r = static_cast<std::size_t>(truncate_to); r < order.size(); ++r)
            b[order[r]] = 0.0;
    }
    bmin = bmax;
    for (const auto& v : b) bmin = std::min(bmin, std::abs(v));
    std::vector<cdouble> beta(b.size());
    for (std::size_t k = 0; k < b.size(); ++k) beta[k] = b[k] / bmax;

    // Kernel state |K, 0> through the loader's angle tree, evaluated on the
    // amplitude subspace (the gate-level loader is verified separately and
    // would need 2T rails here).
    std::vector<double> padded(static_cast<std::size_t>(2 * T), 0.0);
    std::copy(kernel.begin(), kernel.end(), padded.begin());
    const auto amps = reconstruct_leaf_values(compute_loader_angles(padded));

    std::vector<int> index_qubits(static_cast<std::size_t>(m + 1));
    std::iota(index_qubits.begin(), index_qubits.end(), 0);
    const int flag = m + 1;

    Circuit front(m + 2);
    front.append(qft_circuit(m + 1).inverse());
    front.add(Instruction{SelectRotationInstr{index_qubits, flag, beta, false, "noise-spectrum"}});

    QuantumState state(m + 2, [&] {
        std::vector<cdouble> a(std::size_t{1} << (m + 2), 0.0);
        for (std::size_t i = 0; i < amps.size(); ++i) a[i] = amps[i];
        return a;
    }());
    front.apply_to(state);

    const double p_flag = reduced_diagonal(state, {flag})[0];

    LevyRunResult result;
    result.values = stochastic_integral_classical(kernel, noise);
    result.acceptance_probability = p_flag;
    result.acceptance_bound = (bmin / bmax) * (bmin / bmax);

    // Both coins are per-attempt constants, so replay the attempt loop and
    // collapse the state once the flag first lands 0.
    int attempts = 0;
    double p_low = 0.0;
    QuantumState good(1, {1.0, 0.0});
    bool collapsed = false;
    for (;;) {
        if (++attempts > kRetryCap)
            throw retry_exhausted_error("stochastic_integral_quantum: retry cap exhausted");
        if (rng.uniform() >= p_flag) continue; // flag rejected, rebuild and rerun
        if (!collapsed) {
            good = postselect(state, flag, 0).first;
            Circuit back(m + 2);
            back.append(qft_circuit(m + 1));
            back.apply_to(good);
            p_low = reduced_diagonal(good, {m})[0];
            collapsed = true;
        }
        if (rng.uniform() < p_low) break; // lower half: integral recovered
        // Upper half holds circular wrap terms, not a relabeled integral.
    }
    result.attempts = attempts;
    result.msb_probability = p_low;

    QuantumState final_state = postselect(good, m, 0).first;
    std::vector<int> drop = {m, flag};
    final_state.remove_qubits(drop, 0);
    result.state = std::move(final_state);

    double ynorm = 0.0;
    for (double v : result.values) ynorm += v * v;
    ynorm = std::sqrt(ynorm);
    if (ynorm > 0.0) {
        cdouble dot = 0.0;
        for (int i = 0; i < T; ++i)
            dot += std::conj(result.state.amplitude(static_cast<std::uint64_t>(i))) *
                   (result.values[static_cast<std::size_t>(i)] / ynorm);
        result.cosine_similarity = std::abs(dot);
    }
    return result;
}

} // namespace qsp
