#pragma once

#include "qsp/rng.hpp"
#include "qsp/statevector.hpp"

#include <vector>

namespace qsp {

enum class NoiseKind { GaussianWhite, CompoundPoisson };

struct LevySpec {
    int steps = 32; // T, a power of two for the circuit path
    NoiseKind noise = NoiseKind::GaussianWhite;
    double sigma = 1.0;    // white-noise standard deviation per unit step
    double rate = 1.0;     // Poisson jump intensity per unit step
    double jump_std = 1.0; // jump size standard deviation

    void validate() const;
};

// One increment per unit step. Compound Poisson steps sum a Poisson number
// of centered Gaussian jumps, so both kinds have mean zero.
std::vector<double> sample_levy_noise(const LevySpec& spec, RngStream& rng);

// Lower-triangular Toeplitz action y_i = sum_{j<=i} kernel[i-j] * noise[j],
// the discrete stochastic integral of the kernel against the noise.
std::vector<double> stochastic_integral_classical(const std::vector<double>& kernel,
                                                  const std::vector<double>& noise);

// X_i = sum_{j<=i} drift[j] + (T_kernel noise)_i.
std::vector<double> ito_process(const std::vector<double>& kernel, const std::vector<double>& drift,
                                const std::vector<double>& noise);

// Eigenvalues of the 2T x 2T circulant embedding of the kernel: the forward
// DFT of the zero-padded first column (kernel, 0...0).
std::vector<cdouble> circulant_embed(const std::vector<double>& kernel);

// |DFT(x)_k|^2 / n for k = 0..n-1.
std::vector<double> periodogram(const std::vector<double>& x);

// Ensemble-averaged periodogram of the kernel-filtered noise. One substream
// per ensemble member, so results are independent of evaluation order.
std::vector<double> power_spectrum(const LevySpec& spec, const std::vector<double>& kernel,
                                   int ensemble, RngStream& rng);

struct LevyRunResult {
    std::vector<double> values;          // classical integral of the same inputs
    QuantumState state;                  // log2(T)-qubit register, y/||y|| on success
    double acceptance_probability = 0.0; // exact flag-0 probability per attempt
    double acceptance_bound = 0.0;       // (min|b| / max|b|)^2 over rotation coefficients
    double msb_probability = 0.0;        // exact lower-half probability after the transform
    int attempts = 0;                    // circuit repetitions until both coins landed 0
    double cosine_similarity = 0.0;      // |<y/||y||, state>|
};

// Circulant pipeline on the dense simulator: kernel amplitudes on a 2T
// register, inverse QFT, flagged select-rotation by the noise spectrum
// (rejected flags retry the circuit), QFT, postselection on the lower half
// (the upper half is not a relabeling of the integral; it retries too).
// truncate_to > 0 keeps only that many largest rotation coefficients.
LevyRunResult stochastic_integral_quantum(const LevySpec& spec, const std::vector<double>& kernel,
                                          const std::vector<double>& noise, RngStream& rng,
                                          int truncate_to = 0);

} // namespace qsp
