#pragma once

#include "qsp/levy.hpp"
#include "qsp/qmc.hpp"
#include "qsp/rng.hpp"
#include "qsp/spectral_bm.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

namespace qsp {

// Time-averaged mean-square displacement at integer lag tau,
// (1/(n - tau)) sum_j (x_{j+tau} - x_j)^2 over a trajectory of length n.
double tamsd(const std::vector<double>& trajectory, int tau);

// Covariance of the lag-tau increment vector of an exact fractional Brownian
// motion on an integer grid: Toeplitz of size (length - tau) with d-th
// diagonal (D/2) [(d+tau)^{2H} - 2 d^{2H} + |d-tau|^{2H}].
Eigen::MatrixXd increment_covariance(int length, int tau, double diffusion, double hurst);

// The same covariance for the truncated sine-series generator itself, on its
// interior grid of length steps - 1, scaled by scale2. Exact, not sampled.
Eigen::MatrixXd spectral_increment_covariance(const ProcessSpec& spec, int tau, double scale2);

// Empirical alpha/2 and 1 - alpha/2 quantiles of sum_j lambda_j U_j with U_j
// iid chi-square(1). With a cache directory the table is stored keyed by the
// eigenvalues, the significance, the sample count and the stream seed, so a
// rerun of the same configuration reads the table back instead of resampling.
std::pair<double, double> generalized_chisq_quantiles(
    const std::vector<double>& eigenvalues, double alpha_sig, std::int64_t samples, RngStream& rng,
    const std::optional<std::filesystem::path>& cache_dir = std::nullopt, int threads = 1);

// Sine-series trajectory rescaled so the time-averaged variance of its
// lag-tau_ref increments equals diffusion * tau_ref^{2H}, matching the
// normalization of an exact fBM with that diffusion at the reference lag.
std::vector<double> diffusion_trajectory(const ProcessSpec& spec, double diffusion, int tau_ref,
                                         RngStream& rng);
double diffusion_scale(const ProcessSpec& spec, double diffusion, int tau_ref);

struct TamsdTestConfig {
    ProcessSpec null_process{0.5, 256, 256}; // H_test plus the trajectory grid
    int tau = 4;
    double diffusion = 1.0;
    double significance = 0.05;
    std::int64_t quantile_samples = 100000; // R

    // Exactly one alternative: an fBM with another Hurst exponent, or a
    // compound Poisson walk built from summed levy noise.
    std::optional<double> hurst_alt;
    std::optional<LevySpec> poisson_alt;

    // Null band source. The paper form takes generalized chi-squared
    // quantiles of the exact-fBM Toeplitz eigenvalues; the spectral form
    // uses the generator's own increment covariance, under which the size
    // of the test is the significance level exactly.
    bool spectral_band = false;

    void validate() const;
};

// Fraction of alternative-hypothesis trajectories whose TAMSD falls outside
// the null confidence band.
double test_power(const TamsdTestConfig& config, int trials, RngStream& rng, int threads = 1,
                  const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

// Ergodicity-breaking parameter mean(xi^2) - 1 with xi_i = M_i / mean(M)
// over the per-trajectory TAMSDs; literal_ratio flips to the inverse ratio
// mean(M) / M_i.
double eb_parameter(const std::vector<std::vector<double>>& trajectories, int tau,
                    bool literal_ratio = false);

struct SwapSpec {
    int intervals = 16;          // n observation intervals over the horizon
    double annualization = 16.0; // A
    double rate = 0.0;           // carried through the expectation identity; the
                                 // strike reduces to the volatility time average
    std::optional<double> hurst; // consistency check against the process spec

    std::optional<std::pair<double, double>> norm_window; // [B_min, B_max] path postselection
    std::optional<std::pair<double, double>> time_window; // projector window as fractions of
                                                          // the horizon; default [1/n, 1]
    bool extrapolate_truncation = false; // add the closed-form tail of the mode sum

    int precision_bits = 4;     // K for the coherent circuit paths
    std::int64_t mc_samples = 0; // 0: derived from epsilon
    int ae_shots = 25;

    void validate() const;
};

// Strike of a variance swap whose volatility path is the encoded process:
// (A/n) * sum over observation window of E[sigma_t^2] dt. Quantum modes read
// the window mass off the coherent value register and rescale by E||B||^2
// from the norm flag; ClassicalMC averages trajectories. A norm window
// postselects paths identically in every mode.
EstimationResult variance_swap_strike(const SwapSpec& swap, const ProcessSpec& process,
                                      double epsilon, EstimationMethod method, RngStream& rng);

} // namespace qsp
