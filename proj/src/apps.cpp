#include "qsp/apps.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "qsp/errors.hpp"
#include "qsp/fft.hpp"
#include "qsp/parallel.hpp"
#include "qsp/stats.hpp"

namespace qsp {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

// Phase-register width for a target additive error, with the usual two guard
// bits; the per-shot bound pi/2^m + pi^2/2^(2m) then sits below epsilon.
int ae_bits_for(double epsilon) {
    const int m = static_cast<int>(std::ceil(std::log2(3.0 * kPi / epsilon))) + 2;
    return std::clamp(m, 3, 20);
}

std::int64_t mc_samples_for(double epsilon) {
    const double n = std::ceil(81.0 / (epsilon * epsilon));
    return std::clamp(static_cast<std::int64_t>(n), std::int64_t{100}, std::int64_t{4000000});
}

}  // namespace

double tamsd(const std::vector<double>& trajectory, int tau) {
    const int n = static_cast<int>(trajectory.size());
    if (tau < 1 || tau >= n) throw domain_error("tamsd: lag must satisfy 1 <= tau < length");
    double acc = 0.0;
    for (int j = 0; j + tau < n; ++j) {
        const double d = trajectory[j + tau] - trajectory[j];
        acc += d * d;
    }
    return acc / static_cast<double>(n - tau);
}

Eigen::MatrixXd increment_covariance(int length, int tau, double diffusion, double hurst) {
    if (tau < 1 || tau >= length) throw domain_error("increment covariance: lag out of range");
    if (!(diffusion > 0.0)) throw domain_error("increment covariance: diffusion must be positive");
    if (!(hurst > 0.0) || hurst >= 1.0)
        throw domain_error("increment covariance: hurst must lie in (0, 1)");
    const int m = length - tau;
    const double two_h = 2.0 * hurst;
    Eigen::MatrixXd cov(m, m);
    for (int d = 0; d < m; ++d) {
        const double g = 0.5 * diffusion *
                         (std::pow(static_cast<double>(d + tau), two_h) -
                          2.0 * std::pow(static_cast<double>(d), two_h) +
                          std::pow(std::abs(static_cast<double>(d - tau)), two_h));
        for (int i = 0; i + d < m; ++i) {
            cov(i, i + d) = g;
            cov(i + d, i) = g;
        }
    }
    return cov;
}

Eigen::MatrixXd spectral_increment_covariance(const ProcessSpec& spec, int tau, double scale2) {
    spec.validate();
    if (!(scale2 > 0.0)) throw domain_error("spectral covariance: scale must be positive");
    const int interior = spec.steps - 1;
    if (tau < 1 || tau >= interior) throw domain_error("spectral covariance: lag out of range");
    const int n = interior - tau;
    const int modes = std::min(spec.terms, spec.steps - 1);
    const double a = kPi / static_cast<double>(spec.steps);
    const double alpha = spec.alpha();
    Eigen::MatrixXd g(n, modes);
    for (int k = 1; k <= modes; ++k) {
        const double amp = std::sqrt(scale2 * (2.0 / kPi) * std::pow(static_cast<double>(k), -2.0 * alpha));
        for (int j = 1; j <= n; ++j)
            g(j - 1, k - 1) = amp * (std::sin(a * k * (j + tau)) - std::sin(a * k * j));
    }
    return g * g.transpose();
}

std::pair<double, double> generalized_chisq_quantiles(const std::vector<double>& eigenvalues,
                                                      double alpha_sig, std::int64_t samples,
                                                      RngStream& rng,
                                                      const std::optional<std::filesystem::path>& cache_dir,
                                                      int threads) {
    if (eigenvalues.empty()) throw domain_error("quantiles: no eigenvalues");
    if (!(alpha_sig > 0.0) || !(alpha_sig < 1.0))
        throw domain_error("quantiles: significance must lie in (0, 1)");
    if (samples < 1000) throw domain_error("quantiles: insufficient samples, need at least 1000");

    double max_ev = 0.0;
    for (double ev : eigenvalues) max_ev = std::max(max_ev, std::abs(ev));
    if (max_ev == 0.0) throw domain_error("quantiles: all eigenvalues vanish");
    std::vector<double> lam;
    lam.reserve(eigenvalues.size());
    for (double ev : eigenvalues) {
        if (ev < -1e-8 * max_ev) throw domain_error("quantiles: negative eigenvalue");
        if (ev > 1e-12 * max_ev) lam.push_back(ev);
    }

    std::optional<std::filesystem::path> cache_file;
    if (cache_dir) {
        std::uint64_t h = fnv1a(lam.data(), lam.size() * sizeof(double));
        h = fnv1a(&alpha_sig, sizeof alpha_sig, h);
        h = fnv1a(&samples, sizeof samples, h);
        const std::uint64_t seed = rng.seed();
        h = fnv1a(&seed, sizeof seed, h);
        std::ostringstream name;
        name << "gchisq_" << std::hex << h << ".json";
        cache_file = *cache_dir / name.str();
        std::ifstream in(*cache_file);
        if (in) {
            try {
                nlohmann::json j;
                in >> j;
                return {j.at("q_low").get<double>(), j.at("q_high").get<double>()};
            } catch (...) {
                // fall through to a fresh draw on any parse problem
            }
        }
    }

    std::vector<double> draws(static_cast<std::size_t>(samples));
    parallel_for(samples, threads, [&](std::int64_t i) {
        RngStream sub = rng.substream(static_cast<std::uint64_t>(i));
        double y = 0.0;
        for (double ev : lam) {
            const double z = sub.normal();
            y += ev * z * z;
        }
        draws[static_cast<std::size_t>(i)] = y;
    });
    std::sort(draws.begin(), draws.end());
    const auto pick = [&](double p) {
        const auto idx = static_cast<std::int64_t>(std::ceil(p * static_cast<double>(samples))) - 1;
        return draws[static_cast<std::size_t>(std::clamp(idx, std::int64_t{0}, samples - 1))];
    };
    const std::pair<double, double> q{pick(alpha_sig / 2.0), pick(1.0 - alpha_sig / 2.0)};

    if (cache_file) {
        std::filesystem::create_directories(cache_file->parent_path());
        nlohmann::json j{{"q_low", q.first}, {"q_high", q.second}};
        std::ofstream out(*cache_file);
        out << j.dump(2) << '\n';
    }
    return q;
}

double diffusion_scale(const ProcessSpec& spec, double diffusion, int tau_ref) {
    spec.validate();
    if (!(diffusion > 0.0)) throw domain_error("diffusion scale: diffusion must be positive");
    const int interior = spec.steps - 1;
    if (tau_ref < 1 || tau_ref >= interior) throw domain_error("diffusion scale: lag out of range");
    const int n = interior - tau_ref;
    const int modes = std::min(spec.terms, spec.steps - 1);
    const double a = kPi / static_cast<double>(spec.steps);
    const double alpha = spec.alpha();
    double v = 0.0;
    for (int j = 1; j <= n; ++j) {
        for (int k = 1; k <= modes; ++k) {
            const double d = std::sin(a * k * (j + tau_ref)) - std::sin(a * k * j);
            v += (2.0 / kPi) * std::pow(static_cast<double>(k), -2.0 * alpha) * d * d;
        }
    }
    v /= static_cast<double>(n);
    if (!(v > 0.0)) throw domain_error("diffusion scale: degenerate increment variance");
    return std::sqrt(diffusion * std::pow(static_cast<double>(tau_ref), 2.0 * spec.hurst) / v);
}

std::vector<double> diffusion_trajectory(const ProcessSpec& spec, double diffusion, int tau_ref,
                                         RngStream& rng) {
    const double s = diffusion_scale(spec, diffusion, tau_ref);
    Trajectory t = classical_wiener_trajectory(spec, rng);
    for (double& v : t.values) v *= s;
    return t.values;
}

void TamsdTestConfig::validate() const {
    null_process.validate();
    if (tau < 1 || tau >= null_process.steps - 1) throw domain_error("tamsd test: lag out of range");
    if (!(diffusion > 0.0)) throw domain_error("tamsd test: diffusion must be positive");
    if (!(significance > 0.0) || !(significance < 1.0))
        throw domain_error("tamsd test: significance must lie in (0, 1)");
    if (quantile_samples < 1000) throw domain_error("tamsd test: insufficient quantile samples");
    if (hurst_alt.has_value() == poisson_alt.has_value())
        throw domain_error("tamsd test: exactly one alternative must be set");
    if (hurst_alt) ProcessSpec{*hurst_alt, null_process.terms, null_process.steps}.validate();
    if (poisson_alt) {
        poisson_alt->validate();
        if (tau >= poisson_alt->steps) throw domain_error("tamsd test: lag exceeds alternative length");
    }
}

double test_power(const TamsdTestConfig& config, int trials, RngStream& rng, int threads,
                  const std::optional<std::filesystem::path>& cache_dir) {
    config.validate();
    if (trials < 100) throw domain_error("test power: need at least 100 trials");

    const int n_traj = config.poisson_alt ? config.poisson_alt->steps : config.null_process.steps - 1;
    const int m = n_traj - config.tau;

    Eigen::MatrixXd cov;
    if (config.spectral_band) {
        if (n_traj != config.null_process.steps - 1)
            throw domain_error("test power: spectral band needs the null grid");
        const double s = diffusion_scale(config.null_process, config.diffusion, config.tau);
        cov = spectral_increment_covariance(config.null_process, config.tau, s * s);
    } else {
        cov = increment_covariance(n_traj, config.tau, config.diffusion, config.null_process.hurst);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd ev = es.eigenvalues();
    std::vector<double> lam(ev.data(), ev.data() + ev.size());

    RngStream qrng = rng.substream(1);
    const auto [q_low, q_high] =
        generalized_chisq_quantiles(lam, config.significance, config.quantile_samples, qrng, cache_dir, threads);
    const double band_low = q_low / static_cast<double>(m);
    const double band_high = q_high / static_cast<double>(m);

    std::optional<ProcessSpec> alt;
    double alt_scale = 1.0;
    if (config.hurst_alt) {
        alt = config.null_process;
        alt->hurst = *config.hurst_alt;
        alt_scale = diffusion_scale(*alt, config.diffusion, config.tau);
    }

    RngStream trial_rng = rng.substream(2);
    std::vector<char> outside(static_cast<std::size_t>(trials), 0);
    parallel_for(trials, threads, [&](std::int64_t i) {
        RngStream sub = trial_rng.substream(static_cast<std::uint64_t>(i));
        double stat;
        if (alt) {
            Trajectory t = classical_wiener_trajectory(*alt, sub);
            for (double& v : t.values) v *= alt_scale;
            stat = tamsd(t.values, config.tau);
        } else {
            const std::vector<double> noise = sample_levy_noise(*config.poisson_alt, sub);
            std::vector<double> path(noise.size());
            double acc = 0.0;
            for (std::size_t j = 0; j < noise.size(); ++j) {
                acc += noise[j];
                path[j] = acc;
            }
            stat = tamsd(path, config.tau);
        }
        outside[static_cast<std::size_t>(i)] = (stat < band_low || stat > band_high) ? 1 : 0;
    });
    std::int64_t z = 0;
    for (char c : outside) z += c;
    return static_cast<double>(z) / static_cast<double>(trials);
}

double eb_parameter(const std::vector<std::vector<double>>& trajectories, int tau, bool literal_ratio) {
    if (trajectories.size() < 10) throw domain_error("eb parameter: need at least 10 trajectories");
    std::vector<double> m;
    m.reserve(trajectories.size());
    for (const auto& t : trajectories) m.push_back(tamsd(t, tau));
    const double avg = mean(m);
    if (avg == 0.0) throw domain_error("eb parameter: zero mean TAMSD");
    double acc = 0.0;
    for (double mi : m) {
        double xi;
        if (literal_ratio) {
            if (!(mi > 0.0)) throw domain_error("eb parameter: zero TAMSD in literal ratio");
            xi = avg / mi;
        } else {
            xi = mi / avg;
        }
        acc += xi * xi;
    }
    return acc / static_cast<double>(m.size()) - 1.0;
}

void SwapSpec::validate() const {
    if (intervals < 1) throw domain_error("swap: need at least one interval");
    if (!(annualization > 0.0)) throw domain_error("swap: annualization must be positive");
    if (norm_window && !(norm_window->first <= norm_window->second))
        throw domain_error("swap: empty postselection window");
    if (time_window) {
        if (!(time_window->first >= 0.0) || !(time_window->first < time_window->second) ||
            !(time_window->second <= 1.0))
            throw domain_error("swap: time window must satisfy 0 <= a < b <= 1");
    }
    if (precision_bits < 2 || precision_bits > 10) throw domain_error("swap: precision bits out of range");
    if (ae_shots < 1) throw domain_error("swap: need at least one estimation shot");
    if (extrapolate_truncation && norm_window)
        throw domain_error("swap: truncation extrapolation undefined under norm postselection");
}

EstimationResult variance_swap_strike(const SwapSpec& swap, const ProcessSpec& process,
                                      double epsilon, EstimationMethod method, RngStream& rng) {
    swap.validate();
    process.validate();
    if (!(epsilon > 0.0)) throw domain_error("swap: epsilon must be positive");
    if (swap.hurst && std::abs(*swap.hurst - process.hurst) > 1e-12)
        throw domain_error("swap: hurst exponent disagrees with the process spec");

    const int T = process.steps;
    const int n = swap.intervals;
    const double a_frac = swap.time_window ? swap.time_window->first : 1.0 / static_cast<double>(n);
    const double b_frac = swap.time_window ? swap.time_window->second : 1.0;
    const int lo_idx = std::max(1, static_cast<int>(std::ceil(a_frac * T - 1e-9)));
    const int hi_idx = std::min(T - 1, static_cast<int>(std::floor(b_frac * T + 1e-9)));
    if (lo_idx > hi_idx) throw domain_error("swap: projector window contains no grid point");
    std::vector<std::uint64_t> window_kets;
    for (int i = lo_idx; i <= hi_idx; ++i) window_kets.push_back(static_cast<std::uint64_t>(i));

    const double per_interval = swap.annualization / static_cast<double>(n);
    const double scale = per_interval * kPi / static_cast<double>(T);
    const int modes = std::min(process.terms, T - 1);
    const double tail_term = swap.extrapolate_truncation
                                 ? per_interval * truncation_tail(process.hurst, modes) * (b_frac - a_frac)
                                 : 0.0;

    EstimationResult result;
    result.method = method;

    if (method == EstimationMethod::ClassicalMC) {
        const std::int64_t n_mc = swap.mc_samples > 0 ? swap.mc_samples : mc_samples_for(epsilon);
        if (!swap.norm_window) {
            std::vector<double> xs(static_cast<std::size_t>(n_mc));
            for (std::int64_t i = 0; i < n_mc; ++i) {
                RngStream sub = rng.substream(static_cast<std::uint64_t>(i));
                const Trajectory t = classical_wiener_trajectory(process, sub);
                double x = 0.0;
                for (int k = lo_idx; k <= hi_idx; ++k) x += t.values[k - 1] * t.values[k - 1];
                xs[static_cast<std::size_t>(i)] = x * kPi / static_cast<double>(T);
            }
            const double mu = mean(xs);
            const double se = std::sqrt(variance(xs) / static_cast<double>(n_mc));
            result.estimate = per_interval * mu + tail_term;
            result.error_bound = per_interval * 3.0 * se;
            result.oracle_queries = static_cast<std::uint64_t>(n_mc);
            result.shots = static_cast<std::uint64_t>(n_mc);
            return result;
        }
        // Postselected strike: rejection sampling against the discretized
        // branch measure, which is exactly what the quantum window reports.
        std::vector<std::vector<double>> cell_mass, cell_angle;
        coherent_cell_tables(process, swap.precision_bits, cell_mass, cell_angle);
        std::vector<double> xs;
        xs.reserve(static_cast<std::size_t>(n_mc));
        for (std::int64_t i = 0; i < n_mc; ++i) {
            RngStream sub = rng.substream(static_cast<std::uint64_t>(i));
            const BranchDraw draw = sample_coherent_branch(process, cell_mass, cell_angle, sub);
            const double nu = std::sqrt(draw.nu2);
            if (nu < swap.norm_window->first || nu > swap.norm_window->second) continue;
            std::vector<double> interior(static_cast<std::size_t>(T - 1), 0.0);
            for (std::size_t k = 0; k < draw.weights.size(); ++k) interior[k] = draw.weights[k];
            const std::vector<double> values = dst1(interior, static_cast<std::size_t>(T));
            double x = 0.0;
            for (int k = lo_idx; k <= hi_idx; ++k) x += values[k - 1] * values[k - 1];
            xs.push_back(x);
        }
        if (xs.size() < 2)
            throw degenerate_branch_error("swap: postselection window rejected the whole ensemble");
        const double mu = mean(xs);
        const double se = std::sqrt(variance(xs) / static_cast<double>(xs.size()));
        result.estimate = per_interval * mu;
        result.error_bound = per_interval * 3.0 * se;
        result.oracle_queries = static_cast<std::uint64_t>(n_mc);
        result.shots = static_cast<std::uint64_t>(xs.size());
        return result;
    }

    try {
        CoherentLayout layout;
        const double b_max = default_norm_bound(process);
        const int K = swap.precision_bits;
        const int L = process.terms;

        if (!swap.norm_window) {
            Circuit pipe = coherent_pipeline_circuit(process, K, layout);
            Circuit nf = norm_flag_circuit(process, K, b_max, true);
            const std::vector<int> flag_reg{nf.num_qubits() - 1};
            const std::vector<std::uint64_t> zero{0};
            if (method == EstimationMethod::DirectAmplitude) {
                const double mass_w = exact_target_mass(pipe, layout.value_qubits, window_kets);
                const double p0 = exact_target_mass(nf, flag_reg, zero);
                result.estimate = scale * mass_w * (L * b_max * b_max * p0) + tail_term;
                result.error_bound = 0.0;
                result.oracle_queries = 2;
                result.shots = 1;
                return result;
            }
            const int m_bits = ae_bits_for(epsilon);
            EstimationResult r_m = amplitude_estimate_on_register(pipe, layout.value_qubits,
                                                                  window_kets, m_bits, rng, swap.ae_shots);
            EstimationResult r_p =
                amplitude_estimate_on_register(nf, flag_reg, zero, m_bits, rng, swap.ae_shots);
            const double factor = scale * L * b_max * b_max;
            result.estimate = factor * r_m.estimate * r_p.estimate + tail_term;
            result.error_bound = factor * ((r_m.estimate + r_m.error_bound) * (r_p.estimate + r_p.error_bound) -
                                           r_m.estimate * r_p.estimate);
            result.oracle_queries = r_m.oracle_queries + r_p.oracle_queries;
            result.shots = r_m.shots + r_p.shots;
            return result;
        }

        Circuit an = coherent_norm_circuit(process, K, b_max, layout, swap.norm_window, false);
        Circuit ind = norm_flag_circuit(process, K, b_max, false, swap.norm_window, true);
        std::vector<int> value_and_flag = layout.value_qubits;
        value_and_flag.push_back(layout.total_qubits);
        const std::vector<int> ind_reg{ind.num_qubits() - 1};
        const std::vector<std::uint64_t> zero{0};
        if (method == EstimationMethod::DirectAmplitude) {
            const double q = exact_target_mass(an, value_and_flag, window_kets);
            const double p = exact_target_mass(ind, ind_reg, zero);
            if (p < 1e-12) throw degenerate_branch_error("swap: postselection window has no mass");
            result.estimate = scale * q * b_max * b_max / p;
            result.error_bound = 0.0;
            result.oracle_queries = 2;
            result.shots = 1;
            return result;
        }
        const int m_bits = ae_bits_for(epsilon);
        EstimationResult r_q =
            amplitude_estimate_on_register(an, value_and_flag, window_kets, m_bits, rng, swap.ae_shots);
        EstimationResult r_p = amplitude_estimate_on_register(ind, ind_reg, zero, m_bits, rng, swap.ae_shots);
        if (r_p.estimate < 1e-12)
            throw degenerate_branch_error("swap: postselection window has no mass");
        const double denom = std::max(r_p.estimate - r_p.error_bound, 1e-12);
        result.estimate = scale * b_max * b_max * r_q.estimate / r_p.estimate;
        result.error_bound = scale * b_max * b_max *
                             (r_q.error_bound + (r_q.estimate / r_p.estimate) * r_p.error_bound) / denom;
        result.oracle_queries = r_q.oracle_queries + r_p.oracle_queries;
        result.shots = r_q.shots + r_p.shots;
        return result;
    } catch (const resource_error& e) {
        throw budget_error(std::string(e.what()) + "; use ClassicalMC for this setting");
    }
}

}  // namespace qsp
