#include "qsp/randgauss.hpp"

#include "qsp/errors.hpp"
#include "qsp/fft.hpp"
#include "qsp/stats.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <thread>

namespace qsp {

namespace {
constexpr double kPi = std::numbers::pi;
}

double sample_gamma(double a, RngStream& rng) {
    if (a <= 0.0) throw domain_error("sample_gamma: shape must be positive");
    std::gamma_distribution<double> dist(a, 1.0);
    return dist(rng.engine());
}

double sample_beta(double a, double b, RngStream& rng) {
    if (a <= 0.0 || b <= 0.0) throw domain_error("sample_beta: shapes must be positive");
    const double y1 = sample_gamma(a, rng);
    const double y2 = sample_gamma(b, rng);
    const double s = y1 + y2;
    if (s == 0.0) return 0.5;
    return y1 / s;
}

double angle_density(const AngleDistribution& dist, double t) {
    if (dist.left_leaves < 1 || dist.right_leaves < 1)
        throw domain_error("angle_density: leaf counts must be positive");
    if (t < 0.0 || t > kPi / 2.0) return 0.0;
    const double a = dist.right_leaves / 2.0;
    const double b = dist.left_leaves / 2.0;
    const double norm = 2.0 / boost::math::beta(a, b);
    return norm * std::pow(std::sin(t), 2.0 * a - 1.0) * std::pow(std::cos(t), 2.0 * b - 1.0);
}

AngleTree sample_angle_tree(int leaf_count, RngStream& rng) {
    if (leaf_count < 2 || !is_power_of_two(static_cast<std::size_t>(leaf_count)))
        throw domain_error("sample_angle_tree: leaf count must be a power of two >= 2");
    const int n = leaf_count;
    AngleTree tree;
    tree.leaf_count = n;
    tree.node_angles.assign(static_cast<std::size_t>(2 * n), 0.0);
    tree.node_norms.assign(static_cast<std::size_t>(2 * n), 0.0);
    tree.leaf_signs.assign(static_cast<std::size_t>(n), 1);

    // sin^2(theta_j) ~ Beta(n_R/2, n_L/2) where n_R = n_L = half the node's
    // leaf span. Angles are mutually independent across nodes.
    std::vector<int> span(static_cast<std::size_t>(2 * n), 0);
    for (int j = n; j < 2 * n; ++j) span[static_cast<std::size_t>(j)] = 1;
    for (int j = n - 1; j >= 1; --j)
        span[static_cast<std::size_t>(j)] =
            span[static_cast<std::size_t>(2 * j)] + span[static_cast<std::size_t>(2 * j + 1)];
    for (int j = 1; j < n; ++j) {
        const int half = span[static_cast<std::size_t>(j)] / 2;
        const double s = sample_beta(half / 2.0, half / 2.0, rng);
        tree.node_angles[static_cast<std::size_t>(j)] = std::asin(std::sqrt(s));
    }
    for (int i = 0; i < n; ++i) tree.leaf_signs[static_cast<std::size_t>(i)] = rng.uniform() < 0.5 ? 1 : -1;

    // Implied subtree masses so that cos^2(theta_j) = r(2j) / r(j).
    tree.node_norms[1] = 1.0;
    for (int j = 1; j < n; ++j) {
        const double r = tree.node_norms[static_cast<std::size_t>(j)];
        const double c = std::cos(tree.node_angles[static_cast<std::size_t>(j)]);
        const double s = std::sin(tree.node_angles[static_cast<std::size_t>(j)]);
        tree.node_norms[static_cast<std::size_t>(2 * j)] = r * c * c;
        tree.node_norms[static_cast<std::size_t>(2 * j + 1)] = r * s * s;
    }
    return tree;
}

nlohmann::json IndependenceReport::to_json() const {
    nlohmann::json pairs_json = nlohmann::json::array();
    for (const auto& p : pairs)
        pairs_json.push_back({{"node_i", p.node_i}, {"node_j", p.node_j}, {"dcor", p.dcor}});
    return nlohmann::json{{"leaf_count", leaf_count},
                          {"samples", samples},
                          {"threshold", threshold},
                          {"max_dcor", max_dcor},
                          {"all_below_threshold", all_below_threshold()},
                          {"pairs", pairs_json}};
}

IndependenceReport independence_check(const std::vector<AngleTree>& trees, int threads) {
    if (trees.size() < 10000)
        throw domain_error("independence_check: need at least 10^4 sampled trees");
    const int n = trees.front().leaf_count;
    for (const auto& t : trees)
        if (t.leaf_count != n) throw domain_error("independence_check: mixed leaf counts");

    std::vector<std::vector<double>> node_samples(static_cast<std::size_t>(n - 1));
    for (int j = 1; j < n; ++j) {
        auto& col = node_samples[static_cast<std::size_t>(j - 1)];
        col.reserve(trees.size());
        for (const auto& t : trees) col.push_back(t.node_angles[static_cast<std::size_t>(j)]);
    }

    IndependenceReport report;
    report.leaf_count = n;
    report.samples = trees.size();
    for (int i = 1; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            report.pairs.push_back({i, j, 0.0});

    const int nthreads = std::max(1, threads);
    auto worker = [&](std::size_t start) {
        for (std::size_t p = start; p < report.pairs.size(); p += static_cast<std::size_t>(nthreads)) {
            auto& pair = report.pairs[p];
            pair.dcor = distance_correlation(node_samples[static_cast<std::size_t>(pair.node_i - 1)],
                                             node_samples[static_cast<std::size_t>(pair.node_j - 1)]);
        }
    };
    if (nthreads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker, static_cast<std::size_t>(t));
        for (auto& th : pool) th.join();
    }
    for (const auto& p : report.pairs) report.max_dcor = std::max(report.max_dcor, p.dcor);
    return report;
}

double quantize_angle(double t, int precision_bits) {
    if (precision_bits < 1 || precision_bits > 20)
        throw domain_error("quantize_angle: precision bits out of range");
    const double width = (kPi / 2.0) / static_cast<double>(1 << precision_bits);
    double cell = std::floor(t / width);
    cell = std::clamp(cell, 0.0, static_cast<double>((1 << precision_bits) - 1));
    return (cell + 0.5) * width;
}

} // namespace qsp
