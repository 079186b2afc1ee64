#include "qsp/stats.hpp"

#include "qsp/errors.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

namespace qsp {

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw domain_error("ks_statistic: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        d = std::max(d, std::max(f - lo, hi - f));
    }
    return d;
}

double ks_pvalue(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    if (lambda < 1e-8) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = 2.0 * ((j % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
        sum += term;
        if (std::abs(term) < 1e-12) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

double ks_test(const std::vector<double>& sample, const std::function<double(double)>& cdf) {
    return ks_pvalue(ks_statistic(sample, cdf), sample.size());
}

namespace {

// Between/within mean absolute differences of a labeled pooled sample, one
// sweep over the sorted order. indices[] sorts values ascending; label[i] is
// 0 for x, 1 for y.
struct EnergyTerms {
    double xy = 0.0, xx = 0.0, yy = 0.0;
};

EnergyTerms pairwise_sums(const std::vector<double>& sorted_values,
                          const std::vector<unsigned char>& labels) {
    EnergyTerms t;
    double sum_x = 0.0, sum_y = 0.0;
    std::size_t cnt_x = 0, cnt_y = 0;
    for (std::size_t k = 0; k < sorted_values.size(); ++k) {
        const double z = sorted_values[k];
        if (labels[k] == 0) {
            t.xx += z * static_cast<double>(cnt_x) - sum_x;
            t.xy += z * static_cast<double>(cnt_y) - sum_y;
            sum_x += z;
            ++cnt_x;
        } else {
            t.yy += z * static_cast<double>(cnt_y) - sum_y;
            t.xy += z * static_cast<double>(cnt_x) - sum_x;
            sum_y += z;
            ++cnt_y;
        }
    }
    return t;
}

double energy_statistic(const EnergyTerms& t, std::size_t n, std::size_t m) {
    const double nd = static_cast<double>(n), md = static_cast<double>(m);
    return 2.0 * t.xy / (nd * md) - 2.0 * t.xx / (nd * nd) - 2.0 * t.yy / (md * md);
}

} // namespace

double energy_test(const std::vector<double>& x, const std::vector<double>& y,
                   int permutations, RngStream& rng) {
    if (x.size() < 2 || y.size() < 2) throw domain_error("energy_test: samples too small");
    if (permutations < 20) throw domain_error("energy_test: too few permutations");
    const std::size_t n = x.size(), m = y.size(), total = n + m;
    std::vector<double> pooled;
    pooled.reserve(total);
    pooled.insert(pooled.end(), x.begin(), x.end());
    pooled.insert(pooled.end(), y.begin(), y.end());
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> sorted_values(total);
    std::vector<unsigned char> labels(total);
    for (std::size_t k = 0; k < total; ++k) {
        sorted_values[k] = pooled[order[k]];
        labels[k] = order[k] < n ? 0 : 1;
    }
    const double observed = energy_statistic(pairwise_sums(sorted_values, labels), n, m);

    int at_least = 0;
    std::vector<unsigned char> perm_labels = labels;
    for (int p = 0; p < permutations; ++p) {
        for (std::size_t k = total - 1; k > 0; --k) {
            const std::size_t j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(k + 1));
            std::swap(perm_labels[k], perm_labels[std::min(j, k)]);
        }
        const double stat = energy_statistic(pairwise_sums(sorted_values, perm_labels), n, m);
        if (stat >= observed) ++at_least;
    }
    return (1.0 + at_least) / (1.0 + permutations);
}

double energy_test_multivariate(const std::vector<std::vector<double>>& x,
                                const std::vector<std::vector<double>>& y,
                                int permutations, RngStream& rng) {
    if (x.size() < 2 || y.size() < 2) throw domain_error("energy_test_multivariate: samples too small");
    if (permutations < 20) throw domain_error("energy_test_multivariate: too few permutations");
    const std::size_t n = x.size(), m = y.size(), total = n + m;
    const std::size_t dim = x.front().size();
    for (const auto& p : x)
        if (p.size() != dim) throw domain_error("energy_test_multivariate: ragged input");
    for (const auto& p : y)
        if (p.size() != dim) throw domain_error("energy_test_multivariate: ragged input");

    std::vector<const std::vector<double>*> pooled;
    pooled.reserve(total);
    for (const auto& p : x) pooled.push_back(&p);
    for (const auto& p : y) pooled.push_back(&p);

    // Condensed upper-triangular distance matrix.
    std::vector<float> dist(total * (total - 1) / 2);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < total; ++i) {
        for (std::size_t j = i + 1; j < total; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double d = (*pooled[i])[k] - (*pooled[j])[k];
                s += d * d;
            }
            dist[idx++] = static_cast<float>(std::sqrt(s));
        }
    }

    auto statistic = [&](const std::vector<unsigned char>& labels) {
        double xy = 0.0, xx = 0.0, yy = 0.0;
        std::size_t k = 0;
        for (std::size_t i = 0; i < total; ++i) {
            for (std::size_t j = i + 1; j < total; ++j, ++k) {
                const double d = dist[k];
                if (labels[i] != labels[j]) xy += d;
                else if (labels[i] == 0) xx += d;
                else yy += d;
            }
        }
        const double nd = static_cast<double>(n), md = static_cast<double>(m);
        return 2.0 * xy / (nd * md) - 2.0 * xx / (nd * nd) - 2.0 * yy / (md * md);
    };

    std::vector<unsigned char> labels(total, 0);
    for (std::size_t i = n; i < total; ++i) labels[i] = 1;
    const double observed = statistic(labels);

    int at_least = 0;
    for (int p = 0; p < permutations; ++p) {
        for (std::size_t k = total - 1; k > 0; --k) {
            const std::size_t j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(k + 1));
            std::swap(labels[k], labels[std::min(j, k)]);
        }
        if (statistic(labels) >= observed) ++at_least;
    }
    return (1.0 + at_least) / (1.0 + permutations);
}

namespace {

// Row sums of |v_i - v_j| in O(n log n) via sorted prefix sums.
void dcov_rows(const std::vector<double>& v, std::vector<double>& row_sums) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> pref(n + 1, 0.0);
    for (std::size_t r = 0; r < n; ++r) pref[r + 1] = pref[r] + v[order[r]];
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t i = order[r];
        const double vi = v[i];
        const double left = vi * static_cast<double>(r) - pref[r];
        const double right = (pref[n] - pref[r + 1]) - vi * static_cast<double>(n - r - 1);
        row_sums[i] = left + right;
    }
}

} // namespace

namespace {

// Fenwick tree carrying (count, sum x, sum y, sum xy) per y-rank bucket.
class WeightedBit {
public:
    explicit WeightedBit(std::size_t n) : cnt_(n + 1, 0.0), sx_(n + 1, 0.0), sy_(n + 1, 0.0), sxy_(n + 1, 0.0) {}

    void add(std::size_t rank, double x, double y) {
        for (std::size_t i = rank + 1; i < cnt_.size(); i += i & (~i + 1)) {
            cnt_[i] += 1.0;
            sx_[i] += x;
            sy_[i] += y;
            sxy_[i] += x * y;
        }
    }

    // Aggregates over ranks <= rank.
    void query(std::size_t rank, double& cnt, double& sx, double& sy, double& sxy) const {
        cnt = sx = sy = sxy = 0.0;
        for (std::size_t i = rank + 1; i > 0; i -= i & (~i + 1)) {
            cnt += cnt_[i];
            sx += sx_[i];
            sy += sy_[i];
            sxy += sxy_[i];
        }
    }

private:
    std::vector<double> cnt_, sx_, sy_, sxy_;
};

// Sum over unordered pairs of |x_i - x_j| * |y_i - y_j| in O(n log n):
// sweep in x order, split seen points by y via a Fenwick tree.
double pair_abs_product(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<std::size_t> by_x(n), by_y(n), y_rank(n);
    std::iota(by_x.begin(), by_x.end(), std::size_t{0});
    std::iota(by_y.begin(), by_y.end(), std::size_t{0});
    std::sort(by_x.begin(), by_x.end(), [&](std::size_t a, std::size_t b) {
        return x[a] < x[b] || (x[a] == x[b] && a < b);
    });
    std::sort(by_y.begin(), by_y.end(), [&](std::size_t a, std::size_t b) {
        return y[a] < y[b] || (y[a] == y[b] && a < b);
    });
    for (std::size_t r = 0; r < n; ++r) y_rank[by_y[r]] = r;

    WeightedBit bit(n);
    double total_cnt = 0.0, total_x = 0.0, total_y = 0.0, total_xy = 0.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = by_x[k];
        const double xj = x[j], yj = y[j];
        double c_le, sx_le, sy_le, sxy_le;
        bit.query(y_rank[j], c_le, sx_le, sy_le, sxy_le);
        const double c_gt = total_cnt - c_le;
        const double sx_gt = total_x - sx_le;
        const double sy_gt = total_y - sy_le;
        const double sxy_gt = total_xy - sxy_le;
        // Seen items i have x_i <= x_j. For y_i <= y_j both factors open the
        // same way; for y_i > y_j the y factor flips sign.
        sum += c_le * xj * yj - xj * sy_le - yj * sx_le + sxy_le;
        sum += xj * sy_gt - c_gt * xj * yj - sxy_gt + yj * sx_gt;
        bit.add(y_rank[j], xj, yj);
        total_cnt += 1.0;
        total_x += xj;
        total_y += yj;
        total_xy += xj * yj;
    }
    return 2.0 * sum; // ordered pairs
}

} // namespace

double distance_correlation(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw domain_error("distance_correlation: size mismatch");
    const std::size_t n = x.size();
    if (n < 10) throw domain_error("distance_correlation: sample too small");
    // n > 3 needed by the U-centered denominators; enforced by the n >= 10 gate.
    std::vector<double> ra(n), rb(n);
    dcov_rows(x, ra);
    dcov_rows(y, rb);
    const double sa = std::accumulate(ra.begin(), ra.end(), 0.0);
    const double sb = std::accumulate(rb.begin(), rb.end(), 0.0);

    const double nd = static_cast<double>(n);
    const double sum_ab = pair_abs_product(x, y);
    // For a sample against itself |.|^2 collapses to moments.
    double sx = 0.0, sxx = 0.0, sy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sxx += x[i] * x[i];
        sy += y[i];
        syy += y[i] * y[i];
    }
    const double sum_aa = 2.0 * (nd * sxx - sx * sx);
    const double sum_bb = 2.0 * (nd * syy - sy * sy);

    // Bias-corrected (U-centered) inner product. The plain V-statistic has a
    // positive null bias of order n^{-1/2} that would swamp small thresholds;
    // this one is centered at zero under independence.
    auto u_product = [&](double sum_pq, const std::vector<double>& rp,
                         const std::vector<double>& rq, double sp, double sq) {
        double cross = 0.0;
        for (std::size_t i = 0; i < n; ++i) cross += rp[i] * rq[i];
        return (sum_pq - 2.0 * cross / (nd - 2.0) + sp * sq / ((nd - 1.0) * (nd - 2.0))) /
               (nd * (nd - 3.0));
    };
    const double dcov2 = u_product(sum_ab, ra, rb, sa, sb);
    const double dvarx = u_product(sum_aa, ra, ra, sa, sa);
    const double dvary = u_product(sum_bb, rb, rb, sb, sb);
    if (dvarx <= 0.0 || dvary <= 0.0) return 0.0;
    const double r2 = dcov2 / std::sqrt(dvarx * dvary);
    return r2 > 0.0 ? std::sqrt(r2) : 0.0;
}

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double fa, double b,
                    double fb, double m, double fm, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_step(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1);
}

} // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol) {
    if (!(b >= a)) throw domain_error("integrate_adaptive: inverted interval");
    if (a == b) return 0.0;
    const double m = 0.5 * (a + b);
    const double fa = f(a), fb = f(b), fm = f(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(f, a, fa, b, fb, m, fm, whole, tol, 48);
}

double chi_square_cdf(double x, int dof) {
    if (x <= 0.0) return 0.0;
    boost::math::chi_squared dist(static_cast<double>(dof));
    return boost::math::cdf(dist, x);
}

double chi_square_quantile(double p, int dof) {
    boost::math::chi_squared dist(static_cast<double>(dof));
    return boost::math::quantile(dist, p);
}

double normal_cdf(double x) {
    boost::math::normal dist;
    return boost::math::cdf(dist, x);
}

LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw domain_error("linear_fit: bad input");
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw domain_error("linear_fit: degenerate abscissae");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    return fit;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) throw domain_error("mean: empty");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
    if (v.size() < 2) throw domain_error("variance: need at least two values");
    const double m = mean(v);
    double s = 0.0;
    for (double u : v) s += (u - m) * (u - m);
    return s / static_cast<double>(v.size() - 1);
}

double chi_square_gof(const std::vector<double>& observed, const std::vector<double>& expected) {
    if (observed.size() != expected.size() || observed.size() < 2)
        throw domain_error("chi_square_gof: bad input");
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (expected[i] <= 0.0) throw domain_error("chi_square_gof: nonpositive expected count");
        const double d = observed[i] - expected[i];
        stat += d * d / expected[i];
    }
    return 1.0 - chi_square_cdf(stat, static_cast<int>(observed.size()) - 1);
}

} // namespace qsp
