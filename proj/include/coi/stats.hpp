#pragma once

// Statistics for paired model comparisons.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/non_central_t.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "coi/error.hpp"

namespace coi::stats {

enum class Alternative { greater, less, two_sided };

inline std::string to_string(Alternative a) {
    switch (a) {
        case Alternative::greater: return "greater";
        case Alternative::less: return "less";
        case Alternative::two_sided: return "two_sided";
    }
    return "?";
}

struct PairedSample {
    std::vector<std::string> labels;
    std::vector<double> a;
    std::vector<double> b;

    PairedSample() = default;
    PairedSample(std::vector<std::string> l, std::vector<double> x, std::vector<double> y)
        : labels(std::move(l)), a(std::move(x)), b(std::move(y)) {
        if (a.size() != b.size() || labels.size() != a.size()) {
            throw InvalidArgument("paired sample columns differ in length");
        }
        if (a.size() < 2) throw InvalidArgument("paired sample needs at least two pairs");
    }

    /// Builds a sample from two columns with positional labels.
    static PairedSample of(std::vector<double> x, std::vector<double> y) {
        std::vector<std::string> l;
        for (std::size_t i = 0; i < x.size(); ++i) l.push_back(std::to_string(i));
        return PairedSample(std::move(l), std::move(x), std::move(y));
    }

    std::vector<double> differences() const {
        std::vector<double> d(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
        return d;
    }
};

struct TestResult {
    std::string test_name;
    double statistic = 0.0;
    double p_one_sided = 1.0;  // for the requested alternative (two-sided when requested)
    double p_two_sided = 1.0;
    double effect_size = std::numeric_limits<double>::quiet_NaN();
    std::pair<double, double> ci95{std::numeric_limits<double>::quiet_NaN(),
                                   std::numeric_limits<double>::quiet_NaN()};
    std::size_t n = 0;
    bool exact = false;
};

inline double mean(const std::vector<double>& x) {
    if (x.empty()) throw InvalidArgument("mean of an empty sample");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double sample_sd(const std::vector<double>& x) {
    if (x.size() < 2) throw InvalidArgument("standard deviation needs at least two values");
    double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

inline double median(std::vector<double> x) {
    if (x.empty()) throw InvalidArgument("median of an empty sample");
    std::sort(x.begin(), x.end());
    std::size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

/// Linear-interpolation quantile of sorted data (the common "type 7" definition).
inline double quantile_sorted(const std::vector<double>& s, double q) {
    if (s.empty()) throw InvalidArgument("quantile of an empty sample");
    double h = (static_cast<double>(s.size()) - 1.0) * q;
    auto lo = static_cast<std::size_t>(std::floor(h));
    auto hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

inline double normal_cdf(double z) { return boost::math::cdf(boost::math::normal(), z); }
inline double normal_sf(double z) {
    return boost::math::cdf(boost::math::complement(boost::math::normal(), z));
}
inline double normal_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }

inline double clamp_p(double p) { return std::clamp(p, 0.0, 1.0); }

/// Midranks (1-based) of `x` and the tie-group sizes.
inline std::pair<std::vector<double>, std::vector<std::size_t>> midranks(const std::vector<double>& x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return x[i] < x[j]; });
    std::vector<double> ranks(x.size());
    std::vector<std::size_t> ties;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        if (j > i) ties.push_back(j - i + 1);
        i = j + 1;
    }
    return {ranks, ties};
}

inline double cohens_dz(const std::vector<double>& d) {
    if (d.size() < 2) throw InvalidArgument("Cohen's dz needs at least two differences");
    double sd = sample_sd(d);
    if (sd == 0.0) throw InvalidArgument("Cohen's dz undefined for zero-variance differences");
    return mean(d) / sd;
}

/// Two-sided 95% t interval for the mean; degenerates to a point for zero spread.
inline std::pair<double, double> t_interval95(const std::vector<double>& d) {
    double m = mean(d);
    double sd = sample_sd(d);
    if (sd == 0.0) return {m, m};
    boost::math::students_t t(static_cast<double>(d.size() - 1));
    double half = boost::math::quantile(boost::math::complement(t, 0.025)) * sd /
                  std::sqrt(static_cast<double>(d.size()));
    return {m - half, m + half};
}

namespace detail {

inline double poly(const double* c, int nord, double x) {
    double r = c[0];
    if (nord > 1) {
        double p = x * c[nord - 1];
        for (int j = nord - 2; j > 0; --j) p = (p + c[j]) * x;
        r += p;
    }
    return r;
}

}  // namespace detail

struct ShapiroWilk {
    double w = 1.0;
    double p = 1.0;
};

/// Shapiro-Wilk W and p-value using Royston's (1995) approximation.
inline ShapiroWilk shapiro_wilk(std::vector<double> x) {
    const std::size_t n = x.size();
    if (n < 3) throw InvalidArgument("Shapiro-Wilk needs at least 3 values");
    if (n > 5000) throw InvalidArgument("Shapiro-Wilk supports at most 5000 values");
    std::sort(x.begin(), x.end());
    const double range = x.back() - x.front();
    if (range < 1e-19) throw InvalidArgument("Shapiro-Wilk undefined for zero-variance data");

    static constexpr double g[2] = {-2.273, 0.459};
    static constexpr double c1[6] = {0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056};
    static constexpr double c2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    static constexpr double c3[4] = {0.544, -0.39978, 0.025054, -6.714e-4};
    static constexpr double c4[4] = {1.3822, -0.77857, 0.062767, -0.0020322};
    static constexpr double c5[4] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static constexpr double c6[3] = {-0.4803, -0.082676, 0.0030302};

    const std::size_t half = n / 2;
    const double an = static_cast<double>(n);
    std::vector<double> a(half);  // coefficients for the upper half, largest first
    if (n == 3) {
        a[0] = std::sqrt(0.5);
    } else {
        std::vector<double> m(half);
        double summ2 = 0.0;
        for (std::size_t i = 0; i < half; ++i) {
            m[i] = normal_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
            summ2 += m[i] * m[i];
        }
        summ2 *= 2.0;
        const double ssumm2 = std::sqrt(summ2);
        const double rsn = 1.0 / std::sqrt(an);
        const double a1 = detail::poly(c1, 6, rsn) - m[0] / ssumm2;
        std::size_t first_scaled;
        double fac;
        if (n > 5) {
            const double a2 = -m[1] / ssumm2 + detail::poly(c2, 6, rsn);
            fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) /
                            (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
            a[1] = a2;
            first_scaled = 2;
        } else {
            fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
            first_scaled = 1;
        }
        a[0] = a1;
        for (std::size_t i = first_scaled; i < half; ++i) a[i] = -m[i] / fac;
    }

    // W as the squared correlation between ordered data and coefficients.
    std::vector<double> coef(n, 0.0);
    for (std::size_t i = 0; i < half; ++i) {
        coef[i] = -a[i];
        coef[n - 1 - i] = a[i];
    }
    const double xm = std::accumulate(x.begin(), x.end(), 0.0) / an;
    double ssa = 0.0, ssx = 0.0, sax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double xs = (x[i] - xm) / range;
        ssa += coef[i] * coef[i];
        ssx += xs * xs;
        sax += coef[i] * xs;
    }
    const double ssassx = std::sqrt(ssa * ssx);
    const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    const double w = 1.0 - w1;

    if (n == 3) {
        constexpr double pi6 = 1.90985931710274;
        constexpr double stqr = 1.04719755119660;
        double p = pi6 * (std::asin(std::sqrt(w)) - stqr);
        return {w, std::clamp(p, 0.0, 1.0)};
    }
    double y = std::log(w1);
    const double lxx = std::log(an);
    double mu, sigma;
    if (n <= 11) {
        const double gamma = detail::poly(g, 2, an);
        if (y >= gamma) return {w, 1e-99};
        y = -std::log(gamma - y);
        mu = detail::poly(c3, 4, an);
        sigma = std::exp(detail::poly(c4, 4, an));
    } else {
        mu = detail::poly(c5, 4, lxx);
        sigma = std::exp(detail::poly(c6, 3, lxx));
    }
    return {w, clamp_p(normal_sf((y - mu) / sigma))};
}

namespace detail {

inline void finish_p(TestResult& r, double p_greater, double p_less, Alternative alt) {
    p_greater = clamp_p(p_greater);
    p_less = clamp_p(p_less);
    r.p_two_sided = clamp_p(2.0 * std::min(p_greater, p_less));
    switch (alt) {
        case Alternative::greater: r.p_one_sided = p_greater; break;
        case Alternative::less: r.p_one_sided = p_less; break;
        case Alternative::two_sided: r.p_one_sided = r.p_two_sided; break;
    }
}

inline double dz_or_nan(const std::vector<double>& d) {
    if (d.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    double sd = sample_sd(d);
    return sd == 0.0 ? std::numeric_limits<double>::quiet_NaN() : mean(d) / sd;
}

}  // namespace detail

/// Exact null distribution of the signed-rank sum over doubled (integer) midranks:
/// counts[s] = number of sign assignments with positive-rank sum s / 2.
inline std::vector<double> signed_rank_null_counts(const std::vector<long long>& doubled_ranks) {
    long long total = std::accumulate(doubled_ranks.begin(), doubled_ranks.end(), 0LL);
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    long long reach = 0;
    for (long long r : doubled_ranks) {
        for (long long s = reach; s >= 0; --s) {
            if (counts[static_cast<std::size_t>(s)] != 0.0) {
                counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
            }
        }
        reach += r;
    }
    return counts;
}

/// Largest n for which the signed-rank test enumerates its null distribution.
inline constexpr std::size_t wilcoxon_exact_max_n = 25;

/// Wilcoxon signed-rank test on a - b. Zero differences are dropped and ties get
/// midranks. `force_approximate` selects the normal branch regardless of n.
inline TestResult wilcoxon_signed_rank(const PairedSample& s, Alternative alt,
                                       bool force_approximate = false) {
    auto all = s.differences();
    std::vector<double> d;
    for (double v : all)
        if (v != 0.0) d.push_back(v);
    if (d.empty()) throw InvalidArgument("Wilcoxon test undefined: all differences are zero");

    std::vector<double> absd(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) absd[i] = std::fabs(d[i]);
    auto [ranks, ties] = midranks(absd);
    double w_plus = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0) w_plus += ranks[i];

    TestResult r;
    r.test_name = "wilcoxon_signed_rank";
    r.statistic = w_plus;
    r.n = d.size();
    r.effect_size = detail::dz_or_nan(all);
    if (all.size() >= 2) r.ci95 = t_interval95(all);

    const double n = static_cast<double>(d.size());
    if (!force_approximate && d.size() <= wilcoxon_exact_max_n) {
        std::vector<long long> doubled(ranks.size());
        for (std::size_t i = 0; i < ranks.size(); ++i) doubled[i] = std::llround(2.0 * ranks[i]);
        auto counts = signed_rank_null_counts(doubled);
        const double total = std::ldexp(1.0, static_cast<int>(d.size()));
        const auto obs = static_cast<std::size_t>(std::llround(2.0 * w_plus));
        double ge = 0.0, le = 0.0;
        for (std::size_t k = 0; k < counts.size(); ++k) {
            if (k >= obs) ge += counts[k];
            if (k <= obs) le += counts[k];
        }
        r.exact = true;
        detail::finish_p(r, ge / total, le / total, alt);
        return r;
    }
    double tie_term = 0.0;
    for (auto t : ties) tie_term += static_cast<double>(t * t * t - t);
    const double mu = n * (n + 1.0) / 4.0;
    const double sigma = std::sqrt(n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0);
    if (sigma == 0.0) throw InvalidArgument("Wilcoxon normal approximation has zero variance");
    r.exact = false;
    detail::finish_p(r, normal_sf((w_plus - mu - 0.5) / sigma), normal_cdf((w_plus - mu + 0.5) / sigma),
                     alt);
    return r;
}

inline TestResult paired_t(const PairedSample& s, Alternative alt) {
    auto d = s.differences();
    double sd = sample_sd(d);
    if (sd == 0.0) throw InvalidArgument("paired t-test undefined for zero-variance differences");
    const double n = static_cast<double>(d.size());
    const double m = mean(d);
    TestResult r;
    r.test_name = "paired_t";
    r.statistic = m / (sd / std::sqrt(n));
    r.n = d.size();
    r.exact = true;
    r.effect_size = m / sd;
    r.ci95 = t_interval95(d);
    boost::math::students_t t(n - 1.0);
    detail::finish_p(r, boost::math::cdf(boost::math::complement(t, r.statistic)),
                     boost::math::cdf(t, r.statistic), alt);
    return r;
}

/// Largest pooled size for which Mann-Whitney enumerates every label assignment.
inline constexpr std::size_t mann_whitney_exact_max_total = 12;

/// Independent-samples Cohen's d with pooled standard deviation.
inline double cohens_d(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() + y.size() < 3 || x.empty() || y.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    auto ss = [](const std::vector<double>& v) {
        double m = mean(v), s = 0.0;
        for (double e : v) s += (e - m) * (e - m);
        return s;
    };
    double pooled = std::sqrt((ss(x) + ss(y)) / static_cast<double>(x.size() + y.size() - 2));
    if (pooled == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return (mean(x) - mean(y)) / pooled;
}

/// Mann-Whitney U test; the statistic is U for `x` (count of x > y, ties as 1/2).
inline TestResult mann_whitney_u(const std::vector<double>& x, const std::vector<double>& y,
                                 Alternative alt, bool force_approximate = false) {
    if (x.empty() && y.empty()) throw InvalidArgument("Mann-Whitney test needs data");
    if (x.empty() || y.empty()) throw InvalidArgument("Mann-Whitney test needs two non-empty samples");
    const std::size_t n1 = x.size(), n2 = y.size(), big_n = n1 + n2;
    std::vector<double> pooled(x);
    pooled.insert(pooled.end(), y.begin(), y.end());
    auto [ranks, ties] = midranks(pooled);
    double r1 = 0.0;
    for (std::size_t i = 0; i < n1; ++i) r1 += ranks[i];
    const double base = static_cast<double>(n1) * static_cast<double>(n1 + 1) / 2.0;
    const double u = r1 - base;

    TestResult r;
    r.test_name = "mann_whitney_u";
    r.statistic = u;
    r.n = big_n;
    r.effect_size = cohens_d(x, y);
    if (n1 >= 2 && n2 >= 2) {
        double diff = mean(x) - mean(y);
        auto ssq = [](const std::vector<double>& v) {
            double m = mean(v), s = 0.0;
            for (double e : v) s += (e - m) * (e - m);
            return s;
        };
        double df = static_cast<double>(big_n - 2);
        double sp = std::sqrt((ssq(x) + ssq(y)) / df);
        double se = sp * std::sqrt(1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2));
        boost::math::students_t t(df);
        double half = boost::math::quantile(boost::math::complement(t, 0.025)) * se;
        r.ci95 = {diff - half, diff + half};
    }

    if (!force_approximate && big_n <= mann_whitney_exact_max_total) {
        // Enumerate every n1-subset of positions as the "x" labels.
        std::vector<long long> doubled(big_n);
        for (std::size_t i = 0; i < big_n; ++i) doubled[i] = std::llround(2.0 * ranks[i]);
        const long long obs = std::llround(2.0 * r1);
        std::uint64_t ge = 0, le = 0, total = 0;
        for (std::uint32_t mask = 0; mask < (1u << big_n); ++mask) {
            if (static_cast<std::size_t>(__builtin_popcount(mask)) != n1) continue;
            long long s = 0;
            for (std::size_t i = 0; i < big_n; ++i)
                if (mask & (1u << i)) s += doubled[i];
            ++total;
            if (s >= obs) ++ge;
            if (s <= obs) ++le;
        }
        r.exact = true;
        detail::finish_p(r, static_cast<double>(ge) / static_cast<double>(total),
                         static_cast<double>(le) / static_cast<double>(total), alt);
        return r;
    }
    double tie_term = 0.0;
    for (auto t : ties) tie_term += static_cast<double>(t * t * t - t);
    const double nn = static_cast<double>(big_n);
    const double mu = static_cast<double>(n1 * n2) / 2.0;
    const double var = static_cast<double>(n1 * n2) / 12.0 *
                       ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if (var <= 0.0) {
        r.exact = false;
        detail::finish_p(r, 1.0, 1.0, alt);
        return r;
    }
    const double sigma = std::sqrt(var);
    r.exact = false;
    detail::finish_p(r, normal_sf((u - mu - 0.5) / sigma), normal_cdf((u - mu + 0.5) / sigma), alt);
    return r;
}

/// Benjamini-Hochberg step-up rejections at FDR level q, in input order.
inline std::vector<bool> benjamini_hochberg(const std::vector<double>& pvals, double q = 0.05) {
    if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("BH level q must lie in (0, 1)");
    for (double p : pvals)
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("p-values must lie in [0, 1]");
    const std::size_t m = pvals.size();
    std::vector<bool> reject(m, false);
    if (m == 0) return reject;
    std::vector<double> sorted(pvals);
    std::sort(sorted.begin(), sorted.end());
    double cutoff = -1.0;
    for (std::size_t i = m; i-- > 0;) {
        if (sorted[i] <= static_cast<double>(i + 1) / static_cast<double>(m) * q) {
            cutoff = sorted[i];
            break;
        }
    }
    for (std::size_t i = 0; i < m; ++i) reject[i] = pvals[i] <= cutoff;
    return reject;
}

/// BH-adjusted p-values: p_adj(i) = min over j >= i of min(1, m p_(j) / j).
inline std::vector<double> bh_adjusted(const std::vector<double>& pvals) {
    const std::size_t m = pvals.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return pvals[i] < pvals[j]; });
    std::vector<double> adj(m);
    double running = 1.0;
    for (std::size_t k = m; k-- > 0;) {
        double v = pvals[order[k]] * static_cast<double>(m) / static_cast<double>(k + 1);
        running = std::min(running, std::min(1.0, v));
        adj[order[k]] = running;
    }
    return adj;
}

enum class Tails { one, two };
enum class PowerMethod { normal_approximation, noncentral_t };

/// Smallest number of pairs for which a paired t-test at `alpha` reaches `power`
/// against standardized effect `dz`.
inline std::size_t required_pairs(double dz, double alpha, double power, Tails tails,
                                  PowerMethod method = PowerMethod::noncentral_t) {
    if (!(dz > 0.0)) throw InvalidArgument("effect size must be positive");
    if (!(alpha > 0.0 && alpha < 1.0) || !(power > 0.0 && power < 1.0)) {
        throw InvalidArgument("alpha and power must lie in (0, 1)");
    }
    const double a = tails == Tails::one ? alpha : alpha / 2.0;
    if (method == PowerMethod::normal_approximation) {
        double z = normal_quantile(1.0 - a) + normal_quantile(power);
        return static_cast<std::size_t>(std::ceil(z * z / (dz * dz)));
    }
    for (std::size_t n = 2;; ++n) {
        const double df = static_cast<double>(n - 1);
        const double nc = dz * std::sqrt(static_cast<double>(n));
        const double crit = boost::math::quantile(boost::math::complement(boost::math::students_t(df), a));
        boost::math::non_central_t dist(df, nc);
        double achieved = boost::math::cdf(boost::math::complement(dist, crit));
        if (tails == Tails::two) achieved += boost::math::cdf(dist, -crit);
        if (achieved >= power) return n;
        if (n > 1000000) throw Error("required_pairs did not converge");
    }
}

enum class Statistic { mean, median };

/// Percentile bootstrap 95% interval, deterministic for a given seed.
inline std::pair<double, double> bootstrap_ci(const std::vector<double>& x, Statistic stat,
                                              std::size_t resamples = 10000,
                                              std::uint64_t seed = 0) {
    if (x.size() < 2) throw InvalidArgument("bootstrap needs at least two values");
    if (resamples == 0) throw InvalidArgument("bootstrap needs at least one resample");
    std::mt19937_64 rng(seed);
    std::vector<double> draws(resamples);
    std::vector<double> buf(x.size());
    for (std::size_t b = 0; b < resamples; ++b) {
        for (auto& v : buf) v = x[rng() % x.size()];
        draws[b] = stat == Statistic::mean ? mean(buf) : median(buf);
    }
    std::sort(draws.begin(), draws.end());
    return {quantile_sorted(draws, 0.025), quantile_sorted(draws, 0.975)};
}

/// Normality gate on the differences: Shapiro-Wilk p < alpha selects the Wilcoxon
/// signed-rank test, otherwise the paired t-test. Samples too small or too uniform to
/// gate go to Wilcoxon.
inline TestResult compare_paired(const PairedSample& s, Alternative alt, double alpha = 0.05) {
    auto d = s.differences();
    bool normal = false;
    if (d.size() >= 3) {
        try {
            normal = shapiro_wilk(d).p >= alpha;
        } catch (const InvalidArgument&) {
            normal = false;
        }
    }
    if (normal) return paired_t(s, alt);
    return wilcoxon_signed_rank(s, alt);
}

}  // namespace coi::stats
