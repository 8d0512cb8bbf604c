#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "dpcomp/errors.hpp"
#include "dpcomp/extreal.hpp"

namespace dpcomp {

// Probability rows are handled in log domain (-inf encodes zero mass) so
// masses far below the double range keep full relative accuracy; the linear
// entry points below just take logs and delegate.

namespace detail {

inline double logsumexp(const std::vector<double>& xs) {
    double m = -kInf;
    for (double x : xs) m = std::max(m, x);
    if (is_inf(-m) || is_inf(m)) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

inline void check_rows(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw DomainError("probability rows over different outcome spaces");
}

inline std::vector<double> log_row(const std::vector<double>& p) {
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!(p[i] >= 0.0)) throw DomainError("probabilities must be non-negative");
        out[i] = p[i] == 0.0 ? -kInf : std::log(p[i]);
    }
    return out;
}

}  // namespace detail

inline double max_divergence_log(const std::vector<double>& lp, const std::vector<double>& lq) {
    detail::check_rows(lp, lq);
    double worst = -kInf;
    for (std::size_t s = 0; s < lp.size(); ++s) {
        if (is_inf(-lp[s])) continue;
        if (is_inf(-lq[s])) return kInf;
        worst = std::max(worst, lp[s] - lq[s]);
    }
    return worst;
}

// Tight delta at the given eps: total positive gap p - e^eps q, the mass of
// the optimal distinguishing event.
inline double hockey_stick_log(const std::vector<double>& lp, const std::vector<double>& lq,
                               double eps) {
    detail::check_rows(lp, lq);
    if (!(eps >= 0.0)) throw DomainError("hockey-stick rate must be non-negative");
    double sum = 0.0;
    for (std::size_t s = 0; s < lp.size(); ++s) {
        if (is_inf(-lp[s])) continue;
        if (is_inf(-lq[s])) {
            sum += std::exp(lp[s]);
            continue;
        }
        if (is_inf(eps)) continue;
        double t = eps + lq[s] - lp[s];
        if (t < 0.0) sum += -std::expm1(t) * std::exp(lp[s]);
    }
    return sum;
}

inline double renyi_divergence_log(const std::vector<double>& lp, const std::vector<double>& lq,
                                   double alpha) {
    detail::check_rows(lp, lq);
    if (is_inf(alpha)) return max_divergence_log(lp, lq);
    if (!(alpha > 1.0)) throw DomainError("order must exceed 1");
    std::vector<double> terms;
    terms.reserve(lp.size());
    for (std::size_t s = 0; s < lp.size(); ++s) {
        if (is_inf(-lp[s])) continue;
        if (is_inf(-lq[s])) return kInf;
        terms.push_back(alpha * lp[s] + (1.0 - alpha) * lq[s]);
    }
    return detail::logsumexp(terms) / (alpha - 1.0);
}

// Piecewise-linear lower convex envelope of achievable (type I, type II)
// error pairs; evaluation interpolates, and is 0 past the last vertex.
struct TradeoffCurve {
    std::vector<std::pair<double, double>> vertices;

    double operator()(double alpha) const {
        if (!(alpha >= 0.0)) throw DomainError("rejection level must be non-negative");
        if (vertices.empty() || alpha >= vertices.back().first) return 0.0;
        if (alpha <= vertices.front().first) return vertices.front().second;
        for (std::size_t v = 1; v < vertices.size(); ++v) {
            if (alpha > vertices[v].first) continue;
            auto [a0, b0] = vertices[v - 1];
            auto [a1, b1] = vertices[v];
            if (a1 == a0) return b1;
            double t = (alpha - a0) / (a1 - a0);
            return b0 + t * (b1 - b0);
        }
        return 0.0;
    }
};

// Neyman-Pearson construction: reject outcomes by descending likelihood
// ratio q/p, merging exact ratio ties into single segments.
inline TradeoffCurve tradeoff_curve_log(const std::vector<double>& lp, const std::vector<double>& lq) {
    detail::check_rows(lp, lq);
    std::vector<std::size_t> alive;
    for (std::size_t s = 0; s < lp.size(); ++s)
        if (!is_inf(-lp[s]) || !is_inf(-lq[s])) alive.push_back(s);
    // key = log(q/p); +inf (p = 0) rejects first, -inf (q = 0) last
    auto key = [&](std::size_t s) { return lq[s] - lp[s]; };
    std::stable_sort(alive.begin(), alive.end(),
                     [&](std::size_t x, std::size_t y) { return key(x) > key(y); });

    TradeoffCurve curve;
    double a = 0.0, b = 1.0;
    std::size_t s = 0;
    // zero-p group first: beta drops at alpha = 0
    while (s < alive.size() && is_inf(-lp[alive[s]])) b -= std::exp(lq[alive[s++]]);
    curve.vertices.emplace_back(0.0, std::max(b, 0.0));
    while (s < alive.size()) {
        double k = key(alive[s]);
        double pa = 0.0, qb = 0.0;
        while (s < alive.size() && key(alive[s]) == k) {
            pa += std::exp(lp[alive[s]]);
            if (!is_inf(-lq[alive[s]])) qb += std::exp(lq[alive[s]]);
            ++s;
        }
        a += pa;
        b -= qb;
        curve.vertices.emplace_back(a, std::max(b, 0.0));
    }
    curve.vertices.back().second = 0.0;
    return curve;
}

inline double max_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    return max_divergence_log(detail::log_row(p), detail::log_row(q));
}

inline double hockey_stick(const std::vector<double>& p, const std::vector<double>& q, double eps) {
    return hockey_stick_log(detail::log_row(p), detail::log_row(q), eps);
}

inline double renyi_divergence(const std::vector<double>& p, const std::vector<double>& q,
                               double alpha) {
    return renyi_divergence_log(detail::log_row(p), detail::log_row(q), alpha);
}

inline TradeoffCurve tradeoff_curve(const std::vector<double>& p, const std::vector<double>& q) {
    return tradeoff_curve_log(detail::log_row(p), detail::log_row(q));
}

}  // namespace dpcomp
