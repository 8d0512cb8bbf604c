#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpcomp/mechanism.hpp"

namespace dpcomp {

enum class PairMode { all, neighbors };

// Comparison slacks; surfaced in reports so every pass/fail is reproducible.
struct Tolerances {
    double divergence = 1e-9;
    double tradeoff = 1e-3;

    static Tolerances defaults() { return {}; }
    static Tolerances strict() { return {1e-12, 1e-6}; }
};

// Renyi orders checked for zero-concentrated claims. A finite grid cannot
// certify every order, so those reports carry the grid-verified method tag.
inline constexpr std::array<double, 6> kZcAlphaGrid{1.25, 1.5, 2.0, 4.0, 8.0, 32.0};

inline constexpr std::size_t kTradeoffGridPoints = 1001;

struct VerificationReport {
    bool passed = false;
    std::pair<std::size_t, std::size_t> worst_pair{0, 0};
    double slack = kInf;  // min over checked pairs of bound - observed
    std::optional<DistMatrix> per_pair_slack;
    std::string method;
    double tolerance = 0.0;
};

namespace detail {

inline double pair_slack_pure(const DiscreteMechanism& m, const Guarantee& g, std::size_t i,
                              std::size_t j) {
    double b = g.bound()(i, j);
    if (is_inf(b)) return kInf;
    return b - max_divergence_log(m.log_row(i), m.log_row(j));
}

inline double pair_slack_approx(const DiscreteMechanism& m, const Guarantee& g, std::size_t i,
                                std::size_t j) {
    double b = g.bound()(i, j);
    if (is_inf(b)) return kInf;
    return g.delta()(i, j) - hockey_stick_log(m.log_row(i), m.log_row(j), b);
}

inline double pair_slack_zc(const DiscreteMechanism& m, const Guarantee& g, std::size_t i,
                            std::size_t j) {
    if (is_inf(g.bound()(i, j))) return kInf;
    double worst = kInf;
    for (double alpha : kZcAlphaGrid) {
        double observed = renyi_divergence_log(m.log_row(i), m.log_row(j), alpha);
        worst = std::min(worst, g.zc_budget(i, j, alpha) - observed);
    }
    return worst;
}

inline double pair_slack_gaussian(const DiscreteMechanism& m, const Guarantee& g,
                                  const std::vector<double>& zgrid, std::size_t i, std::size_t j) {
    double mu = g.bound()(i, j);
    TradeoffCurve curve = tradeoff_curve_log(m.log_row(i), m.log_row(j));
    double worst = kInf;
    for (std::size_t t = 0; t < zgrid.size(); ++t) {
        double alpha = static_cast<double>(t) / static_cast<double>(zgrid.size() - 1);
        double target;
        if (is_inf(mu))
            target = 0.0;
        else if (alpha == 0.0)
            target = 1.0;
        else if (alpha == 1.0)
            target = 0.0;
        else
            target = norm_cdf(zgrid[t] - mu);
        worst = std::min(worst, curve(alpha) - target);
    }
    return worst;
}

}  // namespace detail

// Exhaustive check of a guarantee against a mechanism's actual table, over
// all ordered pairs or the neighbor pairs of a granularity. slack is the
// worst observed margin; negative slack beyond the tolerance fails. The
// worst pair is the lexicographically first minimizer.
inline VerificationReport verify_guarantee(const DiscreteMechanism& m, const Guarantee& g,
                                           PairMode mode, const GranularityPtr& granularity = nullptr,
                                           Tolerances tol = {}, bool with_matrix = false) {
    if (!same_class(m.class_ref(), g.class_ref()))
        throw ClassMismatch("guarantee over a different class than the mechanism");
    if (mode == PairMode::neighbors) {
        if (!granularity) throw DomainError("neighbor mode needs a granularity");
        if (!same_class(granularity->class_ref(), m.class_ref()))
            throw ClassMismatch("granularity over a different class than the mechanism");
    }

    std::vector<double> zgrid;
    if (g.flavor() == Flavor::gaussian) {
        zgrid.resize(kTradeoffGridPoints);
        for (std::size_t t = 0; t < zgrid.size(); ++t)
            zgrid[t] = detail::norm_quantile(1.0 - static_cast<double>(t) /
                                                       static_cast<double>(zgrid.size() - 1));
    }

    auto slack_of = [&](std::size_t i, std::size_t j) {
        switch (g.flavor()) {
            case Flavor::pure: return detail::pair_slack_pure(m, g, i, j);
            case Flavor::approximate: return detail::pair_slack_approx(m, g, i, j);
            case Flavor::zero_concentrated: return detail::pair_slack_zc(m, g, i, j);
            case Flavor::gaussian: return detail::pair_slack_gaussian(m, g, zgrid, i, j);
        }
        throw FlavorMismatch("unknown guarantee flavor");
    };

    const std::size_t n = m.class_ref()->size();
    VerificationReport report;
    report.method = (g.flavor() == Flavor::zero_concentrated || g.flavor() == Flavor::gaussian)
                        ? "grid-verified"
                        : "exact";
    report.tolerance = g.flavor() == Flavor::gaussian ? tol.tradeoff : tol.divergence;
    if (with_matrix) report.per_pair_slack = DistMatrix(n, kInf);

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            if (mode == PairMode::neighbors && !granularity->are_neighbors(i, j)) continue;
            double s = slack_of(i, j);
            if (with_matrix) (*report.per_pair_slack)(i, j) = s;
            if (s < report.slack) {
                report.slack = s;
                report.worst_pair = {i, j};
            }
        }
    report.passed = report.slack >= -report.tolerance;
    return report;
}

// Per-stage reverse check: each coordinate marginal of a composed mechanism
// is verified against its own claim. A failing composition names at least
// one failing marginal when a marginal is in fact to blame.
inline std::vector<VerificationReport> diagnose_components(const DiscreteMechanism& m,
                                                           const std::vector<Guarantee>& claims,
                                                           PairMode mode,
                                                           const GranularityPtr& granularity = nullptr,
                                                           Tolerances tol = {}) {
    if (!m.tuple()) throw NotATuple("mechanism has no tuple structure");
    if (claims.size() != m.tuple()->factors.size())
        throw DomainError("one claim per composed stage required");
    std::vector<VerificationReport> out;
    for (std::size_t t = 0; t < claims.size(); ++t)
        out.push_back(verify_guarantee(stage_marginal(m, t), claims[t], mode, granularity, tol));
    return out;
}

}  // namespace dpcomp
