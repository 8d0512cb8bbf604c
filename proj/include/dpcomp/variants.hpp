#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpcomp/composition.hpp"

namespace dpcomp {

namespace detail {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

// Rational initial estimate (Acklam) polished by two Halley steps against
// the erfc-based CDF; absolute error well under 1e-14 away from {0, 1}.
inline double norm_quantile(double p) {
    if (p <= 0.0) return -kInf;
    if (p >= 1.0) return kInf;

    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double low = 0.02425;

    double x;
    if (p < low) {
        double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p > 1.0 - low) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        double q = p - 0.5;
        double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    for (int iter = 0; iter < 2; ++iter) {
        double e = norm_cdf(x) - p;
        double u = e / norm_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    return x;
}

inline double delta_profile_value(double eps, double d) {
    if (is_inf(d)) return kInf;
    if (eps == 0.0) return d;
    return std::expm1(eps * d) / std::expm1(eps);
}

}  // namespace detail

// Gaussian trade-off curve value at rejection level alpha.
inline double g_mu(double mu, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
    if (!(mu >= 0.0)) throw DomainError("mu must be non-negative");
    if (is_inf(mu)) return 0.0;
    if (alpha == 0.0) return 1.0;
    if (alpha == 1.0) return 0.0;
    return detail::norm_cdf(detail::norm_quantile(1.0 - alpha) - mu);
}

// Entrywise (e^{eps d} - 1) / (e^eps - 1); exactly 1 at d = 1, equals d in
// the eps -> 0 limit, which is taken as the eps = 0 definition.
struct DeltaProfile {
    double eps = 0.0;
    DistMatrix values{0, 0.0};
};

inline DeltaProfile delta_scaling(const Metric& d, double eps) {
    if (!(eps >= 0.0)) throw DomainError("profile rate must be non-negative");
    const std::size_t n = d.size();
    DeltaProfile out{eps, DistMatrix(n, 0.0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.values(i, j) = detail::delta_profile_value(eps, d(i, j));
    return out;
}

// Sum of pulled-back (d, delta) pairs; pure steps enter with delta = 0.
inline Guarantee approx_compose(const CompositionPlan& plan) {
    const std::size_t n = plan.domain()->size();
    DistMatrix dsum(n, 0.0);
    DistMatrix deltasum(n, 0.0);
    for (const auto& step : plan.steps()) {
        Flavor f = step.guarantee.flavor();
        if (f != Flavor::approximate && f != Flavor::pure)
            throw FlavorMismatch("approximate composition needs approximate or pure steps");
        if (step.dependent)
            throw FlavorMismatch("common-domain step in variable-domain composition");
        DistMatrix part = detail::pullback_values(step.guarantee.bound().values(), step.map);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) dsum(i, j) = xadd(dsum(i, j), part(i, j));
        if (step.guarantee.has_delta()) {
            DistMatrix dpart = detail::pullback_values(step.guarantee.delta(), step.map);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) deltasum(i, j) = xadd(deltasum(i, j), dpart(i, j));
        }
    }
    return Guarantee::approximate(Bound(plan.domain(), std::move(dsum), true, "approx-composed-sum"),
                                  std::move(deltasum));
}

namespace detail {

// Fiber minimum of d with delta minimized over the distance-minimizing
// fiber pairs only.
inline std::pair<DistMatrix, DistMatrix> fiber_min_with_delta(const DistMatrix& d,
                                                              const DistMatrix& delta,
                                                              const MapBetweenClasses& f) {
    auto fibers = fibers_of(f);
    const std::size_t n = d.size();
    DistMatrix dmin(n, 0.0);
    DistMatrix deltamin(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double bestd = kInf;
            double bestdelta = kInf;
            for (std::size_t a : fibers[f(i)])
                for (std::size_t b : fibers[f(j)]) {
                    if (d(a, b) < bestd) {
                        bestd = d(a, b);
                        bestdelta = delta(a, b);
                    } else if (d(a, b) == bestd) {
                        bestdelta = std::min(bestdelta, delta(a, b));
                    }
                }
            dmin(i, j) = dmin(j, i) = bestd;
            deltamin(i, j) = deltamin(j, i) = bestdelta;
        }
    return {std::move(dmin), std::move(deltamin)};
}

}  // namespace detail

inline Guarantee approx_common_domain(const CompositionPlan& plan) {
    const std::size_t n = plan.domain()->size();
    DistMatrix dsum(n, 0.0);
    DistMatrix deltasum(n, 0.0);
    for (const auto& step : plan.steps()) {
        Flavor f = step.guarantee.flavor();
        if (f != Flavor::approximate && f != Flavor::pure)
            throw FlavorMismatch("approximate composition needs approximate or pure steps");
        if (!step.dependent) throw DependencyFlagMissing("step not marked common-domain");
        DistMatrix zero(n, 0.0);
        const DistMatrix& delta = step.guarantee.has_delta() ? step.guarantee.delta() : zero;
        auto [dmin, deltamin] = detail::fiber_min_with_delta(step.guarantee.bound().values(), delta, step.map);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                dsum(i, j) = xadd(dsum(i, j), dmin(i, j));
                deltasum(i, j) = xadd(deltasum(i, j), deltamin(i, j));
            }
    }
    return Guarantee::approximate(Bound(plan.domain(), std::move(dsum), false, "approx-common-domain-sum"),
                                  std::move(deltasum));
}

namespace detail {

// Shared precondition gate for the disjoint-inputs best bounds. Returns the
// partition report; throws PreconditionFailed naming the first violated
// condition.
inline PartitionReport require_disjoint_best_bound(const CompositionPlan& plan,
                                                   const GranularityPtr& granularity,
                                                   bool need_block_sensitivity) {
    if (!same_class(granularity->class_ref(), plan.domain()))
        throw ClassMismatch("granularity over a different class");
    std::vector<MapBetweenClasses> maps;
    for (const auto& s : plan.steps()) maps.push_back(s.map);
    PartitionReport report = analyze_partition(maps, {granularity}, {});
    if (!report.disjoint) throw PreconditionFailed("blocks-pairwise-disjoint");
    if (!report.compatible_with.at(granularity->name()))
        throw PreconditionFailed("granularity-compatibility");
    if (need_block_sensitivity) {
        auto it = report.delta_p.find(granularity->name());
        if (it == report.delta_p.end()) throw PreconditionFailed("block-sensitivity-available");
        for (double s : it->second)
            if (!(s <= 1.0)) throw PreconditionFailed("block-sensitivity-bound");
    }
    return report;
}

inline bool all_dependent(const CompositionPlan& plan) {
    bool any = false, all = true;
    for (const auto& s : plan.steps()) {
        any = any || s.dependent;
        all = all && s.dependent;
    }
    if (any && !all) throw PreconditionFailed("mixed-dependency-flags");
    return all;
}

}  // namespace detail

// (max eps_i) d^G with delta (max delta_i)[d^G]_{max eps}.
inline Guarantee approx_best_bound_disjoint(const CompositionPlan& plan,
                                            const GranularityPtr& granularity) {
    double maxeps = 0.0, maxdelta = 0.0;
    for (const auto& s : plan.steps()) {
        Flavor f = s.guarantee.flavor();
        if (f != Flavor::approximate && f != Flavor::pure)
            throw FlavorMismatch("approximate best bound needs approximate or pure steps");
        if (!s.eps) throw PreconditionFailed("scalar-budgets");
        maxeps = std::max(maxeps, *s.eps);
        maxdelta = std::max(maxdelta, s.delta0.value_or(0.0));
    }
    bool common = detail::all_dependent(plan);
    detail::require_disjoint_best_bound(plan, granularity, !common);

    Metric base = canonical_metric(granularity);
    DistMatrix delta(base.size(), 0.0);
    for (std::size_t i = 0; i < base.size(); ++i)
        for (std::size_t j = 0; j < base.size(); ++j)
            delta(i, j) = xscale(maxdelta, detail::delta_profile_value(maxeps, base(i, j)));
    Bound bound(plan.domain(), scale(base, maxeps).dist(), true,
                common ? "approx-disjoint-best-bound-common" : "approx-disjoint-best-bound");
    return Guarantee::approximate(std::move(bound), std::move(delta));
}

namespace detail {

// Entrywise l2 of per-step distances: pulled back for variable-domain steps,
// fiber-minimized for common-domain ones.
inline Bound l2_combined(const CompositionPlan& plan, Flavor expect, const char* what,
                         const char* prov_var, const char* prov_dep) {
    const std::size_t n = plan.domain()->size();
    DistMatrix sumsq(n, 0.0);
    bool any_dep = false;
    for (const auto& step : plan.steps()) {
        if (step.guarantee.flavor() != expect) throw FlavorMismatch(what);
        DistMatrix vals = step.dependent
                              ? fiber_min_values(step.guarantee.bound().values(), step.map)
                              : pullback_values(step.guarantee.bound().values(), step.map);
        any_dep = any_dep || step.dependent;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                sumsq(i, j) = xadd(sumsq(i, j), vals(i, j) * vals(i, j));
    }
    DistMatrix out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = std::sqrt(sumsq(i, j));
    return Bound(plan.domain(), std::move(out), !any_dep, any_dep ? prov_dep : prov_var);
}

}  // namespace detail

// Base distances combine in l2 so the stored square is the sum of squares.
inline Guarantee zc_compose(const CompositionPlan& plan) {
    return Guarantee::zero_concentrated(detail::l2_combined(
        plan, Flavor::zero_concentrated, "zero-concentrated composition needs zero-concentrated steps",
        "zc-composed-l2", "zc-common-domain-l2"));
}

// rho = max rho_i over a compatible 1-Lipschitz partition; base sqrt(rho) d^G.
inline Guarantee zc_best_bound_disjoint(const CompositionPlan& plan, const GranularityPtr& granularity) {
    double maxrho = 0.0;
    for (const auto& s : plan.steps()) {
        if (s.guarantee.flavor() != Flavor::zero_concentrated)
            throw FlavorMismatch("zero-concentrated best bound needs zero-concentrated steps");
        if (!s.rho) throw PreconditionFailed("scalar-budgets");
        maxrho = std::max(maxrho, *s.rho);
    }
    detail::all_dependent(plan);
    detail::require_disjoint_best_bound(plan, granularity, true);
    Metric base = scale(canonical_metric(granularity), std::sqrt(maxrho));
    return Guarantee::zero_concentrated(
        Bound(plan.domain(), base.dist(), true, "zc-disjoint-best-bound"));
}

inline Guarantee gdp_compose(const CompositionPlan& plan) {
    return Guarantee::gaussian(detail::l2_combined(plan, Flavor::gaussian,
                                                   "gaussian composition needs gaussian steps",
                                                   "gaussian-composed-l2", "gaussian-common-domain-l2"));
}

struct GdpParallelResult {
    // Exact blockwise l2 matrix; present when the chosen metric family
    // commutes with the partition.
    std::optional<Bound> exact;
    std::optional<double> coefficient;
    std::optional<Bound> closed_form;
    std::string rule;
    std::map<std::string, bool> obligations;
};

// Parallel Gaussian analysis over the plan's block maps. Produces whichever
// of the exact matrix and the closed-form coefficient the observed
// preconditions justify; failing all of them is an error.
inline GdpParallelResult gdp_parallel_bound(const CompositionPlan& plan,
                                            const GranularityPtr& granularity,
                                            const MetricSelector& dstar) {
    std::vector<double> mu;
    for (const auto& s : plan.steps()) {
        if (s.guarantee.flavor() != Flavor::gaussian)
            throw FlavorMismatch("gaussian parallel bound needs gaussian steps");
        if (!s.mu) throw PreconditionFailed("scalar-budgets");
        mu.push_back(*s.mu);
    }
    bool common = detail::all_dependent(plan);

    std::vector<MapBetweenClasses> maps;
    for (const auto& s : plan.steps()) maps.push_back(s.map);
    PartitionReport report = analyze_partition(maps, {granularity}, {dstar});
    if (!report.disjoint) throw PreconditionFailed("blocks-pairwise-disjoint");

    GdpParallelResult out;
    bool commutes = report.commutes.at(dstar.label);
    bool compatible = report.compatible_with.at(granularity->name());
    auto dp = report.delta_p.find(granularity->name());
    bool lipschitz = dp != report.delta_p.end();
    if (lipschitz)
        for (double s : dp->second) lipschitz = lipschitz && s <= 1.0;
    bool split = universe_split_labels(maps).has_value();
    bool bounded = granularity->kind() == GranularityKind::bounded;

    out.obligations["commutes"] = commutes;
    out.obligations["granularity-compatibility"] = compatible;
    out.obligations["block-sensitivity-bound"] = lipschitz;
    out.obligations["universe-split"] = split;
    out.obligations["common-domain"] = common;

    if (commutes) {
        const std::size_t n = plan.domain()->size();
        DistMatrix vals(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                double sumsq = 0.0;
                for (std::size_t b = 0; b < maps.size(); ++b) {
                    double v = dstar.eval(maps[b].target()->member(maps[b](i)),
                                          maps[b].target()->member(maps[b](j)));
                    sumsq = xadd(sumsq, xscale(mu[b] * mu[b], v * v));
                }
                vals(i, j) = vals(j, i) = std::sqrt(sumsq);
            }
        out.exact = Bound(plan.domain(), std::move(vals), true, "gaussian-parallel-exact");
    }

    if (compatible && lipschitz) {
        double coeff = 0.0;
        for (double m : mu) coeff = std::max(coeff, m);
        out.coefficient = coeff;
        out.closed_form = Bound(plan.domain(), scale(canonical_metric(granularity), coeff).dist(),
                                true, "gaussian-disjoint-best-bound");
        out.rule = "gaussian-disjoint-best-bound";
    } else if (split && bounded && common) {
        double coeff = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i)
            for (std::size_t j = i + 1; j < mu.size(); ++j)
                coeff = std::max(coeff, std::sqrt(mu[i] * mu[i] + mu[j] * mu[j]));
        out.coefficient = coeff;
        out.closed_form = Bound(plan.domain(), scale(canonical_metric(granularity), coeff).dist(),
                                true, "gaussian-bounded-pairwise");
        out.rule = "gaussian-bounded-pairwise";
    }

    if (!out.exact && !out.closed_form)
        throw PreconditionFailed("commutation-or-compatibility");
    return out;
}

}  // namespace dpcomp
