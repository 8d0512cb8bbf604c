#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpcomp/guarantee.hpp"

namespace dpcomp {

enum class Mode { independent, adaptive };

inline const char* mode_name(Mode m) { return m == Mode::independent ? "independent" : "adaptive"; }

// One released mechanism: where its input comes from and what it promises.
// dependent = true marks common-domain steps whose guarantee is stated over
// the plan domain itself. Scalar budgets are carried when the guarantee is
// budget * canonical metric; the best-bound rules consume them.
struct PlanStep {
    MapBetweenClasses map;
    Guarantee guarantee;
    bool dependent = false;
    std::optional<double> eps;
    std::optional<double> delta0;
    std::optional<double> rho;
    std::optional<double> mu;
};

class CompositionPlan {
public:
    CompositionPlan(ClassPtr domain, std::vector<PlanStep> steps, Mode mode)
        : domain_(std::move(domain)), steps_(std::move(steps)), mode_(mode) {
        if (steps_.empty()) throw CalculusError("plan needs at least one step");
        for (const auto& s : steps_) {
            if (!same_class(s.map.source(), domain_))
                throw ClassMismatch("step map source must be the plan domain");
            const ClassPtr& expected = s.dependent ? domain_ : s.map.target();
            if (!same_class(s.guarantee.class_ref(), expected))
                throw ClassMismatch("step guarantee stated over the wrong class");
        }
    }

    const ClassPtr& domain() const { return domain_; }
    const std::vector<PlanStep>& steps() const { return steps_; }
    Mode mode() const { return mode_; }

private:
    ClassPtr domain_;
    std::vector<PlanStep> steps_;
    Mode mode_;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> fibers_of(const MapBetweenClasses& f) {
    std::vector<std::vector<std::size_t>> fibers(f.target()->size());
    for (std::size_t i = 0; i < f.source()->size(); ++i) fibers[f(i)].push_back(i);
    return fibers;
}

inline DistMatrix pullback_values(const DistMatrix& d, const MapBetweenClasses& f) {
    const std::size_t n = f.source()->size();
    DistMatrix out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = d(f(i), f(j));
    return out;
}

inline DistMatrix fiber_min_values(const DistMatrix& d, const MapBetweenClasses& f) {
    auto fibers = fibers_of(f);
    const std::size_t n = d.size();
    DistMatrix out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double best = kInf;
            for (std::size_t a : fibers[f(i)])
                for (std::size_t b : fibers[f(j)]) best = std::min(best, d(a, b));
            out(i, j) = best;
            out(j, i) = best;
        }
    return out;
}

}  // namespace detail

// Entrywise sum of pulled-back step bounds; the independent and adaptive
// modes share this bound, so the mode does not enter the computation.
inline Bound compose_metrics(const CompositionPlan& plan) {
    const std::size_t n = plan.domain()->size();
    DistMatrix sum(n, 0.0);
    for (const auto& step : plan.steps()) {
        if (step.guarantee.flavor() != Flavor::pure)
            throw FlavorMismatch("metric composition needs pure steps");
        if (step.dependent)
            throw FlavorMismatch("common-domain step in variable-domain composition");
        DistMatrix part = detail::pullback_values(step.guarantee.bound().values(), step.map);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) sum(i, j) = xadd(sum(i, j), part(i, j));
    }
    return Bound(plan.domain(), std::move(sum), true, "composed-sum");
}

// Fiber minimum: out(i,j) = min d over preimages of f(i) x preimages of
// f(j). A valid privacy bound for mechanisms reading f(D), but generally not
// a metric.
inline Bound minimum_privacy(const Metric& d, const MapBetweenClasses& f) {
    if (!same_class(d.class_ref(), f.source())) throw ClassMismatch("metric must be over the map source");
    return Bound(f.source(), detail::fiber_min_values(d.dist(), f), false, "fiber-minimum");
}

inline Bound minimum_privacy(const Bound& d, const MapBetweenClasses& f) {
    if (!same_class(d.class_ref(), f.source())) throw ClassMismatch("bound must be over the map source");
    return Bound(f.source(), detail::fiber_min_values(d.values(), f), false, "fiber-minimum");
}

// Sum of per-step fiber minima for dependent steps sharing the plan domain.
inline Bound compose_common_domain(const CompositionPlan& plan) {
    const std::size_t n = plan.domain()->size();
    DistMatrix sum(n, 0.0);
    for (const auto& step : plan.steps()) {
        if (step.guarantee.flavor() != Flavor::pure)
            throw FlavorMismatch("common-domain composition needs pure steps");
        if (!step.dependent) throw DependencyFlagMissing("step not marked common-domain");
        DistMatrix part = detail::fiber_min_values(step.guarantee.bound().values(), step.map);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) sum(i, j) = xadd(sum(i, j), part(i, j));
    }
    return Bound(plan.domain(), std::move(sum), false, "common-domain-sum");
}

struct PartitionReport {
    bool disjoint = true;
    bool exhaustive = true;
    std::map<std::string, bool> compatible_with;
    std::map<std::string, std::size_t> max_i_p;
    std::map<std::string, std::optional<std::pair<std::size_t, std::size_t>>> incompatibility_witness;
    // Per-block sensitivities, keyed by granularity; a key is absent when the
    // granularity kind cannot be instantiated on some block target.
    std::map<std::string, std::vector<double>> delta_p;
    std::map<std::string, bool> commutes;
};

// Structural analysis of candidate partition maps: blockwise containment,
// change counts I_p over neighbor pairs, per-block sensitivities, and the
// commutation identity sum_i d*(p_i(D), p_i(D')) = d*(U p_i(D), U p_i(D'))
// <= d*(D, D') per metric family.
inline PartitionReport analyze_partition(const std::vector<MapBetweenClasses>& maps,
                                         const std::vector<GranularityPtr>& granularities,
                                         const std::vector<MetricSelector>& metrics) {
    if (maps.empty()) throw CalculusError("partition analysis needs at least one map");
    const ClassPtr& cls = maps.front().source();
    for (const auto& m : maps)
        if (!same_class(m.source(), cls)) throw ClassMismatch("partition maps over different classes");
    for (const auto& g : granularities)
        if (!same_class(g->class_ref(), cls)) throw ClassMismatch("granularity over a different class");

    const std::size_t n = cls->size();
    const std::size_t k = maps.size();

    PartitionReport report;

    // Containment, disjointness, exhaustiveness. Blocks are disjoint
    // sub-multisets exactly when their combined multiplicities stay within D.
    for (std::size_t i = 0; i < n; ++i) {
        Database whole = cls->member(i).as_multiset();
        Database combined = Database::multiset({});
        for (std::size_t b = 0; b < k; ++b) {
            Database block = maps[b].target()->member(maps[b](i)).as_multiset();
            if (!block.subset_of(whole))
                throw NotASubsetMap("block " + std::to_string(b) + " not contained in member " +
                                    cls->member(i).encoding());
            combined = combined.sum(block);
        }
        if (!combined.subset_of(whole)) report.disjoint = false;
        if (!(combined == whole)) report.exhaustive = false;
    }

    auto change_count = [&](std::size_t i, std::size_t j) {
        std::size_t c = 0;
        for (const auto& m : maps)
            if (m(i) != m(j)) ++c;
        return c;
    };

    for (const auto& g : granularities) {
        std::size_t worst = 0;
        std::optional<std::pair<std::size_t, std::size_t>> witness;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j : g->neighbors_of(i)) {
                if (j <= i) continue;
                std::size_t c = change_count(i, j);
                if (c > worst) worst = c;
                if (c >= 2 && !witness) witness = std::make_pair(i, j);
            }
        report.max_i_p[g->name()] = worst;
        report.compatible_with[g->name()] = worst <= 1;
        report.incompatibility_witness[g->name()] = witness;

        if (g->kind() == GranularityKind::custom) continue;
        Metric source_d = canonical_metric(g);
        std::vector<double> sens;
        bool available = true;
        for (const auto& m : maps) {
            GranularityPtr tg;
            try {
                tg = builtin_granularity(m.target(), g->kind());
            } catch (const UnsupportedClass&) {
                available = false;
                break;
            }
            sens.push_back(sensitivity(m, source_d, canonical_metric(tg)).value);
        }
        if (available) report.delta_p[g->name()] = std::move(sens);
    }

    for (const auto& sel : metrics) {
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i)
            for (std::size_t j = i + 1; j < n && ok; ++j) {
                double sum = 0.0;
                Database ua = Database::multiset({});
                Database ub = Database::multiset({});
                for (const auto& m : maps) {
                    const Database& a = m.target()->member(m(i));
                    const Database& b = m.target()->member(m(j));
                    sum = xadd(sum, sel.eval(a, b));
                    ua = ua.sum(a.as_multiset());
                    ub = ub.sum(b.as_multiset());
                }
                double united = sel.eval(ua, ub);
                double whole = sel.eval(cls->member(i), cls->member(j));
                bool equal = (is_inf(sum) && is_inf(united)) || std::abs(sum - united) <= 1e-9;
                bool below = sum <= whole + 1e-9;
                if (!equal || !below) ok = false;
            }
        report.commutes[sel.label] = ok;
    }

    return report;
}

// Disjoint-inputs best bound: when every neighbor change touches at most one
// block (and, for variable-domain plans, each block map is 1-Lipschitz), the
// composed budget collapses to the worst single budget.
inline Bound best_bound_disjoint(const CompositionPlan& plan, const GranularityPtr& granularity,
                                 const std::vector<double>& budgets) {
    if (budgets.size() != plan.steps().size()) throw DomainError("one budget per step required");
    for (double e : budgets)
        if (!(e >= 0.0)) throw NegativeScale("budgets must be non-negative");
    if (!same_class(granularity->class_ref(), plan.domain()))
        throw ClassMismatch("granularity over a different class");

    bool any_dep = false, all_dep = true;
    for (const auto& s : plan.steps()) {
        any_dep = any_dep || s.dependent;
        all_dep = all_dep && s.dependent;
    }
    if (any_dep && !all_dep) throw PreconditionFailed("mixed-dependency-flags");

    std::vector<MapBetweenClasses> maps;
    for (const auto& s : plan.steps()) maps.push_back(s.map);
    PartitionReport report = analyze_partition(maps, {granularity}, {});

    if (!report.disjoint) throw PreconditionFailed("blocks-pairwise-disjoint");
    if (!report.compatible_with.at(granularity->name()))
        throw PreconditionFailed("granularity-compatibility");
    if (!all_dep) {
        auto it = report.delta_p.find(granularity->name());
        if (it == report.delta_p.end()) throw PreconditionFailed("block-sensitivity-available");
        for (double s : it->second)
            if (!(s <= 1.0)) throw PreconditionFailed("block-sensitivity-bound");
    }

    double worst = 0.0;
    for (double e : budgets) worst = std::max(worst, e);
    Metric out = scale(canonical_metric(granularity), worst);
    return Bound(plan.domain(), out.dist(), true,
                 all_dep ? "disjoint-best-bound-common" : "disjoint-best-bound");
}

// Label sets claimed by each block of a universe-split partition, or nullopt
// when the maps do not split by record label.
inline std::optional<std::vector<std::vector<std::string>>> universe_split_labels(
    const std::vector<MapBetweenClasses>& maps) {
    if (maps.empty()) return std::nullopt;
    const ClassPtr& cls = maps.front().source();
    if (cls->ordered()) return std::nullopt;
    const std::size_t labels = cls->universe().size();

    std::vector<std::vector<std::string>> kept(maps.size());
    std::vector<std::vector<bool>> keeps(maps.size(), std::vector<bool>(labels, false));
    for (std::size_t b = 0; b < maps.size(); ++b) {
        if (!same_class(maps[b].source(), cls)) return std::nullopt;
        std::vector<bool> drops(labels, false);
        for (std::size_t i = 0; i < cls->size(); ++i) {
            const Database& whole = cls->member(i);
            const Database& block = maps[b].target()->member(maps[b](i));
            if (block.is_ordered()) return std::nullopt;
            for (RecordId r = 0; r < labels; ++r) {
                std::uint32_t mw = whole.multiplicity(r);
                if (mw == 0) continue;
                std::uint32_t mb = block.multiplicity(r);
                if (mb == mw)
                    keeps[b][r] = true;
                else if (mb == 0)
                    drops[r] = true;
                else
                    return std::nullopt;
            }
        }
        for (RecordId r = 0; r < labels; ++r) {
            if (keeps[b][r] && drops[r]) return std::nullopt;
            if (keeps[b][r]) kept[b].push_back(cls->universe().label(r));
        }
    }
    for (RecordId r = 0; r < labels; ++r) {
        std::size_t owners = 0;
        for (std::size_t b = 0; b < maps.size(); ++b)
            if (keeps[b][r]) ++owners;
        if (owners > 1) return std::nullopt;
    }
    return kept;
}

struct BoundedParallelResult {
    Bound bound;
    double coefficient = 0.0;
    std::optional<Bound> sharper;
};

// Bounded budgets over a universe split: a swap can touch two blocks, so the
// coefficient is the worst budget pair, not the worst budget.
inline BoundedParallelResult bounded_parallel_bound(const ClassPtr& cls,
                                                    const std::vector<MapBetweenClasses>& maps,
                                                    const std::vector<double>& budgets,
                                                    bool with_sharper = false) {
    if (maps.size() < 2) throw NeedTwoBlocks("pairwise bound needs at least two blocks");
    if (budgets.size() != maps.size()) throw DomainError("one budget per block required");
    for (double e : budgets)
        if (!(e >= 0.0)) throw NegativeScale("budgets must be non-negative");
    if (!universe_split_labels(maps)) throw PreconditionFailed("universe-split");

    double coeff = 0.0;
    for (std::size_t i = 0; i < budgets.size(); ++i)
        for (std::size_t j = i + 1; j < budgets.size(); ++j)
            coeff = std::max(coeff, budgets[i] + budgets[j]);

    Metric bounded = canonical_metric(builtin_granularity(cls, GranularityKind::bounded));
    Bound main(cls, scale(bounded, coeff).dist(), true, "bounded-pairwise-parallel");

    std::optional<Bound> sharper;
    if (with_sharper) {
        const std::size_t n = cls->size();
        DistMatrix sum(n, 0.0);
        for (std::size_t b = 0; b < maps.size(); ++b) {
            DistMatrix part = detail::fiber_min_values(bounded.dist(), maps[b]);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    sum(i, j) = xadd(sum(i, j), xscale(budgets[b], part(i, j)));
        }
        sharper = Bound(cls, std::move(sum), false, "bounded-parallel-blockwise");
    }
    return {std::move(main), coeff, std::move(sharper)};
}

}  // namespace dpcomp
