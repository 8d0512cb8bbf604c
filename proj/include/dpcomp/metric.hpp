#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dpcomp/extreal.hpp"
#include "dpcomp/granularity.hpp"
#include "dpcomp/matrix.hpp"

namespace dpcomp {

// Extended pseudometric over a class, as a dense matrix. Canonical metrics
// remember their granularity; is_pseudo marks distinct members at distance 0.
class Metric {
public:
    Metric(ClassPtr cls, DistMatrix dist, std::string name, GranularityPtr canonical_of = nullptr)
        : class_(std::move(cls)), dist_(std::move(dist)), name_(std::move(name)),
          canonical_of_(std::move(canonical_of)) {
        const std::size_t n = class_->size();
        if (dist_.size() != n) throw ClassMismatch("matrix size does not match class");
        for (std::size_t i = 0; i < n; ++i) {
            if (dist_(i, i) != 0.0) throw CalculusError("metric diagonal must be zero");
            for (std::size_t j = i + 1; j < n; ++j) {
                if (dist_(i, j) != dist_(j, i)) throw CalculusError("metric must be symmetric");
                if (!(dist_(i, j) >= 0.0)) throw CalculusError("metric must be non-negative");
                if (dist_(i, j) == 0.0) is_pseudo_ = true;
            }
        }
    }

    const ClassPtr& class_ref() const { return class_; }
    const DistMatrix& dist() const { return dist_; }
    double operator()(std::size_t i, std::size_t j) const { return dist_(i, j); }
    std::size_t size() const { return dist_.size(); }
    const std::string& name() const { return name_; }
    const GranularityPtr& is_canonical_of() const { return canonical_of_; }
    bool is_pseudo() const { return is_pseudo_; }

    // Exhaustive triangle-inequality check; O(n^3), meant for tests and
    // custom matrix ingestion, not for the construction hot path.
    bool satisfies_triangle() const {
        const std::size_t n = dist_.size();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = 0; k < n; ++k)
                    if (dist_(i, k) > xadd(dist_(i, j), dist_(j, k))) return false;
        return true;
    }

private:
    ClassPtr class_;
    DistMatrix dist_;
    std::string name_;
    GranularityPtr canonical_of_;
    bool is_pseudo_ = false;
};

inline std::string canonical_metric_name(const Granularity& g) {
    switch (g.kind()) {
        case GranularityKind::unbounded: return "d^U";
        case GranularityKind::bounded: return "d^B";
        case GranularityKind::free_lunch: return "d^FL";
        default: return "d^" + g.name();
    }
}

// Shortest neighbor-chain distance, +inf when disconnected. BFS per source;
// an all-pairs relaxation oracle re-derives this in the test suite.
inline Metric canonical_metric(const GranularityPtr& g) {
    const std::size_t n = g->size();
    DistMatrix dist(n, kInf);
    std::vector<std::size_t> depth(n);
    std::deque<std::size_t> queue;
    for (std::size_t src = 0; src < n; ++src) {
        std::vector<bool> seen(n, false);
        queue.clear();
        queue.push_back(src);
        seen[src] = true;
        depth[src] = 0;
        dist(src, src) = 0.0;
        while (!queue.empty()) {
            std::size_t u = queue.front();
            queue.pop_front();
            for (std::size_t v : g->neighbors_of(u)) {
                if (seen[v]) continue;
                seen[v] = true;
                depth[v] = depth[u] + 1;
                dist(src, v) = static_cast<double>(depth[v]);
                queue.push_back(v);
            }
        }
    }
    return Metric(g->class_ref(), std::move(dist), canonical_metric_name(*g), g);
}

// A metric family evaluable on raw database pairs, independent of any
// enumerated class. Partition analysis needs this form because block images
// and their unions can fall outside the source class.
struct MetricSelector {
    std::string label;
    std::function<double(const Database&, const Database&)> eval;
};

inline MetricSelector symdiff_selector(std::string label = "d^sd") {
    return {std::move(label), [](const Database& a, const Database& b) {
                return static_cast<double>(a.as_multiset().symdiff_size(b.as_multiset()));
            }};
}

inline MetricSelector free_lunch_selector() {
    return {"d^FL", [](const Database& a, const Database& b) { return a == b ? 0.0 : 1.0; }};
}

// Closed form of the canonical unbounded distance on a full multiset class:
// every symmetric-difference path stays inside the class.
inline MetricSelector unbounded_formula_selector() { return symdiff_selector("d^U"); }

// Closed form of the canonical bounded distance on a full class: replacement
// count when sizes match, unreachable otherwise.
inline MetricSelector bounded_formula_selector() {
    return {"d^B", [](const Database& a, const Database& b) {
                if (a.is_ordered() != b.is_ordered()) throw ClassMismatch("mixed database forms");
                if (a.size() != b.size()) return kInf;
                if (a.is_ordered()) {
                    const auto& x = a.records_by_id();
                    const auto& y = b.records_by_id();
                    std::size_t changed = 0;
                    for (std::size_t i = 0; i < x.size(); ++i)
                        if (x[i] != y[i]) ++changed;
                    return static_cast<double>(changed);
                }
                return static_cast<double>(a.symdiff_size(b)) / 2.0;
            }};
}

// Multiset symmetric-difference cardinality; always finite.
inline Metric symmetric_difference_metric(const ClassPtr& cls) {
    if (cls->ordered()) throw OrderedUnsupported("symmetric difference needs multiset members");
    const std::size_t n = cls->size();
    DistMatrix dist(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = static_cast<double>(cls->member(i).symdiff_size(cls->member(j)));
            dist(i, j) = v;
            dist(j, i) = v;
        }
    return Metric(cls, std::move(dist), "d^sd");
}

}  // namespace dpcomp
