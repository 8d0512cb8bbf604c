#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpcomp/metric.hpp"

namespace dpcomp {

// Deterministic map between two classes, stored as an index table.
class MapBetweenClasses {
public:
    MapBetweenClasses(ClassPtr source, ClassPtr target, std::vector<std::size_t> image,
                      std::string name)
        : source_(std::move(source)), target_(std::move(target)), image_(std::move(image)),
          name_(std::move(name)) {
        if (image_.size() != source_->size()) throw ClassMismatch("map must be total on source");
        for (std::size_t t : image_)
            if (t >= target_->size()) throw NotInClass("map image outside target class");
    }

    const ClassPtr& source() const { return source_; }
    const ClassPtr& target() const { return target_; }
    std::size_t operator()(std::size_t i) const { return image_.at(i); }
    const std::vector<std::size_t>& image() const { return image_; }
    const std::string& name() const { return name_; }

private:
    ClassPtr source_;
    ClassPtr target_;
    std::vector<std::size_t> image_;
    std::string name_;
};

inline MapBetweenClasses identity_map(const ClassPtr& cls, std::string name = "id") {
    std::vector<std::size_t> image(cls->size());
    for (std::size_t i = 0; i < image.size(); ++i) image[i] = i;
    return MapBetweenClasses(cls, cls, std::move(image), std::move(name));
}

namespace detail {

// Builds the target class from the distinct images, in order of first
// occurrence, and returns the index table alongside it.
inline MapBetweenClasses map_from_images(const ClassPtr& source, std::vector<Database> images,
                                         bool ordered, std::string name) {
    std::vector<Database> distinct;
    std::map<std::string, std::size_t> seen;
    std::vector<std::size_t> table(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        auto [it, fresh] = seen.emplace(images[i].encoding(), distinct.size());
        if (fresh) distinct.push_back(images[i]);
        table[i] = it->second;
    }
    auto target = std::make_shared<DatabaseClass>(source->universe_ptr(), std::move(distinct), ordered);
    return MapBetweenClasses(source, std::move(target), std::move(table), std::move(name));
}

}  // namespace detail

// D -> D restricted to a label subset (multiset classes).
inline MapBetweenClasses restrict_map(const ClassPtr& cls, const std::vector<std::string>& labels,
                                      std::string name) {
    if (cls->ordered()) throw OrderedUnsupported("restriction map needs multiset members");
    std::vector<bool> keep(cls->universe().size(), false);
    for (const auto& l : labels) {
        auto id = cls->universe().id(l);
        if (!id) throw NotInClass("unknown record label: " + l);
        keep[*id] = true;
    }
    std::vector<Database> images;
    images.reserve(cls->size());
    for (const auto& m : cls->members()) images.push_back(m.restrict_to(keep));
    return detail::map_from_images(cls, std::move(images), false, std::move(name));
}

// Ordered classes: keep the records at the given identifiers (1-based),
// re-indexed by rank within the kept set.
inline MapBetweenClasses order_split_map(const ClassPtr& cls, std::vector<std::size_t> positions,
                                         std::string name) {
    if (!cls->ordered()) throw UnsupportedClass("order split needs an ordered class");
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
    std::vector<Database> images;
    images.reserve(cls->size());
    for (const auto& m : cls->members()) {
        const auto& seq = m.records_by_id();
        std::vector<RecordId> kept;
        for (std::size_t p : positions) {
            if (p == 0 || p > seq.size()) throw NotInClass("identifier outside database size");
            kept.push_back(seq[p - 1]);
        }
        images.push_back(Database::sequence(std::move(kept)));
    }
    return detail::map_from_images(cls, std::move(images), true, std::move(name));
}

// Record-level relabeling through a function on the universe (unmapped
// labels pass through); the target universe is the set of image labels.
inline MapBetweenClasses project_map(const ClassPtr& cls,
                                     const std::vector<std::pair<std::string, std::string>>& mapping,
                                     std::string name) {
    const RecordUniverse& u = cls->universe();
    std::vector<std::string> image_label(u.labels());
    for (const auto& [from, to] : mapping) {
        auto id = u.id(from);
        if (!id) throw NotInClass("unknown record label: " + from);
        image_label[*id] = to;
    }
    std::vector<std::string> target_labels = image_label;
    std::sort(target_labels.begin(), target_labels.end());
    target_labels.erase(std::unique(target_labels.begin(), target_labels.end()),
                        target_labels.end());
    auto target_universe = std::make_shared<RecordUniverse>(target_labels);

    std::vector<Database> images;
    images.reserve(cls->size());
    for (const auto& m : cls->members()) {
        if (cls->ordered()) {
            std::vector<RecordId> seq;
            for (RecordId r : m.records_by_id()) seq.push_back(*target_universe->id(image_label[r]));
            images.push_back(Database::sequence(std::move(seq)));
        } else {
            std::vector<std::pair<RecordId, std::uint32_t>> counts;
            for (const auto& [r, c] : m.counts())
                counts.emplace_back(*target_universe->id(image_label[r]), c);
            images.push_back(Database::multiset(std::move(counts)));
        }
    }

    std::vector<Database> distinct;
    std::map<std::string, std::size_t> seen;
    std::vector<std::size_t> table(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        auto [it, fresh] = seen.emplace(images[i].encoding(), distinct.size());
        if (fresh) distinct.push_back(images[i]);
        table[i] = it->second;
    }
    auto target =
        std::make_shared<DatabaseClass>(std::move(target_universe), std::move(distinct), cls->ordered());
    return MapBetweenClasses(cls, std::move(target), std::move(table), std::move(name));
}

inline MapBetweenClasses compose_maps(const MapBetweenClasses& f, const MapBetweenClasses& g) {
    if (!same_class(f.target(), g.source())) throw ClassMismatch("map composition domain mismatch");
    std::vector<std::size_t> image(f.source()->size());
    for (std::size_t i = 0; i < image.size(); ++i) image[i] = g(f(i));
    return MapBetweenClasses(f.source(), g.target(), std::move(image), g.name() + "." + f.name());
}

// --- Metric algebra ---------------------------------------------------

// Entrywise eps * d with the 0 * inf = 0 convention.
inline Metric scale(const Metric& d, double eps) {
    if (eps < 0.0) throw NegativeScale("scale factor must be non-negative");
    const std::size_t n = d.size();
    DistMatrix out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = xscale(eps, d(i, j));
    std::string name = (eps == 1.0) ? d.name() : std::to_string(eps) + "*" + d.name();
    return Metric(d.class_ref(), std::move(out), std::move(name), d.is_canonical_of());
}

struct DominationResult {
    bool dominated = false;
    std::optional<std::pair<std::size_t, std::size_t>> counterexample;
};

// True iff d1 <= k * d2 everywhere; the counterexample is the first
// violating pair in row-major index order.
inline DominationResult is_dominated(const Metric& d1, const Metric& d2, double k) {
    if (!same_class(d1.class_ref(), d2.class_ref())) throw ClassMismatch("metrics over different classes");
    if (!(k > 0.0)) throw DomainError("domination factor must be positive");
    const std::size_t n = d1.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (d1(i, j) > xscale(k, d2(i, j))) return {false, std::make_pair(i, j)};
    return {true, std::nullopt};
}

// max over g2-neighbor pairs of the canonical g1 distance; 0 when g2 has no
// neighbor pairs (empty max), +inf when some pair is disconnected in g1.
inline double granularity_distance(const GranularityPtr& g1, const GranularityPtr& g2) {
    if (!same_class(g1->class_ref(), g2->class_ref()))
        throw ClassMismatch("granularities over different classes");
    Metric d1 = canonical_metric(g1);
    double best = 0.0;
    for (std::size_t i = 0; i < g2->size(); ++i)
        for (std::size_t j : g2->neighbors_of(i)) best = std::max(best, d1(i, j));
    return best;
}

inline double diameter(const Metric& d) {
    double best = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = i + 1; j < d.size(); ++j) best = std::max(best, d(i, j));
    return best;
}

struct SensitivityResult {
    double value = 0.0;
    std::optional<std::pair<std::size_t, std::size_t>> witness;
};

// Smallest Delta with d2(f(D), f(D')) <= Delta * d1(D, D') over all pairs at
// finite d1. Ratio conventions: 0/0 = 0; positive/0 = inf (pseudo-zero).
// The witness is the first pair attaining the maximum.
inline SensitivityResult sensitivity(const MapBetweenClasses& f, const Metric& d1, const Metric& d2) {
    if (!same_class(d1.class_ref(), f.source())) throw ClassMismatch("d1 must be over the map source");
    if (!same_class(d2.class_ref(), f.target())) throw ClassMismatch("d2 must be over the map target");
    SensitivityResult out;
    double best = -1.0;
    const std::size_t n = d1.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double lo = d1(i, j);
            if (is_inf(lo)) continue;
            double hi = d2(f(i), f(j));
            double ratio;
            if (hi == 0.0)
                ratio = 0.0;
            else if (lo == 0.0)
                ratio = kInf;
            else
                ratio = hi / lo;
            if (ratio > best) {
                best = ratio;
                out.witness = std::make_pair(i, j);
            }
        }
    out.value = std::max(best, 0.0);
    return out;
}

// Components under finite-distance reachability, each sorted, listed by
// smallest member index.
inline std::vector<std::vector<std::size_t>> connectivity_report(const Metric& d) {
    const std::size_t n = d.size();
    std::vector<bool> assigned(n, false);
    std::vector<std::vector<std::size_t>> components;
    for (std::size_t i = 0; i < n; ++i) {
        if (assigned[i]) continue;
        std::vector<std::size_t> comp;
        for (std::size_t j = 0; j < n; ++j)
            if (!assigned[j] && !is_inf(d(i, j))) {
                comp.push_back(j);
                assigned[j] = true;
            }
        components.push_back(std::move(comp));
    }
    return components;
}

}  // namespace dpcomp
