#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpcomp/calculus.hpp"

namespace dpcomp {

enum class Flavor { pure, approximate, zero_concentrated, gaussian };

inline const char* flavor_name(Flavor f) {
    switch (f) {
        case Flavor::pure: return "pure";
        case Flavor::approximate: return "approximate";
        case Flavor::zero_concentrated: return "zero_concentrated";
        case Flavor::gaussian: return "gaussian";
    }
    return "?";
}

// A distance-shaped privacy bound over a class. is_metric = false marks
// starred bounds that may violate the triangle inequality; symmetry and a
// zero diagonal are enforced for both kinds.
class Bound {
public:
    Bound(ClassPtr cls, DistMatrix values, bool is_metric, std::string provenance)
        : cls_(std::move(cls)), values_(std::move(values)), is_metric_(is_metric),
          provenance_(std::move(provenance)) {
        if (values_.size() != cls_->size()) throw ClassMismatch("bound size does not match class");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (values_(i, i) != 0.0) throw CalculusError("bound diagonal must be zero");
            for (std::size_t j = 0; j < i; ++j) {
                if (values_(i, j) != values_(j, i)) throw CalculusError("bound must be symmetric");
                if (!(values_(i, j) >= 0.0)) throw CalculusError("bound entries must be non-negative");
            }
        }
    }

    explicit Bound(const Metric& m, std::string provenance = "metric")
        : Bound(m.class_ref(), m.dist(), true, std::move(provenance)) {}

    const ClassPtr& class_ref() const { return cls_; }
    const DistMatrix& values() const { return values_; }
    double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
    std::size_t size() const { return values_.size(); }
    bool is_metric() const { return is_metric_; }
    const std::string& provenance() const { return provenance_; }

private:
    ClassPtr cls_;
    DistMatrix values_;
    bool is_metric_;
    std::string provenance_;
};

// A privacy guarantee: a flavor plus the distance bound it is stated
// against. The delta matrix exists exactly for the approximate flavor.
// zero_concentrated stores the base distance; the operative bound is its
// square, taken on demand to keep squaring at one site.
class Guarantee {
public:
    static Guarantee pure(Bound b) { return Guarantee(Flavor::pure, std::move(b), std::nullopt); }

    static Guarantee approximate(Bound b, DistMatrix delta) {
        if (delta.size() != b.size()) throw ClassMismatch("delta size does not match bound");
        for (std::size_t i = 0; i < delta.size(); ++i) {
            if (delta(i, i) != 0.0) throw CalculusError("delta diagonal must be zero");
            for (std::size_t j = 0; j < i; ++j) {
                if (delta(i, j) != delta(j, i)) throw CalculusError("delta must be symmetric");
                if (!(delta(i, j) >= 0.0)) throw CalculusError("delta entries must be non-negative");
            }
        }
        return Guarantee(Flavor::approximate, std::move(b), std::move(delta));
    }

    static Guarantee zero_concentrated(Bound base) {
        return Guarantee(Flavor::zero_concentrated, std::move(base), std::nullopt);
    }

    static Guarantee gaussian(Bound b) { return Guarantee(Flavor::gaussian, std::move(b), std::nullopt); }

    Flavor flavor() const { return flavor_; }
    const Bound& bound() const { return bound_; }
    const ClassPtr& class_ref() const { return bound_.class_ref(); }
    std::size_t size() const { return bound_.size(); }

    const DistMatrix& delta() const {
        if (!delta_) throw FlavorMismatch("guarantee has no delta part");
        return *delta_;
    }
    bool has_delta() const { return delta_.has_value(); }

    // Renyi budget at order alpha: d(i,j)^2 * alpha.
    double zc_budget(std::size_t i, std::size_t j, double alpha) const {
        if (flavor_ != Flavor::zero_concentrated) throw FlavorMismatch("not a zero-concentrated guarantee");
        double d = bound_(i, j);
        return xscale(alpha, d * d);
    }

    // Entries whose summed delta reached 1; such entries promise nothing and
    // are surfaced verbatim by reports.
    std::vector<std::pair<std::size_t, std::size_t>> saturated_delta_entries() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        if (!delta_) return out;
        for (std::size_t i = 0; i < delta_->size(); ++i)
            for (std::size_t j = i + 1; j < delta_->size(); ++j)
                if ((*delta_)(i, j) >= 1.0) out.emplace_back(i, j);
        return out;
    }

private:
    Guarantee(Flavor f, Bound b, std::optional<DistMatrix> delta)
        : flavor_(f), bound_(std::move(b)), delta_(std::move(delta)) {}

    Flavor flavor_;
    Bound bound_;
    std::optional<DistMatrix> delta_;
};

// Budget * canonical-metric guarantees, the common way plans state steps.
inline Guarantee pure_budget(const GranularityPtr& g, double eps) {
    return Guarantee::pure(Bound(scale(canonical_metric(g), eps), "scaled-canonical"));
}

}  // namespace dpcomp
