#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dpcomp/database.hpp"
#include "dpcomp/errors.hpp"

namespace dpcomp {

enum class GranularityKind { unbounded, bounded, free_lunch, custom };

inline const char* kind_name(GranularityKind k) {
    switch (k) {
        case GranularityKind::unbounded: return "unbounded";
        case GranularityKind::bounded: return "bounded";
        case GranularityKind::free_lunch: return "free_lunch";
        default: return "custom";
    }
}

// Symmetric irreflexive neighbor relation over a class, as adjacency lists.
class Granularity {
public:
    Granularity(ClassPtr cls, GranularityKind kind, std::string name,
                std::vector<std::vector<std::size_t>> adjacency)
        : class_(std::move(cls)), kind_(kind), name_(std::move(name)), adj_(std::move(adjacency)) {
        if (adj_.size() != class_->size()) throw CalculusError("adjacency size mismatch");
        for (std::size_t i = 0; i < adj_.size(); ++i) {
            std::sort(adj_[i].begin(), adj_[i].end());
            adj_[i].erase(std::unique(adj_[i].begin(), adj_[i].end()), adj_[i].end());
            for (std::size_t j : adj_[i]) {
                if (j >= adj_.size()) throw CalculusError("adjacency index out of range");
                if (j == i) throw CalculusError("granularity must be irreflexive");
                if (!std::binary_search(adj_[j].begin(), adj_[j].end(), i)) {
                    // Callers may pass one direction only; symmetrize lazily is
                    // not allowed here because adj_[j] is already sorted.
                    throw CalculusError("granularity must be symmetric");
                }
            }
        }
    }

    const ClassPtr& class_ref() const { return class_; }
    GranularityKind kind() const { return kind_; }
    const std::string& name() const { return name_; }
    const std::vector<std::size_t>& neighbors_of(std::size_t i) const { return adj_.at(i); }
    std::size_t size() const { return adj_.size(); }

    bool are_neighbors(std::size_t i, std::size_t j) const {
        return std::binary_search(adj_.at(i).begin(), adj_.at(i).end(), j);
    }

private:
    ClassPtr class_;
    GranularityKind kind_;
    std::string name_;
    std::vector<std::vector<std::size_t>> adj_;
};

using GranularityPtr = std::shared_ptr<const Granularity>;

namespace detail {

inline bool ordered_single_change(const Database& a, const Database& b) {
    const auto& as = a.records_by_id();
    const auto& bs = b.records_by_id();
    if (as.size() != bs.size()) return false;
    std::size_t diff = 0;
    for (std::size_t i = 0; i < as.size(); ++i)
        if (as[i] != bs[i] && ++diff > 1) return false;
    return diff == 1;
}

}  // namespace detail

// unbounded: one record added or removed; bounded: one record changed (for
// ordered members: the record at exactly one identifier differs);
// free_lunch: every distinct pair.
inline GranularityPtr builtin_granularity(const ClassPtr& cls, GranularityKind kind,
                                          std::string name = "") {
    if (!cls || cls->size() == 0) throw UnsupportedClass("granularity over empty class");
    if (kind == GranularityKind::custom)
        throw UnsupportedClass("custom granularity needs an explicit edge list");
    if (cls->ordered() && kind == GranularityKind::unbounded)
        throw UnsupportedClass("unbounded is undefined for ordered members");

    const std::size_t n = cls->size();
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const Database& a = cls->member(i);
            const Database& b = cls->member(j);
            bool edge = false;
            switch (kind) {
                case GranularityKind::unbounded:
                    edge = a.symdiff_size(b) == 1;
                    break;
                case GranularityKind::bounded:
                    edge = cls->ordered() ? detail::ordered_single_change(a, b)
                                          : (a.size() == b.size() && a.symdiff_size(b) == 2);
                    break;
                case GranularityKind::free_lunch:
                    edge = true;
                    break;
                default:
                    break;
            }
            if (edge) {
                adj[i].push_back(j);
                adj[j].push_back(i);
            }
        }
    }
    if (name.empty()) name = kind_name(kind);
    return std::make_shared<Granularity>(cls, kind, std::move(name), std::move(adj));
}

inline GranularityPtr custom_granularity(const ClassPtr& cls, std::string name,
                                         const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    if (!cls || cls->size() == 0) throw UnsupportedClass("granularity over empty class");
    std::vector<std::vector<std::size_t>> adj(cls->size());
    for (auto& [i, j] : edges) {
        if (i >= cls->size() || j >= cls->size()) throw NotInClass("edge index outside class");
        if (i == j) throw CalculusError("granularity must be irreflexive");
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    return std::make_shared<Granularity>(cls, GranularityKind::custom, std::move(name), std::move(adj));
}

// The adjacency row of D, materialized as databases.
inline std::vector<Database> neighbors(const Granularity& g, const Database& d) {
    auto idx = g.class_ref()->index_of(d);
    if (!idx) throw NotInClass("database is not a member of the class");
    std::vector<Database> out;
    for (std::size_t j : g.neighbors_of(*idx)) out.push_back(g.class_ref()->member(j));
    return out;
}

}  // namespace dpcomp
