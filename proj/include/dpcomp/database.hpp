#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpcomp/errors.hpp"
#include "dpcomp/hash.hpp"

namespace dpcomp {

using RecordId = std::uint32_t;

// Finite universe of record labels; ordering is lexicographic and stable.
class RecordUniverse {
public:
    explicit RecordUniverse(std::vector<std::string> labels) : labels_(std::move(labels)) {
        if (labels_.empty()) throw EmptyUniverse("universe has no record labels");
        std::sort(labels_.begin(), labels_.end());
        if (std::adjacent_find(labels_.begin(), labels_.end()) != labels_.end())
            throw CalculusError("duplicate record label in universe");
        for (std::size_t i = 0; i < labels_.size(); ++i) index_[labels_[i]] = static_cast<RecordId>(i);
    }

    std::size_t size() const { return labels_.size(); }
    const std::string& label(RecordId r) const { return labels_.at(r); }
    const std::vector<std::string>& labels() const { return labels_; }

    std::optional<RecordId> id(const std::string& label) const {
        auto it = index_.find(label);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::vector<std::string> labels_;
    std::map<std::string, RecordId> index_;
};

using UniversePtr = std::shared_ptr<const RecordUniverse>;

// One database: a multiset of records, or an identifier-keyed sequence when
// the class is ordered (identifiers are implicitly 1..|D| in order).
class Database {
public:
    static Database multiset(std::vector<std::pair<RecordId, std::uint32_t>> counts) {
        Database d;
        d.ordered_ = false;
        std::sort(counts.begin(), counts.end());
        for (auto& [r, c] : counts) {
            if (c == 0) continue;
            if (!d.counts_.empty() && d.counts_.back().first == r)
                d.counts_.back().second += c;
            else
                d.counts_.emplace_back(r, c);
        }
        return d;
    }

    static Database sequence(std::vector<RecordId> records) {
        Database d;
        d.ordered_ = true;
        d.seq_ = std::move(records);
        return d;
    }

    bool is_ordered() const { return ordered_; }

    std::size_t size() const {
        if (ordered_) return seq_.size();
        std::size_t s = 0;
        for (auto& [r, c] : counts_) s += c;
        return s;
    }

    std::uint32_t multiplicity(RecordId r) const {
        if (ordered_) {
            std::uint32_t c = 0;
            for (RecordId x : seq_)
                if (x == r) ++c;
            return c;
        }
        for (auto& [x, c] : counts_)
            if (x == r) return c;
        return 0;
    }

    const std::vector<std::pair<RecordId, std::uint32_t>>& counts() const { return counts_; }
    const std::vector<RecordId>& records_by_id() const { return seq_; }

    // Canonical key: stable across runs, used for indexing and digests.
    std::string encoding() const {
        std::string out = ordered_ ? "o" : "m";
        if (ordered_) {
            for (RecordId r : seq_) out += ":" + std::to_string(r);
        } else {
            for (auto& [r, c] : counts_) out += ":" + std::to_string(r) + "x" + std::to_string(c);
        }
        return out;
    }

    bool operator==(const Database& other) const = default;

    // Multiset helpers (throw on ordered operands where noted).

    std::size_t symdiff_size(const Database& other) const {
        std::size_t s = 0;
        walk(other, [&](RecordId, std::uint32_t a, std::uint32_t b) {
            s += (a > b) ? (a - b) : (b - a);
        });
        return s;
    }

    bool subset_of(const Database& other) const {
        bool ok = true;
        walk(other, [&](RecordId, std::uint32_t a, std::uint32_t b) {
            if (a > b) ok = false;
        });
        return ok;
    }

    bool disjoint_with(const Database& other) const {
        bool ok = true;
        walk(other, [&](RecordId, std::uint32_t a, std::uint32_t b) {
            if (a > 0 && b > 0) ok = false;
        });
        return ok;
    }

    Database sum(const Database& other) const {
        std::vector<std::pair<RecordId, std::uint32_t>> merged;
        walk(other, [&](RecordId r, std::uint32_t a, std::uint32_t b) {
            merged.emplace_back(r, a + b);
        });
        return multiset(std::move(merged));
    }

    // Records whose label id is in keep (multiset restriction).
    Database restrict_to(const std::vector<bool>& keep) const {
        std::vector<std::pair<RecordId, std::uint32_t>> kept;
        for (auto& [r, c] : counts_)
            if (r < keep.size() && keep[r]) kept.emplace_back(r, c);
        return multiset(std::move(kept));
    }

    // Multiset view of an ordered database.
    Database as_multiset() const {
        if (!ordered_) return *this;
        std::vector<std::pair<RecordId, std::uint32_t>> counts;
        for (RecordId r : seq_) counts.emplace_back(r, 1);
        return multiset(std::move(counts));
    }

private:
    template <class F>
    void walk(const Database& other, F&& f) const {
        if (ordered_ || other.ordered_) throw OrderedUnsupported("multiset operation on ordered database");
        std::size_t i = 0, j = 0;
        while (i < counts_.size() || j < other.counts_.size()) {
            if (j == other.counts_.size() ||
                (i < counts_.size() && counts_[i].first < other.counts_[j].first)) {
                f(counts_[i].first, counts_[i].second, 0u);
                ++i;
            } else if (i == counts_.size() || other.counts_[j].first < counts_[i].first) {
                f(other.counts_[j].first, 0u, other.counts_[j].second);
                ++j;
            } else {
                f(counts_[i].first, counts_[i].second, other.counts_[j].second);
                ++i;
                ++j;
            }
        }
    }

    bool ordered_ = false;
    std::vector<std::pair<RecordId, std::uint32_t>> counts_;
    std::vector<RecordId> seq_;
};

// An enumerated collection of databases with stable indices.
class DatabaseClass {
public:
    DatabaseClass(UniversePtr universe, std::vector<Database> members, bool ordered)
        : universe_(std::move(universe)), members_(std::move(members)), ordered_(ordered) {
        if (!universe_) throw EmptyUniverse("null universe");
        for (std::size_t i = 0; i < members_.size(); ++i) {
            const Database& d = members_[i];
            if (d.is_ordered() != ordered_)
                throw UnsupportedClass("member form does not match class orderedness");
            validate_records(d);
            auto [it, fresh] = index_of_.emplace(d.encoding(), i);
            (void)it;
            if (!fresh) throw CalculusError("duplicate member in class: " + d.encoding());
        }
        std::string blob = ordered_ ? "ordered;" : "multiset;";
        for (const auto& l : universe_->labels()) blob += l + ",";
        for (const auto& m : members_) blob += m.encoding() + ";";
        digest_ = hex_digest(fnv1a(blob));
    }

    const RecordUniverse& universe() const { return *universe_; }
    UniversePtr universe_ptr() const { return universe_; }
    std::size_t size() const { return members_.size(); }
    bool ordered() const { return ordered_; }
    const Database& member(std::size_t i) const { return members_.at(i); }
    const std::vector<Database>& members() const { return members_; }
    const std::string& digest() const { return digest_; }

    std::optional<std::size_t> index_of(const Database& d) const {
        auto it = index_of_.find(d.encoding());
        if (it == index_of_.end()) return std::nullopt;
        return it->second;
    }

private:
    void validate_records(const Database& d) const {
        auto check = [&](RecordId r) {
            if (r >= universe_->size()) throw CalculusError("record id outside universe");
        };
        if (d.is_ordered())
            for (RecordId r : d.records_by_id()) check(r);
        else
            for (auto& [r, c] : d.counts()) check(r);
    }

    UniversePtr universe_;
    std::vector<Database> members_;
    std::map<std::string, std::size_t> index_of_;
    bool ordered_ = false;
    std::string digest_;
};

using ClassPtr = std::shared_ptr<const DatabaseClass>;

inline bool same_class(const ClassPtr& a, const ClassPtr& b) {
    return a.get() == b.get() || (a && b && a->digest() == b->digest());
}

// Enumeration request for a database class.
struct ClassSpec {
    enum class Kind { max_size, exact_size, explicit_members, ordered_exact_size };

    Kind kind = Kind::max_size;
    UniversePtr universe;
    std::size_t size = 0;  // N for the size-based kinds
    std::vector<Database> members;
    std::size_t cap = 20000;
};

namespace detail {

// Count of multisets of a given size over k labels: C(size + k - 1, k - 1).
// Saturates at cap + 1 to avoid overflow.
inline std::size_t multiset_count(std::size_t k, std::size_t size, std::size_t cap) {
    unsigned long long n = 1;
    for (std::size_t i = 1; i <= size; ++i) {
        n = n * (k - 1 + i) / i;  // exact: product of consecutive binomials
        if (n > cap) return cap + 1;
    }
    return static_cast<std::size_t>(n);
}

template <class Emit>
inline void emit_multisets_of_size(std::size_t k, std::size_t size, std::vector<std::uint32_t>& counts,
                                   std::size_t label, std::size_t remaining, Emit&& emit) {
    if (label + 1 == k) {
        counts[label] = static_cast<std::uint32_t>(remaining);
        emit(counts);
        return;
    }
    for (std::size_t take = 0; take <= remaining; ++take) {
        counts[label] = static_cast<std::uint32_t>(take);
        emit_multisets_of_size(k, size, counts, label + 1, remaining - take, emit);
    }
    counts[label] = 0;
}

}  // namespace detail

// Deterministic enumeration. Multisets are listed by size ascending, then by
// lexicographic multiplicity vector; ordered databases by lexicographic
// record sequence.
inline ClassPtr enumerate_class(const ClassSpec& spec) {
    if (spec.kind == ClassSpec::Kind::explicit_members) {
        if (!spec.universe) throw EmptyUniverse("explicit class needs a universe");
        if (spec.members.size() > spec.cap) throw CapExceeded("explicit member list exceeds cap");
        bool ordered = !spec.members.empty() && spec.members.front().is_ordered();
        return std::make_shared<DatabaseClass>(spec.universe, spec.members, ordered);
    }

    if (!spec.universe) throw EmptyUniverse("class spec needs a universe");
    const std::size_t k = spec.universe->size();
    std::vector<Database> members;

    if (spec.kind == ClassSpec::Kind::ordered_exact_size) {
        unsigned long long total = 1;
        for (std::size_t i = 0; i < spec.size; ++i) {
            total *= k;
            if (total > spec.cap) throw CapExceeded("ordered enumeration exceeds cap");
        }
        std::vector<RecordId> seq(spec.size, 0);
        while (true) {
            members.push_back(Database::sequence(seq));
            std::size_t pos = spec.size;
            while (pos > 0 && seq[pos - 1] + 1 == k) seq[--pos] = 0;
            if (pos == 0) break;
            ++seq[pos - 1];
        }
        if (spec.size == 0) members.resize(1);  // the single empty sequence
        return std::make_shared<DatabaseClass>(spec.universe, members, true);
    }

    const std::size_t lo = (spec.kind == ClassSpec::Kind::exact_size) ? spec.size : 0;
    const std::size_t hi = spec.size;
    unsigned long long total = 0;
    for (std::size_t s = lo; s <= hi; ++s) {
        total += detail::multiset_count(k, s, spec.cap);
        if (total > spec.cap) throw CapExceeded("multiset enumeration exceeds cap");
    }

    std::vector<std::uint32_t> counts(k, 0);
    for (std::size_t s = lo; s <= hi; ++s) {
        detail::emit_multisets_of_size(k, s, counts, 0, s, [&](const std::vector<std::uint32_t>& c) {
            std::vector<std::pair<RecordId, std::uint32_t>> pairs;
            for (std::size_t r = 0; r < k; ++r)
                if (c[r] > 0) pairs.emplace_back(static_cast<RecordId>(r), c[r]);
            members.push_back(Database::multiset(std::move(pairs)));
        });
    }
    return std::make_shared<DatabaseClass>(spec.universe, members, false);
}

// Convenience: parse "a,b,c" style member text is left to the CLI; tests
// build databases from label lists with this helper.
inline Database db_from_labels(const RecordUniverse& u, const std::vector<std::string>& labels,
                               bool ordered = false) {
    if (ordered) {
        std::vector<RecordId> seq;
        for (const auto& l : labels) {
            auto id = u.id(l);
            if (!id) throw NotInClass("unknown record label: " + l);
            seq.push_back(*id);
        }
        return Database::sequence(std::move(seq));
    }
    std::vector<std::pair<RecordId, std::uint32_t>> counts;
    for (const auto& l : labels) {
        auto id = u.id(l);
        if (!id) throw NotInClass("unknown record label: " + l);
        counts.emplace_back(*id, 1);
    }
    return Database::multiset(std::move(counts));
}

}  // namespace dpcomp
