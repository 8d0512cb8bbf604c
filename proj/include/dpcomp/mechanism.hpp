#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpcomp/divergence.hpp"
#include "dpcomp/variants.hpp"

namespace dpcomp {

// Output-label structure of a composed mechanism, one label list per stage.
struct TupleInfo {
    std::vector<std::vector<std::string>> factors;
};

// Finite-output mechanism as an explicit stochastic table. Rows are kept in
// both linear and log form; divergences read the log rows, so masses far
// below the double range stay exact.
class DiscreteMechanism {
public:
    DiscreteMechanism(ClassPtr cls, std::vector<std::string> outputs,
                      std::vector<std::vector<double>> rows, std::optional<TupleInfo> tuple = {})
        : cls_(std::move(cls)), outputs_(std::move(outputs)), rows_(std::move(rows)),
          tuple_(std::move(tuple)) {
        log_rows_.reserve(rows_.size());
        for (const auto& r : rows_) log_rows_.push_back(detail::log_row(r));
        validate();
    }

    static DiscreteMechanism from_log_rows(ClassPtr cls, std::vector<std::string> outputs,
                                           std::vector<std::vector<double>> log_rows,
                                           std::optional<TupleInfo> tuple = {}) {
        DiscreteMechanism m;
        m.cls_ = std::move(cls);
        m.outputs_ = std::move(outputs);
        m.log_rows_ = std::move(log_rows);
        m.rows_.reserve(m.log_rows_.size());
        for (const auto& lr : m.log_rows_) {
            std::vector<double> r(lr.size());
            for (std::size_t s = 0; s < lr.size(); ++s) r[s] = std::exp(lr[s]);
            m.rows_.push_back(std::move(r));
        }
        m.tuple_ = std::move(tuple);
        m.validate();
        return m;
    }

    const ClassPtr& class_ref() const { return cls_; }
    const std::vector<std::string>& outputs() const { return outputs_; }
    std::size_t output_count() const { return outputs_.size(); }
    const std::vector<double>& row(std::size_t i) const { return rows_.at(i); }
    const std::vector<double>& log_row(std::size_t i) const { return log_rows_.at(i); }
    const std::optional<TupleInfo>& tuple() const { return tuple_; }

private:
    DiscreteMechanism() = default;

    void validate() const {
        if (!cls_) throw EmptyUniverse("mechanism needs a class");
        if (rows_.size() != cls_->size()) throw ClassMismatch("one probability row per database");
        for (const auto& r : rows_) {
            if (r.size() != outputs_.size()) throw CalculusError("row width does not match outputs");
            long double sum = 0.0L;
            for (double p : r) {
                if (!(p >= 0.0)) throw CalculusError("probabilities must be non-negative");
                sum += p;
            }
            if (std::abs(static_cast<double>(sum) - 1.0) > 1e-12)
                throw CalculusError("probability row must sum to 1");
        }
    }

    ClassPtr cls_;
    std::vector<std::string> outputs_;
    std::vector<std::vector<double>> rows_;
    std::vector<std::vector<double>> log_rows_;
    std::optional<TupleInfo> tuple_;
};

// Reports the true label with probability 1 - flip, any other label with
// flip split evenly.
inline DiscreteMechanism randomized_response(const ClassPtr& cls,
                                             const std::function<std::string(const Database&)>& query,
                                             double flip) {
    if (!(flip > 0.0 && flip < 1.0)) throw DomainError("flip probability must lie in (0, 1)");
    std::vector<std::string> truth;
    truth.reserve(cls->size());
    std::vector<std::string> outputs;
    for (std::size_t i = 0; i < cls->size(); ++i) {
        truth.push_back(query(cls->member(i)));
        outputs.push_back(truth.back());
    }
    std::sort(outputs.begin(), outputs.end());
    outputs.erase(std::unique(outputs.begin(), outputs.end()), outputs.end());

    const std::size_t k = outputs.size();
    std::vector<std::vector<double>> rows(cls->size(), std::vector<double>(k, 0.0));
    for (std::size_t i = 0; i < cls->size(); ++i) {
        for (std::size_t s = 0; s < k; ++s) {
            if (k == 1)
                rows[i][s] = 1.0;
            else
                rows[i][s] = outputs[s] == truth[i] ? 1.0 - flip : flip / static_cast<double>(k - 1);
        }
    }
    return DiscreteMechanism(cls, std::move(outputs), std::move(rows));
}

namespace detail {

inline std::vector<std::string> integer_labels(long long lo, long long hi) {
    std::vector<std::string> out;
    for (long long v = lo; v <= hi; ++v) out.push_back(std::to_string(v));
    return out;
}

}  // namespace detail

// Two-sided geometric noise on an integer query, with the off-range tails
// folded onto the endpoints so each row still sums to exactly 1. Folding
// keeps the endpoint log-ratio at eps * |shift| exactly.
inline DiscreteMechanism geometric_mechanism(const ClassPtr& cls,
                                             const std::function<long long(const Database&)>& query,
                                             double eps, long long lo, long long hi) {
    if (!(eps > 0.0)) throw DomainError("noise rate must be positive");
    if (lo > hi) throw RangeTooSmall("empty truncation range");
    const double w = std::exp(-eps);
    const std::size_t width = static_cast<std::size_t>(hi - lo + 1);

    std::vector<std::vector<double>> log_rows;
    for (std::size_t i = 0; i < cls->size(); ++i) {
        long long q = query(cls->member(i));
        if (q < lo || q > hi) throw RangeTooSmall("query value outside truncation range");
        std::vector<double> lr(width);
        for (std::size_t s = 0; s < width; ++s) {
            long long v = lo + static_cast<long long>(s);
            if (width == 1)
                lr[s] = 0.0;
            else if (v == lo)
                lr[s] = -eps * static_cast<double>(q - lo) - std::log1p(w);
            else if (v == hi)
                lr[s] = -eps * static_cast<double>(hi - q) - std::log1p(w);
            else
                lr[s] = -eps * static_cast<double>(std::llabs(v - q)) + std::log1p(-w) - std::log1p(w);
        }
        log_rows.push_back(std::move(lr));
    }
    return DiscreteMechanism::from_log_rows(cls, detail::integer_labels(lo, hi), std::move(log_rows));
}

// Deterministic block size: point mass on |p(D)|.
inline DiscreteMechanism counting_mechanism(const ClassPtr& cls, const MapBetweenClasses& block) {
    if (!same_class(block.source(), cls)) throw ClassMismatch("block map over a different class");
    std::vector<long long> sizes;
    for (std::size_t i = 0; i < cls->size(); ++i)
        sizes.push_back(static_cast<long long>(block.target()->member(block(i)).size()));
    std::vector<long long> distinct = sizes;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<std::string> outputs;
    std::map<long long, std::size_t> pos;
    for (long long v : distinct) {
        pos[v] = outputs.size();
        outputs.push_back(std::to_string(v));
    }
    std::vector<std::vector<double>> rows(cls->size(), std::vector<double>(outputs.size(), 0.0));
    for (std::size_t i = 0; i < cls->size(); ++i) rows[i][pos[sizes[i]]] = 1.0;
    return DiscreteMechanism(cls, std::move(outputs), std::move(rows));
}

// Integer-lattice Gaussian noise, endpoint-folded like the geometric
// mechanism. All masses are assembled in log domain; far tails keep full
// relative accuracy.
inline DiscreteMechanism discrete_gaussian_mechanism(
    const ClassPtr& cls, const std::function<long long(const Database&)>& query, double sigma,
    long long lo, long long hi) {
    if (!(sigma > 0.0)) throw DomainError("noise scale must be positive");
    if (lo > hi) throw RangeTooSmall("empty truncation range");
    const double s2 = 2.0 * sigma * sigma;
    const long long reach = static_cast<long long>(std::ceil(20.0 * sigma)) + 30;

    // Lattice normalizer is shift-invariant for integer queries.
    double z = 0.0;
    for (long long t = -reach; t <= reach; ++t) z += std::exp(-static_cast<double>(t * t) / s2);
    const double logz = std::log(z);

    auto log_tail = [&](long long start, long long step, long long center) {
        std::vector<double> terms;
        for (long long n = 0; n <= reach; ++n) {
            long long v = start + step * n;
            double d = static_cast<double>(v - center);
            terms.push_back(-d * d / s2);
        }
        return detail::logsumexp(terms);
    };

    const std::size_t width = static_cast<std::size_t>(hi - lo + 1);
    std::vector<std::vector<double>> log_rows;
    for (std::size_t i = 0; i < cls->size(); ++i) {
        long long q = query(cls->member(i));
        if (q < lo || q > hi) throw RangeTooSmall("query value outside truncation range");
        std::vector<double> lr(width);
        for (std::size_t s = 0; s < width; ++s) {
            long long v = lo + static_cast<long long>(s);
            if (width == 1)
                lr[s] = 0.0;
            else if (v == lo)
                lr[s] = log_tail(lo, -1, q) - logz;
            else if (v == hi)
                lr[s] = log_tail(hi, +1, q) - logz;
            else {
                double d = static_cast<double>(v - q);
                lr[s] = -d * d / s2 - logz;
            }
        }
        log_rows.push_back(std::move(lr));
    }
    return DiscreteMechanism::from_log_rows(cls, detail::integer_labels(lo, hi), std::move(log_rows));
}

namespace detail {

constexpr std::size_t kOutcomeCap = 1000000;

inline std::vector<std::string> tuple_labels(const std::vector<std::vector<std::string>>& factors) {
    std::size_t total = 1;
    for (const auto& f : factors) {
        if (f.empty()) throw CalculusError("empty output set");
        total *= f.size();
        if (total > kOutcomeCap) throw OutcomeCapExceeded("composed outcome space too large");
    }
    std::vector<std::string> labels(total);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rest = idx;
        std::vector<std::string> parts(factors.size());
        for (std::size_t t = factors.size(); t-- > 0;) {
            parts[t] = factors[t][rest % factors[t].size()];
            rest /= factors[t].size();
        }
        std::string l = "(";
        for (std::size_t t = 0; t < parts.size(); ++t) l += (t ? "," : "") + parts[t];
        labels[idx] = l + ")";
    }
    return labels;
}

}  // namespace detail

// Independent joint distribution over the output tuple space.
inline DiscreteMechanism product_compose(const std::vector<DiscreteMechanism>& ms) {
    if (ms.empty()) throw DomainError("product of zero mechanisms");
    const ClassPtr& cls = ms.front().class_ref();
    std::vector<std::vector<std::string>> factors;
    for (const auto& m : ms) {
        if (!same_class(m.class_ref(), cls)) throw ClassMismatch("mechanisms over different classes");
        factors.push_back(m.outputs());
    }
    std::vector<std::string> labels = detail::tuple_labels(factors);

    std::vector<std::vector<double>> log_rows(cls->size(), std::vector<double>(labels.size(), 0.0));
    for (std::size_t i = 0; i < cls->size(); ++i)
        for (std::size_t idx = 0; idx < labels.size(); ++idx) {
            std::size_t rest = idx;
            double lp = 0.0;
            for (std::size_t t = ms.size(); t-- > 0;) {
                std::size_t digit = rest % factors[t].size();
                rest /= factors[t].size();
                lp += ms[t].log_row(i)[digit];
            }
            log_rows[i][idx] = lp;
        }
    return DiscreteMechanism::from_log_rows(cls, std::move(labels), std::move(log_rows),
                                            TupleInfo{std::move(factors)});
}

// One adaptive stage: a stochastic table per (observed prefix, database).
// Prefixes enumerate the row-major product of the earlier stages' outputs.
struct AdaptiveKernel {
    std::vector<std::string> outputs;
    std::vector<std::vector<std::vector<double>>> rows;
};

// Chain-rule joint distribution of adaptively composed stages.
inline DiscreteMechanism adaptive_compose(const ClassPtr& cls,
                                          const std::vector<AdaptiveKernel>& kernels) {
    if (kernels.empty()) throw DomainError("composition of zero stages");
    std::vector<std::vector<std::string>> factors;
    std::size_t prefixes = 1;
    for (const auto& k : kernels) {
        if (k.rows.size() != prefixes) throw PrefixMismatch("stage table does not cover the prefixes");
        for (const auto& per_db : k.rows) {
            if (per_db.size() != cls->size()) throw ClassMismatch("one row per database required");
            for (const auto& r : per_db)
                if (r.size() != k.outputs.size()) throw PrefixMismatch("row width does not match outputs");
        }
        factors.push_back(k.outputs);
        prefixes *= k.outputs.size();
        if (prefixes > detail::kOutcomeCap) throw OutcomeCapExceeded("composed outcome space too large");
    }
    std::vector<std::string> labels = detail::tuple_labels(factors);

    std::vector<std::vector<double>> log_rows(cls->size(), std::vector<double>(labels.size(), 0.0));
    std::vector<std::size_t> digits(kernels.size(), 0);
    for (std::size_t idx = 0; idx < labels.size(); ++idx) {
        std::size_t rest = idx;
        for (std::size_t t = kernels.size(); t-- > 0;) {
            digits[t] = rest % factors[t].size();
            rest /= factors[t].size();
        }
        for (std::size_t i = 0; i < cls->size(); ++i) {
            double lp = 0.0;
            std::size_t prefix = 0;
            for (std::size_t t = 0; t < kernels.size(); ++t) {
                double p = kernels[t].rows[prefix][i][digits[t]];
                lp += p == 0.0 ? -kInf : std::log(p);
                prefix = prefix * factors[t].size() + digits[t];
            }
            log_rows[i][idx] = lp;
        }
    }
    return DiscreteMechanism::from_log_rows(cls, std::move(labels), std::move(log_rows),
                                            TupleInfo{std::move(factors)});
}

// Pushforward along an output map; probabilities of merged outputs add.
inline DiscreteMechanism post_process(const DiscreteMechanism& m,
                                      const std::function<std::string(const std::string&)>& g) {
    std::vector<std::string> outputs;
    std::map<std::string, std::size_t> pos;
    std::vector<std::size_t> image(m.output_count());
    for (std::size_t s = 0; s < m.output_count(); ++s) {
        std::string l = g(m.outputs()[s]);
        auto [it, fresh] = pos.emplace(l, outputs.size());
        if (fresh) outputs.push_back(l);
        image[s] = it->second;
    }
    std::vector<std::vector<double>> log_rows;
    for (std::size_t i = 0; i < m.class_ref()->size(); ++i) {
        std::vector<std::vector<double>> groups(outputs.size());
        for (std::size_t s = 0; s < m.output_count(); ++s) groups[image[s]].push_back(m.log_row(i)[s]);
        std::vector<double> lr(outputs.size());
        for (std::size_t s = 0; s < outputs.size(); ++s) lr[s] = detail::logsumexp(groups[s]);
        log_rows.push_back(std::move(lr));
    }
    return DiscreteMechanism::from_log_rows(m.class_ref(), std::move(outputs), std::move(log_rows));
}

// M o f: run the mechanism on the image of the database.
inline DiscreteMechanism preprocess(const DiscreteMechanism& m, const MapBetweenClasses& f) {
    if (!same_class(f.target(), m.class_ref())) throw ClassMismatch("mechanism not over the map target");
    std::vector<std::vector<double>> log_rows;
    for (std::size_t i = 0; i < f.source()->size(); ++i) log_rows.push_back(m.log_row(f(i)));
    return DiscreteMechanism::from_log_rows(f.source(), m.outputs(), std::move(log_rows), m.tuple());
}

// Marginal of one stage of a composed mechanism.
inline DiscreteMechanism stage_marginal(const DiscreteMechanism& m, std::size_t stage) {
    if (!m.tuple()) throw NotATuple("mechanism has no tuple structure");
    const auto& factors = m.tuple()->factors;
    if (stage >= factors.size()) throw DomainError("stage index out of range");
    std::size_t stride = 1;
    for (std::size_t t = stage + 1; t < factors.size(); ++t) stride *= factors[t].size();

    const std::size_t k = factors[stage].size();
    std::vector<std::vector<double>> log_rows;
    for (std::size_t i = 0; i < m.class_ref()->size(); ++i) {
        std::vector<std::vector<double>> groups(k);
        for (std::size_t idx = 0; idx < m.output_count(); ++idx)
            groups[(idx / stride) % k].push_back(m.log_row(i)[idx]);
        std::vector<double> lr(k);
        for (std::size_t s = 0; s < k; ++s) lr[s] = detail::logsumexp(groups[s]);
        log_rows.push_back(std::move(lr));
    }
    return DiscreteMechanism::from_log_rows(m.class_ref(), factors[stage], std::move(log_rows));
}

}  // namespace dpcomp
