#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dpcomp/cache.hpp"
#include "dpcomp/config.hpp"
#include "dpcomp/verify.hpp"

namespace dpcomp {

struct RunOptions {
    std::string cache_dir;               // empty disables the metric cache
    std::optional<PairMode> pairs;       // overrides the config's pair scope
    std::uint64_t seed = 0;              // echoed into reports
    std::string tolerance_profile = "default";  // default | strict
};

struct RunResult {
    nlohmann::ordered_json report;
    int exit_code = 0;
};

namespace rep {

using ojson = nlohmann::ordered_json;

inline Tolerances tolerances_for(const std::string& profile) {
    if (profile == "strict") return Tolerances::strict();
    if (profile == "default") return Tolerances::defaults();
    throw ParseError("unknown tolerance profile '" + profile + "'");
}

// Finite values stay numbers; infinities become string sentinels so the
// report remains standard JSON.
inline ojson json_number(double v) {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    return v;
}

inline std::string render_member(const Database& d, const RecordUniverse& u) {
    std::string out = d.is_ordered() ? "[" : "{";
    bool first = true;
    auto append = [&](RecordId r) {
        if (!first) out += ',';
        out += u.label(r);
        first = false;
    };
    if (d.is_ordered()) {
        for (RecordId r : d.records_by_id()) append(r);
    } else {
        for (const auto& [r, c] : d.counts())
            for (std::uint32_t t = 0; t < c; ++t) append(r);
    }
    out += d.is_ordered() ? ']' : '}';
    return out;
}

inline ojson members_json(const DatabaseClass& cls) {
    auto out = ojson::array();
    for (const auto& m : cls.members()) out.push_back(render_member(m, cls.universe()));
    return out;
}

inline ojson matrix_summary(const DistMatrix& m) {
    std::vector<double> finite;
    std::size_t inf_pairs = 0;
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = i + 1; j < m.size(); ++j) {
            if (is_inf(m(i, j)))
                ++inf_pairs;
            else
                finite.push_back(m(i, j));
        }
    std::sort(finite.begin(), finite.end());
    ojson out;
    out["finite_pairs"] = finite.size();
    out["inf_pairs"] = inf_pairs;
    if (!finite.empty()) {
        out["min"] = finite.front();
        const std::size_t n = finite.size();
        out["median"] = (n % 2 == 1) ? finite[n / 2] : 0.5 * (finite[n / 2 - 1] + finite[n / 2]);
        out["max"] = finite.back();
    }
    return out;
}

inline constexpr std::size_t kMatrixReportCap = 32;

inline void put_matrix(ojson& out, const char* key, const DistMatrix& m) {
    if (m.size() <= kMatrixReportCap) out[key] = matrix_to_json(m);
}

inline ojson guarantee_json(const Guarantee& g) {
    ojson out;
    out["flavor"] = flavor_name(g.flavor());
    out["provenance"] = g.bound().provenance();
    out["is_metric"] = g.bound().is_metric();
    out["matrix_summary"] = matrix_summary(g.bound().values());
    put_matrix(out, "matrix", g.bound().values());
    if (g.has_delta()) {
        out["delta_summary"] = matrix_summary(g.delta());
        put_matrix(out, "delta_matrix", g.delta());
        auto saturated = g.saturated_delta_entries();
        if (!saturated.empty()) {
            auto arr = ojson::array();
            for (const auto& [i, j] : saturated) arr.push_back(ojson::array({i, j}));
            out["delta_saturated"] = arr;
            out["delta_note"] = "entries at or above 1 carry no guarantee; effective delta = 1";
        }
    }
    return out;
}

inline ojson pair_json(const std::pair<std::size_t, std::size_t>& p) {
    return ojson::array({p.first, p.second});
}

// Composition pipeline outcome: the guarantee, the attempt trail, and the
// closed-form coefficient when a parallel rule fired.
struct PlanOutcome {
    std::optional<Guarantee> guarantee;
    ojson attempts = ojson::array();
    ojson closed_form;  // {rule, coefficient, metric} or null
};

inline void record_applied(PlanOutcome& out, const std::string& rule) {
    out.attempts.push_back({{"rule", rule}, {"outcome", "applied"}});
}

inline void record_failed(PlanOutcome& out, const std::string& rule, const std::string& condition) {
    out.attempts.push_back(
        {{"rule", rule}, {"outcome", "precondition-failed"}, {"failed_precondition", condition}});
}

inline std::string plan_flavor(const CompositionPlan& plan) {
    bool all_pure = true, pure_or_approx = true, all_zc = true, all_gauss = true;
    for (const auto& s : plan.steps()) {
        Flavor f = s.guarantee.flavor();
        all_pure = all_pure && f == Flavor::pure;
        pure_or_approx = pure_or_approx && (f == Flavor::pure || f == Flavor::approximate);
        all_zc = all_zc && f == Flavor::zero_concentrated;
        all_gauss = all_gauss && f == Flavor::gaussian;
    }
    if (all_pure) return "pure";
    if (pure_or_approx) return "approximate";
    if (all_zc) return "zero_concentrated";
    if (all_gauss) return "gaussian";
    throw FlavorMismatch("plan mixes guarantee flavors");
}

inline std::vector<double> scalar_budgets(const CompositionPlan& plan,
                                          std::optional<double> PlanStep::*field) {
    std::vector<double> out;
    for (const auto& s : plan.steps()) {
        if (!(s.*field)) throw PreconditionFailed("scalar-budgets");
        out.push_back(*(s.*field));
    }
    return out;
}

inline bool all_dependent_steps(const CompositionPlan& plan) {
    for (const auto& s : plan.steps())
        if (!s.dependent) return false;
    return true;
}

inline ojson closed_form_json(const std::string& rule, double coefficient,
                              const std::string& metric) {
    ojson out;
    out["rule"] = rule;
    out["coefficient"] = json_number(coefficient);
    out["metric"] = metric;
    return out;
}

inline PlanOutcome execute_plan(const RealizedConfig& r) {
    if (!r.plan) throw ParseError("config declares no composition steps");
    const CompositionPlan& plan = *r.plan;
    const std::string flavor = plan_flavor(plan);
    PlanOutcome out;

    if (r.plan_granularity) {
        const GranularityPtr& g = r.plan_granularity;
        const std::string gname = canonical_metric_name(*g);
        if (flavor == "pure") {
            try {
                auto budgets = scalar_budgets(plan, &PlanStep::eps);
                Bound b = best_bound_disjoint(plan, g, budgets);
                const std::string rule = b.provenance();
                out.guarantee = Guarantee::pure(std::move(b));
                out.closed_form = closed_form_json(
                    rule, *std::max_element(budgets.begin(), budgets.end()), gname);
                record_applied(out, rule);
                return out;
            } catch (const PreconditionFailed& e) {
                record_failed(out, "disjoint-best-bound", e.condition());
            }
            if (g->kind() == GranularityKind::bounded && all_dependent_steps(plan)) {
                try {
                    auto budgets = scalar_budgets(plan, &PlanStep::eps);
                    std::vector<MapBetweenClasses> maps;
                    for (const auto& s : plan.steps()) maps.push_back(s.map);
                    auto bp = bounded_parallel_bound(plan.domain(), maps, budgets, true);
                    const std::string rule = bp.bound.provenance();
                    out.guarantee = Guarantee::pure(std::move(bp.bound));
                    out.closed_form = closed_form_json(rule, bp.coefficient, gname);
                    record_applied(out, rule);
                    return out;
                } catch (const PreconditionFailed& e) {
                    record_failed(out, "bounded-pairwise-parallel", e.condition());
                }
            }
        } else if (flavor == "approximate") {
            try {
                Guarantee g2 = approx_best_bound_disjoint(plan, g);
                const std::string rule = g2.bound().provenance();
                double coeff = 0.0;
                for (const auto& s : plan.steps()) coeff = std::max(coeff, s.eps.value_or(0.0));
                out.guarantee = std::move(g2);
                out.closed_form = closed_form_json(rule, coeff, gname);
                record_applied(out, rule);
                return out;
            } catch (const PreconditionFailed& e) {
                record_failed(out, "approx-disjoint-best-bound", e.condition());
            }
        } else if (flavor == "zero_concentrated") {
            try {
                Guarantee g2 = zc_best_bound_disjoint(plan, g);
                const std::string rule = g2.bound().provenance();
                double rho = 0.0;
                for (const auto& s : plan.steps()) rho = std::max(rho, s.rho.value_or(0.0));
                out.guarantee = std::move(g2);
                out.closed_form = closed_form_json(rule, std::sqrt(rho), gname);
                record_applied(out, rule);
                return out;
            } catch (const PreconditionFailed& e) {
                record_failed(out, "zc-disjoint-best-bound", e.condition());
            }
        } else {
            try {
                GdpParallelResult pr = gdp_parallel_bound(plan, g, r.dstar);
                ojson obligations;
                for (const auto& [k, v] : pr.obligations) obligations[k] = v;
                if (pr.closed_form) out.closed_form = closed_form_json(pr.rule, *pr.coefficient, gname);
                if (pr.exact) {
                    const std::string rule = pr.exact->provenance();
                    out.guarantee = Guarantee::gaussian(std::move(*pr.exact));
                    out.attempts.push_back(
                        {{"rule", rule}, {"outcome", "applied"}, {"obligations", obligations}});
                } else {
                    const std::string rule = pr.closed_form->provenance();
                    out.guarantee = Guarantee::gaussian(std::move(*pr.closed_form));
                    out.attempts.push_back(
                        {{"rule", rule}, {"outcome", "applied"}, {"obligations", obligations}});
                }
                return out;
            } catch (const PreconditionFailed& e) {
                record_failed(out, "gaussian-parallel", e.condition());
            }
        }
    }

    const bool common = all_dependent_steps(plan);
    if (flavor == "pure") {
        Bound b = common ? compose_common_domain(plan) : compose_metrics(plan);
        record_applied(out, b.provenance());
        out.guarantee = Guarantee::pure(std::move(b));
    } else if (flavor == "approximate") {
        Guarantee g2 = common ? approx_common_domain(plan) : approx_compose(plan);
        record_applied(out, g2.bound().provenance());
        out.guarantee = std::move(g2);
    } else if (flavor == "zero_concentrated") {
        Guarantee g2 = zc_compose(plan);
        record_applied(out, g2.bound().provenance());
        out.guarantee = std::move(g2);
    } else {
        Guarantee g2 = gdp_compose(plan);
        record_applied(out, g2.bound().provenance());
        out.guarantee = std::move(g2);
    }
    return out;
}

// --- Verification ------------------------------------------------------

inline std::function<long long(const Database&)> make_query(const ClassPtr& cls,
                                                            const std::string& query) {
    if (query == "size")
        return [](const Database& d) { return static_cast<long long>(d.size()); };
    if (query.rfind("count:", 0) == 0) {
        const std::string label = query.substr(6);
        auto id = cls->universe().id(label);
        if (!id) throw UnresolvedReference("unknown record label in query: " + label);
        const RecordId r = *id;
        return [r](const Database& d) {
            if (d.is_ordered()) {
                long long c = 0;
                for (RecordId x : d.records_by_id()) c += (x == r);
                return c;
            }
            return static_cast<long long>(d.multiplicity(r));
        };
    }
    throw ParseError("unknown query '" + query + "' (expected 'size' or 'count:<label>')");
}

inline DiscreteMechanism build_mechanism(const RealizedConfig& r, const MechanismSpec& spec) {
    std::optional<MapBetweenClasses> f;
    if (!spec.map.empty()) f = cfg::find_map(r, spec.map);

    if (spec.kind == "counting")
        return counting_mechanism(r.cls, f ? *f : identity_map(r.cls));

    const ClassPtr base = f ? f->target() : r.cls;
    auto pull = [&](DiscreteMechanism m) { return f ? preprocess(m, *f) : std::move(m); };
    if (spec.kind == "geometric")
        return pull(geometric_mechanism(base, make_query(base, spec.query), spec.eps, spec.lo,
                                        spec.hi));
    if (spec.kind == "discrete_gaussian")
        return pull(discrete_gaussian_mechanism(base, make_query(base, spec.query), spec.sigma,
                                                spec.lo, spec.hi));
    auto q = make_query(base, spec.query);
    return pull(randomized_response(
        base, [q](const Database& d) { return std::to_string(q(d)); }, spec.flip));
}

inline Guarantee claim_guarantee(const RealizedConfig& r, const ClaimSpec& c,
                                 const std::string& cache_dir) {
    GranularityPtr g = cfg::find_granularity(r, c.granularity);
    Metric base = cached_canonical_metric(cache_dir, g);
    return budget_guarantee(base, c.flavor, c.eps, c.delta, c.rho, c.mu);
}

inline ojson verification_report_json(const RealizedConfig& r, const VerificationReport& vr) {
    ojson out;
    out["passed"] = vr.passed;
    out["worst_pair"] = pair_json(vr.worst_pair);
    out["worst_pair_members"] =
        ojson::array({render_member(r.cls->member(vr.worst_pair.first), r.cls->universe()),
                      render_member(r.cls->member(vr.worst_pair.second), r.cls->universe())});
    out["slack"] = json_number(vr.slack);
    out["method"] = vr.method;
    out["tolerance"] = vr.tolerance;
    return out;
}

struct VerifySection {
    ojson section;
    bool passed = true;
};

inline VerifySection run_verification(const RealizedConfig& r, const RunOptions& opt,
                                      const std::optional<Guarantee>& plan_result) {
    const VerificationSpec& v = r.doc.verification;
    const Tolerances tol = tolerances_for(opt.tolerance_profile);
    const PairMode mode = opt.pairs ? *opt.pairs
                                    : (v.pairs == "neighbors" ? PairMode::neighbors : PairMode::all);

    GranularityPtr scope;
    if (!v.granularity.empty())
        scope = cfg::find_granularity(r, v.granularity);
    else if (r.plan_granularity)
        scope = r.plan_granularity;
    else if (mode == PairMode::neighbors)
        throw ParseError("verification.pairs = neighbors needs a granularity");

    std::optional<Guarantee> claim;
    ojson claim_json;
    if (v.claim.use_result) {
        if (!plan_result) throw ParseError("claim.use_result: config declares no composition steps");
        claim = *plan_result;
        claim_json["source"] = "plan-result";
    } else {
        claim = claim_guarantee(r, v.claim, opt.cache_dir);
        claim_json["source"] = "explicit";
        claim_json["flavor"] = v.claim.flavor;
        claim_json["granularity"] = v.claim.granularity;
        if (v.claim.flavor == "pure") claim_json["eps"] = v.claim.eps;
        if (v.claim.flavor == "approximate") {
            claim_json["eps"] = v.claim.eps;
            claim_json["delta"] = v.claim.delta;
        }
        if (v.claim.flavor == "zero_concentrated") claim_json["rho"] = v.claim.rho;
        if (v.claim.flavor == "gaussian") claim_json["mu"] = v.claim.mu;
    }

    if (v.mechanisms.empty()) throw ParseError("verification declares no mechanisms");
    std::vector<DiscreteMechanism> stages;
    auto mech_json = ojson::array();
    for (const auto& spec : v.mechanisms) {
        stages.push_back(build_mechanism(r, spec));
        ojson mj;
        mj["kind"] = spec.kind;
        if (!spec.map.empty()) mj["map"] = spec.map;
        mj["outputs"] = stages.back().output_count();
        mech_json.push_back(mj);
    }
    DiscreteMechanism composed = stages.size() == 1 ? stages.front() : product_compose(stages);

    VerificationReport vr = verify_guarantee(composed, *claim, mode, scope, tol);

    VerifySection out;
    out.passed = vr.passed;
    out.section["pairs"] = mode == PairMode::neighbors ? "neighbors" : "all";
    if (scope) out.section["granularity"] = scope->name();
    out.section["claim"] = claim_json;
    out.section["mechanisms"] = mech_json;
    out.section["report"] = verification_report_json(r, vr);
    if (v.diagnose && composed.tuple()) {
        std::vector<Guarantee> claims(composed.tuple()->factors.size(), *claim);
        auto stage_reports = diagnose_components(composed, claims, mode, scope, tol);
        auto arr = ojson::array();
        for (std::size_t t = 0; t < stage_reports.size(); ++t) {
            ojson sj;
            sj["stage"] = t;
            sj["report"] = verification_report_json(r, stage_reports[t]);
            arr.push_back(sj);
        }
        out.section["diagnose"] = arr;
    }
    out.section["passed"] = vr.passed;
    return out;
}

inline ojson report_header(const char* command, const RealizedConfig& r, const RunOptions& opt) {
    ojson out;
    out["schema_version"] = kSchemaVersion;
    out["command"] = command;
    out["config_digest"] = r.doc.digest;
    out["seed"] = opt.seed;
    out["tolerance_profile"] = opt.tolerance_profile;
    return out;
}

inline ojson tolerances_json(const Tolerances& tol) {
    ojson out;
    out["divergence"] = tol.divergence;
    out["tradeoff"] = tol.tradeoff;
    return out;
}

}  // namespace rep

inline RunResult run_plan(const RealizedConfig& r, const RunOptions& opt) {
    rep::ojson report = rep::report_header("plan", r, opt);
    report["mode"] = r.plan ? mode_name(r.plan->mode()) : "independent";

    rep::PlanOutcome outcome = rep::execute_plan(r);
    report["flavor"] = flavor_name(outcome.guarantee->flavor());
    report["attempts"] = outcome.attempts;

    rep::ojson result = rep::guarantee_json(*outcome.guarantee);
    if (!outcome.closed_form.is_null()) result["closed_form"] = outcome.closed_form;
    result["members"] = rep::members_json(*r.cls);
    report["result"] = result;

    int exit_code = 0;
    if (r.doc.verification.requested) {
        rep::VerifySection vs = rep::run_verification(r, opt, outcome.guarantee);
        report["verification"] = vs.section;
        if (!vs.passed) exit_code = 2;
    }
    report["tolerances"] = rep::tolerances_json(rep::tolerances_for(opt.tolerance_profile));
    return {std::move(report), exit_code};
}

inline RunResult run_verify(const RealizedConfig& r, const RunOptions& opt) {
    if (!r.doc.verification.requested) throw ParseError("config declares no verification section");
    rep::ojson report = rep::report_header("verify", r, opt);
    std::optional<Guarantee> result;
    if (r.plan && r.doc.verification.claim.use_result) {
        rep::PlanOutcome outcome = rep::execute_plan(r);
        result = std::move(outcome.guarantee);
        report["claimed"] = rep::guarantee_json(*result);
    }
    rep::VerifySection vs = rep::run_verification(r, opt, result);
    report["verification"] = vs.section;
    report["tolerances"] = rep::tolerances_json(rep::tolerances_for(opt.tolerance_profile));
    return {std::move(report), vs.passed ? 0 : 2};
}

inline RunResult run_inspect(const RealizedConfig& r, const RunOptions& opt) {
    rep::ojson report = rep::report_header("inspect", r, opt);

    rep::ojson cj;
    cj["universe"] = r.cls->universe().labels();
    cj["ordered"] = r.cls->ordered();
    cj["size"] = r.cls->size();
    if (r.cls->size() <= 128) cj["members"] = rep::members_json(*r.cls);
    cj["digest"] = r.cls->digest();
    report["class"] = cj;

    auto gran_arr = rep::ojson::array();
    for (const auto& [name, g] : r.granularities) {
        Metric d = cached_canonical_metric(opt.cache_dir, g);
        std::size_t edges = 0;
        for (std::size_t i = 0; i < g->size(); ++i) edges += g->neighbors_of(i).size();
        rep::ojson gj;
        gj["name"] = name;
        gj["kind"] = kind_name(g->kind());
        gj["edges"] = edges / 2;
        gj["components"] = connectivity_report(d).size();
        gj["diameter"] = rep::json_number(diameter(d));
        gj["metric"] = canonical_metric_name(*g);
        rep::put_matrix(gj, "matrix", d.dist());
        gran_arr.push_back(gj);
    }
    report["granularities"] = gran_arr;

    rep::ojson distances;
    for (const auto& [n1, g1] : r.granularities)
        for (const auto& [n2, g2] : r.granularities) {
            if (n1 == n2) continue;
            distances[n1 + "->" + n2] = rep::json_number(granularity_distance(g1, g2));
        }
    report["granularity_distances"] = distances;

    if (!r.maps.empty()) {
        std::vector<MapBetweenClasses> maps;
        auto map_arr = rep::ojson::array();
        for (const auto& [name, m] : r.maps) {
            maps.push_back(m);
            rep::ojson mj;
            mj["name"] = name;
            mj["target_size"] = m.target()->size();
            map_arr.push_back(mj);
        }
        report["maps"] = map_arr;

        std::vector<GranularityPtr> grans;
        for (const auto& [name, g] : r.granularities) grans.push_back(g);
        std::vector<MetricSelector> selectors{symdiff_selector(), free_lunch_selector()};
        if (!r.dstar.label.empty() &&
            std::none_of(selectors.begin(), selectors.end(),
                         [&](const MetricSelector& s) { return s.label == r.dstar.label; }))
            selectors.push_back(r.dstar);

        PartitionReport pr = analyze_partition(maps, grans, selectors);
        rep::ojson pj;
        pj["disjoint"] = pr.disjoint;
        pj["exhaustive"] = pr.exhaustive;
        rep::ojson per_gran;
        for (const auto& [gname, compatible] : pr.compatible_with) {
            rep::ojson gj;
            gj["compatible"] = compatible;
            gj["max_changed_blocks"] = pr.max_i_p.at(gname);
            const auto& witness = pr.incompatibility_witness.at(gname);
            if (witness) gj["incompatibility_witness"] = rep::pair_json(*witness);
            if (auto it = pr.delta_p.find(gname); it != pr.delta_p.end()) {
                auto arr = rep::ojson::array();
                for (double s : it->second) arr.push_back(rep::json_number(s));
                gj["block_sensitivities"] = arr;
            }
            per_gran[gname] = gj;
        }
        pj["granularities"] = per_gran;
        rep::ojson cm;
        for (const auto& [label, ok] : pr.commutes) cm[label] = ok;
        pj["commutes"] = cm;
        report["partition"] = pj;
    }
    return {std::move(report), 0};
}

inline RunResult run_cache(const RealizedConfig& r, const RunOptions& opt,
                           const std::string& action) {
    if (opt.cache_dir.empty()) throw ParseError("cache command needs --cache-dir");
    rep::ojson report = rep::report_header("cache", r, opt);
    report["action"] = action;
    report["dir"] = opt.cache_dir;
    if (action == "clear") {
        report["removed"] = clear_cache(opt.cache_dir);
    } else if (action == "warm") {
        auto arr = rep::ojson::array();
        for (const auto& [name, g] : r.granularities) {
            Metric d = cached_canonical_metric(opt.cache_dir, g);
            rep::ojson ej;
            ej["granularity"] = name;
            ej["path"] = cache_path(opt.cache_dir, *g);
            ej["entries"] = d.size() * d.size();
            arr.push_back(ej);
        }
        report["written"] = arr;
    } else {
        throw ParseError("unknown cache action '" + action + "' (expected warm or clear)");
    }
    return {std::move(report), 0};
}

}  // namespace dpcomp
