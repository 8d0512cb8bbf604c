// End-to-end acceptance suite. Each case prints exactly one line,
// "ACCEPTANCE <n> <title>: PASS|FAIL", and then asserts, so the ctest log
// doubles as a sign-off sheet.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <exception>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dpcomp/run.hpp"
#include "support/cli_runner.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace dpcomp;
using nlohmann::json;

namespace {

// First failure wins; later expectations are still evaluated but cannot
// overwrite the diagnosis.
struct Check {
    bool ok = true;
    std::string why;
    void expect(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            why = what;
        }
    }
};

void conclude(int number, const std::string& title, const Check& c) {
    std::cout << "ACCEPTANCE " << number << " " << title << ": " << (c.ok ? "PASS" : "FAIL")
              << std::endl;
    INFO(c.why);
    REQUIRE(c.ok);
}

bool same_entry(double a, double b) {
    if (is_inf(a) || is_inf(b)) return is_inf(a) && is_inf(b);
    return a == b;
}

bool matrices_equal(const DistMatrix& a, const DistMatrix& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j)
            if (!same_entry(a(i, j), b(i, j))) return false;
    return true;
}

long long size_query(const Database& d) { return static_cast<long long>(d.size()); }

}  // namespace

TEST_CASE("canonical metrics equal exhaustive relaxation on builtin granularities") {
    Check c;
    try {
        ClassPtr big = gen::make_class({"a", "b"}, ClassSpec::Kind::max_size, 18);
        c.expect(big->size() == oracle::multisets_up_to_size(2, 18),
                 "member count disagrees with the counting oracle");
        c.expect(big->size() == 190, "expected 190 members");

        ClassPtr exact = gen::make_class({"a", "b", "c"}, ClassSpec::Kind::exact_size, 4);
        c.expect(exact->size() == oracle::multisets_of_size(3, 4),
                 "exact-size count disagrees with the counting oracle");
        ClassPtr ordered = gen::make_class({"a", "b"}, ClassSpec::Kind::ordered_exact_size, 3);

        auto check_class = [&](const ClassPtr& cls, GranularityKind kind, const char* what) {
            GranularityPtr g = builtin_granularity(cls, kind);
            c.expect(matrices_equal(canonical_metric(g).dist(), oracle::floyd_warshall(*g)),
                     std::string("metric mismatch: ") + what);
        };
        check_class(big, GranularityKind::unbounded, "multiset unbounded");
        check_class(big, GranularityKind::bounded, "multiset bounded");
        check_class(big, GranularityKind::free_lunch, "multiset free-lunch");
        // Exact-size classes have no add/remove neighbors at all, so the
        // unbounded metric is infinite off the diagonal on both sides.
        check_class(exact, GranularityKind::unbounded, "exact-size unbounded");
        check_class(exact, GranularityKind::bounded, "exact-size bounded");
        check_class(exact, GranularityKind::free_lunch, "exact-size free-lunch");
        check_class(ordered, GranularityKind::bounded, "ordered bounded");
        check_class(ordered, GranularityKind::free_lunch, "ordered free-lunch");
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    conclude(1, "canonical metric oracle", c);
}

TEST_CASE("adding-one-record granularity dominates swapping but not conversely") {
    Check c;
    try {
        ClassPtr cls = gen::make_class({"a", "b", "c"}, ClassSpec::Kind::max_size, 3);
        GranularityPtr gu = builtin_granularity(cls, GranularityKind::unbounded);
        GranularityPtr gb = builtin_granularity(cls, GranularityKind::bounded);
        c.expect(granularity_distance(gu, gb) == 2.0, "unbounded-to-bounded distance is not 2");
        c.expect(is_inf(granularity_distance(gb, gu)),
                 "bounded-to-unbounded distance should be unattained");
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    conclude(2, "granularity separation", c);
}

TEST_CASE("block counts on a swapped pair leak everything and are diagnosed") {
    Check c;
    try {
        // The two-member class of Example 1: three records, one swapped.
        auto u = std::make_shared<RecordUniverse>(std::vector<std::string>{"x", "y"});
        ClassPtr cls = std::make_shared<DatabaseClass>(
            u,
            std::vector<Database>{db_from_labels(*u, {"x", "x", "x"}),
                                  db_from_labels(*u, {"x", "x", "y"})},
            false);
        GranularityPtr bounded = builtin_granularity(cls, GranularityKind::bounded);
        std::vector<DiscreteMechanism> stages{
            counting_mechanism(cls, restrict_map(cls, {"x"}, "p_x")),
            counting_mechanism(cls, restrict_map(cls, {"y"}, "p_y"))};
        DiscreteMechanism joint = product_compose(stages);

        c.expect(bounded->are_neighbors(0, 1), "the two members should be bounded neighbors");
        c.expect(is_inf(max_divergence_log(joint.log_row(0), joint.log_row(1))),
                 "observed divergence on the neighbor pair should be infinite");

        Guarantee claim =
            Guarantee::pure(Bound(scale(canonical_metric(bounded), 1.0), "scaled-canonical"));
        VerificationReport rep = verify_guarantee(joint, claim, PairMode::all);
        c.expect(!rep.passed, "verification should fail");
        c.expect(rep.worst_pair == std::pair<std::size_t, std::size_t>{0, 1},
                 "witness pair should be the swapped pair");
        c.expect(is_inf(-rep.slack), "slack should be negative infinity");

        auto reports = diagnose_components(joint, {claim, claim}, PairMode::all);
        c.expect(reports.size() == 2, "expected two stage reports");
        for (const auto& st : reports) c.expect(!st.passed, "each marginal should fail alone");
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    conclude(3, "leaky block counts", c);
}

TEST_CASE("per-label geometric counts attain the pairwise parallel budget") {
    Check c;
    try {
        ClassPtr cls = gen::make_class({"a", "b", "c"}, ClassSpec::Kind::max_size, 3);
        GranularityPtr gb = builtin_granularity(cls, GranularityKind::bounded);
        const std::vector<std::pair<std::string, double>> blocks{
            {"a", 0.5}, {"b", 1.0}, {"c", 2.0}};
        std::vector<DiscreteMechanism> stages;
        for (const auto& [label, eps] : blocks) {
            MapBetweenClasses p = restrict_map(cls, {label}, "p_" + label);
            stages.push_back(preprocess(geometric_mechanism(p.target(), size_query, eps, 0, 3), p));
        }
        DiscreteMechanism joint = product_compose(stages);

        Guarantee claim =
            Guarantee::pure(Bound(scale(canonical_metric(gb), 3.0), "scaled-canonical"));
        VerificationReport rep = verify_guarantee(joint, claim, PairMode::all);
        c.expect(rep.passed, "composed mechanism should meet the worst-pair budget");
        c.expect(std::abs(rep.slack) <= 1e-9, "budget should be tight, slack " +
                                                  std::to_string(rep.slack));

        // Tightness witness: some swap pair spends the two largest budgets.
        double best = 0.0;
        for (std::size_t i = 0; i < cls->size(); ++i)
            for (std::size_t j = i + 1; j < cls->size(); ++j) {
                if (!gb->are_neighbors(i, j)) continue;
                double d = max_divergence_log(joint.log_row(i), joint.log_row(j));
                if (!is_inf(d)) best = std::max(best, d);
            }
        c.expect(best >= 3.0 - 1e-6, "no neighbor pair attains the budget, best " +
                                         std::to_string(best));
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    conclude(4, "bounded parallel tightness", c);
}

TEST_CASE("five hundred seeded plans never violate their composed bound") {
    Check c;
    try {
        std::size_t violations = 0;
        std::size_t total = 0;
        std::string first;
        auto tally = [&](const VerificationReport& rep, const std::string& what) {
            ++total;
            if (!rep.passed) {
                ++violations;
                if (first.empty()) first = what + " slack " + std::to_string(rep.slack);
            }
        };

        auto r = gen::rng(501);
        for (int t = 0; t < 200; ++t) {
            gen::BuiltPlan b = gen::independent_plan(r, Flavor::pure);
            tally(verify_guarantee(b.joint, Guarantee::pure(compose_metrics(b.plan)), PairMode::all),
                  "pure trial " + std::to_string(t));
        }
        auto ra = gen::rng(502);
        for (int t = 0; t < 100; ++t) {
            gen::BuiltPlan b = gen::adaptive_pure_plan(ra);
            tally(verify_guarantee(b.joint, Guarantee::pure(compose_metrics(b.plan)), PairMode::all),
                  "adaptive trial " + std::to_string(t));
        }
        auto rx = gen::rng(503);
        for (int t = 0; t < 100; ++t) {
            gen::BuiltPlan b = gen::independent_plan(rx, Flavor::approximate);
            tally(verify_guarantee(b.joint, approx_compose(b.plan), PairMode::all),
                  "approximate trial " + std::to_string(t));
        }
        auto rz = gen::rng(504);
        for (int t = 0; t < 50; ++t) {
            gen::BuiltPlan b = gen::independent_plan(rz, Flavor::zero_concentrated);
            tally(verify_guarantee(b.joint, zc_compose(b.plan), PairMode::all),
                  "zero-concentrated trial " + std::to_string(t));
        }
        auto rg = gen::rng(505);
        for (int t = 0; t < 50; ++t) {
            gen::BuiltPlan b = gen::independent_plan(rg, Flavor::gaussian);
            tally(verify_guarantee(b.joint, gdp_compose(b.plan), PairMode::all),
                  "gaussian trial " + std::to_string(t));
        }

        c.expect(total == 500, "expected 500 plans, ran " + std::to_string(total));
        c.expect(violations == 0,
                 std::to_string(violations) + " of " + std::to_string(total) +
                     " plans violated their bound; first: " + first);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    conclude(5, "sequential soundness", c);
}

TEST_CASE("fiber minima match enumeration and the single-label closed form") {
    Check c;
    try {
        auto r = gen::rng(506);
        for (int t = 0; t < 100; ++t) {
            ClassPtr cls = gen::menu_class(r);
            MapBetweenClasses f = gen::random_map(r, cls);
            Metric d = canonical_metric(builtin_granularity(cls, gen::random_kind(r)));

            std::vector<std::size_t> image(cls->size());
            for (std::size_t i = 0; i < cls->size(); ++i) image[i] = f(i);
            DistMatrix expect = oracle::fiber_minimum(d.dist(), image);
            if (!matrices_equal(minimum_privacy(d, f).values(), expect)) {
                c.expect(false, "fiber oracle mismatch on trial " + std::to_string(t));
                break;
            }
        }

        // Restricting a bounded class to one label: the fiber minimum is the
        // swap distance capped by the count difference of that label.
        ClassPtr cls = gen::make_class({"a", "b", "c"}, ClassSpec::Kind::max_size, 3);
        Metric db_ = canonical_metric(builtin_granularity(cls, GranularityKind::bounded));
        MapBetweenClasses f = restrict_map(cls, {"a"}, "p_a");
        Bound mp = minimum_privacy(db_, f);
        for (std::size_t i = 0; i < cls->size(); ++i)
            for (std::size_t j = 0; j < cls->size(); ++j) {
                double formula =
                    std::min(db_(i, j), static_cast<double>(f.target()->member(f(i)).symdiff_size(
                                            f.target()->member(f(j)))));
                c.expect(same_entry(mp(i, j), formula), "closed form mismatch at pair " +
                                                            std::to_string(i) + "," +
                                                            std::to_string(j));
            }
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    conclude(6, "minimum privacy oracle", c);
}

TEST_CASE("the delta budget crosses one between distance twelve and thirteen") {
    Check c;
    try {
        const double eps = 1.0;
        const double delta = 1e-5;
        const double at12 = delta * detail::delta_profile_value(eps, 12.0);
        const double at13 = delta * detail::delta_profile_value(eps, 13.0);
        c.expect(std::abs(at12 / 0.947 - 1.0) <= 1e-3,
                 "distance-12 delta " + std::to_string(at12));
        c.expect(std::abs(at13 / 2.575 - 1.0) <= 1e-3,
                 "distance-13 delta " + std::to_string(at13));
        c.expect(at12 < 1.0 && at13 > 1.0, "the guarantee should die between 12 and 13");
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    conclude(7, "delta threshold", c);
}

TEST_CASE("lattice gaussian renyi curves are quadratic and compose by summing") {
    Check c;
    try {
        // Sizes 0..3 with sigma = 1; the truncation is wide enough that the
        // far tail never influences the alpha = 32 sum.
        ClassPtr chain = gen::make_class({"a"}, ClassSpec::Kind::max_size, 3);
        DiscreteMechanism dg = discrete_gaussian_mechanism(chain, size_query, 1.0, -110, 110);
        for (std::size_t i = 0; i < chain->size(); ++i)
            for (std::size_t j = 0; j < chain->size(); ++j) {
                if (i == j) continue;
                const double k = static_cast<double>(i > j ? i - j : j - i);
                for (double alpha : kZcAlphaGrid) {
                    double observed = renyi_divergence_log(dg.log_row(i), dg.log_row(j), alpha);
                    if (std::abs(observed - alpha * k * k / 2.0) > 1e-4) {
                        c.expect(false, "renyi gap at shift " + std::to_string(k) + " alpha " +
                                            std::to_string(alpha));
                    }
                }
            }

        // Identity-map plans add their rho budgets; with budgets whose square
        // roots are exact dyadics the recovery is bit-for-bit.
        ClassPtr cls = gen::make_class({"a", "b"}, ClassSpec::Kind::max_size, 2);
        Metric base = canonical_metric(builtin_granularity(cls, GranularityKind::unbounded));
        const std::vector<double> rhos{0.25, 1.0, 2.25};
        std::vector<PlanStep> steps;
        for (double rho : rhos)
            steps.push_back({identity_map(cls),
                             budget_guarantee(base, "zero_concentrated", 0.0, 0.0, rho, 0.0), false,
                             {}, {}, rho, {}});
        Guarantee composed = zc_compose(CompositionPlan(cls, steps, Mode::independent));
        const double rho_sum = 0.25 + 1.0 + 2.25;
        for (std::size_t i = 0; i < cls->size(); ++i)
            for (std::size_t j = 0; j < cls->size(); ++j) {
                double d = base(i, j);
                c.expect(composed.bound().values()(i, j) == std::sqrt(rho_sum * d * d),
                         "summed rho not recovered at pair " + std::to_string(i) + "," +
                             std::to_string(j));
            }
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    conclude(8, "quadratic group property", c);
}

TEST_CASE("two unit gaussians compose to root-two and the pairwise coefficient") {
    Check c;
    try {
        ClassPtr cls = gen::make_class({"a", "b"}, ClassSpec::Kind::max_size, 2);
        GranularityPtr gu = builtin_granularity(cls, GranularityKind::unbounded);
        MapBetweenClasses pa = restrict_map(cls, {"a"}, "p_a");
        MapBetweenClasses pb = restrict_map(cls, {"b"}, "p_b");

        std::vector<DiscreteMechanism> stages{
            preprocess(discrete_gaussian_mechanism(pa.target(), size_query, 1.0, -10, 12), pa),
            preprocess(discrete_gaussian_mechanism(pb.target(), size_query, 1.0, -10, 12), pb)};
        DiscreteMechanism joint = product_compose(stages);
        Guarantee claim = Guarantee::gaussian(
            Bound(scale(canonical_metric(gu), std::sqrt(2.0)), "scaled-canonical"));
        VerificationReport rep = verify_guarantee(joint, claim, PairMode::all);
        c.expect(rep.passed, "product should meet the root-two budget, slack " +
                                 std::to_string(rep.slack));
        c.expect(rep.method == "grid-verified", "gaussian claims verify on the curve grid");

        // l2 composition puts sqrt(2) on the cross pair, strictly under the
        // naive budget-sum value 2 at distance two.
        auto mk_step = [&](const MapBetweenClasses& f, double mu) {
            Metric m = canonical_metric(builtin_granularity(f.target(), GranularityKind::unbounded));
            return PlanStep{f, budget_guarantee(m, "gaussian", 0.0, 0.0, 0.0, mu), false,
                            {}, {}, {}, mu};
        };
        Guarantee composed = gdp_compose(
            CompositionPlan(cls, {mk_step(pa, 1.0), mk_step(pb, 1.0)}, Mode::independent));
        auto ia = cls->index_of(db_from_labels(cls->universe(), {"a"}, false));
        auto ib = cls->index_of(db_from_labels(cls->universe(), {"b"}, false));
        c.expect(ia.has_value() && ib.has_value(), "singleton members not found");
        double cross = composed.bound().values()(*ia, *ib);
        c.expect(cross == std::sqrt(2.0), "cross-block value should be root two, got " +
                                              std::to_string(cross));
        c.expect(cross < 2.0, "the l2 value should beat the budget sum");

        // Bounded pairwise closed form: the coefficient is the worst pair in
        // l2, computed directly from the budgets.
        GranularityPtr gb = builtin_granularity(cls, GranularityKind::bounded);
        Metric mb = canonical_metric(gb);
        auto dep_step = [&](const MapBetweenClasses& f, double mu) {
            return PlanStep{f, budget_guarantee(mb, "gaussian", 0.0, 0.0, 0.0, mu), true,
                            {}, {}, {}, mu};
        };
        GdpParallelResult pr = gdp_parallel_bound(
            CompositionPlan(cls, {dep_step(pa, 1.0), dep_step(pb, 2.0)}, Mode::independent), gb,
            bounded_formula_selector());
        c.expect(pr.rule == "gaussian-bounded-pairwise", "expected the pairwise rule, got " + pr.rule);
        c.expect(pr.coefficient.has_value() && *pr.coefficient == std::sqrt(5.0),
                 "pairwise coefficient should be sqrt(1 + 4)");

        GdpParallelResult pr2 = gdp_parallel_bound(
            CompositionPlan(cls, {dep_step(pa, 1.0), dep_step(pb, 1.0)}, Mode::independent), gb,
            bounded_formula_selector());
        c.expect(pr2.coefficient.has_value() && *pr2.coefficient == std::sqrt(2.0),
                 "unit budgets should give a sqrt(2) coefficient");
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    conclude(9, "gaussian parallel composition", c);
}

TEST_CASE("output maps never improve on any fixture mechanism") {
    Check c;
    try {
        const std::vector<std::string> fixtures{"parallel_unbounded.json", "bounded_parallel.json",
                                                "ultra_parallel.json", "example1_bounded_fail.json"};
        const std::vector<double> alphas{0.1, 0.25, 0.5, 0.75, 0.9};
        std::size_t violations = 0;
        std::string first;
        auto flag = [&](const std::string& what) {
            ++violations;
            if (first.empty()) first = what;
        };

        auto r = gen::rng(507);
        for (const auto& name : fixtures) {
            RealizedConfig cfg = realize_config(load_config(cli::fixture(name)));
            for (const auto& spec : cfg.doc.verification.mechanisms) {
                DiscreteMechanism m = rep::build_mechanism(cfg, spec);
                for (int trial = 0; trial < 50; ++trial) {
                    DiscreteMechanism post = post_process(m, gen::random_output_map(r, m.outputs()));
                    for (std::size_t i = 0; i < cfg.cls->size(); ++i)
                        for (std::size_t j = i + 1; j < cfg.cls->size(); ++j) {
                            const auto& pi = m.log_row(i);
                            const auto& pj = m.log_row(j);
                            const auto& qi = post.log_row(i);
                            const auto& qj = post.log_row(j);

                            double before = max_divergence_log(pi, pj);
                            if (!is_inf(before) &&
                                max_divergence_log(qi, qj) > before + 1e-9)
                                flag("max divergence rose: " + name);
                            for (double eps : {0.0, 0.5})
                                if (hockey_stick_log(qi, qj, eps) >
                                    hockey_stick_log(pi, pj, eps) + 1e-9)
                                    flag("hockey stick rose: " + name);
                            double r2 = renyi_divergence_log(pi, pj, 2.0);
                            if (!is_inf(r2) && renyi_divergence_log(qi, qj, 2.0) > r2 + 1e-9)
                                flag("renyi rose: " + name);

                            TradeoffCurve tb = tradeoff_curve_log(pi, pj);
                            TradeoffCurve ta = tradeoff_curve_log(qi, qj);
                            for (double a : alphas)
                                if (ta(a) < tb(a) - 1e-3) flag("trade-off fell: " + name);
                        }
                }
            }
        }
        c.expect(violations == 0,
                 std::to_string(violations) + " post-processing violations; first: " + first);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    conclude(10, "post-processing robustness", c);
}

TEST_CASE("shipped configs reproduce their coefficients byte for byte") {
    Check c;
    try {
        auto stable = [&](const std::string& args) {
            cli::Result a = cli::run(args);
            cli::Result b = cli::run(args);
            c.expect(a.exit_code == 0, "exit " + std::to_string(a.exit_code) + " for: " + args);
            c.expect(a.out == b.out && a.exit_code == b.exit_code,
                     "report not byte-stable for: " + args);
            return json::parse(a.out);
        };

        json pu = stable("plan --config " + cli::fixture("parallel_unbounded.json"));
        c.expect(pu["result"]["closed_form"]["coefficient"].get<double>() == 0.5,
                 "unbounded coefficient should be the worst budget");
        c.expect(pu["result"]["closed_form"]["metric"] == "d^U", "unbounded metric label");
        c.expect(pu["verification"]["passed"].get<bool>(), "unbounded verification");

        json ins = stable("inspect --config " + cli::fixture("parallel_unbounded.json"));
        c.expect(ins["granularity_distances"]["U->B"].get<double>() == 2.0,
                 "inspect should report the factor-two domination");
        c.expect(ins["granularity_distances"]["B->U"] == "inf",
                 "inspect should report the unattained direction");

        json bp = stable("plan --config " + cli::fixture("bounded_parallel.json"));
        c.expect(bp["result"]["closed_form"]["coefficient"].get<double>() == 3.0,
                 "bounded coefficient should be the worst budget pair");
        c.expect(bp["result"]["closed_form"]["metric"] == "d^B", "bounded metric label");
        c.expect(bp["verification"]["passed"].get<bool>(), "bounded verification");

        json uv = stable("verify --config " + cli::fixture("ultra_parallel.json"));
        c.expect(uv["verification"]["report"]["slack"].get<double>() == 0.0,
                 "root-two claim should be exactly attained");
        c.expect(uv["verification"]["report"]["method"] == "grid-verified", "gaussian method");

        json up = stable("plan --config " + cli::fixture("ultra_parallel.json"));
        c.expect(up["result"]["provenance"] == "gaussian-parallel-exact", "exact rule applies");
        c.expect(std::abs(up["result"]["matrix_summary"]["median"].get<double>() -
                          std::sqrt(2.0)) <= 1e-12,
                 "cross-pair entries should sit at root two");
        c.expect(up["result"]["closed_form"]["coefficient"].get<double>() == 1.0,
                 "closed-form fallback coefficient");
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    conclude(11, "command line round-trip", c);
}
