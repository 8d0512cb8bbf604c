#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "dpcomp/calculus.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace dpcomp;

namespace {

ClassPtr dx3() { return gen::make_class({"x1", "x2", "x3"}, ClassSpec::Kind::max_size, 3); }

std::size_t index_of(const ClassPtr& cls, const std::vector<std::string>& labels) {
    auto i = cls->index_of(db_from_labels(cls->universe(), labels, cls->ordered()));
    REQUIRE(i.has_value());
    return *i;
}

}  // namespace

TEST_CASE("scaling a metric multiplies entries and keeps infinities") {
    ClassPtr cls = gen::make_class({"a", "b"}, ClassSpec::Kind::max_size, 2);
    Metric db_ = canonical_metric(builtin_granularity(cls, GranularityKind::bounded));

    Metric half = scale(db_, 0.5);
    Metric same = scale(db_, 1.0);
    Metric zero = scale(db_, 0.0);
    for (std::size_t i = 0; i < db_.size(); ++i)
        for (std::size_t j = 0; j < db_.size(); ++j) {
            if (is_inf(db_(i, j))) {
                CHECK(is_inf(half(i, j)));
            } else {
                CHECK(half(i, j) == 0.5 * db_(i, j));
            }
            CHECK(same(i, j) == db_(i, j));
            CHECK(zero(i, j) == 0.0);  // 0 * inf = 0
        }
    CHECK(same.name() == "d^B");
    CHECK(half.name() == "0.500000*d^B");
    CHECK_THROWS_AS(scale(db_, -1.0), NegativeScale);
}

TEST_CASE("domination compares scaled metrics entrywise") {
    ClassPtr cls = dx3();
    Metric du = canonical_metric(builtin_granularity(cls, GranularityKind::unbounded));
    Metric db_ = canonical_metric(builtin_granularity(cls, GranularityKind::bounded));
    Metric dfl = canonical_metric(builtin_granularity(cls, GranularityKind::free_lunch));

    CHECK(is_dominated(dfl, du, 1.0).dominated);
    CHECK(is_dominated(dfl, db_, 1.0).dominated);
    CHECK(is_dominated(du, db_, 2.0).dominated);

    // No factor recovers the bounded metric from the unbounded one: pairs of
    // different sizes are unboundedly separated only on the bounded side.
    for (double k : {1.0, 10.0, 1e6}) {
        auto res = is_dominated(db_, du, k);
        CHECK_FALSE(res.dominated);
        REQUIRE(res.counterexample.has_value());
        auto [i, j] = *res.counterexample;
        CHECK(is_inf(db_(i, j)));
        CHECK_FALSE(is_inf(xscale(k, du(i, j))));
    }

    CHECK_THROWS_AS(is_dominated(du, db_, 0.0), DomainError);
}

TEST_CASE("granularity distances on the three-record space") {
    ClassPtr cls = dx3();
    GranularityPtr gu = builtin_granularity(cls, GranularityKind::unbounded);
    GranularityPtr gb = builtin_granularity(cls, GranularityKind::bounded);

    CHECK(granularity_distance(gu, gb) == 2.0);   // one swap costs two edits
    CHECK(is_inf(granularity_distance(gb, gu)));  // adding a record changes the size
    CHECK(granularity_distance(gu, gu) == 1.0);
    CHECK(granularity_distance(gb, gb) == 1.0);

    // No neighbor pairs at all: the maximum is empty.
    ClassPtr frozen = gen::make_class({"a", "b"}, ClassSpec::Kind::exact_size, 2);
    GranularityPtr none = builtin_granularity(frozen, GranularityKind::unbounded);
    GranularityPtr all = builtin_granularity(frozen, GranularityKind::free_lunch);
    CHECK(granularity_distance(all, none) == 0.0);

    CHECK_THROWS_AS(granularity_distance(gu, none), ClassMismatch);
}

TEST_CASE("diameter and connectivity") {
    ClassPtr cls = dx3();
    Metric du = canonical_metric(builtin_granularity(cls, GranularityKind::unbounded));
    Metric db_ = canonical_metric(builtin_granularity(cls, GranularityKind::bounded));
    Metric dfl = canonical_metric(builtin_granularity(cls, GranularityKind::free_lunch));

    CHECK(diameter(du) == 6.0);  // three records out, three in
    CHECK(is_inf(diameter(db_)));
    CHECK(diameter(dfl) == 1.0);
    CHECK(connectivity_report(du).size() == 1);
    CHECK(connectivity_report(db_).size() == 4);  // one component per size 0..3

    ClassPtr point = gen::make_class({"a"}, ClassSpec::Kind::exact_size, 1);
    CHECK(diameter(canonical_metric(builtin_granularity(point, GranularityKind::free_lunch))) == 0.0);
}

TEST_CASE("closed-form selectors agree with canonical metrics on full classes") {
    ClassPtr cls = dx3();
    Metric du = canonical_metric(builtin_granularity(cls, GranularityKind::unbounded));
    Metric db_ = canonical_metric(builtin_granularity(cls, GranularityKind::bounded));
    MetricSelector su = unbounded_formula_selector();
    MetricSelector sb = bounded_formula_selector();
    MetricSelector sfl = free_lunch_selector();
    for (std::size_t i = 0; i < cls->size(); ++i)
        for (std::size_t j = 0; j < cls->size(); ++j) {
            CHECK(su.eval(cls->member(i), cls->member(j)) == du(i, j));
            CHECK(sb.eval(cls->member(i), cls->member(j)) == db_(i, j));
            CHECK(sfl.eval(cls->member(i), cls->member(j)) == (i == j ? 0.0 : 1.0));
        }

    ClassPtr seq = gen::make_class({"a", "b"}, ClassSpec::Kind::ordered_exact_size, 3);
    Metric dbo = canonical_metric(builtin_granularity(seq, GranularityKind::bounded));
    for (std::size_t i = 0; i < seq->size(); ++i)
        for (std::size_t j = 0; j < seq->size(); ++j)
            CHECK(sb.eval(seq->member(i), seq->member(j)) == dbo(i, j));
}

TEST_CASE("restriction maps keep the chosen labels") {
    ClassPtr cls = dx3();
    MapBetweenClasses f = restrict_map(cls, {"x1"}, "p1");
    CHECK(f.name() == "p1");
    CHECK(f.target()->size() == 4);  // multiplicities 0..3 of x1
    std::size_t i = index_of(cls, {"x1", "x2", "x3"});
    CHECK(f.target()->member(f(i)) == db_from_labels(cls->universe(), {"x1"}));
    CHECK_THROWS_AS(restrict_map(cls, {"zz"}, "bad"), NotInClass);

    ClassPtr seq = gen::make_class({"a", "b"}, ClassSpec::Kind::ordered_exact_size, 2);
    CHECK_THROWS_AS(restrict_map(seq, {"a"}, "bad"), OrderedUnsupported);
}

TEST_CASE("order-split maps keep the chosen identifiers") {
    ClassPtr seq = gen::make_class({"a", "b"}, ClassSpec::Kind::ordered_exact_size, 3);
    MapBetweenClasses f = order_split_map(seq, {1, 3}, "ends");
    std::size_t i = index_of(seq, {"a", "b", "b"});
    const Database& img = f.target()->member(f(i));
    CHECK(img.records_by_id() == std::vector<RecordId>{0, 1});  // a then b
    CHECK(f.target()->size() == 4);
    CHECK_THROWS_AS(order_split_map(seq, {0}, "bad"), NotInClass);
    CHECK_THROWS_AS(order_split_map(seq, {4}, "bad"), NotInClass);
    CHECK_THROWS_AS(order_split_map(dx3(), {1}, "bad"), UnsupportedClass);
}

TEST_CASE("projection maps relabel records") {
    ClassPtr cls = gen::make_class({"a", "b"}, ClassSpec::Kind::max_size, 2);
    MapBetweenClasses f = project_map(cls, {{"b", "a"}}, "collapse");
    CHECK(f.target()->universe().labels() == std::vector<std::string>{"a"});
    CHECK(f.target()->size() == 3);  // sizes 0, 1, 2 of the single label
    std::size_t ab = index_of(cls, {"a", "b"});
    CHECK(f.target()->member(f(ab)).size() == 2);
    CHECK_THROWS_AS(project_map(cls, {{"zz", "a"}}, "bad"), NotInClass);
}

TEST_CASE("map composition chains index tables") {
    ClassPtr cls = dx3();
    MapBetweenClasses f = restrict_map(cls, {"x1", "x2"}, "p12");
    MapBetweenClasses g = restrict_map(f.target(), {"x1"}, "p1");
    MapBetweenClasses gf = compose_maps(f, g);
    CHECK(gf.name() == "p1.p12");
    for (std::size_t i = 0; i < cls->size(); ++i) CHECK(gf(i) == g(f(i)));
    CHECK_THROWS_AS(compose_maps(g, f), ClassMismatch);
}

TEST_CASE("sensitivity of the identity map recovers granularity distance") {
    ClassPtr cls = dx3();
    GranularityPtr gu = builtin_granularity(cls, GranularityKind::unbounded);
    GranularityPtr gb = builtin_granularity(cls, GranularityKind::bounded);
    Metric du = canonical_metric(gu);
    Metric db_ = canonical_metric(gb);
    MapBetweenClasses id = identity_map(cls);

    CHECK(sensitivity(id, du, du).value == 1.0);
    CHECK(sensitivity(id, db_, du).value == granularity_distance(gu, gb));
    CHECK(is_inf(sensitivity(id, du, db_).value));

    auto res = sensitivity(id, db_, du);
    REQUIRE(res.witness.has_value());
    auto [i, j] = *res.witness;
    CHECK(du(i, j) / db_(i, j) == res.value);
}

TEST_CASE("sensitivity conventions at zero distances") {
    ClassPtr cls = gen::make_class({"a"}, ClassSpec::Kind::max_size, 1);
    DistMatrix zero(2, 0.0);
    Metric pseudo(cls, zero, "collapsed");
    Metric real = canonical_metric(builtin_granularity(cls, GranularityKind::free_lunch));
    MapBetweenClasses id = identity_map(cls);

    // Distinct members at source distance 0 but positive image distance.
    CHECK(is_inf(sensitivity(id, pseudo, real).value));
    // 0/0 pairs contribute nothing.
    CHECK(sensitivity(id, pseudo, pseudo).value == 0.0);
}

TEST_CASE("sensitivity is submultiplicative under map composition") {
    auto r = gen::rng(42);
    int checked = 0;
    for (int trial = 0; trial < 60; ++trial) {
        ClassPtr cls = gen::menu_class(r);
        GranularityKind kind = gen::random_kind(r);
        MapBetweenClasses f = gen::random_map(r, cls);
        MapBetweenClasses g = gen::random_map(r, f.target());
        Metric d0 = canonical_metric(builtin_granularity(cls, kind));
        Metric d1 = canonical_metric(builtin_granularity(f.target(), kind));
        Metric d2 = canonical_metric(builtin_granularity(g.target(), kind));

        double sf = sensitivity(f, d0, d1).value;
        double sg = sensitivity(g, d1, d2).value;
        if (is_inf(sf) || is_inf(sg)) continue;  // product bound is vacuous or undefined
        double sgf = sensitivity(compose_maps(f, g), d0, d2).value;
        CHECK(sgf <= sf * sg + 1e-12);
        ++checked;
    }
    CHECK(checked >= 20);
}

TEST_CASE("domination transfers scaled guarantees") {
    // d1 <= k d2 entrywise means any budget stated on d1 also holds at k
    // times the budget on d2; spot-check the arithmetic on the two builtins.
    ClassPtr cls = dx3();
    Metric du = canonical_metric(builtin_granularity(cls, GranularityKind::unbounded));
    Metric db_ = canonical_metric(builtin_granularity(cls, GranularityKind::bounded));
    REQUIRE(is_dominated(du, db_, 2.0).dominated);
    Metric right = scale(db_, 2.0 * 0.7);
    Metric left = scale(du, 0.7);
    for (std::size_t i = 0; i < cls->size(); ++i)
        for (std::size_t j = 0; j < cls->size(); ++j) CHECK(left(i, j) <= right(i, j));
}
