// Builds the class of multisets over {a,b,c} with at most 3 records, derives
// the canonical metrics of the unbounded and bounded granularities, and
// compares the two notions numerically.

#include <cstdio>

#include "dpcomp/calculus.hpp"

using namespace dpcomp;

int main() {
    auto universe = std::make_shared<RecordUniverse>(std::vector<std::string>{"a", "b", "c"});
    ClassSpec spec;
    spec.kind = ClassSpec::Kind::max_size;
    spec.universe = universe;
    spec.size = 3;
    ClassPtr cls = enumerate_class(spec);
    std::printf("class: %zu multisets over {a,b,c} with size <= 3\n", cls->size());

    auto unbounded = builtin_granularity(cls, GranularityKind::unbounded);
    auto bounded = builtin_granularity(cls, GranularityKind::bounded);
    Metric du = canonical_metric(unbounded);
    Metric db = canonical_metric(bounded);

    std::printf("diameter(%s) = %g\n", du.name().c_str(), diameter(du));
    std::printf("diameter(%s) = %s\n", db.name().c_str(),
                is_inf(diameter(db)) ? "inf" : "finite");
    std::printf("components under bounded: %zu (one per database size)\n",
                connectivity_report(db).size());

    double u_to_b = granularity_distance(unbounded, bounded);
    double b_to_u = granularity_distance(bounded, unbounded);
    std::printf("dist(U,B) = %g   (bounded neighbors are <= 2 apart under d^U)\n", u_to_b);
    std::printf("dist(B,U) = %s (unbounded neighbors change the size, unreachable under d^B)\n",
                is_inf(b_to_u) ? "inf" : "finite");
    return 0;
}
