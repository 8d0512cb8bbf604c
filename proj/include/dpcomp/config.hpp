#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dpcomp/variants.hpp"

namespace dpcomp {

inline constexpr int kSchemaVersion = 1;

struct GranularitySpec {
    std::string name;
    std::string kind;  // unbounded | bounded | free_lunch | custom
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> edges;
};

struct MapSpec {
    std::string name;
    std::string kind;  // identity | restrict | project | order_split | explicit
    std::vector<std::string> labels;
    std::vector<std::pair<std::string, std::string>> relabel;
    std::vector<std::size_t> positions;
    std::vector<std::vector<std::string>> images;
};

struct StepSpec {
    std::string map;
    std::string flavor;  // pure | approximate | zero_concentrated | gaussian
    std::string granularity;
    bool dependent = false;
    std::optional<double> eps;
    std::optional<double> delta;
    std::optional<double> rho;
    std::optional<double> mu;
};

struct MechanismSpec {
    std::string kind;  // counting | geometric | discrete_gaussian | randomized_response
    std::string map;   // empty = identity
    std::string query = "size";
    double eps = 1.0;
    double sigma = 1.0;
    double flip = 0.25;
    long long lo = 0;
    long long hi = 0;
};

struct ClaimSpec {
    bool use_result = true;
    std::string flavor;
    std::string granularity;
    double eps = 0.0;
    double delta = 0.0;
    double rho = 0.0;
    double mu = 0.0;
};

struct VerificationSpec {
    bool requested = false;
    std::string pairs = "all";  // all | neighbors
    std::string granularity;    // neighbors scope; defaults to the plan granularity
    std::vector<MechanismSpec> mechanisms;
    ClaimSpec claim;
    bool diagnose = false;
};

struct ConfigDocument {
    std::vector<std::string> universe;
    std::string class_kind;  // max_size | exact_size | ordered_exact_size | explicit
    std::size_t class_size = 0;
    std::vector<std::vector<std::string>> class_members;
    bool class_ordered = false;

    std::vector<GranularitySpec> granularities;
    std::vector<MapSpec> maps;
    std::string mode = "independent";
    std::vector<StepSpec> steps;

    std::string plan_granularity;  // best-bound target; empty disables the attempt
    std::string dstar;             // metric family for the gaussian parallel rule

    VerificationSpec verification;

    std::string digest;  // content digest of the raw document
};

namespace cfg {

using nlohmann::json;

inline const json& require(const json& j, const char* field, const std::string& where) {
    auto it = j.find(field);
    if (it == j.end()) throw ParseError(where + ": missing field '" + field + "'");
    return *it;
}

template <class T>
inline T as(const json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw ParseError(where + ": " + e.what());
    }
}

template <class T>
inline T field(const json& j, const char* name, const std::string& where) {
    return as<T>(require(j, name, where), where + "." + name);
}

template <class T>
inline T field_or(const json& j, const char* name, T fallback, const std::string& where) {
    auto it = j.find(name);
    if (it == j.end()) return fallback;
    return as<T>(*it, where + "." + name);
}

inline std::optional<double> opt_number(const json& j, const char* name, const std::string& where) {
    auto it = j.find(name);
    if (it == j.end()) return std::nullopt;
    return as<double>(*it, where + "." + name);
}

}  // namespace cfg

inline ConfigDocument parse_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what());
    }
    if (!j.is_object()) throw ParseError("config root must be an object");
    int version = cfg::field_or<int>(j, "schema_version", -1, "config");
    if (version != kSchemaVersion)
        throw SchemaVersionMismatch("expected schema_version " + std::to_string(kSchemaVersion) +
                                    ", found " + std::to_string(version));

    ConfigDocument doc;
    doc.digest = hex_digest(fnv1a(text));
    doc.universe = cfg::field<std::vector<std::string>>(j, "universe", "config");

    const auto& jc = cfg::require(j, "class", "config");
    doc.class_kind = cfg::field<std::string>(jc, "kind", "class");
    doc.class_size = cfg::field_or<std::size_t>(jc, "size", 0, "class");
    doc.class_ordered = cfg::field_or<bool>(jc, "ordered", false, "class");
    if (doc.class_kind == "explicit")
        doc.class_members = cfg::field<std::vector<std::vector<std::string>>>(jc, "members", "class");
    else if (doc.class_kind != "max_size" && doc.class_kind != "exact_size" &&
             doc.class_kind != "ordered_exact_size")
        throw ParseError("class.kind: unknown kind '" + doc.class_kind + "'");

    for (const auto& jg : cfg::field_or<nlohmann::json>(j, "granularities", nlohmann::json::array(),
                                                        "config")) {
        GranularitySpec g;
        g.name = cfg::field<std::string>(jg, "name", "granularity");
        g.kind = cfg::field<std::string>(jg, "kind", "granularity " + g.name);
        if (g.kind == "custom") {
            for (const auto& je : cfg::require(jg, "edges", "granularity " + g.name)) {
                if (!je.is_array() || je.size() != 2)
                    throw ParseError("granularity " + g.name + ".edges: each edge is a member pair");
                g.edges.emplace_back(cfg::as<std::vector<std::string>>(je[0], g.name + ".edges"),
                                     cfg::as<std::vector<std::string>>(je[1], g.name + ".edges"));
            }
        } else if (g.kind != "unbounded" && g.kind != "bounded" && g.kind != "free_lunch") {
            throw ParseError("granularity " + g.name + ": unknown kind '" + g.kind + "'");
        }
        doc.granularities.push_back(std::move(g));
    }

    for (const auto& jm : cfg::field_or<nlohmann::json>(j, "maps", nlohmann::json::array(), "config")) {
        MapSpec m;
        m.name = cfg::field<std::string>(jm, "name", "map");
        m.kind = cfg::field<std::string>(jm, "kind", "map " + m.name);
        if (m.kind == "restrict")
            m.labels = cfg::field<std::vector<std::string>>(jm, "labels", "map " + m.name);
        else if (m.kind == "project") {
            const auto& jr = cfg::require(jm, "relabel", "map " + m.name);
            if (!jr.is_object()) throw ParseError("map " + m.name + ".relabel: expected an object");
            for (const auto& [from, to] : jr.items())
                m.relabel.emplace_back(from, cfg::as<std::string>(to, m.name + ".relabel"));
        } else if (m.kind == "order_split")
            m.positions = cfg::field<std::vector<std::size_t>>(jm, "positions", "map " + m.name);
        else if (m.kind == "explicit")
            m.images = cfg::field<std::vector<std::vector<std::string>>>(jm, "images", "map " + m.name);
        else if (m.kind != "identity")
            throw ParseError("map " + m.name + ": unknown kind '" + m.kind + "'");
        doc.maps.push_back(std::move(m));
    }

    doc.mode = cfg::field_or<std::string>(j, "mode", "independent", "config");
    if (doc.mode != "independent" && doc.mode != "adaptive")
        throw ParseError("mode: expected 'independent' or 'adaptive'");

    for (const auto& js : cfg::field_or<nlohmann::json>(j, "steps", nlohmann::json::array(), "config")) {
        StepSpec s;
        s.map = cfg::field<std::string>(js, "map", "step");
        s.flavor = cfg::field<std::string>(js, "flavor", "step");
        s.granularity = cfg::field<std::string>(js, "granularity", "step");
        s.dependent = cfg::field_or<bool>(js, "dependent", false, "step");
        s.eps = cfg::opt_number(js, "eps", "step");
        s.delta = cfg::opt_number(js, "delta", "step");
        s.rho = cfg::opt_number(js, "rho", "step");
        s.mu = cfg::opt_number(js, "mu", "step");
        doc.steps.push_back(std::move(s));
    }

    if (auto it = j.find("plan"); it != j.end()) {
        doc.plan_granularity = cfg::field_or<std::string>(*it, "granularity", "", "plan");
        doc.dstar = cfg::field_or<std::string>(*it, "dstar", "", "plan");
    }

    if (auto it = j.find("verification"); it != j.end()) {
        const auto& jv = *it;
        VerificationSpec v;
        v.requested = true;
        v.pairs = cfg::field_or<std::string>(jv, "pairs", "all", "verification");
        if (v.pairs != "all" && v.pairs != "neighbors")
            throw ParseError("verification.pairs: expected 'all' or 'neighbors'");
        v.granularity = cfg::field_or<std::string>(jv, "granularity", "", "verification");
        v.diagnose = cfg::field_or<bool>(jv, "diagnose", false, "verification");
        for (const auto& jm : cfg::require(jv, "mechanisms", "verification")) {
            MechanismSpec m;
            m.kind = cfg::field<std::string>(jm, "kind", "mechanism");
            m.map = cfg::field_or<std::string>(jm, "map", "", "mechanism " + m.kind);
            m.query = cfg::field_or<std::string>(jm, "query", "size", "mechanism " + m.kind);
            m.eps = cfg::field_or<double>(jm, "eps", 1.0, "mechanism " + m.kind);
            m.sigma = cfg::field_or<double>(jm, "sigma", 1.0, "mechanism " + m.kind);
            m.flip = cfg::field_or<double>(jm, "flip", 0.25, "mechanism " + m.kind);
            m.lo = cfg::field_or<long long>(jm, "lo", 0, "mechanism " + m.kind);
            m.hi = cfg::field_or<long long>(jm, "hi", 0, "mechanism " + m.kind);
            if (m.kind != "counting" && m.kind != "geometric" && m.kind != "discrete_gaussian" &&
                m.kind != "randomized_response")
                throw ParseError("mechanism: unknown kind '" + m.kind + "'");
            v.mechanisms.push_back(std::move(m));
        }
        if (auto jt = jv.find("claim"); jt != jv.end()) {
            v.claim.use_result = cfg::field_or<bool>(*jt, "use_result", false, "claim");
            if (!v.claim.use_result) {
                v.claim.flavor = cfg::field<std::string>(*jt, "flavor", "claim");
                v.claim.granularity = cfg::field<std::string>(*jt, "granularity", "claim");
                v.claim.eps = cfg::field_or<double>(*jt, "eps", 0.0, "claim");
                v.claim.delta = cfg::field_or<double>(*jt, "delta", 0.0, "claim");
                v.claim.rho = cfg::field_or<double>(*jt, "rho", 0.0, "claim");
                v.claim.mu = cfg::field_or<double>(*jt, "mu", 0.0, "claim");
            }
        } else {
            v.claim.use_result = true;
        }
        doc.verification = std::move(v);
    }
    return doc;
}

inline ConfigDocument load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

// Config resolved into live objects.
struct RealizedConfig {
    ClassPtr cls;
    std::vector<std::pair<std::string, GranularityPtr>> granularities;
    std::vector<std::pair<std::string, MapBetweenClasses>> maps;
    std::optional<CompositionPlan> plan;
    GranularityPtr plan_granularity;  // null when no best-bound target declared
    MetricSelector dstar{"", nullptr};
    ConfigDocument doc;
};

namespace cfg {

inline GranularityPtr find_granularity(const RealizedConfig& r, const std::string& name) {
    for (const auto& [n, g] : r.granularities)
        if (n == name) return g;
    throw UnresolvedReference("granularity '" + name + "' is not defined");
}

inline const MapBetweenClasses& find_map(const RealizedConfig& r, const std::string& name) {
    for (const auto& [n, m] : r.maps)
        if (n == name) return m;
    throw UnresolvedReference("map '" + name + "' is not defined");
}

inline GranularityKind parse_kind(const std::string& kind) {
    if (kind == "unbounded") return GranularityKind::unbounded;
    if (kind == "bounded") return GranularityKind::bounded;
    if (kind == "free_lunch") return GranularityKind::free_lunch;
    return GranularityKind::custom;
}

// The step's granularity carried onto the class its guarantee is stated
// over: the declared instance when classes agree, the same built-in kind on
// the map target otherwise.
inline GranularityPtr step_granularity(const GranularityPtr& declared, const ClassPtr& target) {
    if (same_class(declared->class_ref(), target)) return declared;
    if (declared->kind() == GranularityKind::custom)
        throw ParseError("step over map target cannot carry custom granularity '" + declared->name() +
                         "'");
    return builtin_granularity(target, declared->kind());
}

inline MetricSelector default_dstar(const GranularityPtr& g) {
    if (!g) return symdiff_selector();
    switch (g->kind()) {
        case GranularityKind::unbounded: return unbounded_formula_selector();
        case GranularityKind::bounded: return bounded_formula_selector();
        case GranularityKind::free_lunch: return free_lunch_selector();
        case GranularityKind::custom: return symdiff_selector();
    }
    return symdiff_selector();
}

}  // namespace cfg

// Scalar budget on the canonical metric of a granularity, realized as the
// matching guarantee: eps*d | (eps*d, delta0*[d]_eps) | sqrt(rho)*d | mu*d.
inline Guarantee budget_guarantee(const Metric& base, const std::string& flavor, double eps,
                                  double delta0, double rho, double mu) {
    if (flavor == "pure") return Guarantee::pure(Bound(scale(base, eps), "scaled-canonical"));
    if (flavor == "approximate") {
        DistMatrix dm(base.size(), 0.0);
        for (std::size_t i = 0; i < base.size(); ++i)
            for (std::size_t j = 0; j < base.size(); ++j)
                dm(i, j) = xscale(delta0, detail::delta_profile_value(eps, base(i, j)));
        return Guarantee::approximate(Bound(scale(base, eps), "scaled-canonical"), std::move(dm));
    }
    if (flavor == "zero_concentrated")
        return Guarantee::zero_concentrated(Bound(scale(base, std::sqrt(rho)), "scaled-canonical"));
    if (flavor == "gaussian")
        return Guarantee::gaussian(Bound(scale(base, mu), "scaled-canonical"));
    throw ParseError("unknown guarantee flavor '" + flavor + "'");
}

inline MetricSelector selector_by_name(const std::string& name) {
    if (name == "symmetric_difference") return symdiff_selector();
    if (name == "free_lunch") return free_lunch_selector();
    if (name == "unbounded") return unbounded_formula_selector();
    if (name == "bounded") return bounded_formula_selector();
    throw UnresolvedReference("metric family '" + name + "' is not defined");
}

inline RealizedConfig realize_config(ConfigDocument doc) {
    RealizedConfig r;
    r.doc = doc;

    auto universe = std::make_shared<RecordUniverse>(doc.universe);
    ClassSpec spec;
    spec.universe = universe;
    spec.size = doc.class_size;
    if (doc.class_kind == "max_size")
        spec.kind = ClassSpec::Kind::max_size;
    else if (doc.class_kind == "exact_size")
        spec.kind = ClassSpec::Kind::exact_size;
    else if (doc.class_kind == "ordered_exact_size")
        spec.kind = ClassSpec::Kind::ordered_exact_size;
    else {
        spec.kind = ClassSpec::Kind::explicit_members;
        for (const auto& labels : doc.class_members)
            spec.members.push_back(db_from_labels(*universe, labels, doc.class_ordered));
    }
    r.cls = enumerate_class(spec);

    for (const auto& g : doc.granularities) {
        if (g.kind == "custom") {
            std::vector<std::pair<std::size_t, std::size_t>> edges;
            for (const auto& [a, b] : g.edges) {
                auto ia = r.cls->index_of(db_from_labels(*universe, a, r.cls->ordered()));
                auto ib = r.cls->index_of(db_from_labels(*universe, b, r.cls->ordered()));
                if (!ia || !ib) throw UnresolvedReference("edge member not in class");
                edges.emplace_back(*ia, *ib);
            }
            r.granularities.emplace_back(g.name, custom_granularity(r.cls, g.name, edges));
        } else {
            r.granularities.emplace_back(g.name,
                                         builtin_granularity(r.cls, cfg::parse_kind(g.kind), g.name));
        }
    }

    for (const auto& m : doc.maps) {
        if (m.kind == "identity")
            r.maps.emplace_back(m.name, identity_map(r.cls, m.name));
        else if (m.kind == "restrict")
            r.maps.emplace_back(m.name, restrict_map(r.cls, m.labels, m.name));
        else if (m.kind == "project")
            r.maps.emplace_back(m.name, project_map(r.cls, m.relabel, m.name));
        else if (m.kind == "order_split")
            r.maps.emplace_back(m.name, order_split_map(r.cls, m.positions, m.name));
        else {
            std::vector<Database> images;
            for (const auto& labels : m.images)
                images.push_back(db_from_labels(*universe, labels, r.cls->ordered()));
            if (images.size() != r.cls->size())
                throw ParseError("map " + m.name + ": one image per class member required");
            bool ordered = !images.empty() && images.front().is_ordered();
            r.maps.emplace_back(m.name, detail::map_from_images(r.cls, std::move(images), ordered, m.name));
        }
    }

    if (!doc.steps.empty()) {
        std::vector<PlanStep> steps;
        for (const auto& s : doc.steps) {
            const MapBetweenClasses& f = cfg::find_map(r, s.map);
            GranularityPtr declared = cfg::find_granularity(r, s.granularity);
            ClassPtr over = s.dependent ? r.cls : f.target();
            GranularityPtr g = cfg::step_granularity(declared, over);
            Metric base = canonical_metric(g);

            auto need = [&](const std::optional<double>& v, const char* what, bool required) {
                if (!v) {
                    if (required)
                        throw ParseError("step over map '" + s.map + "': missing budget '" + what + "'");
                    return 0.0;
                }
                if (!(*v >= 0.0)) throw ParseError(std::string("budget '") + what + "' must be non-negative");
                return *v;
            };
            double eps = need(s.eps, "eps", s.flavor == "pure" || s.flavor == "approximate");
            double delta0 = need(s.delta, "delta", s.flavor == "approximate");
            double rho = need(s.rho, "rho", s.flavor == "zero_concentrated");
            double mu = need(s.mu, "mu", s.flavor == "gaussian");
            steps.push_back({f, budget_guarantee(base, s.flavor, eps, delta0, rho, mu), s.dependent,
                             s.eps, s.delta, s.rho, s.mu});
        }
        r.plan.emplace(r.cls, std::move(steps),
                       doc.mode == "adaptive" ? Mode::adaptive : Mode::independent);
    }

    if (!doc.plan_granularity.empty())
        r.plan_granularity = cfg::find_granularity(r, doc.plan_granularity);
    r.dstar = doc.dstar.empty() ? cfg::default_dstar(r.plan_granularity) : selector_by_name(doc.dstar);
    return r;
}

}  // namespace dpcomp
