#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpcomp/metric.hpp"

namespace dpcomp {

// 17 significant digits round-trips any double; infinities use a string
// sentinel so the JSON stays standard.
inline std::string render_distance(double v) {
    if (is_inf(v)) return "inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline nlohmann::ordered_json matrix_to_json(const DistMatrix& m) {
    auto out = nlohmann::ordered_json::array();
    for (double v : m.flat()) {
        if (is_inf(v))
            out.push_back("inf");
        else
            out.push_back(v);
    }
    return out;
}

inline DistMatrix matrix_from_json(const nlohmann::json& j, std::size_t n) {
    if (!j.is_array() || j.size() != n * n) throw CacheCorrupt("matrix entry count mismatch");
    DistMatrix m(n, 0.0);
    std::size_t k = 0;
    for (const auto& cell : j) {
        double v;
        if (cell.is_string()) {
            if (cell.get<std::string>() != "inf") throw CacheCorrupt("unknown matrix sentinel");
            v = kInf;
        } else if (cell.is_number()) {
            v = cell.get<double>();
        } else {
            throw CacheCorrupt("matrix cell is neither number nor sentinel");
        }
        m(k / n, k % n) = v;
        ++k;
    }
    return m;
}

// Adjacency-only signature: two granularities with the same neighbor graph
// share a canonical metric regardless of display name.
inline std::string granularity_signature(const Granularity& g) {
    std::string text = kind_name(g.kind());
    for (std::size_t i = 0; i < g.size(); ++i) {
        text += ';';
        for (std::size_t j : g.neighbors_of(i)) {
            text += std::to_string(j);
            text += ',';
        }
    }
    return hex_digest(fnv1a(text));
}

inline std::string cache_path(const std::string& dir, const Granularity& g) {
    return dir + "/dpcomp-" + g.class_ref()->digest() + "-" + granularity_signature(g) + ".json";
}

namespace detail {

inline std::string matrix_payload(const std::string& class_digest, const std::string& gran_sig,
                                  const DistMatrix& m) {
    std::string text = class_digest + ";" + gran_sig + ";";
    for (double v : m.flat()) {
        text += render_distance(v);
        text += ',';
    }
    return text;
}

}  // namespace detail

inline void cache_matrix(const std::string& dir, const Granularity& g, const DistMatrix& m) {
    std::filesystem::create_directories(dir);
    const std::string sig = granularity_signature(g);
    nlohmann::ordered_json doc;
    doc["schema_version"] = 1;
    doc["class_digest"] = g.class_ref()->digest();
    doc["granularity_signature"] = sig;
    doc["size"] = g.size();
    doc["matrix"] = matrix_to_json(m);
    doc["digest"] = hex_digest(fnv1a(detail::matrix_payload(g.class_ref()->digest(), sig, m)));
    std::ofstream out(cache_path(dir, g), std::ios::binary | std::ios::trunc);
    out << doc.dump(2) << '\n';
}

// Missing file -> nullopt; present but inconsistent -> CacheCorrupt, so the
// caller can distinguish "cold" from "damaged".
inline std::optional<DistMatrix> load_cached(const std::string& dir, const Granularity& g) {
    std::ifstream in(cache_path(dir, g), std::ios::binary);
    if (!in) return std::nullopt;
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw CacheCorrupt(e.what());
    }
    if (!doc.is_object() || doc.value("schema_version", -1) != 1)
        throw CacheCorrupt("unsupported cache schema");
    const std::string sig = granularity_signature(g);
    if (doc.value("class_digest", "") != g.class_ref()->digest() ||
        doc.value("granularity_signature", "") != sig)
        throw CacheCorrupt("cache entry belongs to a different space");
    auto it = doc.find("matrix");
    if (it == doc.end()) throw CacheCorrupt("cache entry has no matrix");
    DistMatrix m = matrix_from_json(*it, g.size());
    const std::string want =
        hex_digest(fnv1a(detail::matrix_payload(g.class_ref()->digest(), sig, m)));
    if (doc.value("digest", "") != want) throw CacheCorrupt("cache digest mismatch");
    return m;
}

// Canonical metric with a disk cache in front; damaged entries are
// recomputed and rewritten rather than surfaced.
inline Metric cached_canonical_metric(const std::string& dir, const GranularityPtr& g) {
    if (!dir.empty()) {
        try {
            if (auto m = load_cached(dir, *g))
                return Metric(g->class_ref(), std::move(*m), canonical_metric_name(*g), g);
        } catch (const CacheCorrupt&) {
        }
    }
    Metric m = canonical_metric(g);
    if (!dir.empty()) cache_matrix(dir, *g, m.dist());
    return m;
}

inline std::size_t clear_cache(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::exists(dir)) return 0;
    std::size_t removed = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("dpcomp-", 0) == 0 && entry.path().extension() == ".json") {
            fs::remove(entry.path());
            ++removed;
        }
    }
    return removed;
}

}  // namespace dpcomp
