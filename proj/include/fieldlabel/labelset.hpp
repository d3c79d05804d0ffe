#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fieldlabel/geometry.hpp"
#include "fieldlabel/polygonize.hpp"
#include "fieldlabel/scoring.hpp"
#include "fieldlabel/selection.hpp"

namespace fieldlabel {

enum class LabelClass { field, non_cropland };

inline std::string to_string(LabelClass c) { return c == LabelClass::field ? "field" : "non_cropland"; }

inline LabelClass parse_label_class(const std::string& s) {
    if (s == "field") return LabelClass::field;
    if (s == "non_cropland") return LabelClass::non_cropland;
    throw DataError("unknown label class '" + s + "'");
}

inline std::string pseudo_provenance(const std::string& strategy_id) { return "pseudo(" + strategy_id + ")"; }
inline std::string screened_provenance(const std::string& strategy_id) { return "pseudo+screened(" + strategy_id + ")"; }
inline const std::string kHumanProvenance = "human";

struct Label {
    MultiPolygon geometry;
    LabelClass label_class = LabelClass::field;
    std::string provenance = kHumanProvenance;
    double area_ha = 0.0;
    std::optional<std::int32_t> instance_id;
    std::optional<InstanceScore> score;
    std::string ref_id;  // reference labels only
};

struct LabelSet {
    std::string site_id;
    std::string crs_id;
    std::vector<Label> labels;

    std::size_t count(LabelClass c) const {
        return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [c](const Label& l) { return l.label_class == c; }));
    }
};

/// GeoJSON with class, provenance, area and (when present) instance scores per feature.
inline FeatureCollection to_feature_collection(const LabelSet& set) {
    FeatureCollection fc;
    fc.crs_id = set.crs_id;
    for (const auto& l : set.labels) {
        Feature f;
        f.geometry = l.geometry;
        auto& p = f.properties;
        p["site_id"] = set.site_id;
        if (!l.ref_id.empty()) p["ref_id"] = l.ref_id;
        if (l.instance_id) p["instance_id"] = *l.instance_id;
        p["class"] = to_string(l.label_class);
        p["provenance"] = l.provenance;
        if (l.score) {
            p["SemC"] = l.score->sem_c;
            p["InsC"] = l.score->ins_c;
            p["size_px"] = l.score->size_px;
        }
        p["area_ha"] = l.area_ha;
        fc.features.push_back(std::move(f));
    }
    return fc;
}

/// Inverse of to_feature_collection. Features without a class are fields; without provenance, human.
/// Missing area is computed from the geometry; missing ref ids become the 1-based feature index.
inline LabelSet label_set_from_features(const FeatureCollection& fc, const std::string& site_id) {
    LabelSet set;
    set.site_id = site_id;
    set.crs_id = fc.crs_id;
    std::size_t k = 0;
    for (const auto& f : fc.features) {
        ++k;
        Label l;
        l.geometry = f.geometry;
        const auto& p = f.properties;
        l.label_class = parse_label_class(p.value("class", std::string("field")));
        l.provenance = p.value("provenance", kHumanProvenance);
        l.area_ha = p.contains("area_ha") ? p["area_ha"].get<double>() : area(l.geometry) / 10000.0;
        if (p.contains("instance_id")) l.instance_id = p["instance_id"].get<std::int32_t>();
        if (p.contains("SemC") && p.contains("InsC") && p.contains("size_px") && l.instance_id) {
            l.score = InstanceScore{*l.instance_id, p["SemC"].get<double>(), p["InsC"].get<double>(), p["size_px"].get<long long>()};
        }
        if (p.contains("ref_id")) {
            l.ref_id = p["ref_id"].is_string() ? p["ref_id"].get<std::string>() : p["ref_id"].dump();
        } else if (p.contains("id")) {
            l.ref_id = p["id"].is_string() ? p["id"].get<std::string>() : p["id"].dump();
        } else {
            l.ref_id = std::to_string(k);
        }
        set.labels.push_back(std::move(l));
    }
    return set;
}

inline std::string dump_label_set(const LabelSet& set) { return dump_geojson(to_feature_collection(set)); }

/// Builds a site's pseudo-label set from its instance map, scores and selection.
/// Fields come first, then non-cropland, each in instance-id order.
inline LabelSet build_pseudo_labels(const std::string& site_id, const InstanceMap& map,
                                    const std::vector<InstanceScore>& scores, const SiteSelection& selection,
                                    const std::string& strategy_id) {
    LabelSet set;
    set.site_id = site_id;
    set.crs_id = map.transform.crs_id;
    std::vector<std::int32_t> wanted = selection.fields;
    wanted.insert(wanted.end(), selection.noncrop.begin(), selection.noncrop.end());
    if (wanted.empty()) return set;

    // Polygonize only the selected instances.
    LabelGrid subset(map.width(), map.height(), 0);
    std::vector<char> keep(map.instances.size() + 1, 0);
    for (auto id : wanted) {
        if (id <= 0 || static_cast<std::size_t>(id) > map.instances.size()) throw DataError("selection references unknown instance " + std::to_string(id));
        keep[id] = 1;
    }
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const auto l = map.labels[i];
        if (l > 0 && keep[l]) subset[i] = l;
    }
    const auto polygons = polygonize(subset, map.transform);
    std::unordered_map<std::int32_t, const InstanceScore*> by_id;
    for (const auto& s : scores) by_id[s.instance_id] = &s;

    auto add = [&](const std::vector<std::int32_t>& ids, LabelClass cls) {
        std::vector<std::int32_t> sorted = ids;
        std::sort(sorted.begin(), sorted.end());
        for (auto id : sorted) {
            Label l;
            l.geometry = polygons.at(id);
            l.label_class = cls;
            l.provenance = pseudo_provenance(strategy_id);
            l.instance_id = id;
            const auto& inst = map.instances[id - 1];
            l.area_ha = inst.area_ha;
            if (auto it = by_id.find(id); it != by_id.end()) l.score = *it->second;
            set.labels.push_back(std::move(l));
        }
    };
    add(selection.fields, LabelClass::field);
    add(selection.noncrop, LabelClass::non_cropland);
    return set;
}

}  // namespace fieldlabel
