#include "superflow/superpix.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace superflow {

namespace {

SuperpixelSet label_by_class(const std::vector<SemanticImage>& images, bool per_view) {
    SuperpixelSet set;
    // (view key, class) -> id; view key collapses to a single bucket in
    // view-consistent mode so every view shares ids.
    std::map<std::pair<std::int32_t, std::uint16_t>, std::int32_t> table;
    for (std::size_t v = 0; v < images.size(); ++v) {
        const std::int32_t view_key = per_view ? static_cast<std::int32_t>(v) : kUnassigned;
        std::set<std::uint16_t> classes;
        for (const std::uint16_t c : images[v].class_ids)
            if (c != kSkyClass) classes.insert(c);
        for (const std::uint16_t c : classes) {
            if (table.emplace(std::make_pair(view_key, c), set.num_ids()).second) {
                set.id_class.push_back(c);
                set.id_view.push_back(view_key);
            }
        }
    }
    for (std::size_t v = 0; v < images.size(); ++v) {
        const std::int32_t view_key = per_view ? static_cast<std::int32_t>(v) : kUnassigned;
        SuperpixelMap map;
        map.height = images[v].height;
        map.width = images[v].width;
        map.ids.assign(images[v].class_ids.size(), kUnassigned);
        for (std::size_t p = 0; p < map.ids.size(); ++p) {
            const std::uint16_t c = images[v].class_ids[p];
            if (c != kSkyClass) map.ids[p] = table.at(std::make_pair(view_key, c));
        }
        set.views.push_back(std::move(map));
    }
    return set;
}

}  // namespace

SuperpixelSet build_view_consistent_superpixels(const std::vector<SemanticImage>& images) {
    return label_by_class(images, false);
}

SuperpixelSet build_per_view_superpixels(const std::vector<SemanticImage>& images) {
    return label_by_class(images, true);
}

SuperpointAssignment assign_superpoints(const PointCloud& cloud, const SuperpixelSet& set,
                                        const std::vector<CameraCalibration>& rig) {
    if (set.views.size() != rig.size())
        throw std::invalid_argument("superpixel set does not match rig");
    const Matrix& coords = cloud.coords;
    SuperpointAssignment assignment;
    assignment.num_ids = set.num_ids();
    assignment.point_ids.assign(coords.rows(), kUnassigned);
    assignment.counts.assign(set.id_class.size(), 0);
    for (Eigen::Index i = 0; i < coords.rows(); ++i) {
        const Vec3 p = coords.row(i).transpose();
        for (std::size_t cam = 0; cam < rig.size(); ++cam) {
            const auto proj = project_point(p, rig[cam]);
            if (!proj) continue;
            const int col = static_cast<int>(std::floor(proj->u));
            const int row = static_cast<int>(std::floor(proj->v));
            assignment.point_ids[i] = set.views[cam].at(row, col);
            break;
        }
        if (assignment.point_ids[i] != kUnassigned) ++assignment.counts[assignment.point_ids[i]];
    }
    return assignment;
}

PointCloud build_dense_cloud(const FrameBundle& bundle) {
    if (bundle.sweeps.size() != bundle.sweep_to_key.size())
        throw std::invalid_argument("sweep transforms missing");
    Eigen::Index total = bundle.keyframe.size();
    for (const auto& sweep : bundle.sweeps) total += sweep.size();
    const Eigen::Index channels = bundle.keyframe.num_channels();

    PointCloud dense;
    dense.coords.resize(total, 3);
    dense.feats.resize(total, channels);
    dense.labels.reserve(total);
    dense.timestamp = bundle.keyframe.timestamp;

    dense.coords.topRows(bundle.keyframe.size()) = bundle.keyframe.coords;
    dense.feats.topRows(bundle.keyframe.size()) = bundle.keyframe.feats;
    dense.labels.insert(dense.labels.end(), bundle.keyframe.labels.begin(),
                        bundle.keyframe.labels.end());
    Eigen::Index offset = bundle.keyframe.size();
    for (std::size_t s = 0; s < bundle.sweeps.size(); ++s) {
        const auto& sweep = bundle.sweeps[s];
        if (sweep.num_channels() != channels)
            throw std::invalid_argument("sweep feature channels disagree");
        dense.coords.middleRows(offset, sweep.size()) =
            transform_points(sweep.coords, bundle.sweep_to_key[s]);
        dense.feats.middleRows(offset, sweep.size()) = sweep.feats;
        dense.labels.insert(dense.labels.end(), sweep.labels.begin(), sweep.labels.end());
        offset += sweep.size();
    }
    return dense;
}

SuperpointAssignment propagate_dense_superpoints(const PointCloud& dense,
                                                 const SuperpixelSet& set,
                                                 const std::vector<CameraCalibration>& rig) {
    return assign_superpoints(dense, set, rig);
}

std::vector<std::pair<std::int32_t, std::int32_t>> match_ids(const SuperpixelSet& a,
                                                             const SuperpixelSet& b) {
    std::map<std::pair<std::int32_t, std::uint16_t>, std::int32_t> lookup;
    for (std::int32_t g = 0; g < b.num_ids(); ++g)
        lookup.emplace(std::make_pair(b.id_view[g], b.id_class[g]), g);
    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
    for (std::int32_t g = 0; g < a.num_ids(); ++g) {
        const auto it = lookup.find(std::make_pair(a.id_view[g], a.id_class[g]));
        if (it != lookup.end()) pairs.emplace_back(g, it->second);
    }
    return pairs;
}

}  // namespace superflow
