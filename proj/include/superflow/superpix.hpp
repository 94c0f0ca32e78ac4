#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "superflow/geometry.hpp"
#include "superflow/synth.hpp"

namespace superflow {

inline constexpr std::int32_t kUnassigned = -1;

/// Per-pixel region ids for one camera view; kUnassigned marks sky.
struct SuperpixelMap {
    int height = 0;
    int width = 0;
    std::vector<std::int32_t> ids;  // row-major H*W

    std::int32_t at(int row, int col) const {
        return ids[static_cast<std::size_t>(row) * width + col];
    }
};

/// Superpixel labeling over a camera rig with a shared id space.
/// id_view[g] is the view owning id g, or kUnassigned when the id spans all
/// views (view-consistent mode).
struct SuperpixelSet {
    std::vector<SuperpixelMap> views;
    std::vector<std::uint16_t> id_class;  // semantic class per id
    std::vector<std::int32_t> id_view;

    std::int32_t num_ids() const { return static_cast<std::int32_t>(id_class.size()); }
};

/// Superpoint membership for a point set: ids index into the originating
/// SuperpixelSet, kUnassigned for points no camera sees.
struct SuperpointAssignment {
    std::vector<std::int32_t> point_ids;
    std::vector<std::int32_t> counts;  // occupancy per superpixel id
    std::int32_t num_ids = 0;
};

/// One region per semantic class shared across every view: pixels of the
/// same class receive the same id in all cameras.
SuperpixelSet build_view_consistent_superpixels(const std::vector<SemanticImage>& images);

/// One region per (view, class): the same class in two cameras gets two ids.
SuperpixelSet build_per_view_superpixels(const std::vector<SemanticImage>& images);

/// Projects each point (keyframe sensor frame) into the rig; the first
/// camera in index order whose frustum contains the point decides the
/// superpixel id at the landing pixel.
SuperpointAssignment assign_superpoints(const PointCloud& cloud, const SuperpixelSet& set,
                                        const std::vector<CameraCalibration>& rig);

/// Concatenates the keyframe with its motion-compensated sweeps; keyframe
/// rows come first and are bit-identical to the input keyframe.
PointCloud build_dense_cloud(const FrameBundle& bundle);

/// Same projection rule as assign_superpoints, applied to a dense cloud
/// already expressed in the keyframe sensor frame.
SuperpointAssignment propagate_dense_superpoints(const PointCloud& dense,
                                                 const SuperpixelSet& set,
                                                 const std::vector<CameraCalibration>& rig);

/// Pairs of ids (one per frame) that denote the same region: matched by
/// class in view-consistent mode, by (view, class) otherwise. Sorted by the
/// first id.
std::vector<std::pair<std::int32_t, std::int32_t>> match_ids(const SuperpixelSet& a,
                                                             const SuperpixelSet& b);

}  // namespace superflow
