#pragma once

#include <memory>

#include "cemreg/nn_index.hpp"
#include "cemreg/point_cloud.hpp"
#include "cemreg/se3.hpp"

namespace cemreg {

// A registration state s = {X, Y} with nearest-neighbor indices on both
// clouds. Immutable after construction; the target side is shared (not
// copied) across state transitions.
struct RegistrationState {
    std::shared_ptr<const PointCloud> source;
    std::shared_ptr<const PointCloud> target;
    std::shared_ptr<const NeighborIndex> source_index;
    std::shared_ptr<const NeighborIndex> target_index;
};

inline RegistrationState make_state(PointCloud source, PointCloud target) {
    validate_cloud(source);
    validate_cloud(target);
    RegistrationState s;
    s.source = std::make_shared<PointCloud>(std::move(source));
    s.target = std::make_shared<PointCloud>(std::move(target));
    s.source_index = std::make_shared<NeighborIndex>(*s.source);
    s.target_index = std::make_shared<NeighborIndex>(*s.target);
    return s;
}

// State transition: s' = {R(e) x_i + t, Y}. The source index is rebuilt for
// the transformed cloud; the target cloud and its index are shared.
inline RegistrationState apply_motion(const RegistrationState& s, const RigidMotion& a) {
    RegistrationState next;
    next.source = std::make_shared<PointCloud>(transform_cloud(*s.source, a));
    next.source_index = std::make_shared<NeighborIndex>(*next.source);
    next.target = s.target;
    next.target_index = s.target_index;
    return next;
}

}  // namespace cemreg
