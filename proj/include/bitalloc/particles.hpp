#pragma once

#include "bitalloc/model.hpp"

#include <Eigen/Dense>

namespace bitalloc {

/// Weighted particle approximation of the target-state density. Column s of
/// `states` is particle s.
struct ParticleSet {
    Eigen::Matrix<double, 4, Eigen::Dynamic> states;
    Eigen::VectorXd weights;

    Eigen::Index size() const { return states.cols(); }
    TargetState state(Eigen::Index s) const { return TargetState::from(states.col(s)); }
};

}  // namespace bitalloc
