#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace bitalloc {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

/// Target kinematics: position (m) and velocity (m/s).
struct TargetState {
    double x = 0.0;
    double y = 0.0;
    double vx = 0.0;
    double vy = 0.0;

    Vec4 vec() const { return {x, y, vx, vy}; }
    Vec2 position() const { return {x, y}; }
    static TargetState from(const Vec4& v) { return {v(0), v(1), v(2), v(3)}; }
};

/// White-noise acceleration model: x_{t+1} = F x_t + v_t, v_t ~ N(0, Q).
struct MotionModel {
    double dt = 0.0;
    double rho = 0.0;
    Mat4 F = Mat4::Identity();
    Mat4 Q = Mat4::Zero();
};

/// Source power, attenuation and noise parameters shared by every sensor.
struct SignalParams {
    double p0 = 1000.0;
    double alpha = 1.0;
    double n_exp = 2.0;
    double sigma = 1.0;
};

/// Sensor positions plus the common signal model.
struct SensorGrid {
    std::vector<Vec2> positions;
    SignalParams signal;

    std::size_t size() const { return positions.size(); }
    /// Throws std::invalid_argument if positions are empty/duplicated or a
    /// parameter is non-positive.
    void validate() const;
};

struct Measurement {
    std::size_t sensor_index = 0;
    double z = 0.0;
};

MotionModel build_motion(double dt, double rho);

TargetState propagate(const TargetState& state, const MotionModel& model, const Vec4& noise);

/// Received amplitude sqrt(P0 / (1 + alpha d^n)) at sensor i.
double amplitude(const SensorGrid& grid, std::size_t i, const Vec2& pos);

/// Amplitude for an explicit squared distance; shared by the quantizer design.
double amplitude_from_sq_distance(const SignalParams& signal, double d2);

Measurement measure(const SensorGrid& grid, std::size_t i, const Vec2& pos, double noise_sample);

/// count_per_side^2 sensors on a uniform lattice spanning [-side/2, side/2]^2,
/// indexed row by row from the (-side/2, -side/2) corner.
SensorGrid build_grid(int count_per_side, double area_side, const SignalParams& signal = {});

}  // namespace bitalloc
