#include "bitalloc/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bitalloc {

void SensorGrid::validate() const {
    if (positions.empty()) throw std::invalid_argument("sensor grid has no sensors");
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (!positions[i].allFinite())
            throw std::invalid_argument("sensor " + std::to_string(i) + " has a non-finite position");
        for (std::size_t j = i + 1; j < positions.size(); ++j) {
            if (positions[i] == positions[j])
                throw std::invalid_argument("sensors " + std::to_string(i) + " and " + std::to_string(j) +
                                            " share a position");
        }
    }
    if (!(signal.p0 > 0.0)) throw std::invalid_argument("p0 must be positive");
    if (!(signal.alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    if (!(signal.n_exp > 0.0)) throw std::invalid_argument("n_exp must be positive");
    if (!(signal.sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
}

MotionModel build_motion(double dt, double rho) {
    if (!(dt > 0.0)) throw std::invalid_argument("motion model needs dt > 0");
    if (!(rho >= 0.0)) throw std::invalid_argument("motion model needs rho >= 0");

    MotionModel m;
    m.dt = dt;
    m.rho = rho;
    m.F = Mat4::Identity();
    m.F(0, 2) = dt;
    m.F(1, 3) = dt;

    const double q3 = dt * dt * dt / 3.0;
    const double q2 = dt * dt / 2.0;
    m.Q.setZero();
    m.Q(0, 0) = q3;
    m.Q(1, 1) = q3;
    m.Q(0, 2) = m.Q(2, 0) = q2;
    m.Q(1, 3) = m.Q(3, 1) = q2;
    m.Q(2, 2) = dt;
    m.Q(3, 3) = dt;
    m.Q *= rho;
    return m;
}

TargetState propagate(const TargetState& state, const MotionModel& model, const Vec4& noise) {
    return TargetState::from(model.F * state.vec() + noise);
}

double amplitude_from_sq_distance(const SignalParams& signal, double d2) {
    // d^n = (d^2)^(n/2)
    const double dn = std::pow(d2, 0.5 * signal.n_exp);
    return std::sqrt(signal.p0 / (1.0 + signal.alpha * dn));
}

double amplitude(const SensorGrid& grid, std::size_t i, const Vec2& pos) {
    return amplitude_from_sq_distance(grid.signal, (grid.positions[i] - pos).squaredNorm());
}

Measurement measure(const SensorGrid& grid, std::size_t i, const Vec2& pos, double noise_sample) {
    return {i, amplitude(grid, i, pos) + noise_sample};
}

SensorGrid build_grid(int count_per_side, double area_side, const SignalParams& signal) {
    if (count_per_side < 1) throw std::invalid_argument("grid needs at least one sensor per side");
    if (!(area_side > 0.0)) throw std::invalid_argument("grid area side must be positive");

    SensorGrid grid;
    grid.signal = signal;
    grid.positions.reserve(static_cast<std::size_t>(count_per_side) * count_per_side);
    if (count_per_side == 1) {
        grid.positions.emplace_back(0.0, 0.0);
        return grid;
    }
    const double spacing = area_side / (count_per_side - 1);
    const double origin = -area_side / 2.0;
    for (int iy = 0; iy < count_per_side; ++iy)
        for (int ix = 0; ix < count_per_side; ++ix)
            grid.positions.emplace_back(origin + ix * spacing, origin + iy * spacing);
    return grid;
}

}  // namespace bitalloc
