#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace uneqot {

// Error taxonomy used across the library.  config_error: bad problem setup
// (family/domain mismatch, invalid enum); numeric_error: a solver failed to
// meet its contract (bracket lost, nonmonotone profile); hypothesis_violation:
// a model assumption required by a theorem-backed routine fails on the given
// instance.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

class hypothesis_violation : public std::runtime_error {
public:
    explicit hypothesis_violation(const std::string& msg) : std::runtime_error(msg) {}
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    Vec2 normalized() const {
        double n = norm();
        return n > 0 ? Vec2{x / n, y / n} : Vec2{0, 0};
    }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double length() const { return hi - lo; }
    bool contains(double t) const { return t >= lo && t <= hi; }
    double clamp(double t) const { return t < lo ? lo : (t > hi ? hi : t); }
};

inline double sqr(double t) { return t * t; }

constexpr double kPi = 3.14159265358979323846;

} // namespace uneqot
