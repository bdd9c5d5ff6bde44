#pragma once

#include <cmath>
#include <string>

#include "uneqot/common.hpp"

namespace uneqot {

// Builtin cost families.  All of them have D_yc affine in x, which is what
// makes level sets straight lines (or single points for m = 1) and lets every
// super-level mass be computed by exact half-plane clipping.
enum class CostFamily {
    bilinear_arc,   // c = -(x1 cos y + x2 sin y),  m = 2
    quadratic,      // c = |x - y e1|^2 / 2,        m = 1 or 2, y embedded in x1
    pseudo_index,   // c = -I(x) y + q y^2/2, I(x) = a.x + b (affine index)
    hedonic_buyer,  // c = x1 y^2/2 - x2 y,         m = 2
    hedonic_seller, // c = -x y + y^2/2,            m = 1
};

inline const char* to_string(CostFamily f) {
    switch (f) {
        case CostFamily::bilinear_arc: return "bilinear_arc";
        case CostFamily::quadratic: return "quadratic";
        case CostFamily::pseudo_index: return "pseudo_index";
        case CostFamily::hedonic_buyer: return "hedonic_buyer";
        case CostFamily::hedonic_seller: return "hedonic_seller";
    }
    return "?";
}

class CostModel {
public:
    static CostModel bilinear_arc() { return CostModel(CostFamily::bilinear_arc, 2); }
    static CostModel quadratic(int m = 1) {
        if (m < 1 || m > 2) throw config_error("quadratic cost: m must be 1 or 2");
        return CostModel(CostFamily::quadratic, m);
    }
    static CostModel pseudo_index(Vec2 a, double b, double q, int m = 2) {
        CostModel c(CostFamily::pseudo_index, m);
        if (m == 1) a.y = 0.0;
        if (a.norm() == 0.0) throw config_error("pseudo_index cost: index gradient vanishes");
        c.a_ = a;
        c.b_ = b;
        c.q_ = q;
        return c;
    }
    static CostModel hedonic_buyer() { return CostModel(CostFamily::hedonic_buyer, 2); }
    static CostModel hedonic_seller() { return CostModel(CostFamily::hedonic_seller, 1); }

    CostFamily family() const { return family_; }
    int dim() const { return m_; }

    double c(Vec2 x, double y) const {
        switch (family_) {
            case CostFamily::bilinear_arc:
                return -(x.x * std::cos(y) + x.y * std::sin(y));
            case CostFamily::quadratic:
                return 0.5 * (sqr(x.x - y) + (m_ == 2 ? sqr(x.y) : 0.0));
            case CostFamily::pseudo_index:
                return -(a_.dot(x) + b_) * y + 0.5 * q_ * y * y;
            case CostFamily::hedonic_buyer:
                return 0.5 * x.x * y * y - x.y * y;
            case CostFamily::hedonic_seller:
                return -x.x * y + 0.5 * y * y;
        }
        return 0.0;
    }

    double d_yc(Vec2 x, double y) const { return dyc_grad(y).dot(x) + dyc_shift(y); }

    double d2_yyc(Vec2 x, double y) const {
        switch (family_) {
            case CostFamily::bilinear_arc:
                return x.x * std::cos(y) + x.y * std::sin(y);
            case CostFamily::quadratic:
                return 1.0;
            case CostFamily::pseudo_index:
                return q_;
            case CostFamily::hedonic_buyer:
                return x.x;
            case CostFamily::hedonic_seller:
                return 1.0;
        }
        return 0.0;
    }

    // Affine structure of the level-set function: D_yc(x,y) = g(y).x + h(y).
    Vec2 dyc_grad(double y) const {
        switch (family_) {
            case CostFamily::bilinear_arc:
                return {std::sin(y), -std::cos(y)};
            case CostFamily::quadratic:
                return {-1.0, 0.0};
            case CostFamily::pseudo_index:
                return {-a_.x, -a_.y};
            case CostFamily::hedonic_buyer:
                return {y, -1.0};
            case CostFamily::hedonic_seller:
                return {-1.0, 0.0};
        }
        return {};
    }

    double dyc_shift(double y) const {
        switch (family_) {
            case CostFamily::bilinear_arc:
                return 0.0;
            case CostFamily::quadratic:
                return y;
            case CostFamily::pseudo_index:
                return -b_ + q_ * y;
            case CostFamily::hedonic_buyer:
                return 0.0;
            case CostFamily::hedonic_seller:
                return y;
        }
        return 0.0;
    }

    // |D^2_xy c|: Euclidean norm of the m-vector of mixed derivatives.  For the
    // builtin families this is |g(y)|, independent of x and strictly positive.
    double d2_xyc_norm(Vec2 /*x*/, double y) const { return dyc_grad(y).norm(); }

    // D_x c, used by twist-condition sampling.
    Vec2 d_xc(Vec2 x, double y) const {
        switch (family_) {
            case CostFamily::bilinear_arc:
                return {-std::cos(y), -std::sin(y)};
            case CostFamily::quadratic:
                return {x.x - y, m_ == 2 ? x.y : 0.0};
            case CostFamily::pseudo_index:
                return {-a_.x * y, -a_.y * y};
            case CostFamily::hedonic_buyer:
                return {0.5 * y * y, -y};
            case CostFamily::hedonic_seller:
                return {-y, 0.0};
        }
        return {};
    }

private:
    CostModel(CostFamily f, int m) : family_(f), m_(m) {}

    CostFamily family_;
    int m_;
    Vec2 a_{1, 1};
    double b_ = 0.0;
    double q_ = 0.0;
};

} // namespace uneqot
