#pragma once

#include "wwf/image.hpp"
#include "wwf/math.hpp"
#include "wwf/pattern.hpp"

#include <array>

namespace wwf {

inline constexpr double kDefaultOpticalDepth = 2.0;  // T * rho for fabrics
inline constexpr double kCosClamp = 1e-4;
inline constexpr double kDefaultBlendWeight = 0.5;

struct FabricParams {
    double alpha_warp = 0.5;
    double alpha_weft = 0.5;
    double beta_warp = 1.0;
    double beta_weft = 1.0;
    Rgb kd_warp{0.5, 0.5, 0.5};
    Rgb kd_weft{0.5, 0.5, 0.5};
    Rgb ks_warp{0.5, 0.5, 0.5};
    Rgb ks_weft{0.5, 0.5, 0.5};
    double w = kDefaultBlendWeight;
    double optical_depth = kDefaultOpticalDepth;

    double alpha(YarnId id) const { return id == YarnId::Weft ? alpha_weft : alpha_warp; }
    double beta(YarnId id) const { return id == YarnId::Weft ? beta_weft : beta_warp; }

    // Throws std::invalid_argument naming the offending field.
    void validate() const;

    bool operator==(const FabricParams&) const = default;
};

// Fiber-like microflake distribution: S = diag(1, 1, alpha^2) rotated so the
// alpha^2 eigenvector lies along `axis`.
struct FiberFrame {
    Vec3 axis;
    double alpha;
    Mat3 S;
    Mat3 S_inv;

    static FiberFrame make(const Vec3& axis, double alpha);
};

struct DirectionPair {
    Vec3 wi;  // towards the light; z < 0 means transmission
    Vec3 wo;  // towards the viewer, z > 0

    bool operator==(const DirectionPair& o) const { return wi == o.wi && wo == o.wo; }
};

struct ComponentQuad {
    double c_warp = 0.0;
    double c_weft = 0.0;
    double s_warp = 0.0;
    double s_weft = 0.0;

    std::array<double, 4> as_array() const { return {c_warp, c_weft, s_warp, s_weft}; }
    static ComponentQuad from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }

    double& operator[](int i);
    double operator[](int i) const;
    ComponentQuad operator+(const ComponentQuad& o) const {
        return {c_warp + o.c_warp, c_weft + o.c_weft, s_warp + o.s_warp, s_weft + o.s_weft};
    }
    ComponentQuad operator*(double s) const { return {c_warp * s, c_weft * s, s_warp * s, s_weft * s}; }
    bool finite_nonnegative() const;
    bool operator==(const ComponentQuad&) const = default;
};

// D(h) = 1 / (pi alpha q^2), q = h^T S^-1 h.
double microflake_density(const Vec3& h, const FiberFrame& frame);

// Lambda(w) = sigma(w) / |cos theta| with sigma(w) = sqrt(w^T S w). The
// cosine is w.z of the frame's local coordinates, clamped to kCosClamp.
double smith_lambda(const Vec3& w, const FiberFrame& frame);

// G = (1 - exp(-T rho (Li + Lo))) / (Li + Lo).
double attenuation_g(const Vec3& wi, const Vec3& wo, const FiberFrame& frame,
                     double optical_depth = kDefaultOpticalDepth);

// D G / (4 cos_i cos_o) in the ply frame (n_p, t_p), without k_s. Zero when
// either direction lies below the ply surface.
double specular_point(const DirectionPair& pair, const Vec3& n_p, const Vec3& t_p, double alpha,
                      double optical_depth = kDefaultOpticalDepth);

// w <wi.n_p> / (pi <wi.n_s>) + (1 - w) / pi, without k_d.
double diffuse_point(const DirectionPair& pair, const Vec3& n_p, double w);

// Per-texel components. Gap texels return zero. For wi.z < 0 the specular
// lobe is evaluated with the mirrored light direction and the diffuse term is
// the flat (1 - w)/pi lobe weighted by <-wi.n_s>.
ComponentQuad eval_point_components(const TexelRef& texel, const DirectionPair& pair, const FabricParams& params);

// f = kd_warp C_warp + kd_weft C_weft + ks_warp S_warp + ks_weft S_weft.
Rgb combine(const ComponentQuad& quad, const FabricParams& params);

}  // namespace wwf
