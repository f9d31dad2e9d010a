#include "wwf/bsdf.hpp"

#include <stdexcept>
#include <string>

namespace wwf {

namespace {

void check_unit_interval(const char* name, double v, bool open_low) {
    const bool ok = open_low ? (v > 0.0 && v <= 1.0) : (v >= 0.0 && v <= 1.0);
    if (!ok) {
        throw std::invalid_argument(std::string(name) + " = " + std::to_string(v) + " outside " +
                                    (open_low ? "(0, 1]" : "[0, 1]"));
    }
}

void check_albedo(const char* name, const Rgb& c) {
    for (double v : {c.r, c.g, c.b}) check_unit_interval(name, v, false);
}

}  // namespace

void FabricParams::validate() const {
    check_unit_interval("alpha_warp", alpha_warp, true);
    check_unit_interval("alpha_weft", alpha_weft, true);
    if (!(beta_warp >= 0.0) || !(beta_weft >= 0.0)) throw std::invalid_argument("beta must be >= 0");
    check_albedo("kd_warp", kd_warp);
    check_albedo("kd_weft", kd_weft);
    check_albedo("ks_warp", ks_warp);
    check_albedo("ks_weft", ks_weft);
    check_unit_interval("w", w, false);
    if (!(optical_depth > 0.0)) throw std::invalid_argument("optical depth must be positive");
}

FiberFrame FiberFrame::make(const Vec3& axis, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("roughness must be positive, got " + std::to_string(alpha));
    FiberFrame f;
    f.axis = axis.normalized();
    f.alpha = alpha;
    const Mat3 aa = f.axis * f.axis.transpose();
    f.S = Mat3::Identity() + (alpha * alpha - 1.0) * aa;
    f.S_inv = Mat3::Identity() + (1.0 / (alpha * alpha) - 1.0) * aa;
    return f;
}

double& ComponentQuad::operator[](int i) {
    switch (i) {
        case 0: return c_warp;
        case 1: return c_weft;
        case 2: return s_warp;
        default: return s_weft;
    }
}

double ComponentQuad::operator[](int i) const { return const_cast<ComponentQuad&>(*this)[i]; }

bool ComponentQuad::finite_nonnegative() const {
    for (double v : as_array()) {
        if (!std::isfinite(v) || v < 0.0) return false;
    }
    return true;
}

double microflake_density(const Vec3& h, const FiberFrame& frame) {
    const double q = h.dot(frame.S_inv * h);
    return 1.0 / (kPi * frame.alpha * q * q);
}

double smith_lambda(const Vec3& w, const FiberFrame& frame) {
    const double sigma = std::sqrt(std::max(0.0, w.dot(frame.S * w)));
    return sigma / std::max(std::abs(w.z()), kCosClamp);
}

double attenuation_g(const Vec3& wi, const Vec3& wo, const FiberFrame& frame, double optical_depth) {
    const double lambda = smith_lambda(wi, frame) + smith_lambda(wo, frame);
    if (lambda < 1e-12) return optical_depth;
    return -std::expm1(-optical_depth * lambda) / lambda;
}

double specular_point(const DirectionPair& pair, const Vec3& n_p, const Vec3& t_p, double alpha,
                      double optical_depth) {
    const Frame ply = Frame::from_normal_tangent(n_p, t_p);
    const Vec3 wi = ply.to_local(pair.wi);
    const Vec3 wo = ply.to_local(pair.wo);
    if (wi.z() <= 0.0 || wo.z() <= 0.0) return 0.0;
    const Vec3 h = (wi + wo).normalized();
    const FiberFrame fiber = FiberFrame::make(Vec3(1, 0, 0), alpha);
    const double d = microflake_density(h, fiber);
    const double g = attenuation_g(wi, wo, fiber, optical_depth);
    return d * g / (4.0 * std::max(wi.z(), kCosClamp) * std::max(wo.z(), kCosClamp));
}

double diffuse_point(const DirectionPair& pair, const Vec3& n_p, double w) {
    const double ratio = cdot(pair.wi, n_p) / (kPi * std::max(pair.wi.z(), kCosClamp));
    return w * ratio + (1.0 - w) * kInvPi;
}

ComponentQuad eval_point_components(const TexelRef& texel, const DirectionPair& pair, const FabricParams& params) {
    ComponentQuad q;
    if (texel.id == YarnId::Gap) return q;
    const double alpha = params.alpha(texel.id);
    double c, s;
    if (pair.wi.z() >= 0.0) {
        c = diffuse_point(pair, texel.normal, params.w);
        s = specular_point(pair, texel.normal, texel.orientation, alpha, params.optical_depth);
    } else {
        c = (1.0 - params.w) * kInvPi * std::max(0.0, -pair.wi.z());
        s = specular_point({mirror_z(pair.wi), pair.wo}, texel.normal, texel.orientation, alpha,
                           params.optical_depth);
    }
    if (texel.id == YarnId::Warp) {
        q.c_warp = c;
        q.s_warp = s;
    } else {
        q.c_weft = c;
        q.s_weft = s;
    }
    return q;
}

Rgb combine(const ComponentQuad& quad, const FabricParams& params) {
    return params.kd_warp * quad.c_warp + params.kd_weft * quad.c_weft + params.ks_warp * quad.s_warp +
           params.ks_weft * quad.s_weft;
}

}  // namespace wwf
