#include "wwf/oracle.hpp"

#include <stdexcept>

namespace wwf {

Footprint Footprint::make(double u, double v, double size, Kernel kernel) {
    if (!(size >= 0.0)) throw std::invalid_argument("footprint size must be >= 0");
    return {wrap01(u), wrap01(v), size, kernel};
}

Vec2 sample_footprint(const Footprint& fp, Rng& rng) {
    if (fp.size <= 0.0) return {fp.u, fp.v};
    if (fp.kernel == Kernel::Box) {
        const double du = (rng.uniform() - 0.5) * fp.size;
        const double dv = (rng.uniform() - 0.5) * fp.size;
        return {fp.u + du, fp.v + dv};
    }
    const double sigma = 0.5 * fp.size;
    auto draw = [&] {
        double x;
        do {
            x = rng.normal();
        } while (std::abs(x) > 2.0);
        return x * sigma;
    };
    const double du = draw();
    const double dv = draw();
    return {fp.u + du, fp.v + dv};
}

HeightField::HeightField(const GeometryMaps& maps, double beta_warp, double beta_weft)
    : maps_(&maps),
      heights_(maps.heights().data()),
      ids_(maps.yarn_ids().data()),
      res_(maps.resolution()),
      beta_{beta_warp, beta_weft},
      max_height_(maps.max_height() * std::max(beta_warp, beta_weft)) {}

namespace {

// floor() without the libm call; march coordinates are far inside int range.
inline int ifloor(double x) {
    const int t = static_cast<int>(x);
    return x < t ? t - 1 : t;
}

}  // namespace

double HeightField::texel_height(int i, int j) const {
    // March positions stay within a couple of repeats of [0, 1), so the
    // modulo is rarely needed.
    if (static_cast<unsigned>(i) >= static_cast<unsigned>(res_)) i = ((i % res_) + res_) % res_;
    if (static_cast<unsigned>(j) >= static_cast<unsigned>(res_)) j = ((j % res_) + res_) % res_;
    const std::size_t idx = static_cast<std::size_t>(j) * res_ + i;
    const auto id = ids_[idx];
    if (id > 1) return 0.0;
    return heights_[idx] * beta_[id];
}

double HeightField::height(double u, double v) const {
    const int res = res_;
    const double x = u * res - 0.5;
    const double y = v * res - 0.5;
    const int i = ifloor(x), j = ifloor(y);
    const double ax = x - i, ay = y - j;
    const double h00 = texel_height(i, j), h10 = texel_height(i + 1, j);
    const double h01 = texel_height(i, j + 1), h11 = texel_height(i + 1, j + 1);
    return (h00 * (1 - ax) + h10 * ax) * (1 - ay) + (h01 * (1 - ax) + h11 * ax) * ay;
}

bool HeightField::visible(double u, double v, const Vec3& w) const {
    return visible_with_step(u, v, w, 0.5 / maps_->resolution());
}

bool HeightField::visible_with_step(double u, double v, const Vec3& w_in, double step) const {
    const Vec3 w = w_in.z() < 0.0 ? mirror_z(w_in) : w_in;
    const double horiz = std::hypot(w.x(), w.y());
    if (horiz < 1e-12) return true;
    const double dx = w.x() / horiz, dy = w.y() / horiz;
    const double slope = w.z() / horiz;
    const double z0 = height(u, v) + 1e-9;
    const int steps = static_cast<int>(std::ceil(1.0 / step));
    constexpr int B = GeometryMaps::kBlock;
    // Per-step advance in texel units.
    const double sx = step * res_ * dx, sy = step * res_ * dy;
    for (int k = 1; k <= steps; ++k) {
        const double s = k * step;
        const double z = z0 + slope * s;
        if (z > max_height_) return true;
        const double pu = u + dx * s, pv = v + dy * s;
        // Tile bound first. The margin covers rounding in the bilinear blend,
        // so skipping never changes the result.
        const double x = pu * res_ - 0.5, y = pv * res_ - 0.5;
        const int iu = ifloor(x), ju = ifloor(y);
        int i = iu, j = ju;
        if (static_cast<unsigned>(i) >= static_cast<unsigned>(res_)) i = ((i % res_) + res_) % res_;
        if (static_cast<unsigned>(j) >= static_cast<unsigned>(res_)) j = ((j % res_) + res_) % res_;
        const int bi = i / B, bj = j / B;
        const double bound = std::max(beta_[0] * maps_->block_max(0, bi, bj), beta_[1] * maps_->block_max(1, bi, bj));
        if (bound * (1.0 + 1e-9) + 1e-12 < z) {
            // z only grows, so every later step still inside this tile is
            // clear too. Leave one step of slack for rounding.
            const double x0 = iu - (i - bi * B), y0 = ju - (j - bj * B);
            const double x1 = x0 + std::min(B, res_ - bi * B), y1 = y0 + std::min(B, res_ - bj * B);
            double n = 1e300;
            if (sx > 0) n = std::min(n, (x1 - x) / sx);
            if (sx < 0) n = std::min(n, (x0 - x) / sx);
            if (sy > 0) n = std::min(n, (y1 - y) / sy);
            if (sy < 0) n = std::min(n, (y0 - y) / sy);
            if (n > 2.0) k += std::min(static_cast<int>(n) - 1, steps);
            continue;
        }
        if (height(pu, pv) > z) return false;
    }
    return true;
}

bool visibility(const GeometryMaps& maps, double u, double v, const Vec3& w, double beta) {
    return HeightField(maps, beta).visible(u, v, w);
}

bool visibility(const GeometryMaps& maps, int i, int j, const Vec3& w, double beta) {
    const double res = maps.resolution();
    return visibility(maps, (i + 0.5) / res, (j + 0.5) / res, w, beta);
}

namespace {

Vec3 area_normal(const TexelRef& t) { return t.id == YarnId::Gap ? Vec3(0, 0, 1) : t.normal; }

}  // namespace

double projected_area(const GeometryMaps& maps, double u, double v, const Vec3& wo, double beta) {
    const Vec3 n = area_normal(maps.texel(maps.index_at(u, v)));
    const double co = cdot(wo, n);
    if (co <= 0.0) return 0.0;
    if (!visibility(maps, u, v, wo, beta)) return 0.0;
    return co / std::max(n.z(), kCosClamp);
}

AggregateStats aggregate(const Footprint& fp, const DirectionPair& pair, const GeometryMaps& maps,
                         const FabricParams& params, std::size_t n, std::uint64_t seed, std::uint64_t stream) {
    if (n == 0) throw std::invalid_argument("aggregate needs at least one sample");
    Rng rng(seed, stream);
    const HeightField field(maps, params.beta_warp, params.beta_weft);
    const Vec3 wi_eff = pair.wi.z() < 0.0 ? mirror_z(pair.wi) : pair.wi;

    std::array<double, 4> sum{}, sum_sq{};
    Vec3 normal_sum = Vec3::Zero();
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 p = sample_footprint(fp, rng);
        const TexelRef t = maps.texel(maps.index_at(p.x(), p.y()));
        const Vec3 nrm = area_normal(t);
        const double inv_cos = 1.0 / std::max(nrm.z(), kCosClamp);
        normal_sum += nrm * inv_cos;
        if (t.id == YarnId::Gap) continue;

        const double ci = cdot(wi_eff, nrm);
        const double co = cdot(pair.wo, nrm);
        if (ci <= 0.0 || co <= 0.0) continue;
        const ComponentQuad f = eval_point_components(t, pair, params);
        if (f.as_array() == std::array<double, 4>{}) continue;
        if (!field.visible(p.x(), p.y(), wi_eff) || !field.visible(p.x(), p.y(), pair.wo)) continue;
        const double weight = ci * co * inv_cos;
        for (int c = 0; c < 4; ++c) {
            const double x = f[c] * weight;
            sum[c] += x;
            sum_sq[c] += x * x;
        }
    }

    AggregateStats stats;
    stats.samples = n;
    stats.n_f = normal_sum.normalized();
    stats.a_p = cdot(pair.wo, stats.n_f) / std::max(stats.n_f.z(), kCosClamp);
    if (stats.a_p < kDegenerateArea) {
        stats.degenerate = true;
        return stats;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int c = 0; c < 4; ++c) {
        const double mean = sum[c] * inv_n;
        const double var = std::max(0.0, sum_sq[c] * inv_n - mean * mean);
        stats.quad[c] = mean / stats.a_p;
        stats.variance[c] = (n > 1 ? var * n / (n - 1.0) : 0.0) * inv_n / (stats.a_p * stats.a_p);
    }
    return stats;
}

AreaConsistency estimate_area_consistency(const Footprint& fp, const Vec3& wo, const GeometryMaps& maps,
                                          const FabricParams& params, std::size_t n, std::uint64_t seed,
                                          std::uint64_t stream) {
    if (n == 0) throw std::invalid_argument("area estimate needs at least one sample");
    const HeightField field(maps, params.beta_warp, params.beta_weft);
    const double dn = static_cast<double>(n);
    AreaConsistency out;

    // Integral form on stream (seed, stream).
    Rng rng(seed, stream);
    double sa = 0, saa = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 p = sample_footprint(fp, rng);
        const Vec3 nrm = area_normal(maps.texel(maps.index_at(p.x(), p.y())));
        const double co = cdot(wo, nrm);
        const double a = (co > 0.0 && field.visible(p.x(), p.y(), wo)) ? co / std::max(nrm.z(), kCosClamp) : 0.0;
        sa += a;
        saa += a * a;
    }
    out.integral_form = sa / dn;

    // Closed form on an independent stream, so the two standard errors combine
    // in quadrature. x = wo.n/cos and y = n.z/cos are the numerator and
    // denominator terms.
    Rng rng_closed(seed ^ 0x636c6f736564ULL, stream);
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    Vec3 normal_sum = Vec3::Zero();
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 p = sample_footprint(fp, rng_closed);
        const Vec3 nrm = area_normal(maps.texel(maps.index_at(p.x(), p.y())));
        const double inv_cos = 1.0 / std::max(nrm.z(), kCosClamp);
        normal_sum += nrm * inv_cos;
        const double x = wo.dot(nrm) * inv_cos;
        const double y = nrm.z() * inv_cos;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    const Vec3 n_f = normal_sum.normalized();
    out.closed_form = cdot(wo, n_f) / std::max(n_f.z(), kCosClamp);
    if (n > 1) {
        out.integral_se = std::sqrt(std::max(0.0, saa / dn - out.integral_form * out.integral_form) / (dn - 1.0));
        // Delta method for the ratio mean(x) / mean(y).
        const double mx = sx / dn, my = sy / dn;
        const double r = mx / my;
        const double var = (sxx / dn - mx * mx) - 2 * r * (sxy / dn - mx * my) + r * r * (syy / dn - my * my);
        out.closed_se = std::sqrt(std::max(0.0, var) / (dn - 1.0)) / std::abs(my);
    }
    return out;
}

}  // namespace wwf
