#pragma once

#include "wwf/bsdf.hpp"
#include "wwf/pattern.hpp"
#include "wwf/rng.hpp"

#include <array>
#include <cstddef>
#include <cstdint>

namespace wwf {

enum class Kernel : std::uint8_t { Box = 0, Gaussian = 1 };

// Texture-space query patch. `size` is the edge length (Box) or 2 sigma
// (Gaussian), in repeat units.
struct Footprint {
    double u = 0.0;
    double v = 0.0;
    double size = 0.0;
    Kernel kernel = Kernel::Box;

    static Footprint make(double u, double v, double size, Kernel kernel = Kernel::Box);

    bool operator==(const Footprint&) const = default;
};

// Draws a kernel-distributed texture position inside the footprint.
Vec2 sample_footprint(const Footprint& fp, Rng& rng);

// The yarn height field scaled per yarn family, used for binary visibility.
class HeightField {
public:
    HeightField(const GeometryMaps& maps, double beta_warp, double beta_weft);
    HeightField(const GeometryMaps& maps, double beta) : HeightField(maps, beta, beta) {}

    double height(double u, double v) const;
    double max_height() const { return max_height_; }

    // Ray march from the surface point at (u, v) towards w in half-texel steps
    // for at most one repeat. For w.z < 0 the mirrored direction is marched
    // (the underside is taken to be symmetric).
    bool visible(double u, double v, const Vec3& w) const;

    // Same march with a caller-chosen step (repeat units); for testing.
    bool visible_with_step(double u, double v, const Vec3& w, double step) const;

private:
    double texel_height(int i, int j) const;

    const GeometryMaps* maps_;
    const float* heights_;
    const std::uint8_t* ids_;
    int res_;
    double beta_[2];
    double max_height_;
};

bool visibility(const GeometryMaps& maps, double u, double v, const Vec3& w, double beta);
bool visibility(const GeometryMaps& maps, int i, int j, const Vec3& w, double beta);

// A(p, wo) = <wo.n_p> / <n_s.n_p> V(x_p, wo). Gap texels use the macro normal.
double projected_area(const GeometryMaps& maps, double u, double v, const Vec3& wo, double beta);

struct AggregateStats {
    ComponentQuad quad;
    Vec3 n_f = Vec3(0, 0, 1);
    double a_p = 0.0;
    std::size_t samples = 0;
    std::array<double, 4> variance{};  // estimator variance per component
    bool degenerate = false;

    bool operator==(const AggregateStats&) const = default;
};

inline constexpr double kDegenerateArea = 1e-6;

// Monte Carlo estimate of the footprint-aggregated components. The random
// stream is (seed, stream); identical arguments give bit-identical results.
AggregateStats aggregate(const Footprint& fp, const DirectionPair& pair, const GeometryMaps& maps,
                         const FabricParams& params, std::size_t n, std::uint64_t seed, std::uint64_t stream = 0);

// The two forms are estimated from independent sample streams.
struct AreaConsistency {
    double integral_form = 0.0;  // MC estimate of the integral of A(p, wo) k(p)
    double closed_form = 0.0;    // <wo.n_f> / <n_s.n_f>
    double integral_se = 0.0;
    double closed_se = 0.0;
};

AreaConsistency estimate_area_consistency(const Footprint& fp, const Vec3& wo, const GeometryMaps& maps,
                                          const FabricParams& params, std::size_t n, std::uint64_t seed,
                                          std::uint64_t stream = 0);

}  // namespace wwf
