#include "wwf/render.hpp"

#include "wwf/parallel.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace wwf {

namespace {

constexpr double kRayEpsilon = 1e-9;

struct CameraBasis {
    Vec3 forward, right, up;
    double tan_half;
    double aspect;
};

CameraBasis basis(const Camera& cam) {
    CameraBasis b;
    b.forward = (cam.look_at - cam.position).normalized();
    b.right = b.forward.cross(cam.up).normalized();
    b.up = b.right.cross(b.forward);
    b.tan_half = std::tan(deg_to_rad(cam.fov_y_deg) / 2);
    b.aspect = static_cast<double>(cam.width) / cam.height;
    return b;
}

std::optional<SurfaceHit> hit_quad(const QuadShape& q, const Ray& ray) {
    const Vec3 n = q.edge_u.cross(q.edge_v).normalized();
    const double denom = ray.dir.dot(n);
    if (std::abs(denom) < 1e-12) return std::nullopt;
    const double t = (q.center - ray.origin).dot(n) / denom;
    if (t <= kRayEpsilon) return std::nullopt;
    const Vec3 p = ray.origin + t * ray.dir;
    // Solve p - c = a edge_u + b edge_v through the Gram matrix.
    const Vec3 d = p - q.center;
    const double uu = q.edge_u.dot(q.edge_u), uv = q.edge_u.dot(q.edge_v), vv = q.edge_v.dot(q.edge_v);
    const double du = d.dot(q.edge_u), dv = d.dot(q.edge_v);
    const double det = uu * vv - uv * uv;
    const double a = (du * vv - dv * uv) / det, b = (dv * uu - du * uv) / det;
    if (std::abs(a) > 0.5 || std::abs(b) > 0.5) return std::nullopt;
    SurfaceHit h;
    h.t = t;
    h.position = p;
    h.normal = n;
    h.uv = {(a + 0.5) * q.repeats.x(), (b + 0.5) * q.repeats.y()};
    h.dpdu = q.edge_u / q.repeats.x();
    h.dpdv = q.edge_v / q.repeats.y();
    return h;
}

std::optional<SurfaceHit> hit_sphere(const SphereShape& s, const Ray& ray) {
    const Vec3 oc = ray.origin - s.center;
    const double b = oc.dot(ray.dir);
    const double c = oc.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0) return std::nullopt;
    const double root = std::sqrt(disc);
    double t = -b - root;
    if (t <= kRayEpsilon) t = -b + root;
    if (t <= kRayEpsilon) return std::nullopt;
    SurfaceHit h;
    h.t = t;
    h.position = ray.origin + t * ray.dir;
    h.normal = (h.position - s.center) / s.radius;
    const double phi = std::atan2(h.normal.y(), h.normal.x());
    const double theta = std::acos(std::clamp(h.normal.z(), -1.0, 1.0));
    h.uv = {(phi + kPi) / (2 * kPi) * s.repeats.x(), theta / kPi * s.repeats.y()};
    const double st = std::sin(theta), ct = std::cos(theta), sp = std::sin(phi), cp = std::cos(phi);
    h.dpdu = s.radius * Vec3(-st * sp, st * cp, 0) * (2 * kPi / s.repeats.x());
    h.dpdv = s.radius * Vec3(ct * cp, ct * sp, -st) * (kPi / s.repeats.y());
    return h;
}

// World-space distance covered by one pixel at distance `dist` on the optical axis.
double pixel_world_size(const Camera& cam, double dist) {
    return dist * 2 * std::tan(deg_to_rad(cam.fov_y_deg) / 2) / cam.height;
}

}  // namespace

Ray camera_ray(const Camera& cam, double px, double py) {
    const CameraBasis b = basis(cam);
    const double x = (2 * px / cam.width - 1) * b.tan_half * b.aspect;
    const double y = (1 - 2 * py / cam.height) * b.tan_half;
    return {cam.position, (b.forward + x * b.right + y * b.up).normalized()};
}

std::optional<SurfaceHit> intersect(const Scene& scene, const Ray& ray) {
    std::optional<SurfaceHit> best;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const SceneObject& o = scene.objects[i];
        auto h = o.kind == SceneObject::Kind::Quad ? hit_quad(o.quad, ray) : hit_sphere(o.sphere, ray);
        if (h && (!best || h->t < best->t)) {
            h->object = static_cast<int>(i);
            best = h;
        }
    }
    return best;
}

FootprintResult footprint_from_hit(const SurfaceHit& hit, const Scene& scene, int px, int py) {
    FootprintResult r;
    r.footprint = Footprint{hit.uv.x(), hit.uv.y(), 0.0, Kernel::Box};
    const double uu = hit.dpdu.dot(hit.dpdu), uv = hit.dpdu.dot(hit.dpdv), vv = hit.dpdv.dot(hit.dpdv);
    const double det = uu * vv - uv * uv;

    // Offset rays through the neighbouring pixel centres, intersected with
    // the tangent plane, give dP/dx and dP/dy; projecting onto (dpdu, dpdv)
    // gives the texture derivatives.
    bool ok = det > 1e-18 * uu * vv && uu > 0 && vv > 0;
    double size = 0;
    for (int axis = 0; ok && axis < 2; ++axis) {
        const Ray ray = camera_ray(scene.camera, px + 0.5 + (axis == 0), py + 0.5 + (axis == 1));
        const double denom = ray.dir.dot(hit.normal);
        if (std::abs(denom) < 1e-9) {
            ok = false;
            break;
        }
        const double t = (hit.position - ray.origin).dot(hit.normal) / denom;
        const Vec3 dp = ray.origin + t * ray.dir - hit.position;
        const double a = dp.dot(hit.dpdu), b = dp.dot(hit.dpdv);
        const double du = (a * vv - b * uv) / det, dv = (b * uu - a * uv) / det;
        if (!std::isfinite(du) || !std::isfinite(dv) || t <= 0) {
            ok = false;
            break;
        }
        size = std::max(size, std::hypot(du, dv));
    }
    if (!ok) {
        // Pixel size at the hit distance over the local repeat length.
        r.fallback = true;
        const double repeat = std::sqrt(std::sqrt(uu) * std::sqrt(vv));
        const double dist = (hit.position - scene.camera.position).norm();
        size = repeat > 0 ? pixel_world_size(scene.camera, dist) / repeat : kMaxFootprintSize;
    }
    r.footprint.size = std::min(size, kMaxFootprintSize);
    return r;
}

void LatentCache::encode(const std::string& id, const MaterialDesc& desc) {
    desc.validate();
    const GeometryMaps maps = desc.spec.build_maps(desc.resolution);
    Entry e{desc, model_->encode(maps, desc.spec.alpha, desc.spec.beta)};
    ++encode_count_;
    entries_[id] = std::move(e);
}

void LatentCache::sync(const Scene& scene) {
    for (const auto& [id, desc] : scene.materials) {
        auto it = entries_.find(id);
        if (it == entries_.end() || !it->second.desc.same_geometry(desc)) {
            encode(id, desc);
        } else {
            it->second.desc = desc;
        }
    }
}

const LatentCache::Entry& LatentCache::get(const std::string& id) const {
    auto it = entries_.find(id);
    if (it == entries_.end()) throw std::out_of_range("material '" + id + "' has no latent");
    return it->second;
}

LatentCache::EditPath LatentCache::edit(const std::string& id, const MaterialDesc& updated) {
    updated.validate();
    auto it = entries_.find(id);
    if (it == entries_.end()) throw std::out_of_range("material '" + id + "' has no latent");
    if (it->second.desc == updated) return EditPath::Unchanged;
    if (it->second.desc.same_geometry(updated)) {
        it->second.desc = updated;
        return EditPath::NoEncode;
    }
    encode(id, updated);
    return EditPath::ReEncode;
}

const char* edit_path_name(LatentCache::EditPath path) {
    switch (path) {
        case LatentCache::EditPath::Unchanged:
            return "Unchanged";
        case LatentCache::EditPath::NoEncode:
            return "NoEncode";
        case LatentCache::EditPath::ReEncode:
            return "ReEncode";
    }
    return "?";
}

const GeometryMaps& MapCache::get(const MaterialDesc& desc) {
    for (const auto& [d, maps] : maps_) {
        if (d.same_geometry(desc)) return *maps;
    }
    maps_.emplace_back(desc, std::make_shared<const GeometryMaps>(desc.spec.build_maps(desc.resolution)));
    return *maps_.back().second;
}

Image render(const Scene& scene, const RenderOptions& options, const LatentCache* cache, MapCache* maps,
             RenderStats* stats) {
    scene.validate();
    const bool neural = options.mode == RenderOptions::Mode::Neural;
    if (neural && !cache) throw std::invalid_argument("neural rendering needs a latent cache");
    if (!neural && !maps) throw std::invalid_argument("reference rendering needs a map cache");
    if (!neural && options.spp == 0) throw std::invalid_argument("spp must be positive");

    // Per-object material state, resolved once.
    struct ObjectMaterial {
        const MaterialDesc* desc = nullptr;
        FabricParams params;
        const nn::Vec<float>* z = nullptr;
        const GeometryMaps* maps = nullptr;
    };
    std::vector<ObjectMaterial> mats(scene.objects.size());
    std::string missing;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const std::string& id = scene.objects[i].material;
        const MaterialDesc& desc = scene.materials.at(id);
        mats[i].desc = &desc;
        mats[i].params = desc.fabric_params();
        if (neural) {
            if (!cache->contains(id) || !cache->get(id).desc.same_geometry(desc)) {
                if (missing.find(" " + id + ",") == std::string::npos) missing += " " + id + ",";
                continue;
            }
            mats[i].z = &cache->get(id).z;
        } else {
            mats[i].maps = &maps->get(desc);
        }
    }
    if (!missing.empty()) {
        missing.pop_back();
        throw std::invalid_argument("materials without an up-to-date latent:" + missing);
    }

    const Camera& cam = scene.camera;
    Image img(cam.width, cam.height);
    std::atomic<std::size_t> hits{0}, fallbacks{0};
    parallel_for(static_cast<std::size_t>(cam.width) * cam.height, [&](std::size_t pixel) {
        const int px = static_cast<int>(pixel % cam.width), py = static_cast<int>(pixel / cam.width);
        const Ray ray = camera_ray(cam, px + 0.5, py + 0.5);
        const auto hit = intersect(scene, ray);
        if (!hit) {
            img.at(px, py) = scene.background;
            return;
        }
        ++hits;
        const FootprintResult fp = footprint_from_hit(*hit, scene, px, py);
        if (fp.fallback) ++fallbacks;

        // Two-sided: the shading frame faces the viewer, x along the warp (u).
        const Vec3 to_eye = (cam.position - hit->position).normalized();
        const Vec3 n = to_eye.dot(hit->normal) >= 0 ? hit->normal : Vec3(-hit->normal);
        const Frame frame = Frame::from_normal_tangent(n, hit->dpdu);
        Vec3 to_light;
        double falloff = 1.0;
        if (scene.light.type == Light::Type::Point) {
            const Vec3 d = scene.light.position - hit->position;
            const double r2 = d.squaredNorm();
            to_light = d / std::sqrt(r2);
            falloff = 1.0 / r2;
        } else {
            to_light = scene.light.direction.normalized();
        }
        const DirectionPair pair{frame.to_local(to_light), frame.to_local(to_eye)};
        const double cos_i = std::abs(pair.wi.z());
        if (cos_i == 0.0 || pair.wo.z() <= 0.0) {
            img.at(px, py) = Rgb{};
            return;
        }

        const ObjectMaterial& m = mats[hit->object];
        ComponentQuad quad;
        if (neural) {
            const nn::Model& model = cache->model();
            quad = model.decode(model.fuse(*m.z, fp.footprint), pair.wi, pair.wo);
        } else {
            const AggregateStats a = aggregate(fp.footprint, pair, *m.maps, m.params, options.spp, options.seed, pixel);
            quad = a.quad;
        }
        img.at(px, py) = combine(quad, m.params) * scene.light.intensity * (cos_i * falloff);
    });
    if (stats) {
        stats->hits = hits;
        stats->fallback_footprints = fallbacks;
    }
    return img;
}

}  // namespace wwf
