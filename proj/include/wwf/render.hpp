#pragma once

#include "wwf/dataset.hpp"
#include "wwf/image.hpp"
#include "wwf/nn.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace wwf {

// Fabric description as it appears in a scene: encoder-coupled geometry and
// appearance parameters plus albedos, which only enter the final combine.
struct MaterialDesc {
    MaterialSpec spec;
    Rgb kd_warp{0.5, 0.5, 0.5};
    Rgb kd_weft{0.5, 0.5, 0.5};
    Rgb ks_warp{0.5, 0.5, 0.5};
    Rgb ks_weft{0.5, 0.5, 0.5};
    int resolution = 0;  // geometry map resolution, 0: pattern default

    void validate() const;
    FabricParams fabric_params() const;
    // Equality of everything the encoder sees.
    bool same_geometry(const MaterialDesc& o) const;
    bool operator==(const MaterialDesc&) const = default;
};

struct Camera {
    Vec3 position{0, 0, 5};
    Vec3 look_at{0, 0, 0};
    Vec3 up{0, 1, 0};
    double fov_y_deg = 40.0;
    int width = 256;
    int height = 256;
};

struct Light {
    enum class Type { Point, Directional };
    Type type = Type::Point;
    Vec3 position{0, 0, 5};   // point light
    Vec3 direction{0, 0, 1};  // directional: towards the light
    Rgb intensity{1, 1, 1};
};

// Planar parallelogram: centre +- edge_u/2 +- edge_v/2, with `repeats` weave
// repeats along each edge.
struct QuadShape {
    Vec3 center{0, 0, 0};
    Vec3 edge_u{2, 0, 0};
    Vec3 edge_v{0, 2, 0};
    Vec2 repeats{10, 10};
};

// Texture u follows longitude, v latitude.
struct SphereShape {
    Vec3 center{0, 0, 0};
    double radius = 1.0;
    Vec2 repeats{20, 10};
};

struct SceneObject {
    enum class Kind { Quad, Sphere };
    Kind kind = Kind::Quad;
    QuadShape quad;
    SphereShape sphere;
    std::string material;
};

struct Scene {
    Camera camera;
    Light light;
    Rgb background{0, 0, 0};
    std::map<std::string, MaterialDesc> materials;
    std::vector<SceneObject> objects;

    // Throws std::invalid_argument with the line number on malformed input.
    static Scene parse(const std::string& text);
    static Scene load(const std::string& path);
    std::string serialize() const;
    void validate() const;
};

// Surface point seen through one pixel.
struct SurfaceHit {
    double t = 0.0;
    Vec3 position;
    Vec3 normal;      // unit, facing the ray origin side unflipped
    Vec3 dpdu, dpdv;  // per weave repeat
    Vec2 uv;          // weave repeats
    int object = -1;
};

struct Ray {
    Vec3 origin;
    Vec3 dir;  // unit
};

Ray camera_ray(const Camera& cam, double px, double py);
std::optional<SurfaceHit> intersect(const Scene& scene, const Ray& ray);

struct FootprintResult {
    Footprint footprint;
    bool fallback = false;  // ray differentials unavailable; size from distance and FOV
};

// Ray-differential footprint of pixel (px, py) (integer pixel, centre sampled).
FootprintResult footprint_from_hit(const SurfaceHit& hit, const Scene& scene, int px, int py);

// Latent vectors of scene materials under one model, with the encoder runs
// counted. Albedo edits never touch the encoder.
class LatentCache {
public:
    struct Entry {
        MaterialDesc desc;
        nn::Vec<float> z;
    };

    explicit LatentCache(const nn::Model& model) : model_(&model) {}

    // Encodes every scene material not yet cached with identical geometry.
    void sync(const Scene& scene);
    void encode(const std::string& id, const MaterialDesc& desc);
    bool contains(const std::string& id) const { return entries_.count(id) != 0; }
    const Entry& get(const std::string& id) const;
    const nn::Model& model() const { return *model_; }
    std::size_t encode_count() const { return encode_count_; }

    enum class EditPath { Unchanged, NoEncode, ReEncode };
    EditPath edit(const std::string& id, const MaterialDesc& updated);

private:
    const nn::Model* model_;
    std::map<std::string, Entry> entries_;
    std::size_t encode_count_ = 0;
};

const char* edit_path_name(LatentCache::EditPath path);

// Applies "key value..." lines (same keys as a scene material) to a copy of
// `desc`. Out-of-range values are rejected with their bounds.
MaterialDesc apply_material_edit(const MaterialDesc& desc, const std::string& text);

struct RenderOptions {
    enum class Mode { Neural, Reference };
    Mode mode = Mode::Neural;
    std::size_t spp = 1;  // oracle samples per pixel (Reference)
    std::uint64_t seed = 1;
};

struct RenderStats {
    std::size_t hits = 0;
    std::size_t fallback_footprints = 0;
};

// Reference mode needs `maps` for every scene material; Neural mode needs
// `cache` synced to the scene.
class MapCache {
public:
    const GeometryMaps& get(const MaterialDesc& desc);

private:
    std::vector<std::pair<MaterialDesc, std::shared_ptr<const GeometryMaps>>> maps_;
};

Image render(const Scene& scene, const RenderOptions& options, const LatentCache* cache, MapCache* maps,
             RenderStats* stats = nullptr);

}  // namespace wwf
