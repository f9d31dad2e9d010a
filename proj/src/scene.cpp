#include "wwf/render.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace wwf {

namespace {

int pattern_index(const std::string& name) {
    for (int i = 0; i < kPatternCount; ++i) {
        if (pattern_by_index(i).name() == name) return i;
    }
    try {
        std::size_t used = 0;
        const int i = std::stoi(name, &used);
        if (used == name.size() && i >= 0 && i < kPatternCount) return i;
    } catch (const std::exception&) {
    }
    std::string known;
    for (int i = 0; i < kPatternCount; ++i) known += (i ? ", " : "") + pattern_by_index(i).name();
    throw std::invalid_argument("unknown pattern '" + name + "' (expected one of " + known + ")");
}

// Whitespace tokens of one line, with the numeric readers used by every directive.
class Tokens {
public:
    Tokens(const std::string& line, int number) : number_(number) {
        std::istringstream is(line);
        for (std::string t; is >> t;) tokens_.push_back(t);
    }

    bool done() const { return pos_ >= tokens_.size(); }
    std::string word(const char* what) {
        if (done()) fail(std::string("missing ") + what);
        return tokens_[pos_++];
    }
    double number(const char* what) {
        const std::string t = word(what);
        try {
            std::size_t used = 0;
            const double v = std::stod(t, &used);
            if (used == t.size()) return v;
        } catch (const std::exception&) {
        }
        fail(std::string("expected a number for ") + what + ", got '" + t + "'");
    }
    Vec3 vec3(const char* what) {
        const double x = number(what), y = number(what), z = number(what);
        return {x, y, z};
    }
    Vec2 vec2(const char* what) {
        const double x = number(what), y = number(what);
        return {x, y};
    }
    Rgb rgb(const char* what) {
        const double r = number(what), g = number(what), b = number(what);
        return {r, g, b};
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw std::invalid_argument("line " + std::to_string(number_) + ": " + msg);
    }

private:
    std::vector<std::string> tokens_;
    std::size_t pos_ = 0;
    int number_;
};

std::string strip_comment(const std::string& line) {
    return line.substr(0, line.find('#'));
}

// Reads one material key and its value(s); false when the key is unknown.
bool read_material_key(const std::string& key, Tokens& t, MaterialDesc& m) {
    if (key == "pattern") {
        m.spec.pattern = pattern_index(t.word("pattern"));
    } else if (key == "twist") {
        m.spec.twist_deg = t.number("twist");
    } else if (key == "inclination") {
        m.spec.inclination_deg = t.number("inclination");
    } else if (key == "alpha") {
        m.spec.alpha = t.number("alpha");
    } else if (key == "beta") {
        m.spec.beta = t.number("beta");
    } else if (key == "gap") {
        m.spec.gap = t.number("gap");
    } else if (key == "w") {
        m.spec.w = t.number("w");
    } else if (key == "resolution") {
        m.resolution = static_cast<int>(t.number("resolution"));
    } else if (key == "kd") {
        m.kd_warp = m.kd_weft = t.rgb("kd");
    } else if (key == "ks") {
        m.ks_warp = m.ks_weft = t.rgb("ks");
    } else if (key == "kd_warp") {
        m.kd_warp = t.rgb("kd_warp");
    } else if (key == "kd_weft") {
        m.kd_weft = t.rgb("kd_weft");
    } else if (key == "ks_warp") {
        m.ks_warp = t.rgb("ks_warp");
    } else if (key == "ks_weft") {
        m.ks_weft = t.rgb("ks_weft");
    } else {
        return false;
    }
    return true;
}

void check_albedo(const char* name, const Rgb& c) {
    for (double v : {c.r, c.g, c.b}) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument(std::string(name) + " components must lie in [0, 1], got " + std::to_string(v));
        }
    }
}

std::string fmt(const Vec3& v) {
    std::ostringstream os;
    os << std::setprecision(17) << v.x() << ' ' << v.y() << ' ' << v.z();
    return os.str();
}

std::string fmt(const Rgb& c) {
    std::ostringstream os;
    os << std::setprecision(17) << c.r << ' ' << c.g << ' ' << c.b;
    return os.str();
}

}  // namespace

void MaterialDesc::validate() const {
    spec.validate();
    check_albedo("kd_warp", kd_warp);
    check_albedo("kd_weft", kd_weft);
    check_albedo("ks_warp", ks_warp);
    check_albedo("ks_weft", ks_weft);
    if (resolution < 0) throw std::invalid_argument("resolution must be non-negative");
}

FabricParams MaterialDesc::fabric_params() const {
    FabricParams p = spec.fabric_params();
    p.kd_warp = kd_warp;
    p.kd_weft = kd_weft;
    p.ks_warp = ks_warp;
    p.ks_weft = ks_weft;
    return p;
}

bool MaterialDesc::same_geometry(const MaterialDesc& o) const {
    return spec == o.spec && resolution == o.resolution;
}

MaterialDesc apply_material_edit(const MaterialDesc& desc, const std::string& text) {
    MaterialDesc m = desc;
    std::istringstream is(text);
    int number = 0;
    for (std::string line; std::getline(is, line);) {
        Tokens t(strip_comment(line), ++number);
        while (!t.done()) {
            const std::string key = t.word("key");
            if (!read_material_key(key, t, m)) t.fail("unknown material key '" + key + "'");
        }
    }
    m.validate();
    return m;
}

Scene Scene::parse(const std::string& text) {
    Scene s;
    bool have_camera = false, have_light = false;
    std::istringstream is(text);
    int number = 0;
    for (std::string line; std::getline(is, line);) {
        Tokens t(strip_comment(line), ++number);
        if (t.done()) continue;
        const std::string head = t.word("directive");
        if (head == "camera") {
            have_camera = true;
            while (!t.done()) {
                const std::string key = t.word("camera key");
                if (key == "position") {
                    s.camera.position = t.vec3("position");
                } else if (key == "look_at") {
                    s.camera.look_at = t.vec3("look_at");
                } else if (key == "up") {
                    s.camera.up = t.vec3("up");
                } else if (key == "fov") {
                    s.camera.fov_y_deg = t.number("fov");
                } else if (key == "size") {
                    s.camera.width = static_cast<int>(t.number("width"));
                    s.camera.height = static_cast<int>(t.number("height"));
                } else {
                    t.fail("unknown camera key '" + key + "'");
                }
            }
        } else if (head == "light") {
            have_light = true;
            const std::string type = t.word("light type");
            if (type == "point") {
                s.light.type = Light::Type::Point;
            } else if (type == "directional") {
                s.light.type = Light::Type::Directional;
            } else {
                t.fail("light type must be point or directional");
            }
            while (!t.done()) {
                const std::string key = t.word("light key");
                if (key == "position") {
                    s.light.position = t.vec3("position");
                } else if (key == "direction") {
                    s.light.direction = t.vec3("direction");
                } else if (key == "intensity") {
                    s.light.intensity = t.rgb("intensity");
                } else {
                    t.fail("unknown light key '" + key + "'");
                }
            }
        } else if (head == "background") {
            s.background = t.rgb("background");
        } else if (head == "material") {
            const std::string id = t.word("material id");
            MaterialDesc m;
            while (!t.done()) {
                const std::string key = t.word("material key");
                if (!read_material_key(key, t, m)) t.fail("unknown material key '" + key + "'");
            }
            if (!s.materials.emplace(id, m).second) t.fail("material '" + id + "' defined twice");
        } else if (head == "quad" || head == "sphere") {
            SceneObject o;
            o.kind = head == "quad" ? SceneObject::Kind::Quad : SceneObject::Kind::Sphere;
            o.material = t.word("material id");
            while (!t.done()) {
                const std::string key = t.word("shape key");
                if (key == "center") {
                    o.quad.center = o.sphere.center = t.vec3("center");
                } else if (key == "repeats") {
                    o.quad.repeats = o.sphere.repeats = t.vec2("repeats");
                } else if (key == "edge_u" && o.kind == SceneObject::Kind::Quad) {
                    o.quad.edge_u = t.vec3("edge_u");
                } else if (key == "edge_v" && o.kind == SceneObject::Kind::Quad) {
                    o.quad.edge_v = t.vec3("edge_v");
                } else if (key == "radius" && o.kind == SceneObject::Kind::Sphere) {
                    o.sphere.radius = t.number("radius");
                } else {
                    t.fail("unknown " + head + " key '" + key + "'");
                }
            }
            s.objects.push_back(o);
        } else {
            t.fail("unknown directive '" + head + "'");
        }
    }
    if (!have_camera) throw std::invalid_argument("scene has no camera");
    if (!have_light) throw std::invalid_argument("scene has no light");
    s.validate();
    return s;
}

Scene Scene::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open scene " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    try {
        return parse(ss.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void Scene::validate() const {
    if (camera.width <= 0 || camera.height <= 0) throw std::invalid_argument("camera size must be positive");
    if (!(camera.fov_y_deg > 0 && camera.fov_y_deg < 180)) throw std::invalid_argument("fov must lie in (0, 180)");
    if ((camera.look_at - camera.position).norm() == 0) throw std::invalid_argument("camera looks at itself");
    if (light.type == Light::Type::Directional && light.direction.norm() == 0) {
        throw std::invalid_argument("directional light needs a non-zero direction");
    }
    for (const auto& [id, m] : materials) {
        try {
            m.validate();
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("material '" + id + "': " + e.what());
        }
    }
    for (const auto& o : objects) {
        if (!materials.count(o.material)) throw std::invalid_argument("object uses undefined material '" + o.material + "'");
        if (o.kind == SceneObject::Kind::Quad && o.quad.edge_u.cross(o.quad.edge_v).norm() == 0) {
            throw std::invalid_argument("degenerate quad");
        }
        if (o.kind == SceneObject::Kind::Sphere && !(o.sphere.radius > 0)) {
            throw std::invalid_argument("sphere radius must be positive");
        }
        const Vec2& r = o.kind == SceneObject::Kind::Quad ? o.quad.repeats : o.sphere.repeats;
        if (!(r.x() > 0 && r.y() > 0)) throw std::invalid_argument("repeats must be positive");
    }
}

std::string Scene::serialize() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "camera position " << fmt(camera.position) << " look_at " << fmt(camera.look_at) << " up " << fmt(camera.up)
       << " fov " << camera.fov_y_deg << " size " << camera.width << ' ' << camera.height << '\n';
    os << "light " << (light.type == Light::Type::Point ? "point" : "directional") << " position "
       << fmt(light.position) << " direction " << fmt(light.direction) << " intensity " << fmt(light.intensity)
       << '\n';
    os << "background " << fmt(background) << '\n';
    for (const auto& [id, m] : materials) {
        os << "material " << id << " pattern " << pattern_by_index(m.spec.pattern).name() << " twist "
           << m.spec.twist_deg << " inclination " << m.spec.inclination_deg << " alpha " << m.spec.alpha << " beta "
           << m.spec.beta << " gap " << m.spec.gap << " w " << m.spec.w << " resolution " << m.resolution
           << " kd_warp " << fmt(m.kd_warp) << " kd_weft " << fmt(m.kd_weft) << " ks_warp " << fmt(m.ks_warp)
           << " ks_weft " << fmt(m.ks_weft) << '\n';
    }
    for (const auto& o : objects) {
        if (o.kind == SceneObject::Kind::Quad) {
            os << "quad " << o.material << " center " << fmt(o.quad.center) << " edge_u " << fmt(o.quad.edge_u)
               << " edge_v " << fmt(o.quad.edge_v) << " repeats " << o.quad.repeats.x() << ' ' << o.quad.repeats.y()
               << '\n';
        } else {
            os << "sphere " << o.material << " center " << fmt(o.sphere.center) << " radius " << o.sphere.radius
               << " repeats " << o.sphere.repeats.x() << ' ' << o.sphere.repeats.y() << '\n';
        }
    }
    return os.str();
}

}  // namespace wwf
