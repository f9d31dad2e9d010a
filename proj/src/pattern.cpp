#include "wwf/pattern.hpp"

#include "wwf/binary_io.hpp"
#include "wwf/image.hpp"

#include <fstream>
#include <numeric>
#include <regex>

namespace wwf {

namespace {

int wrap_index(int i, int n) {
    int r = i % n;
    return r < 0 ? r + n : r;
}

int satin_step(int n) {
    for (int s = 2; s <= n - 2; ++s) {
        if (std::gcd(s, n) == 1) return s;
    }
    return 0;
}

void check_size(const char* what, int v) {
    if (v < 2 || v > 16) {
        throw WeaveError(std::string(what) + " size " + std::to_string(v) + " outside supported range 2..16");
    }
}

}  // namespace

std::string WeaveKind::name() const {
    switch (family) {
        case Family::Plain:
            return "plain";
        case Family::Twill:
            return "twill" + std::to_string(n);
        case Family::Satin:
            return n == m ? "satin" + std::to_string(n) : "satin" + std::to_string(n) + "x" + std::to_string(m);
    }
    return "unknown";
}

WeaveKind pattern_by_index(int index) {
    switch (index) {
        case 0: return WeaveKind::plain();
        case 1: return WeaveKind::twill(3);
        case 2: return WeaveKind::twill(5);
        case 3: return WeaveKind::twill(8);
        case 4: return WeaveKind::satin(5, 5);
        case 5: return WeaveKind::satin(8, 8);
        case 6: return WeaveKind::satin(5, 10);
        default:
            throw WeaveError("pattern index " + std::to_string(index) + " outside 0..6");
    }
}

WeaveKind parse_weave_kind(const std::string& name) {
    static const std::regex re(R"((plain|twill|satin)(\d+)?(?:x(\d+))?)");
    std::smatch m;
    if (!std::regex_match(name, m, re)) throw WeaveError("unknown weave '" + name + "'");
    if (m[1] == "plain") {
        if (m[2].matched) throw WeaveError("plain weave takes no size");
        return WeaveKind::plain();
    }
    if (!m[2].matched) throw WeaveError("weave '" + name + "' needs a size");
    const int n = std::stoi(m[2]);
    if (m[1] == "twill") {
        if (m[3].matched) throw WeaveError("twill takes a single size");
        return WeaveKind::twill(n);
    }
    return WeaveKind::satin(n, m[3].matched ? std::stoi(m[3]) : n);
}

WeaveMatrix::WeaveMatrix(int rows, int cols, std::vector<Cell> cells)
    : rows_(rows), cols_(cols), cells_(std::move(cells)) {
    if (rows <= 0 || cols <= 0 || cells_.size() != static_cast<std::size_t>(rows) * cols) {
        throw WeaveError("weave matrix dimensions do not match cell count");
    }
}

Cell WeaveMatrix::at(int row, int col) const {
    return cells_[static_cast<std::size_t>(wrap_index(row, rows_)) * cols_ + wrap_index(col, cols_)];
}

WeaveMatrix build_weave_matrix(const WeaveKind& kind) {
    switch (kind.family) {
        case WeaveKind::Family::Plain:
            return WeaveMatrix(2, 2, {Cell::WarpOver, Cell::WeftOver, Cell::WeftOver, Cell::WarpOver});
        case WeaveKind::Family::Twill: {
            check_size("twill", kind.n);
            const int n = kind.n;
            std::vector<Cell> cells(static_cast<std::size_t>(n) * n, Cell::WeftOver);
            for (int r = 0; r < n; ++r) cells[static_cast<std::size_t>(r) * n + r] = Cell::WarpOver;
            return WeaveMatrix(n, n, std::move(cells));
        }
        case WeaveKind::Family::Satin: {
            check_size("satin", kind.n);
            check_size("satin", kind.m);
            const int step = satin_step(kind.n);
            if (step == 0) {
                throw WeaveError("no regular satin exists with repeat " + std::to_string(kind.n));
            }
            if (kind.m % kind.n != 0) {
                throw WeaveError("satin columns (" + std::to_string(kind.m) + ") must be a multiple of rows (" +
                                 std::to_string(kind.n) + ")");
            }
            const int rows = kind.n, cols = kind.m;
            std::vector<Cell> cells(static_cast<std::size_t>(rows) * cols, Cell::WeftOver);
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < cols; ++c) {
                    if (wrap_index(c - r * step, kind.n) == 0) cells[static_cast<std::size_t>(r) * cols + c] = Cell::WarpOver;
                }
            }
            return WeaveMatrix(rows, cols, std::move(cells));
        }
    }
    throw WeaveError("unknown weave family");
}

namespace {

// Distance along a yarn to the nearest end of the float that contains the
// position. `pos` is in cell units along the yarn, `count` the number of cells
// in that direction, and over(k) tells whether the yarn is on top in cell k.
// Returns the distance (cell units) and the sign of d(distance)/d(pos).
template <typename OverFn>
std::pair<double, double> float_end_distance(double pos, int count, OverFn over) {
    const int k = static_cast<int>(std::floor(pos));
    int start = k;
    int steps = 0;
    while (steps < count && over(start - 1)) {
        --start;
        ++steps;
    }
    if (steps == count) return {std::numeric_limits<double>::infinity(), 0.0};
    int end = k;
    while (over(end + 1)) ++end;
    const double to_start = pos - start;
    const double to_end = (end + 1) - pos;
    return to_start <= to_end ? std::pair{to_start, 1.0} : std::pair{to_end, -1.0};
}

}  // namespace

YarnSurfacePoint yarn_surface(const WeaveMatrix& weave, const YarnParams& params, double u, double v) {
    u = wrap01(u);
    v = wrap01(v);
    const double cu = u * weave.cols();
    const double cv = v * weave.rows();
    const int col = std::min(static_cast<int>(cu), weave.cols() - 1);
    const int row = std::min(static_cast<int>(cv), weave.rows() - 1);
    const bool warp = weave.at(row, col) == Cell::WarpOver;

    // Lateral coordinate across the visible yarn, in cell units.
    const double lateral = warp ? cu - col - 0.5 : cv - row - 0.5;
    const double lateral_cells = warp ? weave.cols() : weave.rows();
    const double along_cells = warp ? weave.rows() : weave.cols();

    YarnSurfacePoint p;
    const double span_frac = 1.0 - params.gap;
    const double s = lateral / span_frac;
    if (std::abs(s) > 0.5) return p;  // gap band

    p.id = warp ? YarnId::Warp : YarnId::Weft;
    p.axis = warp ? Vec2(0, 1) : Vec2(1, 0);

    const double span = span_frac / lateral_cells;  // repeat units
    const double amp = 0.5 * span;
    const double tan_u = std::tan(deg_to_rad(params.inclination_deg));

    auto [d_cells, d_sign] =
        warp ? float_end_distance(cv, weave.rows(), [&](int r) { return weave.at(r, col) == Cell::WarpOver; })
             : float_end_distance(cu, weave.cols(), [&](int c) { return weave.at(row, c) == Cell::WeftOver; });
    const double d = d_cells / along_cells;

    // The yarn leaves the crossing at height zero with slope tan(u) and
    // levels off after b, so the surface is continuous across float ends.
    const double b = 2.0 * amp / tan_u;
    const double x = 1.0 - std::min(d, b) / b;
    const double lift = 1.0 - x * x;
    const double dlift = 2.0 * x / b;

    const double cs = std::cos(kPi * s);
    const double sn = std::sin(kPi * s);
    p.height = amp * cs * lift;
    const double dh_lat = -0.5 * kPi * sn * lift;
    const double dh_along = amp * cs * dlift * d_sign;
    p.grad = warp ? Vec2(dh_lat, dh_along) : Vec2(dh_along, dh_lat);
    return p;
}

void yarn_frame(const YarnSurfacePoint& p, const YarnParams& params, Vec3& normal, Vec3& orientation) {
    const double beta = params.height_scale;
    normal = Vec3(-beta * p.grad.x(), -beta * p.grad.y(), 1.0).normalized();
    Vec3 t(p.axis.x(), p.axis.y(), beta * p.axis.dot(p.grad));
    t = rotate_about(t.normalized(), normal, deg_to_rad(params.twist_deg));
    orientation = (t - normal * normal.dot(t)).normalized();
}

GeometryMaps::GeometryMaps(int resolution)
    : res_(resolution),
      normal_(3 * texel_count(), 0.0f),
      orientation_(3 * texel_count(), 0.0f),
      height_(texel_count(), 0.0f),
      yarn_id_(texel_count(), static_cast<std::uint8_t>(YarnId::Gap)) {
    if (resolution <= 0) throw std::invalid_argument("map resolution must be positive");
}

std::size_t GeometryMaps::index(int i, int j) const {
    return static_cast<std::size_t>(wrap_index(j, res_)) * res_ + wrap_index(i, res_);
}

TexelRef GeometryMaps::texel(std::size_t idx) const {
    const float* n = &normal_[3 * idx];
    const float* t = &orientation_[3 * idx];
    return {Vec3(n[0], n[1], n[2]), Vec3(t[0], t[1], t[2]), height_[idx], static_cast<YarnId>(yarn_id_[idx])};
}

std::size_t GeometryMaps::index_at(double u, double v) const {
    const int i = std::min(static_cast<int>(wrap01(u) * res_), res_ - 1);
    const int j = std::min(static_cast<int>(wrap01(v) * res_), res_ - 1);
    return static_cast<std::size_t>(j) * res_ + i;
}

double GeometryMaps::height_at(double u, double v) const {
    const double x = u * res_ - 0.5;
    const double y = v * res_ - 0.5;
    const double fx = std::floor(x), fy = std::floor(y);
    const double ax = x - fx, ay = y - fy;
    const int i = static_cast<int>(fx), j = static_cast<int>(fy);
    const double h00 = height_[index(i, j)], h10 = height_[index(i + 1, j)];
    const double h01 = height_[index(i, j + 1)], h11 = height_[index(i + 1, j + 1)];
    return (h00 * (1 - ax) + h10 * ax) * (1 - ay) + (h01 * (1 - ax) + h11 * ax) * ay;
}

double GeometryMaps::gap_fraction() const {
    std::size_t gaps = 0;
    for (auto id : yarn_id_) gaps += id == static_cast<std::uint8_t>(YarnId::Gap);
    return texel_count() ? static_cast<double>(gaps) / texel_count() : 0.0;
}

void GeometryMaps::set_texel(std::size_t idx, const Vec3& n, const Vec3& t, double height, YarnId id) {
    for (int k = 0; k < 3; ++k) {
        normal_[3 * idx + k] = static_cast<float>(n[k]);
        orientation_[3 * idx + k] = static_cast<float>(t[k]);
    }
    height_[idx] = static_cast<float>(height);
    yarn_id_[idx] = static_cast<std::uint8_t>(id);
}

void GeometryMaps::finalize() {
    max_height_ = 0.0;
    for (float h : height_) max_height_ = std::max(max_height_, static_cast<double>(h));
    const int nb = block_count();
    for (auto& b : block_max_) b.assign(static_cast<std::size_t>(nb) * nb, 0.0f);
    for (int bj = 0; bj < nb; ++bj) {
        for (int bi = 0; bi < nb; ++bi) {
            const std::size_t b = static_cast<std::size_t>(bj) * nb + bi;
            for (int j = bj * kBlock; j <= bj * kBlock + kBlock; ++j) {
                for (int i = bi * kBlock; i <= bi * kBlock + kBlock; ++i) {
                    const std::size_t idx = index(i, j);
                    const auto id = yarn_id_[idx];
                    if (id <= 1) block_max_[id][b] = std::max(block_max_[id][b], height_[idx]);
                }
            }
        }
    }
}

void GeometryMaps::write(std::ostream& os) const {
    write_magic(os, "WWGM");
    write_le<std::uint32_t>(os, kVersion);
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(res_));
    for (std::size_t i = 0; i < texel_count(); ++i) {
        for (int k = 0; k < 3; ++k) write_le(os, normal_[3 * i + k]);
        for (int k = 0; k < 3; ++k) write_le(os, orientation_[3 * i + k]);
        write_le(os, height_[i]);
        write_le(os, yarn_id_[i]);
    }
}

GeometryMaps GeometryMaps::read(std::istream& is) {
    expect_magic(is, "WWGM", "geometry maps");
    const auto version = read_le<std::uint32_t>(is);
    if (version != kVersion) throw FormatError("geometry maps: unsupported version " + std::to_string(version));
    const auto res = read_le<std::uint32_t>(is);
    if (res == 0 || res > 16384) throw FormatError("geometry maps: implausible resolution");
    GeometryMaps maps(static_cast<int>(res));
    for (std::size_t i = 0; i < maps.texel_count(); ++i) {
        for (int k = 0; k < 3; ++k) maps.normal_[3 * i + k] = read_le<float>(is);
        for (int k = 0; k < 3; ++k) maps.orientation_[3 * i + k] = read_le<float>(is);
        maps.height_[i] = read_le<float>(is);
        const auto id = read_le<std::uint8_t>(is);
        if (id > 2) throw FormatError("geometry maps: invalid yarn id");
        maps.yarn_id_[i] = id;
    }
    maps.finalize();
    return maps;
}

void GeometryMaps::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    write(os);
}

GeometryMaps GeometryMaps::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    return read(is);
}

void GeometryMaps::export_normal_png(const std::string& path) const {
    std::vector<std::uint8_t> rgb(3 * texel_count());
    for (std::size_t i = 0; i < rgb.size(); ++i) {
        const double c = std::clamp((normal_[i] + 1.0) * 0.5, 0.0, 1.0);
        rgb[i] = static_cast<std::uint8_t>(std::lround(c * 255.0));
    }
    write_png_rgb8(path, res_, res_, rgb);
}

int resolution_for(const WeaveMatrix& weave, int target) {
    const int period = std::lcm(weave.rows(), weave.cols());
    return ((std::max(target, 1) + period - 1) / period) * period;
}

GeometryMaps synthesize_geometry_maps(const WeaveMatrix& weave, const YarnParams& params, int resolution) {
    if (!(params.gap >= 0.0 && params.gap < 1.0)) throw std::invalid_argument("gap must lie in [0, 1)");
    if (!(params.height_scale >= 0.0)) throw std::invalid_argument("height scale must be >= 0");
    if (!(params.inclination_deg > 0.0 && params.inclination_deg < 90.0)) {
        throw std::invalid_argument("inclination must lie in (0, 90) degrees");
    }
    if (resolution <= 0 || resolution % weave.rows() != 0 || resolution % weave.cols() != 0) {
        throw std::invalid_argument("resolution " + std::to_string(resolution) +
                                    " is not a multiple of the weave dimensions " + std::to_string(weave.rows()) +
                                    "x" + std::to_string(weave.cols()));
    }
    GeometryMaps maps(resolution);
    for (int j = 0; j < resolution; ++j) {
        for (int i = 0; i < resolution; ++i) {
            const double u = (i + 0.5) / resolution;
            const double v = (j + 0.5) / resolution;
            const YarnSurfacePoint p = yarn_surface(weave, params, u, v);
            const std::size_t idx = maps.index(i, j);
            if (p.id == YarnId::Gap) continue;
            Vec3 n, t;
            yarn_frame(p, params, n, t);
            maps.set_texel(idx, n, t, p.height, p.id);
        }
    }
    maps.finalize();
    return maps;
}

}  // namespace wwf
