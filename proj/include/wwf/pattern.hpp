#pragma once

#include "wwf/math.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace wwf {

enum class Cell : std::uint8_t { WarpOver, WeftOver };
enum class YarnId : std::uint8_t { Warp = 0, Weft = 1, Gap = 2 };

struct WeaveKind {
    enum class Family : std::uint8_t { Plain, Twill, Satin };

    Family family = Family::Plain;
    int n = 2;  // twill repeat, or satin rows
    int m = 2;  // satin columns

    static WeaveKind plain() { return {Family::Plain, 2, 2}; }
    static WeaveKind twill(int n) { return {Family::Twill, n, n}; }
    static WeaveKind satin(int n, int m) { return {Family::Satin, n, m}; }

    std::string name() const;
    bool operator==(const WeaveKind&) const = default;
};

// The seven training patterns, in dataset index order: plain, twill 3x3,
// twill 5x5, twill 8x8, satin 5x5, satin 8x8, satin 5x10.
inline constexpr int kPatternCount = 7;
WeaveKind pattern_by_index(int index);

// Parses names such as "plain", "twill3", "satin5", "satin5x10".
WeaveKind parse_weave_kind(const std::string& name);

class WeaveError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Binary interlacing grid. Rows index weft yarns (running along +u), columns
// index warp yarns (running along +v). Lookups wrap, so the grid tiles.
class WeaveMatrix {
public:
    WeaveMatrix(int rows, int cols, std::vector<Cell> cells);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    Cell at(int row, int col) const;

private:
    int rows_;
    int cols_;
    std::vector<Cell> cells_;
};

WeaveMatrix build_weave_matrix(const WeaveKind& kind);

struct YarnParams {
    double twist_deg = 0.0;
    double inclination_deg = 30.0;
    double gap = 0.2;
    double height_scale = 1.0;  // beta
};

// Analytic yarn surface at a continuous texture position. Height and its
// gradient are in repeat units and exclude the height scale.
struct YarnSurfacePoint {
    YarnId id = YarnId::Gap;
    double height = 0.0;
    Vec2 grad = Vec2::Zero();
    Vec2 axis = Vec2::Zero();  // yarn direction in the texture plane
};

YarnSurfacePoint yarn_surface(const WeaveMatrix& weave, const YarnParams& params, double u, double v);

// Shading normal and ply orientation implied by a surface point.
void yarn_frame(const YarnSurfacePoint& p, const YarnParams& params, Vec3& normal, Vec3& orientation);

struct TexelRef {
    Vec3 normal;
    Vec3 orientation;
    double height;
    YarnId id;
};

// Per-texel geometry for one repeat of a weave. Immutable after construction.
// Gap texels carry zero normal and orientation vectors and zero height.
class GeometryMaps {
public:
    static constexpr std::uint32_t kVersion = 1;

    GeometryMaps() = default;
    explicit GeometryMaps(int resolution);

    int resolution() const { return res_; }
    std::size_t texel_count() const { return static_cast<std::size_t>(res_) * res_; }

    // Texel (i, j): column i along u, row j along v. Indices wrap.
    std::size_t index(int i, int j) const;
    TexelRef texel(std::size_t idx) const;
    TexelRef texel(int i, int j) const { return texel(index(i, j)); }

    // Nearest texel containing the texture position (wrapped).
    std::size_t index_at(double u, double v) const;

    // Bilinear base height (repeat units) with period-1 wrap.
    double height_at(double u, double v) const;
    double max_height() const { return max_height_; }

    // Max height per kBlock x kBlock tile, per yarn (0 warp, 1 weft), taken
    // over the tile plus one texel on the high side so that it bounds every
    // bilinear lookup whose lower corner lies in the tile.
    static constexpr int kBlock = 8;
    int block_count() const { return (res_ + kBlock - 1) / kBlock; }
    double block_max(int yarn, int bi, int bj) const {
        return block_max_[yarn][static_cast<std::size_t>(bj) * block_count() + bi];
    }

    double gap_fraction() const;

    void set_texel(std::size_t idx, const Vec3& n, const Vec3& t, double height, YarnId id);
    void finalize();

    void write(std::ostream& os) const;
    static GeometryMaps read(std::istream& is);
    void save(const std::string& path) const;
    static GeometryMaps load(const std::string& path);

    // Normals remapped from [-1, 1] to [0, 255].
    void export_normal_png(const std::string& path) const;

    const std::vector<float>& normals() const { return normal_; }
    const std::vector<float>& orientations() const { return orientation_; }
    const std::vector<float>& heights() const { return height_; }
    const std::vector<std::uint8_t>& yarn_ids() const { return yarn_id_; }

private:
    int res_ = 0;
    std::vector<float> normal_;
    std::vector<float> orientation_;
    std::vector<float> height_;
    std::vector<std::uint8_t> yarn_id_;
    double max_height_ = 0.0;
    std::vector<float> block_max_[2];
};

// Smallest multiple of the weave's tiling period that is >= target.
int resolution_for(const WeaveMatrix& weave, int target = 512);

GeometryMaps synthesize_geometry_maps(const WeaveMatrix& weave, const YarnParams& params, int resolution);

}  // namespace wwf
