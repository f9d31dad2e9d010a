#pragma once

#include "wwf/oracle.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace wwf {

// Sampling ranges for procedural materials.
inline constexpr double kTwistChoices[3] = {-30.0, 0.0, 30.0};
inline constexpr double kInclinationMin = 15.0, kInclinationMax = 45.0;
inline constexpr double kAlphaMin = 0.1, kAlphaMax = 1.0;
inline constexpr double kBetaMin = 0.0, kBetaMax = 2.0;
inline constexpr double kGapRatio = 0.2;

struct MaterialSpec {
    int pattern = 0;  // index into pattern_by_index
    double twist_deg = 0.0;
    double inclination_deg = 30.0;
    double alpha = 0.5;
    double beta = 1.0;
    double gap = kGapRatio;
    double w = kDefaultBlendWeight;

    // Throws std::invalid_argument naming the field and its allowed range.
    void validate() const;

    WeaveKind weave_kind() const { return pattern_by_index(pattern); }
    YarnParams yarn_params() const { return {twist_deg, inclination_deg, gap, beta}; }
    // Albedos keep their defaults: targets are albedo-free.
    FabricParams fabric_params() const;
    GeometryMaps build_maps(int resolution = 0) const;

    bool operator==(const MaterialSpec&) const = default;
};

MaterialSpec sample_material(Rng& rng, double w = kDefaultBlendWeight);

// Structured query layout: 8x8 footprint centres, 10 sizes in [0, 1] and 10
// in [1, 5] repeats per centre, and a stratified set of direction pairs per
// footprint.
inline constexpr int kCenterGrid = 8;
inline constexpr int kCenterCount = kCenterGrid * kCenterGrid;
inline constexpr int kSizesPerRange = 10;
inline constexpr int kSizesPerCenter = 2 * kSizesPerRange;
inline constexpr int kFootprintCount = kCenterCount * kSizesPerCenter;
inline constexpr int kDirectionGrid = 8;
inline constexpr double kMaxFootprintSize = 5.0;

// Cells of the 8x8 direction grid over [-1, 1]^2 whose centre lies in the
// unit disk.
int direction_cell_count();

struct Query {
    Footprint footprint;
    DirectionPair pair;

    bool operator==(const Query&) const = default;
};

// Rounds every field through float32, as stored on disk.
Query quantize(const Query& q);

class QuerySet {
public:
    QuerySet(std::uint64_t seed, Kernel kernel = Kernel::Box);

    std::uint64_t size() const;
    std::size_t pairs_per_footprint() const;

    const Footprint& footprint(int index) const { return footprints_[index]; }
    // Direction pairs of one footprint, regenerated deterministically.
    std::vector<DirectionPair> pairs(int footprint_index) const;
    Query query(std::uint64_t index) const;

    // `count` distinct query indices in increasing order (all if count >= size()).
    std::vector<std::uint64_t> select(std::uint64_t count, std::uint64_t seed) const;

private:
    std::uint64_t seed_;
    std::vector<Footprint> footprints_;  // centre-major, 20 sizes per centre
};

// A single query drawn from the full parameter distribution rather than the
// structured grid: size picks one of the two ranges, then uniform within it.
Query random_query(Rng& rng, Kernel kernel = Kernel::Box);

struct QueryRecord {
    std::uint64_t index = 0;  // position in the QuerySet
    Query query;
    ComponentQuad target;

    bool operator==(const QueryRecord&) const = default;
};

struct DatasetHeader {
    std::uint32_t version = 1;
    MaterialSpec material;
    Kernel kernel = Kernel::Box;
    std::uint32_t samples = 2048;
    std::uint64_t seed = 0;
    std::uint32_t resolution = 0;
    std::uint32_t material_count = 1;  // materials in the whole run (scale note)
    std::uint64_t record_count = 0;
    std::uint64_t processed = 0;  // selected queries consumed so far
    std::uint64_t dropped = 0;    // degenerate-footprint queries

    // Equality of everything that determines record content.
    bool same_source(const DatasetHeader& o) const;
};

// Oracle target for one query; false when the footprint is degenerate.
bool compute_target(const Query& q, std::uint64_t index, const GeometryMaps& maps, const FabricParams& params,
                    std::uint32_t samples, std::uint64_t seed, ComponentQuad& out);

// Parallel over queries; drops degenerate ones and counts them.
std::vector<QueryRecord> compute_targets(const std::vector<std::uint64_t>& indices, const QuerySet& set,
                                         const GeometryMaps& maps, const FabricParams& params,
                                         std::uint32_t samples, std::uint64_t seed, std::uint64_t* dropped);

void write_dataset(const std::filesystem::path& path, DatasetHeader header, const std::vector<QueryRecord>& records);

struct Dataset {
    DatasetHeader header;
    std::vector<QueryRecord> records;
};

Dataset read_dataset(const std::filesystem::path& path);
DatasetHeader read_dataset_header(const std::filesystem::path& path);

// Combines shards of one material in query order. Refuses shards whose
// headers differ.
void merge_datasets(const std::vector<std::filesystem::path>& shards, const std::filesystem::path& out);

struct GenerateOptions {
    std::uint64_t budget = 50000;  // queries per material
    std::uint32_t samples = 2048;
    std::uint64_t seed = 1;
    Kernel kernel = Kernel::Box;
    int resolution = 0;  // 0: pattern default
    std::uint32_t material_count = 1;
    std::size_t chunk = 4096;
    // Contiguous slice `shard` of `shards` of the selected queries.
    std::uint32_t shard = 0;
    std::uint32_t shards = 1;
};

// Computes and writes one material's dataset, appending chunk by chunk. An
// unfinished file with the same header is resumed after its last record.
// `progress(done, total)` is called after each chunk.
DatasetHeader generate_dataset(const std::filesystem::path& path, const MaterialSpec& material,
                               const GenerateOptions& options,
                               const std::function<void(std::uint64_t, std::uint64_t)>& progress = {});

}  // namespace wwf
