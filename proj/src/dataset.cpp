#include "wwf/dataset.hpp"

#include "wwf/binary_io.hpp"
#include "wwf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace wwf {

namespace {

constexpr char kMagic[5] = "WWDS";
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kUnfinished = std::numeric_limits<std::uint64_t>::max();
constexpr std::size_t kRecordBytes = 8 + 13 * 4;

// Offsets of the fields rewritten while a file is being generated.
constexpr std::streamoff kHeaderBytes = 4 + 4 + 4 + 6 * 8 + 1 + 4 + 8 + 4 + 4 + 8 + 8 + 8;
constexpr std::streamoff kRecordCountOffset = kHeaderBytes - 24;

// Stream tags so the query layout, the subset selection and the oracle draw
// from unrelated generators.
constexpr std::uint64_t kTagFootprints = 0x666f6f74;
constexpr std::uint64_t kTagPairs = 0x70616972;
constexpr std::uint64_t kTagSelect = 0x73656c63;

std::string range_message(const char* name, double lo, double hi, double value) {
    std::ostringstream os;
    os << name << " = " << value << " is outside [" << lo << ", " << hi << "]";
    return os.str();
}

struct DirectionCell {
    double x0, y0;
};

const std::vector<DirectionCell>& direction_cells() {
    static const std::vector<DirectionCell> cells = [] {
        std::vector<DirectionCell> out;
        const double w = 2.0 / kDirectionGrid;
        for (int j = 0; j < kDirectionGrid; ++j) {
            for (int i = 0; i < kDirectionGrid; ++i) {
                const double cx = -1.0 + (i + 0.5) * w, cy = -1.0 + (j + 0.5) * w;
                if (cx * cx + cy * cy < 1.0) out.push_back({-1.0 + i * w, -1.0 + j * w});
            }
        }
        return out;
    }();
    return cells;
}

// Uniform point of the cell restricted to the open unit disk.
Vec2 sample_cell(const DirectionCell& c, Rng& rng) {
    const double w = 2.0 / kDirectionGrid;
    for (;;) {
        const double x = c.x0 + w * rng.uniform(), y = c.y0 + w * rng.uniform();
        if (x * x + y * y < 1.0) return {x, y};
    }
}

Vec3 lift(const Vec2& p, double sign) {
    return {p.x(), p.y(), sign * std::sqrt(std::max(0.0, 1.0 - p.squaredNorm()))};
}

void write_header(std::ostream& os, const DatasetHeader& h) {
    write_magic(os, kMagic);
    write_le<std::uint32_t>(os, h.version);
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(h.material.pattern));
    write_le(os, h.material.twist_deg);
    write_le(os, h.material.inclination_deg);
    write_le(os, h.material.alpha);
    write_le(os, h.material.beta);
    write_le(os, h.material.gap);
    write_le(os, h.material.w);
    write_le<std::uint8_t>(os, static_cast<std::uint8_t>(h.kernel));
    write_le(os, h.samples);
    write_le(os, h.seed);
    write_le(os, h.resolution);
    write_le(os, h.material_count);
    write_le(os, h.record_count);
    write_le(os, h.processed);
    write_le(os, h.dropped);
}

DatasetHeader read_header(std::istream& is) {
    expect_magic(is, kMagic, "dataset");
    DatasetHeader h;
    h.version = read_le<std::uint32_t>(is);
    if (h.version != kVersion) throw FormatError("dataset: unsupported version " + std::to_string(h.version));
    h.material.pattern = static_cast<int>(read_le<std::uint32_t>(is));
    h.material.twist_deg = read_le<double>(is);
    h.material.inclination_deg = read_le<double>(is);
    h.material.alpha = read_le<double>(is);
    h.material.beta = read_le<double>(is);
    h.material.gap = read_le<double>(is);
    h.material.w = read_le<double>(is);
    const auto kernel = read_le<std::uint8_t>(is);
    if (kernel > 1) throw FormatError("dataset: unknown kernel " + std::to_string(kernel));
    h.kernel = static_cast<Kernel>(kernel);
    h.samples = read_le<std::uint32_t>(is);
    h.seed = read_le<std::uint64_t>(is);
    h.resolution = read_le<std::uint32_t>(is);
    h.material_count = read_le<std::uint32_t>(is);
    h.record_count = read_le<std::uint64_t>(is);
    h.processed = read_le<std::uint64_t>(is);
    h.dropped = read_le<std::uint64_t>(is);
    return h;
}

void write_record(std::ostream& os, const QueryRecord& r) {
    write_le(os, r.index);
    const Footprint& fp = r.query.footprint;
    for (double x : {fp.u, fp.v, fp.size}) write_le(os, static_cast<float>(x));
    for (int k = 0; k < 3; ++k) write_le(os, static_cast<float>(r.query.pair.wi[k]));
    for (int k = 0; k < 3; ++k) write_le(os, static_cast<float>(r.query.pair.wo[k]));
    for (int k = 0; k < 4; ++k) write_le(os, static_cast<float>(r.target[k]));
}

QueryRecord read_record(std::istream& is, Kernel kernel) {
    QueryRecord r;
    r.index = read_le<std::uint64_t>(is);
    float f[13];
    for (float& x : f) x = read_le<float>(is);
    r.query.footprint = {f[0], f[1], f[2], kernel};
    r.query.pair.wi = Vec3(f[3], f[4], f[5]);
    r.query.pair.wo = Vec3(f[6], f[7], f[8]);
    r.target = ComponentQuad::from_array({f[9], f[10], f[11], f[12]});
    return r;
}

}  // namespace

void MaterialSpec::validate() const {
    if (pattern < 0 || pattern >= kPatternCount) {
        throw std::invalid_argument("pattern index " + std::to_string(pattern) + " is outside [0, " +
                                    std::to_string(kPatternCount - 1) + "]");
    }
    if (std::find(std::begin(kTwistChoices), std::end(kTwistChoices), twist_deg) == std::end(kTwistChoices)) {
        throw std::invalid_argument("twist = " + std::to_string(twist_deg) + " must be one of {-30, 0, 30}");
    }
    if (!(inclination_deg >= kInclinationMin && inclination_deg <= kInclinationMax)) {
        throw std::invalid_argument(range_message("inclination", kInclinationMin, kInclinationMax, inclination_deg));
    }
    if (!(alpha >= kAlphaMin && alpha <= kAlphaMax)) {
        throw std::invalid_argument(range_message("alpha", kAlphaMin, kAlphaMax, alpha));
    }
    if (!(beta >= kBetaMin && beta <= kBetaMax)) {
        throw std::invalid_argument(range_message("beta", kBetaMin, kBetaMax, beta));
    }
    if (!(gap >= 0.0 && gap < 1.0)) throw std::invalid_argument(range_message("gap", 0.0, 1.0, gap));
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument(range_message("w", 0.0, 1.0, w));
}

FabricParams MaterialSpec::fabric_params() const {
    FabricParams p;
    p.alpha_warp = p.alpha_weft = alpha;
    p.beta_warp = p.beta_weft = beta;
    p.w = w;
    return p;
}

GeometryMaps MaterialSpec::build_maps(int resolution) const {
    const WeaveMatrix weave = build_weave_matrix(weave_kind());
    return synthesize_geometry_maps(weave, yarn_params(), resolution > 0 ? resolution : resolution_for(weave));
}

MaterialSpec sample_material(Rng& rng, double w) {
    MaterialSpec m;
    m.pattern = static_cast<int>(rng.index(kPatternCount));
    m.twist_deg = kTwistChoices[rng.index(3)];
    m.inclination_deg = rng.uniform(kInclinationMin, kInclinationMax);
    m.alpha = rng.uniform(kAlphaMin, kAlphaMax);
    m.beta = rng.uniform(kBetaMin, kBetaMax);
    m.w = w;
    return m;
}

int direction_cell_count() { return static_cast<int>(direction_cells().size()); }

Query quantize(const Query& q) {
    auto f = [](double x) { return static_cast<double>(static_cast<float>(x)); };
    Query out;
    out.footprint = Footprint::make(f(q.footprint.u), f(q.footprint.v), f(q.footprint.size), q.footprint.kernel);
    out.footprint.u = f(out.footprint.u);
    out.footprint.v = f(out.footprint.v);
    out.pair.wi = Vec3(f(q.pair.wi.x()), f(q.pair.wi.y()), f(q.pair.wi.z()));
    out.pair.wo = Vec3(f(q.pair.wo.x()), f(q.pair.wo.y()), f(q.pair.wo.z()));
    return out;
}

QuerySet::QuerySet(std::uint64_t seed, Kernel kernel) : seed_(seed) {
    Rng rng(seed, kTagFootprints);
    footprints_.reserve(kFootprintCount);
    for (int cy = 0; cy < kCenterGrid; ++cy) {
        for (int cx = 0; cx < kCenterGrid; ++cx) {
            const double u = (cx + rng.uniform()) / kCenterGrid;
            const double v = (cy + rng.uniform()) / kCenterGrid;
            // Stratified within each range.
            for (int k = 0; k < kSizesPerRange; ++k) {
                footprints_.push_back(Footprint::make(u, v, (k + rng.uniform()) / kSizesPerRange, kernel));
            }
            for (int k = 0; k < kSizesPerRange; ++k) {
                const double s = 1.0 + (kMaxFootprintSize - 1.0) * (k + rng.uniform()) / kSizesPerRange;
                footprints_.push_back(Footprint::make(u, v, s, kernel));
            }
        }
    }
}

std::size_t QuerySet::pairs_per_footprint() const {
    const std::size_t c = direction_cells().size();
    return c * c;
}

std::uint64_t QuerySet::size() const { return footprints_.size() * pairs_per_footprint(); }

std::vector<DirectionPair> QuerySet::pairs(int footprint_index) const {
    Rng rng(stream_seed(seed_, kTagPairs), static_cast<std::uint64_t>(footprint_index));
    const auto& cells = direction_cells();
    std::vector<Vec2> wi, wo;
    for (const auto& c : cells) wi.push_back(sample_cell(c, rng));
    for (const auto& c : cells) wo.push_back(sample_cell(c, rng));
    std::vector<DirectionPair> out;
    out.reserve(cells.size() * cells.size());
    for (const Vec2& a : wi) {
        for (const Vec2& b : wo) {
            const double sign = rng.uniform() < 0.5 ? 1.0 : -1.0;  // BRDF or BTDF
            out.push_back({lift(a, sign), lift(b, 1.0)});
        }
    }
    return out;
}

Query QuerySet::query(std::uint64_t index) const {
    if (index >= size()) throw std::out_of_range("query index out of range");
    const auto per = pairs_per_footprint();
    const int f = static_cast<int>(index / per);
    return {footprints_[f], pairs(f)[index % per]};
}

std::vector<std::uint64_t> QuerySet::select(std::uint64_t count, std::uint64_t seed) const {
    const std::uint64_t n = size();
    std::vector<std::uint64_t> out;
    if (count >= n) {
        out.resize(n);
        for (std::uint64_t k = 0; k < n; ++k) out[k] = k;
        return out;
    }
    // Floyd's algorithm: `count` distinct draws without a full permutation.
    Rng rng(stream_seed(seed, kTagSelect));
    std::unordered_set<std::uint64_t> chosen;
    chosen.reserve(count * 2);
    for (std::uint64_t j = n - count; j < n; ++j) {
        const std::uint64_t t = rng.index(j + 1);
        chosen.insert(chosen.count(t) ? j : t);
    }
    out.assign(chosen.begin(), chosen.end());
    std::sort(out.begin(), out.end());
    return out;
}

Query random_query(Rng& rng, Kernel kernel) {
    Query q;
    const double size = rng.uniform() < 0.5 ? rng.uniform(0.0, 1.0) : rng.uniform(1.0, kMaxFootprintSize);
    q.footprint = Footprint::make(rng.uniform(), rng.uniform(), size, kernel);
    Vec2 a, b;
    do {
        a = Vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
    } while (a.squaredNorm() >= 1.0);
    do {
        b = Vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
    } while (b.squaredNorm() >= 1.0);
    q.pair = {lift(a, rng.uniform() < 0.5 ? 1.0 : -1.0), lift(b, 1.0)};
    return q;
}

bool DatasetHeader::same_source(const DatasetHeader& o) const {
    return version == o.version && material == o.material && kernel == o.kernel && samples == o.samples &&
           seed == o.seed && resolution == o.resolution;
}

bool compute_target(const Query& q, std::uint64_t index, const GeometryMaps& maps, const FabricParams& params,
                    std::uint32_t samples, std::uint64_t seed, ComponentQuad& out) {
    const AggregateStats s = aggregate(q.footprint, q.pair, maps, params, samples, seed, index);
    if (s.degenerate) return false;
    if (!s.quad.finite_nonnegative()) {
        throw std::runtime_error("oracle produced an invalid target for query " + std::to_string(index));
    }
    out = s.quad;
    return true;
}

std::vector<QueryRecord> compute_targets(const std::vector<std::uint64_t>& indices, const QuerySet& set,
                                         const GeometryMaps& maps, const FabricParams& params,
                                         std::uint32_t samples, std::uint64_t seed, std::uint64_t* dropped) {
    // Queries are built serially so each footprint's pairs are generated once.
    std::vector<QueryRecord> records(indices.size());
    const auto per = set.pairs_per_footprint();
    int current = -1;
    std::vector<DirectionPair> pairs;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const int f = static_cast<int>(indices[k] / per);
        if (f != current) {
            pairs = set.pairs(f);
            current = f;
        }
        records[k].index = indices[k];
        records[k].query = quantize({set.footprint(f), pairs[indices[k] % per]});
    }

    std::vector<char> valid(records.size(), 0);
    parallel_for(records.size(), [&](std::size_t k) {
        valid[k] = compute_target(records[k].query, records[k].index, maps, params, samples, seed, records[k].target);
    });

    std::vector<QueryRecord> out;
    out.reserve(records.size());
    for (std::size_t k = 0; k < records.size(); ++k) {
        if (valid[k]) out.push_back(records[k]);
    }
    if (dropped) *dropped += records.size() - out.size();
    return out;
}

void write_dataset(const std::filesystem::path& path, DatasetHeader header, const std::vector<QueryRecord>& records) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    header.record_count = records.size();
    write_header(os, header);
    for (const auto& r : records) write_record(os, r);
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

DatasetHeader read_dataset_header(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    return read_header(is);
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    Dataset d;
    d.header = read_header(is);
    if (d.header.record_count == kUnfinished) throw FormatError(path.string() + ": dataset generation unfinished");
    const auto expected = static_cast<std::uintmax_t>(kHeaderBytes) + d.header.record_count * kRecordBytes;
    const auto actual = std::filesystem::file_size(path);
    if (actual != expected) {
        throw FormatError(path.string() + ": size " + std::to_string(actual) + " does not match " +
                          std::to_string(d.header.record_count) + " records");
    }
    d.records.reserve(d.header.record_count);
    for (std::uint64_t k = 0; k < d.header.record_count; ++k) d.records.push_back(read_record(is, d.header.kernel));
    return d;
}

void merge_datasets(const std::vector<std::filesystem::path>& shards, const std::filesystem::path& out) {
    if (shards.empty()) throw std::invalid_argument("no shards to merge");
    Dataset merged = read_dataset(shards[0]);
    for (std::size_t k = 1; k < shards.size(); ++k) {
        Dataset d = read_dataset(shards[k]);
        if (d.header.material.w != merged.header.material.w) {
            throw std::invalid_argument("blend weight w differs between " + shards[0].string() + " and " +
                                        shards[k].string() + "; refusing to merge");
        }
        if (!d.header.same_source(merged.header)) {
            throw std::invalid_argument("header of " + shards[k].string() + " does not match " +
                                        shards[0].string() + "; refusing to merge");
        }
        merged.header.processed += d.header.processed;
        merged.header.dropped += d.header.dropped;
        merged.records.insert(merged.records.end(), d.records.begin(), d.records.end());
    }
    std::sort(merged.records.begin(), merged.records.end(),
              [](const QueryRecord& a, const QueryRecord& b) { return a.index < b.index; });
    const auto dup = std::adjacent_find(merged.records.begin(), merged.records.end(),
                                        [](const QueryRecord& a, const QueryRecord& b) { return a.index == b.index; });
    if (dup != merged.records.end()) {
        throw std::invalid_argument("query " + std::to_string(dup->index) + " appears in more than one shard");
    }
    write_dataset(out, merged.header, merged.records);
}

DatasetHeader generate_dataset(const std::filesystem::path& path, const MaterialSpec& material,
                               const GenerateOptions& options,
                               const std::function<void(std::uint64_t, std::uint64_t)>& progress) {
    material.validate();
    if (options.shards == 0 || options.shard >= options.shards) throw std::invalid_argument("bad shard selection");
    const GeometryMaps maps = material.build_maps(options.resolution);

    DatasetHeader header;
    header.material = material;
    header.kernel = options.kernel;
    header.samples = options.samples;
    header.seed = options.seed;
    header.resolution = static_cast<std::uint32_t>(maps.resolution());
    header.material_count = options.material_count;

    const QuerySet set(options.seed, options.kernel);
    const auto all = set.select(options.budget, options.seed);
    const std::size_t lo = all.size() * options.shard / options.shards;
    const std::size_t hi = all.size() * (options.shard + 1) / options.shards;
    const std::vector<std::uint64_t> selected(all.begin() + lo, all.begin() + hi);

    std::uint64_t kept = 0;
    if (std::filesystem::exists(path)) {
        const DatasetHeader old = read_dataset_header(path);
        if (!old.same_source(header)) {
            throw std::runtime_error(path.string() + " holds a different dataset; remove it to regenerate");
        }
        if (old.record_count != kUnfinished) return read_dataset(path).header;
        // Keep the records written before the last header update.
        header.processed = old.processed;
        header.dropped = old.dropped;
        const std::uint64_t limit = header.processed < selected.size() ? selected[header.processed] : ~0ULL;
        std::ifstream is(path, std::ios::binary);
        read_header(is);
        const auto on_disk = (std::filesystem::file_size(path) - kHeaderBytes) / kRecordBytes;
        for (; kept < on_disk; ++kept) {
            if (read_record(is, header.kernel).index >= limit) break;
        }
        std::filesystem::resize_file(path, kHeaderBytes + kept * kRecordBytes);
    } else {
        header.record_count = kUnfinished;
        std::ofstream os(path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + path.string());
        write_header(os, header);
    }

    std::fstream fs(path, std::ios::binary | std::ios::in | std::ios::out);
    if (!fs) throw std::runtime_error("cannot open " + path.string());
    auto update_header = [&](std::uint64_t count) {
        fs.seekp(kRecordCountOffset);
        write_le(fs, count);
        write_le(fs, header.processed);
        write_le(fs, header.dropped);
        fs.flush();
    };

    const FabricParams params = material.fabric_params();
    const std::size_t chunk = std::max<std::size_t>(1, options.chunk);
    while (header.processed < selected.size()) {
        const std::size_t end = std::min<std::size_t>(selected.size(), header.processed + chunk);
        const std::vector<std::uint64_t> part(selected.begin() + header.processed, selected.begin() + end);
        const auto records = compute_targets(part, set, maps, params, options.samples, options.seed, &header.dropped);
        fs.seekp(0, std::ios::end);
        for (const auto& r : records) write_record(fs, r);
        kept += records.size();
        header.processed = end;
        update_header(kUnfinished);
        if (!fs) throw std::runtime_error("write failed: " + path.string());
        if (progress) progress(header.processed, selected.size());
    }
    header.record_count = kept;
    update_header(kept);
    return header;
}

}  // namespace wwf
