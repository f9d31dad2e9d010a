#pragma once

#include "wwf/bsdf.hpp"
#include "wwf/nn/layers.hpp"
#include "wwf/oracle.hpp"
#include "wwf/rng.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wwf::nn {

struct Topology {
    int input_res = 64;     // encoder input edge, texels
    int input_channels = 6;  // normal + orientation
    int stem_channels = 16;
    std::array<int, 3> stage_channels{16, 32, 64};
    int blocks_per_stage = 2;
    int encoder_hidden = 128;
    int latent = 64;
    int blob_bins = 8;
    int fusion_width = 128;
    int decoder_width = 128;
    int appearance_inputs = 2;  // alpha, beta

    static Topology full() { return {}; }
    // Small network for full finite-difference gradient checks.
    static Topology tiny();

    int spatial_inputs() const { return 3 * blob_bins; }
    int angular_inputs() const { return 5; }  // wi xyz, wo xy
    std::string describe() const;
    std::uint64_t hash() const;

    bool operator==(const Topology&) const = default;
};

inline constexpr int kOutputs = 4;  // c_warp, c_weft, s_warp, s_weft
// Footprint sizes are divided by this before encoding.
inline constexpr double kFootprintSizeScale = 5.0;

// Gaussian one-blob code of x in [0, 1] over `bins` bins, sigma = 1 / bins.
template <typename T>
void one_blob_encode(double x, int bins, T* out);
std::vector<double> one_blob_encode(double x, int bins = 8);

// (u, v, size / 5) one-blob encoded into 3 * bins values.
template <typename T>
void encode_footprint(const Footprint& fp, int bins, T* out);

struct LossConfig {
    double lambda_s = 0.4;
    double lambda_c = 0.1;
    double k_brdf = 100.0;
    double k_btdf = 1000.0;

    double k(bool btdf) const { return btdf ? k_btdf : k_brdf; }
};

inline double g_map(double x, double k) { return std::log1p(k * x); }
inline double g_inverse(double y, double k) { return std::expm1(y) / k; }

// Network-space prediction -> linear components.
ComponentQuad unmap_prediction(const ComponentQuad& pred, bool btdf, const LossConfig& cfg = {});
// Linear components -> network-space target.
ComponentQuad map_target(const ComponentQuad& gt, bool btdf, const LossConfig& cfg = {});

// Batch-mean loss. pred and target are (4 x B) in network space (specular
// slots already g-mapped in target). Writes dL/dpred when `grad` is non-null.
template <typename T>
T loss(const Mat<T>& pred, const Mat<T>& target, const LossConfig& cfg, Mat<T>* grad = nullptr);

// Loss for a single quad pair with raw (linear) ground truth.
double loss(const ComponentQuad& pred, const ComponentQuad& gt, const LossConfig& cfg, bool btdf);

template <typename T>
class Network {
public:
    explicit Network(const Topology& topology = Topology::full());

    const Topology& topology() const { return topo_; }
    std::size_t param_count() const { return params_.size(); }
    std::vector<T>& params() { return params_; }
    const std::vector<T>& params() const { return params_; }
    // True for entries that are weights rather than biases.
    const std::vector<char>& weight_mask() const { return weight_mask_; }
    // Dense layers of the angular decoder in order; layer 3 adds layer 1's
    // activation before its nonlinearity.
    std::array<DenseShape, 5> angular_layers() const { return {ang1_, ang2_, ang3_, ang4_, ang5_}; }

    // He-uniform weights, zero biases. With `zero_residual`, the last layer
    // of every residual branch starts at zero so each block is the identity
    // (or its shortcut) at initialization.
    void init_he(Rng& rng, bool zero_residual = true);

    struct BlockCache {
        Mat<T> input, cols1, pre1, cols2, cols_short, sum;
    };
    struct EncoderCache {
        Mat<T> cols_stem, pre_stem;
        std::vector<BlockCache> blocks;
        Mat<T> last;
        Mat<T> e0, p1, h1, p2, r;
    };
    struct DecoderCache {
        Vec<T> z;
        Mat<T> blob, q1, f1, q2, a_in, p1, a1, p2, a2, s3, a3, p4, a4;
    };

    // input: (channels x res^2). Returns the latent.
    Vec<T> encode(const Mat<T>& input, T alpha, T beta, EncoderCache* cache = nullptr) const;
    void encode_backward(const EncoderCache& cache, const Vec<T>& dz, T* grads) const;

    // Batched training path. blob: (3 bins x B), angular: (5 x B). Returns (4 x B).
    Mat<T> decode(const Vec<T>& z, const Mat<T>& blob, const Mat<T>& angular, DecoderCache* cache = nullptr) const;
    // Returns dL/dz summed over the batch.
    Vec<T> decode_backward(const DecoderCache& cache, const Mat<T>& dout, T* grads) const;

    // Inference path, one query at a time: fuse once per (z, footprint), then
    // any number of angular evaluations.
    Vec<T> fuse(const Vec<T>& z, const Footprint& fp) const;
    std::array<T, kOutputs> angular(const Vec<T>& fused, const Vec3& wi, const Vec3& wo) const;

private:
    struct Block {
        ConvShape conv1, conv2, shortcut;
        bool has_shortcut = false;
    };

    DenseShape add_dense(int in, int out);
    ConvShape add_conv(int in_c, int out_c, int kernel, int stride, int in_h, int in_w);
    std::size_t allocate(std::size_t weights, std::size_t biases);

    Mat<T> block_forward(const Block& b, const Mat<T>& x, BlockCache* cache) const;
    Mat<T> block_backward(const Block& b, const BlockCache& cache, const Mat<T>& dy, T* grads) const;

    Topology topo_;
    std::vector<T> params_;
    std::vector<char> weight_mask_;
    std::vector<std::pair<std::size_t, int>> fan_in_;  // (weight offset, fan-in) per layer
    std::vector<std::size_t> weight_sizes_;

    ConvShape stem_;
    std::vector<Block> blocks_;
    DenseShape enc_fc1_, enc_fc2_, enc_fc3_;
    DenseShape fuse1_, fuse2_;
    DenseShape ang1_, ang2_, ang3_, ang4_, ang5_;
};

// Encoder input: maps averaged onto res x res cells, 6 channels.
Mat<float> encoder_input(const GeometryMaps& maps, int res = 64);

void save_weights(const std::filesystem::path& path, const Network<float>& net);
Network<float> load_weights(const std::filesystem::path& path, const Topology& expected = Topology::full());

// Float network and its inference helpers.
class Model {
public:
    explicit Model(Network<float> net, LossConfig cfg = {}) : net_(std::move(net)), cfg_(cfg) {}

    const Network<float>& network() const { return net_; }
    const LossConfig& loss_config() const { return cfg_; }

    Vec<float> encode(const GeometryMaps& maps, double alpha, double beta) const;
    Vec<float> fuse(const Vec<float>& z, const Footprint& fp) const { return net_.fuse(z, fp); }
    // Network-space output (specular slots in g-space).
    ComponentQuad decode_raw(const Vec<float>& fused, const Vec3& wi, const Vec3& wo) const;
    // Linear components.
    ComponentQuad decode(const Vec<float>& fused, const Vec3& wi, const Vec3& wo) const;
    ComponentQuad decode(const Vec<float>& z, const Footprint& fp, const Vec3& wi, const Vec3& wo) const {
        return decode(fuse(z, fp), wi, wo);
    }

private:
    Network<float> net_;
    LossConfig cfg_;
};

}  // namespace wwf::nn
