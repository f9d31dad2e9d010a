#include "wwf/nn.hpp"

#include "wwf/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wwf::nn {

namespace {

constexpr char kMagic[5] = "WWNN";
constexpr std::uint32_t kVersion = 1;

}  // namespace

Topology Topology::tiny() {
    Topology t;
    t.input_res = 16;  // keeps the last stage at 2x2 so every 3x3 tap sees data
    t.stem_channels = 2;
    t.stage_channels = {2, 3, 4};
    t.encoder_hidden = 5;
    t.latent = 4;
    t.blob_bins = 2;
    t.fusion_width = 5;
    t.decoder_width = 5;
    return t;
}

std::string Topology::describe() const {
    std::ostringstream os;
    os << "res=" << input_res << " in=" << input_channels << " stem=" << stem_channels << " stages="
       << stage_channels[0] << "," << stage_channels[1] << "," << stage_channels[2] << " blocks=" << blocks_per_stage
       << " hidden=" << encoder_hidden << " latent=" << latent << " bins=" << blob_bins << " fusion=" << fusion_width
       << " decoder=" << decoder_width << " appearance=" << appearance_inputs << " slope=" << kLeakySlope;
    return os.str();
}

std::uint64_t Topology::hash() const {
    // FNV-1a over the canonical description.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : describe()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename T>
void one_blob_encode(double x, int bins, T* out) {
    x = std::clamp(x, 0.0, 1.0);
    const double sigma = 1.0 / bins;
    for (int b = 0; b < bins; ++b) {
        const double d = x - (b + 0.5) / bins;
        out[b] = static_cast<T>(std::exp(-d * d / (2.0 * sigma * sigma)));
    }
}

std::vector<double> one_blob_encode(double x, int bins) {
    std::vector<double> out(bins);
    one_blob_encode(x, bins, out.data());
    return out;
}

template <typename T>
void encode_footprint(const Footprint& fp, int bins, T* out) {
    one_blob_encode(wrap01(fp.u), bins, out);
    one_blob_encode(wrap01(fp.v), bins, out + bins);
    one_blob_encode(fp.size / kFootprintSizeScale, bins, out + 2 * bins);
}

ComponentQuad unmap_prediction(const ComponentQuad& pred, bool btdf, const LossConfig& cfg) {
    // Clamped at zero: a slightly negative prediction is not a valid BSDF value.
    const double k = cfg.k(btdf);
    return {std::max(0.0, pred.c_warp), std::max(0.0, pred.c_weft), std::max(0.0, g_inverse(pred.s_warp, k)),
            std::max(0.0, g_inverse(pred.s_weft, k))};
}

ComponentQuad map_target(const ComponentQuad& gt, bool btdf, const LossConfig& cfg) {
    const double k = cfg.k(btdf);
    return {gt.c_warp, gt.c_weft, g_map(gt.s_warp, k), g_map(gt.s_weft, k)};
}

template <typename T>
T loss(const Mat<T>& pred, const Mat<T>& target, const LossConfig& cfg, Mat<T>* grad) {
    const Mat<T> diff = pred - target;
    const T batch = static_cast<T>(pred.cols());
    const T lc = static_cast<T>(cfg.lambda_c), ls = static_cast<T>(cfg.lambda_s);
    const T value = (lc * (diff.row(0).squaredNorm() + diff.row(1).squaredNorm()) +
                     ls * (diff.row(2).squaredNorm() + diff.row(3).squaredNorm())) /
                    batch;
    if (grad) {
        *grad = diff * (T(2) / batch);
        grad->topRows(2) *= lc;
        grad->bottomRows(2) *= ls;
    }
    return value;
}

double loss(const ComponentQuad& pred, const ComponentQuad& gt, const LossConfig& cfg, bool btdf) {
    const ComponentQuad t = map_target(gt, btdf, cfg);
    Mat<double> p(4, 1), g(4, 1);
    for (int c = 0; c < 4; ++c) {
        p(c, 0) = pred[c];
        g(c, 0) = t[c];
    }
    return loss<double>(p, g, cfg);
}

template <typename T>
std::size_t Network<T>::allocate(std::size_t weights, std::size_t biases) {
    const std::size_t offset = params_.size();
    params_.resize(offset + weights + biases, T(0));
    weight_mask_.resize(offset + weights + biases, 0);
    std::fill(weight_mask_.begin() + offset, weight_mask_.begin() + offset + weights, 1);
    return offset;
}

template <typename T>
DenseShape Network<T>::add_dense(int in, int out) {
    DenseShape s;
    s.in = in;
    s.out = out;
    s.weight = allocate(static_cast<std::size_t>(in) * out, out);
    s.bias = s.weight + static_cast<std::size_t>(in) * out;
    fan_in_.push_back({s.weight, in});
    weight_sizes_.push_back(static_cast<std::size_t>(in) * out);
    return s;
}

template <typename T>
ConvShape Network<T>::add_conv(int in_c, int out_c, int kernel, int stride, int in_h, int in_w) {
    ConvShape s = ConvShape::make(in_c, out_c, kernel, stride, in_h, in_w);
    const std::size_t weights = static_cast<std::size_t>(s.patch()) * out_c;
    s.weight = allocate(weights, out_c);
    s.bias = s.weight + weights;
    fan_in_.push_back({s.weight, s.patch()});
    weight_sizes_.push_back(weights);
    return s;
}

template <typename T>
Network<T>::Network(const Topology& topology) : topo_(topology) {
    const Topology& t = topo_;
    if (t.input_res < 4 || t.input_res % 4 != 0) throw std::invalid_argument("encoder input must be a multiple of 4");
    stem_ = add_conv(t.input_channels, t.stem_channels, 3, 2, t.input_res, t.input_res);
    int channels = t.stem_channels, edge = stem_.out_h;
    for (int s = 0; s < 3; ++s) {
        for (int b = 0; b < t.blocks_per_stage; ++b) {
            const int stride = (s > 0 && b == 0) ? 2 : 1;
            const int out = t.stage_channels[s];
            Block blk;
            blk.conv1 = add_conv(channels, out, 3, stride, edge, edge);
            blk.conv2 = add_conv(out, out, 3, 1, blk.conv1.out_h, blk.conv1.out_w);
            blk.has_shortcut = stride != 1 || channels != out;
            if (blk.has_shortcut) blk.shortcut = add_conv(channels, out, 1, stride, edge, edge);
            blocks_.push_back(blk);
            channels = out;
            edge = blk.conv1.out_h;
        }
    }
    enc_fc1_ = add_dense(channels + t.appearance_inputs, t.encoder_hidden);
    enc_fc2_ = add_dense(t.encoder_hidden, t.encoder_hidden);
    enc_fc3_ = add_dense(t.encoder_hidden, t.latent);
    fuse1_ = add_dense(t.latent + t.spatial_inputs(), t.fusion_width);
    fuse2_ = add_dense(t.fusion_width, t.fusion_width);
    ang1_ = add_dense(t.fusion_width + t.angular_inputs(), t.decoder_width);
    ang2_ = add_dense(t.decoder_width, t.decoder_width);
    ang3_ = add_dense(t.decoder_width, t.decoder_width);
    ang4_ = add_dense(t.decoder_width, t.decoder_width);
    ang5_ = add_dense(t.decoder_width, kOutputs);
}

template <typename T>
void Network<T>::init_he(Rng& rng, bool zero_residual) {
    std::fill(params_.begin(), params_.end(), T(0));
    for (std::size_t l = 0; l < fan_in_.size(); ++l) {
        const double bound = std::sqrt(6.0 / fan_in_[l].second);
        T* w = params_.data() + fan_in_[l].first;
        for (std::size_t k = 0; k < weight_sizes_[l]; ++k) w[k] = static_cast<T>(rng.uniform(-bound, bound));
    }
    if (!zero_residual) return;
    auto zero = [this](std::size_t offset, std::size_t count) {
        std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(offset), count, T(0));
    };
    for (const Block& b : blocks_) zero(b.conv2.weight, static_cast<std::size_t>(b.conv2.patch()) * b.conv2.out_c);
    zero(enc_fc2_.weight, static_cast<std::size_t>(enc_fc2_.in) * enc_fc2_.out);
    zero(ang3_.weight, static_cast<std::size_t>(ang3_.in) * ang3_.out);
}

template <typename T>
Mat<T> Network<T>::block_forward(const Block& b, const Mat<T>& x, BlockCache* cache) const {
    BlockCache local;
    BlockCache& c = cache ? *cache : local;
    const T* p = params_.data();
    c.pre1 = conv_forward(b.conv1, p, x, c.cols1);
    const Mat<T> h = leaky_relu(c.pre1);
    c.sum = conv_forward(b.conv2, p, h, c.cols2);
    if (b.has_shortcut) {
        c.sum += conv_forward(b.shortcut, p, x, c.cols_short);
    } else {
        c.sum += x;
    }
    return leaky_relu(c.sum);
}

template <typename T>
Mat<T> Network<T>::block_backward(const Block& b, const BlockCache& c, const Mat<T>& dy, T* grads) const {
    const T* p = params_.data();
    const Mat<T> ds = leaky_relu_backward(c.sum, dy);
    const Mat<T> dh = conv_backward(b.conv2, p, grads, c.cols2, ds);
    Mat<T> dx = conv_backward(b.conv1, p, grads, c.cols1, leaky_relu_backward(c.pre1, dh));
    if (b.has_shortcut) {
        dx += conv_backward(b.shortcut, p, grads, c.cols_short, ds);
    } else {
        dx += ds;
    }
    return dx;
}

template <typename T>
Vec<T> Network<T>::encode(const Mat<T>& input, T alpha, T beta, EncoderCache* cache) const {
    const int res = topo_.input_res;
    if (input.rows() != topo_.input_channels || input.cols() != static_cast<Eigen::Index>(res) * res) {
        throw std::invalid_argument("encoder input must be " + std::to_string(topo_.input_channels) + " x " +
                                    std::to_string(res) + "^2");
    }
    EncoderCache local;
    EncoderCache& c = cache ? *cache : local;
    const T* p = params_.data();
    c.pre_stem = conv_forward(stem_, p, input, c.cols_stem);
    Mat<T> a = leaky_relu(c.pre_stem);
    c.blocks.resize(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) a = block_forward(blocks_[i], a, &c.blocks[i]);
    c.last = a;

    c.e0.resize(a.rows() + topo_.appearance_inputs, 1);
    c.e0.topRows(a.rows()) = a.rowwise().mean();
    c.e0(a.rows(), 0) = alpha;
    c.e0(a.rows() + 1, 0) = beta;
    c.p1 = dense_forward(enc_fc1_, p, c.e0);
    c.h1 = leaky_relu(c.p1);
    c.p2 = dense_forward(enc_fc2_, p, c.h1);
    c.r = leaky_relu<T>(c.p2 + c.h1);
    return dense_forward(enc_fc3_, p, c.r);
}

template <typename T>
void Network<T>::encode_backward(const EncoderCache& c, const Vec<T>& dz, T* grads) const {
    const T* p = params_.data();
    const Mat<T> dr = dense_backward<T>(enc_fc3_, p, grads, c.r, dz);
    const Mat<T> ds = leaky_relu_backward<T>(c.p2 + c.h1, dr);
    const Mat<T> dh1 = dense_backward(enc_fc2_, p, grads, c.h1, ds) + ds;
    const Mat<T> de0 = dense_backward(enc_fc1_, p, grads, c.e0, leaky_relu_backward(c.p1, dh1));

    const auto pixels = c.last.cols();
    Mat<T> da = de0.topRows(c.last.rows()).replicate(1, pixels) / static_cast<T>(pixels);
    for (std::size_t i = blocks_.size(); i-- > 0;) da = block_backward(blocks_[i], c.blocks[i], da, grads);
    // The stem's input gradient is not needed.
    const Mat<T> dpre = leaky_relu_backward(c.pre_stem, da);
    MatMap<T>(grads + stem_.weight, stem_.out_c, stem_.patch()).noalias() += dpre * c.cols_stem.transpose();
    VecMap<T>(grads + stem_.bias, stem_.out_c) += dpre.rowwise().sum();
}

template <typename T>
Mat<T> Network<T>::decode(const Vec<T>& z, const Mat<T>& blob, const Mat<T>& angular, DecoderCache* cache) const {
    const int latent = topo_.latent, spatial = topo_.spatial_inputs();
    if (z.size() != latent || blob.rows() != spatial || angular.rows() != topo_.angular_inputs() ||
        blob.cols() != angular.cols()) {
        throw std::invalid_argument("decoder input shape mismatch");
    }
    DecoderCache local;
    DecoderCache& c = cache ? *cache : local;
    const T* p = params_.data();
    ConstMatMap<T> w1(p + fuse1_.weight, fuse1_.out, fuse1_.in);
    // The latent column is shared by the batch, so its product is taken once.
    const Vec<T> zpart = w1.leftCols(latent) * z + ConstVecMap<T>(p + fuse1_.bias, fuse1_.out);
    c.z = z;
    c.blob = blob;
    c.q1 = w1.rightCols(spatial) * blob;
    c.q1.colwise() += zpart;
    c.f1 = leaky_relu(c.q1);
    c.q2 = dense_forward(fuse2_, p, c.f1);

    c.a_in.resize(topo_.fusion_width + topo_.angular_inputs(), blob.cols());
    c.a_in.topRows(topo_.fusion_width) = leaky_relu(c.q2);
    c.a_in.bottomRows(topo_.angular_inputs()) = angular;
    c.p1 = dense_forward(ang1_, p, c.a_in);
    c.a1 = leaky_relu(c.p1);
    c.p2 = dense_forward(ang2_, p, c.a1);
    c.a2 = leaky_relu(c.p2);
    c.s3 = dense_forward(ang3_, p, c.a2) + c.a1;
    c.a3 = leaky_relu(c.s3);
    c.p4 = dense_forward(ang4_, p, c.a3);
    c.a4 = leaky_relu(c.p4);
    return dense_forward(ang5_, p, c.a4);
}

template <typename T>
Vec<T> Network<T>::decode_backward(const DecoderCache& c, const Mat<T>& dout, T* grads) const {
    const T* p = params_.data();
    const Mat<T> da4 = dense_backward(ang5_, p, grads, c.a4, dout);
    const Mat<T> da3 = dense_backward(ang4_, p, grads, c.a3, leaky_relu_backward(c.p4, da4));
    const Mat<T> ds3 = leaky_relu_backward(c.s3, da3);
    const Mat<T> da2 = dense_backward(ang3_, p, grads, c.a2, ds3);
    const Mat<T> da1 = dense_backward(ang2_, p, grads, c.a1, leaky_relu_backward(c.p2, da2)) + ds3;
    const Mat<T> da_in = dense_backward(ang1_, p, grads, c.a_in, leaky_relu_backward(c.p1, da1));
    const Mat<T> dq2 = leaky_relu_backward<T>(c.q2, da_in.topRows(topo_.fusion_width));
    const Mat<T> df1 = dense_backward(fuse2_, p, grads, c.f1, dq2);
    const Mat<T> dq1 = leaky_relu_backward(c.q1, df1);

    const int latent = topo_.latent, spatial = topo_.spatial_inputs();
    const Vec<T> dq1_sum = dq1.rowwise().sum();
    MatMap<T> gw1(grads + fuse1_.weight, fuse1_.out, fuse1_.in);
    gw1.leftCols(latent).noalias() += dq1_sum * c.z.transpose();
    gw1.rightCols(spatial).noalias() += dq1 * c.blob.transpose();
    VecMap<T>(grads + fuse1_.bias, fuse1_.out) += dq1_sum;
    ConstMatMap<T> w1(p + fuse1_.weight, fuse1_.out, fuse1_.in);
    return w1.leftCols(latent).transpose() * dq1_sum;
}

template <typename T>
Vec<T> Network<T>::fuse(const Vec<T>& z, const Footprint& fp) const {
    const int latent = topo_.latent;
    if (z.size() != latent) throw std::invalid_argument("latent size mismatch");
    const T* p = params_.data();
    Vec<T> x(latent + topo_.spatial_inputs());
    x.head(latent) = z;
    encode_footprint(fp, topo_.blob_bins, x.data() + latent);
    auto layer = [p](const DenseShape& s, const Vec<T>& in) {
        Vec<T> y = ConstMatMap<T>(p + s.weight, s.out, s.in) * in + ConstVecMap<T>(p + s.bias, s.out);
        return Vec<T>(leaky_relu<T>(y));
    };
    return layer(fuse2_, layer(fuse1_, x));
}

template <typename T>
std::array<T, kOutputs> Network<T>::angular(const Vec<T>& fused, const Vec3& wi, const Vec3& wo) const {
    const T* p = params_.data();
    auto linear = [p](const DenseShape& s, const Vec<T>& in) {
        return Vec<T>(ConstMatMap<T>(p + s.weight, s.out, s.in) * in + ConstVecMap<T>(p + s.bias, s.out));
    };
    auto act = [](const Vec<T>& v) { return Vec<T>(leaky_relu<T>(v)); };
    Vec<T> x(topo_.fusion_width + topo_.angular_inputs());
    x.head(topo_.fusion_width) = fused;
    x.tail(5) << static_cast<T>(wi.x()), static_cast<T>(wi.y()), static_cast<T>(wi.z()), static_cast<T>(wo.x()),
        static_cast<T>(wo.y());
    const Vec<T> a1 = act(linear(ang1_, x));
    const Vec<T> a2 = act(linear(ang2_, a1));
    const Vec<T> a3 = act(Vec<T>(linear(ang3_, a2) + a1));
    const Vec<T> a4 = act(linear(ang4_, a3));
    const Vec<T> out = linear(ang5_, a4);
    return {out[0], out[1], out[2], out[3]};
}

Mat<float> encoder_input(const GeometryMaps& maps, int res) {
    const int lt = maps.resolution();
    Mat<float> sum = Mat<float>::Zero(6, static_cast<Eigen::Index>(res) * res);
    std::vector<int> count(static_cast<std::size_t>(res) * res, 0);
    for (int j = 0; j < lt; ++j) {
        const int cy = std::min(res - 1, static_cast<int>((j + 0.5) * res / lt));
        for (int i = 0; i < lt; ++i) {
            const int cx = std::min(res - 1, static_cast<int>((i + 0.5) * res / lt));
            const TexelRef t = maps.texel(i, j);
            const int cell = cy * res + cx;
            for (int k = 0; k < 3; ++k) {
                sum(k, cell) += static_cast<float>(t.normal[k]);
                sum(3 + k, cell) += static_cast<float>(t.orientation[k]);
            }
            ++count[cell];
        }
    }
    for (int cell = 0; cell < res * res; ++cell) {
        if (count[cell] == 0) throw std::invalid_argument("maps are coarser than the encoder input");
        sum.col(cell) /= static_cast<float>(count[cell]);
    }
    return sum;
}

void save_weights(const std::filesystem::path& path, const Network<float>& net) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    write_magic(os, kMagic);
    write_le(os, kVersion);
    write_le(os, net.topology().hash());
    write_le<std::uint64_t>(os, net.param_count());
    os.write(reinterpret_cast<const char*>(net.params().data()),
             static_cast<std::streamsize>(net.param_count() * sizeof(float)));
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

Network<float> load_weights(const std::filesystem::path& path, const Topology& expected) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    expect_magic(is, kMagic, "weights");
    const auto version = read_le<std::uint32_t>(is);
    if (version != kVersion) throw FormatError("weights: unsupported version " + std::to_string(version));
    const auto hash = read_le<std::uint64_t>(is);
    if (hash != expected.hash()) {
        throw FormatError("weights: topology mismatch (file was saved for a different network than '" +
                          expected.describe() + "')");
    }
    Network<float> net(expected);
    const auto count = read_le<std::uint64_t>(is);
    if (count != net.param_count()) throw FormatError("weights: parameter count mismatch");
    is.read(reinterpret_cast<char*>(net.params().data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!is) throw FormatError("weights: unexpected end of file");
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError("weights: trailing bytes");
    return net;
}

Vec<float> Model::encode(const GeometryMaps& maps, double alpha, double beta) const {
    return net_.encode(encoder_input(maps, net_.topology().input_res), static_cast<float>(alpha),
                       static_cast<float>(beta));
}

ComponentQuad Model::decode_raw(const Vec<float>& fused, const Vec3& wi, const Vec3& wo) const {
    const auto out = net_.angular(fused, wi, wo);
    return {out[0], out[1], out[2], out[3]};
}

ComponentQuad Model::decode(const Vec<float>& fused, const Vec3& wi, const Vec3& wo) const {
    return unmap_prediction(decode_raw(fused, wi, wo), wi.z() < 0.0, cfg_);
}

template void one_blob_encode<float>(double, int, float*);
template void one_blob_encode<double>(double, int, double*);
template void encode_footprint<float>(const Footprint&, int, float*);
template void encode_footprint<double>(const Footprint&, int, double*);
template float loss<float>(const Mat<float>&, const Mat<float>&, const LossConfig&, Mat<float>*);
template double loss<double>(const Mat<double>&, const Mat<double>&, const LossConfig&, Mat<double>*);
template class Network<float>;
template class Network<double>;

}  // namespace wwf::nn
