#include "wwf/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace wwf::nn {

TrainingMaterial make_training_material(const MaterialSpec& spec, const GeometryMaps& maps,
                                        std::vector<QueryRecord> records, const Topology& topo) {
    return {spec, encoder_input(maps, topo.input_res), std::move(records)};
}

TrainingMaterial load_training_material(const std::filesystem::path& dataset, const Topology& topo) {
    Dataset d = read_dataset(dataset);
    if (d.records.empty()) throw std::runtime_error(dataset.string() + " has no records");
    const GeometryMaps maps = d.header.material.build_maps(static_cast<int>(d.header.resolution));
    return make_training_material(d.header.material, maps, std::move(d.records), topo);
}

double learning_rate(const TrainOptions& options, int epoch) {
    double lr = options.lr;
    for (int e : options.decay_epochs) {
        if (epoch >= e) lr *= options.decay;
    }
    return lr;
}

double TrainResult::mean_loss(std::size_t first, std::size_t count) const {
    const std::size_t end = std::min(log.size(), first + count);
    if (first >= end) return 0.0;
    double sum = 0;
    for (std::size_t k = first; k < end; ++k) sum += log[k].loss;
    return sum / static_cast<double>(end - first);
}

double TrainResult::epoch_mean_loss(int epoch) const {
    double sum = 0;
    std::size_t n = 0;
    for (const auto& it : log) {
        if (it.epoch == epoch) {
            sum += it.loss;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

int iterations_per_epoch(const std::vector<TrainingMaterial>& materials, int batch) {
    std::size_t total = 0;
    for (const auto& m : materials) total += m.records.size();
    return static_cast<int>((total + batch - 1) / batch);
}

void batch_tensors(const std::vector<QueryRecord>& records, int bins, const LossConfig& cfg, Mat<float>& blob,
                   Mat<float>& angular, Mat<float>& target) {
    const auto n = static_cast<Eigen::Index>(records.size());
    blob.resize(3 * bins, n);
    angular.resize(5, n);
    target.resize(kOutputs, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const QueryRecord& r = records[k];
        encode_footprint(r.query.footprint, bins, blob.col(k).data());
        const Vec3& wi = r.query.pair.wi;
        const Vec3& wo = r.query.pair.wo;
        angular.col(k) << static_cast<float>(wi.x()), static_cast<float>(wi.y()), static_cast<float>(wi.z()),
            static_cast<float>(wo.x()), static_cast<float>(wo.y());
        const ComponentQuad t = map_target(r.target, wi.z() < 0.0, cfg);
        for (int c = 0; c < kOutputs; ++c) target(c, k) = static_cast<float>(t[c]);
    }
}

double train_step(Network<float>& net, const TrainingMaterial& material, const std::vector<QueryRecord>& batch,
                  const TrainOptions& options, double lr, std::vector<float>* velocity) {
    Mat<float> blob, angular, target;
    batch_tensors(batch, net.topology().blob_bins, options.loss, blob, angular, target);

    Network<float>::EncoderCache ecache;
    Network<float>::DecoderCache dcache;
    const auto z = net.encode(material.input, static_cast<float>(material.spec.alpha),
                              static_cast<float>(material.spec.beta), &ecache);
    const Mat<float> out = net.decode(z, blob, angular, &dcache);
    Mat<float> dout;
    const double value = loss(out, target, options.loss, &dout);
    if (!std::isfinite(value)) return value;

    std::vector<float> grads(net.param_count(), 0.0f);
    const Vec<float> dz = net.decode_backward(dcache, dout, grads.data());
    net.encode_backward(ecache, dz, grads.data());

    auto& p = net.params();
    const auto& mask = net.weight_mask();
    double norm2 = 0;
    for (float g : grads) norm2 += static_cast<double>(g) * g;
    double scale = 1.0;
    if (options.clip_norm > 0 && norm2 > options.clip_norm * options.clip_norm) {
        scale = options.clip_norm / std::sqrt(norm2);
    }
    const auto gscale = static_cast<float>(scale);
    const auto decay = static_cast<float>(2.0 * options.weight_decay);
    const auto rate = static_cast<float>(lr);
    if (options.momentum > 0 && velocity) {
        // Heavy-ball form: v = mu v + g, p -= lr v, with the L2 term in g.
        velocity->resize(p.size(), 0.0f);
        const auto mu = static_cast<float>(options.momentum);
        auto& v = *velocity;
        for (std::size_t i = 0; i < p.size(); ++i) {
            v[i] = mu * v[i] + gscale * grads[i] + (mask[i] ? decay * p[i] : 0.0f);
            p[i] -= rate * v[i];
        }
    } else {
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] -= rate * (gscale * grads[i] + (mask[i] ? decay * p[i] : 0.0f));
        }
    }
    return value;
}

TrainResult train(Network<float>& net, const std::vector<TrainingMaterial>& materials, const TrainOptions& options,
                  const std::function<void(const IterationLog&)>& on_iteration) {
    if (materials.empty()) throw std::invalid_argument("training needs at least one material");
    for (const auto& m : materials) {
        if (m.records.empty()) throw std::invalid_argument("training material without records");
    }
    if (options.batch <= 0 || options.epochs <= 0) throw std::invalid_argument("batch and epochs must be positive");

    Rng rng(options.seed, 0x7472);
    // Per-material shuffled order, consumed by a cursor and reshuffled on wrap.
    std::vector<std::vector<std::size_t>> order(materials.size());
    std::vector<std::size_t> cursor(materials.size(), 0);
    auto shuffle = [&](std::size_t m) {
        auto& o = order[m];
        for (std::size_t k = o.size(); k > 1; --k) std::swap(o[k - 1], o[rng.index(k)]);
        cursor[m] = 0;
    };
    for (std::size_t m = 0; m < materials.size(); ++m) {
        order[m].resize(materials[m].records.size());
        std::iota(order[m].begin(), order[m].end(), std::size_t{0});
        shuffle(m);
    }

    std::ofstream metrics;
    if (!options.metrics_csv.empty()) {
        metrics.open(options.metrics_csv);
        if (!metrics) throw std::runtime_error("cannot write " + options.metrics_csv.string());
        metrics << "epoch,iteration,loss,lr\n";
    }
    if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);

    TrainResult result;
    const int per_epoch = iterations_per_epoch(materials, options.batch);
    long iteration = 0;
    std::vector<QueryRecord> batch;
    std::vector<float> velocity;
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        const double lr = learning_rate(options, epoch);
        for (int it = 0; it < per_epoch; ++it, ++iteration) {
            const auto m = static_cast<std::size_t>(rng.index(materials.size()));
            batch.clear();
            for (int k = 0; k < options.batch; ++k) {
                if (cursor[m] == order[m].size()) shuffle(m);
                batch.push_back(materials[m].records[order[m][cursor[m]++]]);
            }
            const double value = train_step(net, materials[m], batch, options, lr, &velocity);
            if (!std::isfinite(value)) {
                std::ostringstream os;
                os << "training diverged: loss " << value << " at epoch " << epoch << ", iteration " << iteration
                   << ", material " << m << " (pattern " << materials[m].spec.pattern << ", alpha "
                   << materials[m].spec.alpha << ", beta " << materials[m].spec.beta << "), lr " << lr;
                throw std::runtime_error(os.str());
            }
            const IterationLog entry{epoch, iteration, value, lr, static_cast<int>(m)};
            result.log.push_back(entry);
            if (metrics) metrics << epoch << ',' << iteration << ',' << value << ',' << lr << '\n';
            if (on_iteration) on_iteration(entry);
        }
        if (!options.checkpoint_dir.empty()) {
            char name[32];
            std::snprintf(name, sizeof(name), "epoch_%02d.wwnn", epoch);
            save_weights(options.checkpoint_dir / name, net);
        }
    }
    return result;
}

EvalResult evaluate(const Network<float>& net, const TrainingMaterial& material,
                    const std::vector<QueryRecord>& records, const LossConfig& cfg) {
    EvalResult r;
    if (records.empty()) return r;
    const auto z = net.encode(material.input, static_cast<float>(material.spec.alpha),
                              static_cast<float>(material.spec.beta));
    const std::size_t chunk = 1024;
    double loss_sum = 0;
    for (std::size_t start = 0; start < records.size(); start += chunk) {
        const std::vector<QueryRecord> part(records.begin() + start,
                                            records.begin() + std::min(records.size(), start + chunk));
        Mat<float> blob, angular, target;
        batch_tensors(part, net.topology().blob_bins, cfg, blob, angular, target);
        const Mat<float> out = net.decode(z, blob, angular);
        const Mat<float> err = (out - target).cwiseAbs();
        r.mae_diffuse += err.topRows(2).sum();
        r.mae_specular_g += err.bottomRows(2).sum();
        loss_sum += loss(out, target, cfg) * static_cast<double>(part.size());
    }
    r.count = records.size();
    const double n = static_cast<double>(records.size());
    r.mae_diffuse /= 2 * n;
    r.mae_specular_g /= 2 * n;
    r.loss = loss_sum / n;
    return r;
}

}  // namespace wwf::nn
