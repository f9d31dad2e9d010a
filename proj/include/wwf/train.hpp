#pragma once

#include "wwf/dataset.hpp"
#include "wwf/nn.hpp"

#include <filesystem>
#include <functional>
#include <vector>

namespace wwf::nn {

struct TrainingMaterial {
    MaterialSpec spec;
    Mat<float> input;  // encoder input
    std::vector<QueryRecord> records;
};

TrainingMaterial make_training_material(const MaterialSpec& spec, const GeometryMaps& maps,
                                        std::vector<QueryRecord> records, const Topology& topo);
// Rebuilds the maps recorded in the dataset header.
TrainingMaterial load_training_material(const std::filesystem::path& dataset, const Topology& topo);

struct TrainOptions {
    int epochs = 10;
    int batch = 512;
    double lr = 5e-2;
    std::vector<int> decay_epochs{6, 9};  // 1-based epochs whose start multiplies lr by `decay`
    double decay = 0.2;
    double weight_decay = 1e-5;  // L2 on weights, not biases
    double momentum = 0.9;
    double clip_norm = 1.0;      // global gradient-norm clip; 0 disables
    std::uint64_t seed = 1;
    LossConfig loss;
    std::filesystem::path checkpoint_dir;  // empty: no checkpoints
    std::filesystem::path metrics_csv;     // empty: no log file
};

double learning_rate(const TrainOptions& options, int epoch);

struct IterationLog {
    int epoch = 0;  // 1-based
    long iteration = 0;
    double loss = 0.0;
    double lr = 0.0;
    int material = 0;
};

struct TrainResult {
    std::vector<IterationLog> log;

    double mean_loss(std::size_t first, std::size_t count) const;
    double epoch_mean_loss(int epoch) const;
};

int iterations_per_epoch(const std::vector<TrainingMaterial>& materials, int batch);

// One SGD step on one material's batch; returns the data loss. Exposed for tests.
// Without a velocity buffer the step ignores momentum.
double train_step(Network<float>& net, const TrainingMaterial& material, const std::vector<QueryRecord>& batch,
                  const TrainOptions& options, double lr, std::vector<float>* velocity = nullptr);

TrainResult train(Network<float>& net, const std::vector<TrainingMaterial>& materials, const TrainOptions& options,
                  const std::function<void(const IterationLog&)>& on_iteration = {});

// Assembles the decoder inputs and network-space targets of a batch.
void batch_tensors(const std::vector<QueryRecord>& records, int bins, const LossConfig& cfg, Mat<float>& blob,
                   Mat<float>& angular, Mat<float>& target);

struct EvalResult {
    double mae_diffuse = 0.0;     // linear space
    double mae_specular_g = 0.0;  // g-space
    double loss = 0.0;
    std::size_t count = 0;
};

EvalResult evaluate(const Network<float>& net, const TrainingMaterial& material,
                    const std::vector<QueryRecord>& records, const LossConfig& cfg = {});

}  // namespace wwf::nn
