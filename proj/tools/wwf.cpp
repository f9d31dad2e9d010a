// Command-line front end: pattern and dataset generation, training, encoding,
// rendering, image comparison and material editing.

#include "wwf/dataset.hpp"
#include "wwf/render.hpp"
#include "wwf/train.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace wwf;

namespace {

struct MaterialFlags {
    std::string pattern = "plain";
    double twist = 0.0;
    double inclination = 30.0;
    double alpha = 0.5;
    double beta = 1.0;
    double gap = kGapRatio;
    double w = kDefaultBlendWeight;
    long long random = -1;  // >= 0: sample the material from this seed instead

    void add(CLI::App* app) {
        app->add_option("--pattern", pattern, "Weave pattern (plain, twill3, twill5, twill8, satin5, satin8, satin5x10)");
        app->add_option("--twist", twist, "Twist angle in degrees");
        app->add_option("--inclination", inclination, "Inclination angle in degrees");
        app->add_option("--alpha", alpha, "Roughness");
        app->add_option("--beta", beta, "Height scaling");
        app->add_option("--gap", gap, "Gap ratio");
        app->add_option("-w,--blend", w, "Diffuse blend weight");
        app->add_option("--random-material", random, "Sample the material parameters from this seed");
    }

    MaterialSpec spec() const {
        if (random >= 0) {
            Rng rng(static_cast<std::uint64_t>(random));
            return sample_material(rng, w);
        }
        MaterialDesc d = apply_material_edit(MaterialDesc{}, "pattern " + pattern);
        MaterialSpec s = d.spec;
        s.twist_deg = twist;
        s.inclination_deg = inclination;
        s.alpha = alpha;
        s.beta = beta;
        s.gap = gap;
        s.w = w;
        s.validate();
        return s;
    }
};

std::string describe(const MaterialSpec& s) {
    std::ostringstream os;
    os << pattern_by_index(s.pattern).name() << " twist " << s.twist_deg << " inclination " << s.inclination_deg
       << " alpha " << s.alpha << " beta " << s.beta << " gap " << s.gap << " w " << s.w;
    return os.str();
}

Kernel parse_kernel(const std::string& k) {
    if (k == "box") return Kernel::Box;
    if (k == "gaussian") return Kernel::Gaussian;
    throw std::invalid_argument("kernel must be box or gaussian");
}

std::string read_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_image(const Image& img, const std::string& out, const std::string& png) {
    write_pfm(out, img);
    std::printf("wrote %s\n", out.c_str());
    if (!png.empty()) {
        write_png(png, img);
        std::printf("wrote %s\n", png.c_str());
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Woven fabric appearance: dataset generation, network training and rendering"};
    app.set_config("--config", "", "Config file (INI/TOML; sections per command)");
    app.require_subcommand(1);

    // gen-pattern
    auto* gp = app.add_subcommand("gen-pattern", "Synthesize geometry maps for one weave");
    MaterialFlags gp_mat;
    gp_mat.add(gp);
    int gp_res = 0;
    std::string gp_out = "maps.wwgm", gp_png;
    gp->add_option("--resolution", gp_res, "Texels per repeat edge (0: pattern default)");
    gp->add_option("-o,--out", gp_out, "Geometry map file");
    gp->add_option("--png", gp_png, "Also write the normal map as PNG");
    gp->callback([&] {
        const MaterialSpec s = gp_mat.spec();
        const GeometryMaps maps = s.build_maps(gp_res);
        maps.save(gp_out);
        std::printf("%s: %d x %d texels, gap fraction %.4f\n", describe(s).c_str(), maps.resolution(),
                    maps.resolution(), maps.gap_fraction());
        if (!gp_png.empty()) maps.export_normal_png(gp_png);
    });

    // gen-dataset
    auto* gd = app.add_subcommand("gen-dataset", "Compute oracle targets for one material");
    MaterialFlags gd_mat;
    gd_mat.add(gd);
    GenerateOptions gd_opt;
    std::string gd_out = "material.wwds", gd_kernel = "box";
    std::vector<std::string> gd_merge;
    gd->add_option("-o,--out", gd_out, "Dataset file (resumed when unfinished)");
    gd->add_option("--budget", gd_opt.budget, "Queries per material");
    gd->add_option("--samples", gd_opt.samples, "Oracle samples per query");
    gd->add_option("--seed", gd_opt.seed, "Query selection and oracle seed");
    gd->add_option("--kernel", gd_kernel, "Footprint kernel (box or gaussian)");
    gd->add_option("--resolution", gd_opt.resolution, "Geometry map resolution (0: pattern default)");
    gd->add_option("--materials", gd_opt.material_count, "Materials in the whole run (recorded)");
    gd->add_option("--chunk", gd_opt.chunk, "Records per appended chunk");
    gd->add_option("--shard", gd_opt.shard, "Shard index");
    gd->add_option("--shards", gd_opt.shards, "Shard count");
    gd->add_option("--merge", gd_merge, "Merge these shard files into --out instead of generating");
    gd->callback([&] {
        if (!gd_merge.empty()) {
            std::vector<std::filesystem::path> shards(gd_merge.begin(), gd_merge.end());
            merge_datasets(shards, gd_out);
            std::printf("merged %zu shards into %s\n", shards.size(), gd_out.c_str());
            return;
        }
        gd_opt.kernel = parse_kernel(gd_kernel);
        const MaterialSpec s = gd_mat.spec();
        std::printf("%s\n", describe(s).c_str());
        const auto t0 = std::chrono::steady_clock::now();
        const DatasetHeader h = generate_dataset(gd_out, s, gd_opt, [&](std::uint64_t done, std::uint64_t total) {
            std::printf("  %llu / %llu queries (%.0f s)\n", static_cast<unsigned long long>(done),
                        static_cast<unsigned long long>(total), seconds_since(t0));
            std::fflush(stdout);
        });
        std::printf("wrote %s: %llu records, %llu degenerate dropped\n", gd_out.c_str(),
                    static_cast<unsigned long long>(h.record_count), static_cast<unsigned long long>(h.dropped));
    });

    // train
    auto* tr = app.add_subcommand("train", "Train the encoder/decoder on dataset files");
    std::vector<std::string> tr_data, tr_holdout;
    nn::TrainOptions tr_opt;
    std::string tr_out = "weights.wwnn", tr_init;
    std::uint64_t tr_init_seed = 1;
    tr->add_option("--data", tr_data, "Training dataset files (one per material)")->required();
    tr->add_option("--holdout", tr_holdout, "Held-out dataset files, evaluated after training (same order)");
    tr->add_option("--epochs", tr_opt.epochs, "Epochs");
    tr->add_option("--batch", tr_opt.batch, "Queries per batch");
    tr->add_option("--lr", tr_opt.lr, "Initial learning rate");
    tr->add_option("--weight-decay", tr_opt.weight_decay, "L2 coefficient on weights");
    tr->add_option("--momentum", tr_opt.momentum, "SGD momentum (0 disables)");
    tr->add_option("--clip", tr_opt.clip_norm, "Gradient-norm clip (0 disables)");
    tr->add_option("--seed", tr_opt.seed, "Batch order seed");
    tr->add_option("--init-seed", tr_init_seed, "Weight initialization seed");
    tr->add_option("--init", tr_init, "Start from these weights instead");
    tr->add_option("--checkpoints", tr_opt.checkpoint_dir, "Directory for per-epoch checkpoints");
    tr->add_option("--metrics", tr_opt.metrics_csv, "CSV log (epoch, iteration, loss, lr)");
    tr->add_option("-o,--out", tr_out, "Final weights");
    tr->callback([&] {
        const nn::Topology topo = nn::Topology::full();
        std::vector<nn::TrainingMaterial> mats;
        for (const auto& path : tr_data) {
            mats.push_back(nn::load_training_material(path, topo));
            std::printf("%s: %s, %zu records\n", path.c_str(), describe(mats.back().spec).c_str(),
                        mats.back().records.size());
        }
        nn::Network<float> net(topo);
        if (!tr_init.empty()) {
            net = nn::load_weights(tr_init, topo);
        } else {
            Rng rng(tr_init_seed);
            net.init_he(rng);
        }
        std::printf("%zu parameters, %d iterations per epoch\n", net.param_count(),
                    nn::iterations_per_epoch(mats, tr_opt.batch));
        const auto t0 = std::chrono::steady_clock::now();
        const auto result = nn::train(net, mats, tr_opt, [&](const nn::IterationLog& it) {
            if (it.iteration % 50 == 0) {
                std::printf("  epoch %d iteration %ld loss %.5f lr %g (%.0f s)\n", it.epoch, it.iteration, it.loss,
                            it.lr, seconds_since(t0));
                std::fflush(stdout);
            }
        });
        nn::save_weights(tr_out, net);
        std::printf("first 100 iterations mean loss %.5f, final epoch mean loss %.5f\n", result.mean_loss(0, 100),
                    result.epoch_mean_loss(tr_opt.epochs));
        std::printf("wrote %s\n", tr_out.c_str());
        for (std::size_t k = 0; k < tr_holdout.size(); ++k) {
            const nn::TrainingMaterial held = nn::load_training_material(tr_holdout[k], topo);
            const auto e = nn::evaluate(net, held, held.records, tr_opt.loss);
            std::printf("holdout %s: diffuse MAE %.4f, specular g-space MAE %.4f over %zu queries\n",
                        tr_holdout[k].c_str(), e.mae_diffuse, e.mae_specular_g, e.count);
        }
    });

    // encode
    auto* en = app.add_subcommand("encode", "Print the latent vector of every scene material");
    std::string en_scene, en_weights;
    en->add_option("--scene", en_scene, "Scene file")->required();
    en->add_option("--weights", en_weights, "Network weights")->required();
    en->callback([&] {
        const Scene scene = Scene::load(en_scene);
        const nn::Model model(nn::load_weights(en_weights));
        LatentCache cache(model);
        cache.sync(scene);
        for (const auto& [id, desc] : scene.materials) {
            std::printf("%s", id.c_str());
            for (float v : cache.get(id).z) std::printf(" %.6g", v);
            std::printf("\n");
        }
    });

    // render
    auto* rd = app.add_subcommand("render", "Render a scene");
    std::string rd_scene, rd_weights, rd_mode = "neural", rd_out = "render.pfm", rd_png;
    RenderOptions rd_opt;
    rd->add_option("--scene", rd_scene, "Scene file")->required();
    rd->add_option("--weights", rd_weights, "Network weights (neural mode)");
    rd->add_option("--mode", rd_mode, "neural or reference");
    rd->add_option("--spp", rd_opt.spp, "Oracle samples per pixel (reference mode)");
    rd->add_option("--seed", rd_opt.seed, "Reference sampling seed");
    rd->add_option("-o,--out", rd_out, "Linear float image (PFM)");
    rd->add_option("--png", rd_png, "Tone-mapped PNG");
    rd->callback([&] {
        const Scene scene = Scene::load(rd_scene);
        const auto t0 = std::chrono::steady_clock::now();
        RenderStats stats;
        Image img;
        if (rd_mode == "neural") {
            if (rd_weights.empty()) throw std::invalid_argument("neural mode needs --weights");
            rd_opt.mode = RenderOptions::Mode::Neural;
            const nn::Model model(nn::load_weights(rd_weights));
            LatentCache cache(model);
            cache.sync(scene);
            img = render(scene, rd_opt, &cache, nullptr, &stats);
        } else if (rd_mode == "reference") {
            rd_opt.mode = RenderOptions::Mode::Reference;
            MapCache maps;
            img = render(scene, rd_opt, nullptr, &maps, &stats);
        } else {
            throw std::invalid_argument("mode must be neural or reference");
        }
        std::printf("%d x %d, %zu hits, %zu fallback footprints, %.1f s\n", img.width(), img.height(), stats.hits,
                    stats.fallback_footprints, seconds_since(t0));
        write_image(img, rd_out, rd_png);
    });

    // compare
    auto* cp = app.add_subcommand("compare", "MSE between two float images");
    std::string cp_a, cp_b, cp_map;
    cp->add_option("a", cp_a, "First image (PFM)")->required();
    cp->add_option("b", cp_b, "Second image (PFM)")->required();
    cp->add_option("--error-map", cp_map, "Write the per-pixel absolute error as PNG");
    cp->callback([&] {
        const Image a = read_pfm(cp_a), b = read_pfm(cp_b);
        std::printf("MSE %.8g\n", image_mse(a, b));
        if (!cp_map.empty()) write_png(cp_map, abs_error_map(a, b), 0.0);
    });

    // edit
    auto* ed = app.add_subcommand("edit", "Apply material edits, then re-render with the neural model");
    std::string ed_scene, ed_weights, ed_edits, ed_out = "edited.pfm", ed_png, ed_scene_out;
    ed->add_option("--scene", ed_scene, "Scene file")->required();
    ed->add_option("--weights", ed_weights, "Network weights")->required();
    ed->add_option("--edits", ed_edits, "Edit file: lines of '<material> key value...'")->required();
    ed->add_option("-o,--out", ed_out, "Linear float image (PFM)");
    ed->add_option("--png", ed_png, "Tone-mapped PNG");
    ed->add_option("--scene-out", ed_scene_out, "Write the edited scene");
    ed->callback([&] {
        Scene scene = Scene::load(ed_scene);
        const nn::Model model(nn::load_weights(ed_weights));
        LatentCache cache(model);
        cache.sync(scene);
        const std::size_t before = cache.encode_count();
        std::istringstream edits(read_file(ed_edits));
        for (std::string line; std::getline(edits, line);) {
            line = line.substr(0, line.find('#'));
            std::istringstream ls(line);
            std::string id;
            if (!(ls >> id)) continue;
            auto it = scene.materials.find(id);
            if (it == scene.materials.end()) throw std::invalid_argument("edit names unknown material '" + id + "'");
            std::string rest;
            std::getline(ls, rest);
            it->second = apply_material_edit(it->second, rest);
            const auto path = cache.edit(id, it->second);
            std::printf("%s:%s -> %s\n", id.c_str(), rest.c_str(), edit_path_name(path));
        }
        std::printf("encoder runs for edits: %zu\n", cache.encode_count() - before);
        write_image(render(scene, {}, &cache, nullptr), ed_out, ed_png);
        if (!ed_scene_out.empty()) {
            std::ofstream(ed_scene_out) << scene.serialize();
            std::printf("wrote %s\n", ed_scene_out.c_str());
        }
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
