// Command-line front end: visualize | train | predict | evaluate.
//
// Exit codes: 0 success, 2 usage or I/O error, 3 numeric failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "mritherm/mritherm.hpp"

namespace fs = std::filesystem;

namespace {

using namespace mritherm;

struct DataSource {
    bool synthetic = false;
    int n_per_class = 0;
    std::string root;
};

// Accepts either a dataset directory or "synthetic:N".
DataSource parse_data_source(const std::string& arg) {
    DataSource src;
    if (arg.rfind("synthetic:", 0) == 0) {
        src.synthetic = true;
        try {
            src.n_per_class = std::stoi(arg.substr(10));
        } catch (const std::exception&) {
            throw ConfigError("bad synthetic count in '" + arg + "'");
        }
        if (src.n_per_class < 1) throw ConfigError("synthetic count must be >= 1");
    } else {
        src.root = arg;
    }
    return src;
}

std::pair<std::vector<Tensor>, std::vector<int>> load_data(const DataSource& src,
                                                           std::uint64_t seed) {
    if (src.synthetic) {
        std::vector<Tensor> images;
        std::vector<int> labels;
        for (const data::LabeledImage& sample : data::generate_synthetic(src.n_per_class, seed)) {
            images.push_back(data::preprocess(sample.image));
            labels.push_back(sample.label);
        }
        return {std::move(images), std::move(labels)};
    }
    data::DatasetManifest manifest = data::scan_dataset(src.root);
    for (const std::string& w : manifest.warnings) std::cerr << "warning: " << w << "\n";
    return data::load_and_preprocess(manifest);
}

// Accepts either a weight file or "random:SEED".
WeightStore load_backbone(const std::string& arg) {
    if (arg.rfind("random:", 0) == 0) {
        std::uint64_t seed = 0;
        try {
            seed = std::stoull(arg.substr(7));
        } catch (const std::exception&) {
            throw ConfigError("bad seed in '" + arg + "'");
        }
        return nn::init_backbone_random(seed);
    }
    return load_weights(arg);
}

void write_panels(const ImageU8& gray, const std::string& out_dir, const imgproc::CannyConfig& cfg,
                  bool with_gray) {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    if (with_gray) {
        imgio::write_pnm((dir / "gray.pgm").string(), gray);
        std::cout << "wrote " << (dir / "gray.pgm").string() << "\n";
    }
    imgio::write_pnm((dir / "blurred.pgm").string(), imgproc::gaussian_blur(gray, cfg.gaussian));
    std::cout << "wrote " << (dir / "blurred.pgm").string() << "\n";
    imgio::write_pnm((dir / "thermal.ppm").string(), imgproc::apply_colormap(gray));
    std::cout << "wrote " << (dir / "thermal.ppm").string() << "\n";
    imgio::write_pnm((dir / "edges.pgm").string(), imgproc::canny(gray, cfg));
    std::cout << "wrote " << (dir / "edges.pgm").string() << "\n";
}

ImageU8 preprocessed_gray(const ImageU8& img) {
    return imgproc::resize_bilinear(imgproc::to_grayscale(img), data::kInputSize, data::kInputSize);
}

int cmd_visualize(const std::string& input, const std::string& out_dir,
                  const imgproc::CannyConfig& cfg) {
    imgproc::validate(cfg);
    write_panels(preprocessed_gray(imgio::read_pnm(input)), out_dir, cfg, true);
    return 0;
}

int cmd_train(const std::string& data_arg, const std::string& backbone_arg, const std::string& out,
              const std::string& history, const train::TrainConfig& tc) {
    tc.validate();
    const DataSource src = parse_data_source(data_arg);
    WeightStore backbone = load_backbone(backbone_arg);
    const nn::ModelConfig model = nn::mobilenet_v1_config();
    nn::validate_model(model);

    auto [images, labels] = load_data(src, tc.seed);
    std::size_t per_class[2] = {0, 0};
    for (int l : labels) per_class[l] += 1;
    std::printf("dataset: %zu images (%zu no tumor, %zu tumor)\n", images.size(), per_class[0],
                per_class[1]);

    train::LabeledFeatures feats = train::extract_features(model, backbone, images, labels);
    std::printf("features: %zu x %d\n", feats.count(), feats.feature_dim());
    std::printf("head init: dense1 he_uniform, dense2 glorot_uniform, biases zero, seed %llu\n",
                static_cast<unsigned long long>(tc.seed));

    train::FitResult fit = train::fit_head(feats, tc);

    WeightStore combined = backbone;
    const train::HeadWeights& hw = fit.head;
    const std::pair<std::string, const Tensor*> head[] = {{"head.dense1.w", &hw.w1},
                                                          {"head.dense1.b", &hw.b1},
                                                          {"head.dense2.w", &hw.w2},
                                                          {"head.dense2.b", &hw.b2}};
    for (const auto& [name, tensor] : head) {
        if (combined.contains(name)) combined.replace(name, *tensor);
        else combined.add(name, *tensor);
    }
    save_weights(combined, out);
    const std::string history_path = history.empty() ? out + ".history.csv" : history;
    train::write_history_csv(history_path, fit.history);

    double best_acc = 0.0;
    for (const train::HistoryRow& r : fit.history) {
        if (r.epoch == fit.best_epoch) best_acc = r.val_accuracy;
    }
    std::printf("epochs run: %zu, best epoch %d\n", fit.history.size(), fit.best_epoch);
    std::printf("final val_loss %.6f val_accuracy %.4f\n", fit.best_val_loss, best_acc);
    std::cout << "wrote " << out << "\n";
    std::cout << "wrote " << history_path << "\n";
    return 0;
}

int cmd_predict(const std::string& input, const std::string& weights_path, bool visualize,
                const std::string& out_dir) {
    const WeightStore ws = load_weights(weights_path);
    const ImageU8 img = imgio::read_pnm(input);
    const nn::ModelConfig model = nn::mobilenet_v1_config();
    const Tensor probs = nn::forward(model, ws, data::preprocess(img));
    const int label = train::argmax_label(probs);
    std::printf("label: %s\n", label == 1 ? "tumor" : "no tumor");
    std::printf("p(no tumor): %.4f\n", probs.at(0));
    std::printf("p(tumor): %.4f\n", probs.at(1));
    if (visualize) {
        write_panels(preprocessed_gray(img), out_dir, imgproc::CannyConfig{}, false);
    }
    return 0;
}

int cmd_evaluate(const std::string& data_arg, const std::string& weights_path,
                 const std::string& report, double split, std::uint64_t seed) {
    const WeightStore ws = load_weights(weights_path);
    const DataSource src = parse_data_source(data_arg);
    auto [images, labels] = load_data(src, seed);
    train::SplitIndices idx = train::stratified_split(labels, split, seed);

    const nn::ModelConfig model = nn::mobilenet_v1_config();
    std::vector<int> preds, truth;
    for (std::size_t i : idx.val) {
        preds.push_back(train::argmax_label(nn::forward(model, ws, images[i])));
        truth.push_back(labels[i]);
    }
    const eval::ConfusionMatrix cm = eval::confusion(preds, truth);
    eval::write_report(report, cm);
    std::printf("holdout: %zu of %zu samples\n", idx.val.size(), labels.size());
    std::cout << eval::render_report_table(cm);
    std::cout << "wrote " << report << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Brain-MRI tumor pipeline: filter panels, frozen-backbone training, prediction, evaluation"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    std::string input, out_dir = "panels", data_arg, backbone_arg, weights_path, out_path;
    std::string history_path, report_path = "report.json";
    bool visualize_flag = false;
    imgproc::CannyConfig canny_cfg;
    train::TrainConfig tc;

    CLI::App* vis = app.add_subcommand("visualize", "Write grayscale, blurred, pseudothermal and edge panels");
    vis->add_option("--input", input, "Input PGM/PPM image")->required();
    vis->add_option("--out-dir", out_dir, "Output directory");
    vis->add_option("--kernel", canny_cfg.gaussian.kernel_size, "Gaussian kernel size (odd)");
    vis->add_option("--sigma", canny_cfg.gaussian.sigma, "Gaussian sigma");
    vis->add_option("--t-low", canny_cfg.t_low, "Canny weak threshold");
    vis->add_option("--t-high", canny_cfg.t_high, "Canny strong threshold");

    CLI::App* tr = app.add_subcommand("train", "Train the classification head on cached backbone features");
    tr->add_option("--data", data_arg, "Dataset directory or synthetic:N")->required();
    tr->add_option("--backbone", backbone_arg, "Backbone weight file or random:SEED")->required();
    tr->add_option("--out", out_path, "Output weight file")->required();
    tr->add_option("--history", history_path, "History CSV path (default <out>.history.csv)");
    tr->add_option("--seed", tc.seed, "Shuffle/split/init seed");
    tr->add_option("--batch-size", tc.batch_size, "Mini-batch size");
    tr->add_option("--epochs", tc.epochs, "Maximum epochs");
    tr->add_option("--lr", tc.learning_rate, "Adam learning rate");
    tr->add_option("--patience", tc.patience, "Early-stopping patience");
    tr->add_option("--split", tc.split, "Training fraction");

    CLI::App* pr = app.add_subcommand("predict", "Classify one image");
    pr->add_option("--input", input, "Input PGM/PPM image")->required();
    pr->add_option("--weights", weights_path, "Weight file with backbone and head")->required();
    pr->add_flag("--visualize", visualize_flag, "Also write the filter panels");
    pr->add_option("--out-dir", out_dir, "Panel directory for --visualize");

    CLI::App* ev = app.add_subcommand("evaluate", "Score the holdout split and write a report");
    ev->add_option("--data", data_arg, "Dataset directory or synthetic:N")->required();
    ev->add_option("--weights", weights_path, "Weight file with backbone and head")->required();
    ev->add_option("--report", report_path, "Report output path");
    ev->add_option("--seed", tc.seed, "Split seed (match training for the same holdout)");
    ev->add_option("--split", tc.split, "Training fraction (holdout is the rest)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (vis->parsed()) return cmd_visualize(input, out_dir, canny_cfg);
        if (tr->parsed()) return cmd_train(data_arg, backbone_arg, out_path, history_path, tc);
        if (pr->parsed()) return cmd_predict(input, weights_path, visualize_flag, out_dir);
        if (ev->parsed()) return cmd_evaluate(data_arg, weights_path, report_path, tc.split, tc.seed);
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
