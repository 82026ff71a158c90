// Rough forward-pass throughput check used while tuning the conv kernels.

#include <chrono>
#include <cstdio>

#include "mritherm/mritherm.hpp"

int main() {
    using namespace mritherm;
    const nn::ModelConfig model = nn::mobilenet_v1_config();
    nn::validate_model(model);
    WeightStore ws = nn::init_backbone_random(42);

    auto samples = data::generate_synthetic(2, 7);
    Tensor x = data::preprocess(samples[1].image);

    Tensor feat = nn::forward_features(model, ws, x);
    std::printf("feature dim: %d, first %g %g\n", feat.shape()[0], feat.at(0), feat.at(1));

    const int reps = 5;
    auto start = std::chrono::steady_clock::now();
    double sink = 0.0;
    for (int i = 0; i < reps; ++i) {
        Tensor f = nn::forward_features(model, ws, x);
        sink += f.at(i % f.shape()[0]);
    }
    auto stop = std::chrono::steady_clock::now();
    const double sec = std::chrono::duration<double>(stop - start).count();
    std::printf("%d forward passes in %.3f s (%.3f s each), sink %g\n", reps, sec, sec / reps, sink);
    return 0;
}
