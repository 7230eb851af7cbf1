// checkpoint.hpp — versioned binary container for trained models: a JSON
// header (kind, architecture, hierarchy fingerprint, training state) followed
// by named little-endian double buffers. Writes are atomic
// (write-temp-then-rename).
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "atlas/baselines.hpp"
#include "atlas/hvae.hpp"
#include "atlas/tensor.hpp"

namespace atlas {

struct NamedBuffer {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;
};

struct Checkpoint {
    std::string model_type;  // proposed | pooling | gcn | fc | pca
    nlohmann::json meta;     // architecture + training metadata
    std::vector<NamedBuffer> buffers;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct TrainMeta {
    uint64_t seed = 0;
    int epoch = 0;
    double best_val = 0.0;
    long adam_step = 0;
    double lr = 0.0;
};

std::vector<int> hierarchy_fingerprint(const TemplateHierarchy& h);

void save_model_checkpoint(const std::filesystem::path& path, NeuralShapeModel& model,
                           const TemplateHierarchy& h, const TrainMeta& meta,
                           const Adam* adam = nullptr);

// Rebuilds the model from the stored architecture; throws if the hierarchy
// does not match the stored fingerprint.
std::unique_ptr<NeuralShapeModel> load_model_checkpoint(const std::filesystem::path& path,
                                                        const TemplateHierarchy& h,
                                                        TrainMeta* meta = nullptr);

void save_pca_checkpoint(const std::filesystem::path& path, const PcaModel& model,
                         uint64_t seed);
PcaModel load_pca_checkpoint(const std::filesystem::path& path);

// "proposed" ... "fc" for model checkpoints, "pca" for PCA ones.
std::string peek_checkpoint_type(const std::filesystem::path& path);

}  // namespace atlas
