// hvae.hpp — graph-convolutional variational autoencoders over template
// hierarchies: the hierarchical model with per-level latents plus the shared
// building blocks (graph conv, residual blocks, losses, training loop,
// latent-space interpolation).
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "atlas/hierarchy.hpp"
#include "atlas/synthdata.hpp"
#include "atlas/tensor.hpp"

namespace atlas {

enum class ModelKind { Proposed, Pooling, Gcn, Fc };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

struct ModelConfig {
    ModelKind kind = ModelKind::Proposed;
    int hidden = 32;      // ResBlock channel width
    int latent = 8;       // latent channels per vertex
    int fc_hidden1 = 256; // FC baseline widths
    int fc_hidden2 = 64;
    int fc_latent = 16;
    double alpha = 1e12;  // reconstruction weight in the total loss
    uint64_t init_seed = 42;
};

// Latent distribution of one level for a (possibly batched) input.
struct LevelLatent {
    Tensor mu;
    Tensor logvar;
    Tensor z;
};

struct EncodeResult {
    std::vector<LevelLatent> latents;  // [0] = finest latent level
    std::vector<Tensor> features;      // per-level encoder features
};

// Inference-time latent code of a single case, values only.
struct LatentCode {
    std::vector<Mat> mu;
    std::vector<Mat> logvar;
    std::vector<Mat> z;

    int num_levels() const { return static_cast<int>(z.size()); }
};

// z = mu + eps * exp(logvar / 2); eps ~ N(0,1) when sampling, 0 at inference.
Tensor reparameterize(const Tensor& mu, const Tensor& logvar, bool sample, Rng* rng);

// One dense linear map, optionally preceded by a fixed sparse vertex-domain
// operator (the level's normalized adjacency). A null operator makes this a
// plain per-row (1x1) linear layer.
class GraphConv {
public:
    GraphConv() = default;
    GraphConv(int c_in, int c_out, std::shared_ptr<const SparseMatrix> op, Rng& init);

    Tensor apply(const Tensor& f, int batch) const;

    Tensor weight, bias;
    std::shared_ptr<const SparseMatrix> op;
};

// f + conv2(elu(conv1(f))), with a 1x1 projection on the skip path when the
// channel widths differ.
class ResBlock {
public:
    ResBlock() = default;
    ResBlock(int c_in, int c_out, std::shared_ptr<const SparseMatrix> op, Rng& init);

    Tensor apply(const Tensor& f, int batch) const;

    GraphConv conv1, conv2;
    Tensor skip;  // undefined when c_in == c_out
    int c_in = 0, c_out = 0;
};

class NeuralShapeModel {
public:
    virtual ~NeuralShapeModel() = default;

    const ModelConfig& config() const { return cfg_; }
    ModelKind kind() const { return cfg_.kind; }
    int fine_vertex_count() const { return v_fine_; }

    virtual int num_latent_levels() const = 0;
    virtual int latent_vertex_count(int level) const = 0;

    // Stacks normalized per-case vertex matrices into the model's input
    // layout: (batch * v) x 3 for vertex-domain models.
    virtual Tensor make_input(const std::vector<const Mat*>& cases) const;

    virtual EncodeResult encode(const Tensor& x, int batch, bool sample, Rng* rng) = 0;
    virtual Tensor decode(const std::vector<Tensor>& z, int batch) = 0;

    // Stable order; names identify buffers in checkpoints.
    virtual std::vector<std::pair<std::string, Tensor>> named_parameters() = 0;
    std::vector<Tensor> parameters();

    // Extracts one case's reconstruction from a batched decoder output.
    virtual Mat output_to_case(const Tensor& xhat, int item) const;

    // Single-case conveniences (inference mode, z = mu).
    Mat reconstruct(const Mat& case_norm);
    LatentCode encode_case(const Mat& case_norm);
    Mat decode_code(const LatentCode& code);

protected:
    ModelConfig cfg_;
    int v_fine_ = 0;
};

// Full hierarchical model: one encoder/decoder block and one latent head pair
// per hierarchy level; each decoder level fuses its latent with unpooled
// coarser features.
class HVae : public NeuralShapeModel {
public:
    HVae(const TemplateHierarchy& h, const ModelConfig& cfg);

    int num_latent_levels() const override { return static_cast<int>(vcount_.size()); }
    int latent_vertex_count(int level) const override { return vcount_[level]; }
    EncodeResult encode(const Tensor& x, int batch, bool sample, Rng* rng) override;
    Tensor decode(const std::vector<Tensor>& z, int batch) override;
    std::vector<std::pair<std::string, Tensor>> named_parameters() override;

private:
    struct EncLevel {
        ResBlock res1, res2;
        GraphConv mu_head, logvar_head;
    };
    struct DecLevel {
        ResBlock res1, res2;
    };
    std::vector<int> vcount_;  // model level m = hierarchy level L-1-m
    std::vector<std::shared_ptr<const SparseMatrix>> ahat_;
    std::vector<std::shared_ptr<const SparseMatrix>> pool_;    // m -> m+1
    std::vector<std::shared_ptr<const SparseMatrix>> unpool_;  // m+1 -> m
    std::vector<EncLevel> enc_;
    std::vector<DecLevel> dec_;
    GraphConv out_;
};

// Ablation: same trunk as HVae but a single latent at the coarsest level.
class PoolingVae : public NeuralShapeModel {
public:
    PoolingVae(const TemplateHierarchy& h, const ModelConfig& cfg);

    int num_latent_levels() const override { return 1; }
    int latent_vertex_count(int level) const override;
    EncodeResult encode(const Tensor& x, int batch, bool sample, Rng* rng) override;
    Tensor decode(const std::vector<Tensor>& z, int batch) override;
    std::vector<std::pair<std::string, Tensor>> named_parameters() override;

private:
    struct TrunkLevel {
        ResBlock res1, res2;
    };
    std::vector<int> vcount_;
    std::vector<std::shared_ptr<const SparseMatrix>> ahat_;
    std::vector<std::shared_ptr<const SparseMatrix>> pool_;
    std::vector<std::shared_ptr<const SparseMatrix>> unpool_;
    std::vector<TrunkLevel> enc_, dec_;
    GraphConv mu_head_, logvar_head_, out_;
};

// Ablation: residual graph convolutions only; the latent lives at full
// resolution (one latent row per fine vertex).
class GcnVae : public NeuralShapeModel {
public:
    GcnVae(const TemplateHierarchy& h, const ModelConfig& cfg);

    int num_latent_levels() const override { return 1; }
    int latent_vertex_count(int) const override { return v_fine_; }
    EncodeResult encode(const Tensor& x, int batch, bool sample, Rng* rng) override;
    Tensor decode(const std::vector<Tensor>& z, int batch) override;
    std::vector<std::pair<std::string, Tensor>> named_parameters() override;

private:
    std::shared_ptr<const SparseMatrix> ahat_;
    ResBlock enc1_, enc2_, dec1_, dec2_;
    GraphConv mu_head_, logvar_head_, out_;
};

// Ablation: dense VAE on the flattened 3v coordinate vector.
class FcVae : public NeuralShapeModel {
public:
    FcVae(const TemplateHierarchy& h, const ModelConfig& cfg);

    int num_latent_levels() const override { return 1; }
    int latent_vertex_count(int) const override { return 1; }
    Tensor make_input(const std::vector<const Mat*>& cases) const override;
    EncodeResult encode(const Tensor& x, int batch, bool sample, Rng* rng) override;
    Tensor decode(const std::vector<Tensor>& z, int batch) override;
    std::vector<std::pair<std::string, Tensor>> named_parameters() override;
    Mat output_to_case(const Tensor& xhat, int item) const override;

private:
    GraphConv enc1_, enc2_, mu_head_, logvar_head_, dec1_, dec2_, out_;
};

// Mean over the batch of the summed per-entry Gaussian KL against N(0, 1),
// accumulated over all latent levels.
Tensor kl_loss(const std::vector<LevelLatent>& latents, int batch);

// Mean over vertices and batch items of the squared vertex error.
Tensor recon_loss(const Tensor& x, const Tensor& xhat);

// kl + alpha * recon.
Tensor total_loss(const Tensor& x, const Tensor& xhat, const std::vector<LevelLatent>& latents,
                  int batch, double alpha);

struct TrainConfig {
    int batch_size = 32;
    int max_epochs = 1000;
    int patience = 50;
    double lr = 1e-2;
    uint64_t seed = 42;
};

struct TrainHistory {
    std::vector<double> train_total, train_kl, train_recon, val_recon;
    int best_epoch = -1;  // 0-based epoch of the restored snapshot
    double best_val = 0.0;

    int epochs_run() const { return static_cast<int>(val_recon.size()); }
};

// Minibatch Adam on the total loss with validation-loss early stopping; the
// best-validation weights are restored on return. Throws on a non-finite
// loss or an empty split.
TrainHistory train_model(NeuralShapeModel& model, const Cohort& cohort, const TrainConfig& cfg,
                         Adam* adam_state = nullptr);

// Per-level linear interpolation between two codes: the coarsest level moves
// with beta, every finer level with alpha.
LatentCode interpolate_latents(const LatentCode& a, const LatentCode& b, double alpha, double beta);

// One column per latent level: the 1-D principal-component score of each
// case's flattened z. Requires at least two codes.
Mat latent_scatter(const std::vector<LatentCode>& codes);

}  // namespace atlas
