#include "atlas/hvae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "atlas/baselines.hpp"

namespace atlas {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Proposed: return "proposed";
        case ModelKind::Pooling: return "pooling";
        case ModelKind::Gcn: return "gcn";
        case ModelKind::Fc: return "fc";
    }
    throw std::logic_error("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "proposed") return ModelKind::Proposed;
    if (name == "pooling") return ModelKind::Pooling;
    if (name == "gcn") return ModelKind::Gcn;
    if (name == "fc") return ModelKind::Fc;
    throw std::invalid_argument("unknown model kind '" + name + "'");
}

namespace {

Tensor glorot(int rows, int cols, Rng& rng) {
    const double lim = std::sqrt(6.0 / (rows + cols));
    Mat m(rows, cols);
    for (auto& v : m.data) v = rng.uniform(-lim, lim);
    return Tensor::from_mat(m, true);
}

void collect_resblock(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                      const ResBlock& rb) {
    out.push_back({prefix + ".conv1.w", rb.conv1.weight});
    out.push_back({prefix + ".conv1.b", rb.conv1.bias});
    out.push_back({prefix + ".conv2.w", rb.conv2.weight});
    out.push_back({prefix + ".conv2.b", rb.conv2.bias});
    if (rb.skip.defined()) out.push_back({prefix + ".skip", rb.skip});
}

void collect_conv(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                  const GraphConv& c) {
    out.push_back({prefix + ".w", c.weight});
    out.push_back({prefix + ".b", c.bias});
}

}  // namespace

Tensor reparameterize(const Tensor& mu, const Tensor& logvar, bool sample, Rng* rng) {
    if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols())
        throw std::invalid_argument("reparameterize: mu/logvar shape mismatch");
    if (!sample) return mu;
    if (!rng) throw std::invalid_argument("reparameterize: sampling requires an rng");
    Mat eps(mu.rows(), mu.cols());
    for (auto& v : eps.data) v = rng->normal();
    return add(mu, mul(Tensor::from_mat(eps), exp(scalar_mul(logvar, 0.5))));
}

GraphConv::GraphConv(int c_in, int c_out, std::shared_ptr<const SparseMatrix> op_, Rng& init)
    : weight(glorot(c_in, c_out, init)), bias(Tensor::zeros(1, c_out, true)), op(std::move(op_)) {}

Tensor GraphConv::apply(const Tensor& f, int batch) const {
    const Tensor h = op ? sparse_matmul(op, f, batch) : f;
    return add_rowvec(matmul(h, weight), bias);
}

ResBlock::ResBlock(int c_in_, int c_out_, std::shared_ptr<const SparseMatrix> op, Rng& init)
    : conv1(c_in_, c_out_, op, init), conv2(c_out_, c_out_, op, init), c_in(c_in_), c_out(c_out_) {
    if (c_in != c_out) skip = glorot(c_in, c_out, init);
}

Tensor ResBlock::apply(const Tensor& f, int batch) const {
    const Tensor inner = conv2.apply(elu(conv1.apply(f, batch)), batch);
    const Tensor base = skip.defined() ? matmul(f, skip) : f;
    return add(base, inner);
}

// ---------------------------------------------------------------------------
// Base model

std::vector<Tensor> NeuralShapeModel::parameters() {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) {
        (void)name;
        out.push_back(t);
    }
    return out;
}

Tensor NeuralShapeModel::make_input(const std::vector<const Mat*>& cases) const {
    if (cases.empty()) throw std::invalid_argument("make_input: empty batch");
    Mat x(static_cast<int>(cases.size()) * v_fine_, 3);
    int row = 0;
    for (const Mat* c : cases) {
        if (c->rows != v_fine_ || c->cols != 3)
            throw std::invalid_argument("make_input: case shape mismatch with hierarchy");
        std::copy(c->data.begin(), c->data.end(), x.data.begin() + static_cast<size_t>(row) * 3);
        row += c->rows;
    }
    return Tensor::from_mat(x);
}

Mat NeuralShapeModel::output_to_case(const Tensor& xhat, int item) const {
    Mat out(v_fine_, 3);
    const auto& v = xhat.values();
    std::copy(v.begin() + static_cast<size_t>(item) * v_fine_ * 3,
              v.begin() + static_cast<size_t>(item + 1) * v_fine_ * 3, out.data.begin());
    return out;
}

Mat NeuralShapeModel::reconstruct(const Mat& case_norm) {
    const Tensor x = make_input({&case_norm});
    EncodeResult enc = encode(x, 1, false, nullptr);
    std::vector<Tensor> zs;
    for (auto& l : enc.latents) zs.push_back(l.z);
    const Tensor xhat = decode(zs, 1);
    return output_to_case(xhat, 0);
}

LatentCode NeuralShapeModel::encode_case(const Mat& case_norm) {
    const Tensor x = make_input({&case_norm});
    EncodeResult enc = encode(x, 1, false, nullptr);
    LatentCode code;
    for (auto& l : enc.latents) {
        code.mu.push_back(l.mu.to_mat());
        code.logvar.push_back(l.logvar.to_mat());
        code.z.push_back(l.z.to_mat());
    }
    return code;
}

Mat NeuralShapeModel::decode_code(const LatentCode& code) {
    if (code.num_levels() != num_latent_levels())
        throw std::invalid_argument("decode_code: latent level count mismatch");
    std::vector<Tensor> zs;
    for (const auto& m : code.z) zs.push_back(Tensor::from_mat(m));
    return output_to_case(decode(zs, 1), 0);
}

// ---------------------------------------------------------------------------
// Hierarchical model

HVae::HVae(const TemplateHierarchy& h, const ModelConfig& cfg) {
    cfg_ = cfg;
    cfg_.kind = ModelKind::Proposed;
    const int levels = h.num_levels();
    v_fine_ = h.fine().num_vertices();
    Rng init(cfg_.init_seed);

    for (int m = 0; m < levels; ++m) {
        const int hl = levels - 1 - m;
        vcount_.push_back(h.levels[hl].num_vertices());
        ahat_.push_back(std::make_shared<SparseMatrix>(normalized_adjacency(h.adjacency[hl])));
    }
    for (int m = 0; m + 1 < levels; ++m) {
        const int hl = levels - 1 - m;
        pool_.push_back(std::make_shared<SparseMatrix>(pooling_matrix(h.corr[hl - 1], h.adjacency[hl])));
        unpool_.push_back(std::make_shared<SparseMatrix>(unpooling_matrix(h.corr[hl - 1])));
    }
    for (int m = 0; m < levels; ++m) {
        EncLevel e;
        e.res1 = ResBlock(m == 0 ? 3 : cfg_.hidden, cfg_.hidden, ahat_[m], init);
        e.res2 = ResBlock(cfg_.hidden, cfg_.hidden, ahat_[m], init);
        e.mu_head = GraphConv(cfg_.hidden, cfg_.latent, ahat_[m], init);
        e.logvar_head = GraphConv(cfg_.hidden, cfg_.latent, ahat_[m], init);
        enc_.push_back(std::move(e));
    }
    for (int m = 0; m < levels; ++m) {
        DecLevel d;
        const int c_in = m == levels - 1 ? cfg_.latent : cfg_.hidden + cfg_.latent;
        d.res1 = ResBlock(c_in, cfg_.hidden, ahat_[m], init);
        d.res2 = ResBlock(cfg_.hidden, cfg_.hidden, ahat_[m], init);
        dec_.push_back(std::move(d));
    }
    out_ = GraphConv(cfg_.hidden, 3, ahat_[0], init);
}

EncodeResult HVae::encode(const Tensor& x, int batch, bool sample, Rng* rng) {
    if (x.rows() != batch * vcount_[0] || x.cols() != 3)
        throw std::invalid_argument("encode: input rows do not match the hierarchy's fine level");
    EncodeResult r;
    Tensor f = x;
    const int levels = num_latent_levels();
    for (int m = 0; m < levels; ++m) {
        f = enc_[m].res2.apply(enc_[m].res1.apply(f, batch), batch);
        r.features.push_back(f);
        const Tensor mu = enc_[m].mu_head.apply(f, batch);
        const Tensor logvar = enc_[m].logvar_head.apply(f, batch);
        r.latents.push_back({mu, logvar, reparameterize(mu, logvar, sample, rng)});
        if (m + 1 < levels) f = sparse_matmul(pool_[m], f, batch);
    }
    return r;
}

Tensor HVae::decode(const std::vector<Tensor>& z, int batch) {
    const int levels = num_latent_levels();
    if (static_cast<int>(z.size()) != levels)
        throw std::invalid_argument("decode: expected " + std::to_string(levels) + " latent levels");
    for (int m = 0; m < levels; ++m)
        if (z[m].rows() != batch * vcount_[m] || z[m].cols() != cfg_.latent)
            throw std::invalid_argument("decode: latent shape mismatch at level " + std::to_string(m));
    Tensor g = dec_[levels - 1].res2.apply(dec_[levels - 1].res1.apply(z[levels - 1], batch), batch);
    for (int m = levels - 2; m >= 0; --m) {
        const Tensor up = sparse_matmul(unpool_[m], g, batch);
        g = dec_[m].res2.apply(dec_[m].res1.apply(concat_cols(up, z[m]), batch), batch);
    }
    return out_.apply(g, batch);
}

std::vector<std::pair<std::string, Tensor>> HVae::named_parameters() {
    std::vector<std::pair<std::string, Tensor>> out;
    for (size_t m = 0; m < enc_.size(); ++m) {
        const std::string p = "enc" + std::to_string(m);
        collect_resblock(out, p + ".res1", enc_[m].res1);
        collect_resblock(out, p + ".res2", enc_[m].res2);
        collect_conv(out, p + ".mu", enc_[m].mu_head);
        collect_conv(out, p + ".logvar", enc_[m].logvar_head);
    }
    for (size_t m = 0; m < dec_.size(); ++m) {
        const std::string p = "dec" + std::to_string(m);
        collect_resblock(out, p + ".res1", dec_[m].res1);
        collect_resblock(out, p + ".res2", dec_[m].res2);
    }
    collect_conv(out, "out", out_);
    return out;
}

// ---------------------------------------------------------------------------
// Pooling-only ablation

PoolingVae::PoolingVae(const TemplateHierarchy& h, const ModelConfig& cfg) {
    cfg_ = cfg;
    cfg_.kind = ModelKind::Pooling;
    const int levels = h.num_levels();
    v_fine_ = h.fine().num_vertices();
    Rng init(cfg_.init_seed);

    for (int m = 0; m < levels; ++m) {
        const int hl = levels - 1 - m;
        vcount_.push_back(h.levels[hl].num_vertices());
        ahat_.push_back(std::make_shared<SparseMatrix>(normalized_adjacency(h.adjacency[hl])));
    }
    for (int m = 0; m + 1 < levels; ++m) {
        const int hl = levels - 1 - m;
        pool_.push_back(std::make_shared<SparseMatrix>(pooling_matrix(h.corr[hl - 1], h.adjacency[hl])));
        unpool_.push_back(std::make_shared<SparseMatrix>(unpooling_matrix(h.corr[hl - 1])));
    }
    for (int m = 0; m < levels; ++m) {
        TrunkLevel e;
        e.res1 = ResBlock(m == 0 ? 3 : cfg_.hidden, cfg_.hidden, ahat_[m], init);
        e.res2 = ResBlock(cfg_.hidden, cfg_.hidden, ahat_[m], init);
        enc_.push_back(std::move(e));
    }
    mu_head_ = GraphConv(cfg_.hidden, cfg_.latent, ahat_.back(), init);
    logvar_head_ = GraphConv(cfg_.hidden, cfg_.latent, ahat_.back(), init);
    for (int m = 0; m < levels; ++m) {
        TrunkLevel d;
        d.res1 = ResBlock(m == levels - 1 ? cfg_.latent : cfg_.hidden, cfg_.hidden, ahat_[m], init);
        d.res2 = ResBlock(cfg_.hidden, cfg_.hidden, ahat_[m], init);
        dec_.push_back(std::move(d));
    }
    out_ = GraphConv(cfg_.hidden, 3, ahat_[0], init);
}

int PoolingVae::latent_vertex_count(int level) const {
    if (level != 0) throw std::out_of_range("PoolingVae has a single latent level");
    return vcount_.back();
}

EncodeResult PoolingVae::encode(const Tensor& x, int batch, bool sample, Rng* rng) {
    if (x.rows() != batch * vcount_[0] || x.cols() != 3)
        throw std::invalid_argument("encode: input rows do not match the hierarchy's fine level");
    EncodeResult r;
    Tensor f = x;
    const int levels = static_cast<int>(vcount_.size());
    for (int m = 0; m < levels; ++m) {
        f = enc_[m].res2.apply(enc_[m].res1.apply(f, batch), batch);
        r.features.push_back(f);
        if (m + 1 < levels) f = sparse_matmul(pool_[m], f, batch);
    }
    const Tensor mu = mu_head_.apply(f, batch);
    const Tensor logvar = logvar_head_.apply(f, batch);
    r.latents.push_back({mu, logvar, reparameterize(mu, logvar, sample, rng)});
    return r;
}

Tensor PoolingVae::decode(const std::vector<Tensor>& z, int batch) {
    if (z.size() != 1) throw std::invalid_argument("decode: expected a single latent level");
    const int levels = static_cast<int>(vcount_.size());
    if (z[0].rows() != batch * vcount_.back() || z[0].cols() != cfg_.latent)
        throw std::invalid_argument("decode: latent shape mismatch");
    Tensor g = dec_[levels - 1].res2.apply(dec_[levels - 1].res1.apply(z[0], batch), batch);
    for (int m = levels - 2; m >= 0; --m) {
        const Tensor up = sparse_matmul(unpool_[m], g, batch);
        g = dec_[m].res2.apply(dec_[m].res1.apply(up, batch), batch);
    }
    return out_.apply(g, batch);
}

std::vector<std::pair<std::string, Tensor>> PoolingVae::named_parameters() {
    std::vector<std::pair<std::string, Tensor>> out;
    for (size_t m = 0; m < enc_.size(); ++m) {
        const std::string p = "enc" + std::to_string(m);
        collect_resblock(out, p + ".res1", enc_[m].res1);
        collect_resblock(out, p + ".res2", enc_[m].res2);
    }
    collect_conv(out, "mu", mu_head_);
    collect_conv(out, "logvar", logvar_head_);
    for (size_t m = 0; m < dec_.size(); ++m) {
        const std::string p = "dec" + std::to_string(m);
        collect_resblock(out, p + ".res1", dec_[m].res1);
        collect_resblock(out, p + ".res2", dec_[m].res2);
    }
    collect_conv(out, "out", out_);
    return out;
}

// ---------------------------------------------------------------------------
// GCN-only ablation

GcnVae::GcnVae(const TemplateHierarchy& h, const ModelConfig& cfg) {
    cfg_ = cfg;
    cfg_.kind = ModelKind::Gcn;
    v_fine_ = h.fine().num_vertices();
    Rng init(cfg_.init_seed);
    ahat_ = std::make_shared<SparseMatrix>(normalized_adjacency(h.adjacency.back()));
    enc1_ = ResBlock(3, cfg_.hidden, ahat_, init);
    enc2_ = ResBlock(cfg_.hidden, cfg_.hidden, ahat_, init);
    mu_head_ = GraphConv(cfg_.hidden, cfg_.latent, ahat_, init);
    logvar_head_ = GraphConv(cfg_.hidden, cfg_.latent, ahat_, init);
    dec1_ = ResBlock(cfg_.latent, cfg_.hidden, ahat_, init);
    dec2_ = ResBlock(cfg_.hidden, cfg_.hidden, ahat_, init);
    out_ = GraphConv(cfg_.hidden, 3, ahat_, init);
}

EncodeResult GcnVae::encode(const Tensor& x, int batch, bool sample, Rng* rng) {
    if (x.rows() != batch * v_fine_ || x.cols() != 3)
        throw std::invalid_argument("encode: input rows do not match the hierarchy's fine level");
    EncodeResult r;
    const Tensor f = enc2_.apply(enc1_.apply(x, batch), batch);
    r.features.push_back(f);
    const Tensor mu = mu_head_.apply(f, batch);
    const Tensor logvar = logvar_head_.apply(f, batch);
    r.latents.push_back({mu, logvar, reparameterize(mu, logvar, sample, rng)});
    return r;
}

Tensor GcnVae::decode(const std::vector<Tensor>& z, int batch) {
    if (z.size() != 1) throw std::invalid_argument("decode: expected a single latent level");
    if (z[0].rows() != batch * v_fine_ || z[0].cols() != cfg_.latent)
        throw std::invalid_argument("decode: latent shape mismatch");
    const Tensor g = dec2_.apply(dec1_.apply(z[0], batch), batch);
    return out_.apply(g, batch);
}

std::vector<std::pair<std::string, Tensor>> GcnVae::named_parameters() {
    std::vector<std::pair<std::string, Tensor>> out;
    collect_resblock(out, "enc.res1", enc1_);
    collect_resblock(out, "enc.res2", enc2_);
    collect_conv(out, "mu", mu_head_);
    collect_conv(out, "logvar", logvar_head_);
    collect_resblock(out, "dec.res1", dec1_);
    collect_resblock(out, "dec.res2", dec2_);
    collect_conv(out, "out", out_);
    return out;
}

// ---------------------------------------------------------------------------
// Fully connected ablation

FcVae::FcVae(const TemplateHierarchy& h, const ModelConfig& cfg) {
    cfg_ = cfg;
    cfg_.kind = ModelKind::Fc;
    v_fine_ = h.fine().num_vertices();
    Rng init(cfg_.init_seed);
    const int d = 3 * v_fine_;
    enc1_ = GraphConv(d, cfg_.fc_hidden1, nullptr, init);
    enc2_ = GraphConv(cfg_.fc_hidden1, cfg_.fc_hidden2, nullptr, init);
    mu_head_ = GraphConv(cfg_.fc_hidden2, cfg_.fc_latent, nullptr, init);
    logvar_head_ = GraphConv(cfg_.fc_hidden2, cfg_.fc_latent, nullptr, init);
    dec1_ = GraphConv(cfg_.fc_latent, cfg_.fc_hidden2, nullptr, init);
    dec2_ = GraphConv(cfg_.fc_hidden2, cfg_.fc_hidden1, nullptr, init);
    out_ = GraphConv(cfg_.fc_hidden1, d, nullptr, init);
}

Tensor FcVae::make_input(const std::vector<const Mat*>& cases) const {
    if (cases.empty()) throw std::invalid_argument("make_input: empty batch");
    const int d = 3 * v_fine_;
    Mat x(static_cast<int>(cases.size()), d);
    for (size_t i = 0; i < cases.size(); ++i) {
        if (cases[i]->rows != v_fine_ || cases[i]->cols != 3)
            throw std::invalid_argument("make_input: case shape mismatch with hierarchy");
        std::copy(cases[i]->data.begin(), cases[i]->data.end(),
                  x.data.begin() + i * static_cast<size_t>(d));
    }
    return Tensor::from_mat(x);
}

EncodeResult FcVae::encode(const Tensor& x, int batch, bool sample, Rng* rng) {
    if (x.rows() != batch || x.cols() != 3 * v_fine_)
        throw std::invalid_argument("encode: input shape does not match the flattened mesh");
    EncodeResult r;
    const Tensor f = elu(enc2_.apply(elu(enc1_.apply(x, batch)), batch));
    r.features.push_back(f);
    const Tensor mu = mu_head_.apply(f, batch);
    const Tensor logvar = logvar_head_.apply(f, batch);
    r.latents.push_back({mu, logvar, reparameterize(mu, logvar, sample, rng)});
    return r;
}

Tensor FcVae::decode(const std::vector<Tensor>& z, int batch) {
    if (z.size() != 1) throw std::invalid_argument("decode: expected a single latent level");
    if (z[0].rows() != batch || z[0].cols() != cfg_.fc_latent)
        throw std::invalid_argument("decode: latent shape mismatch");
    const Tensor g = elu(dec2_.apply(elu(dec1_.apply(z[0], batch)), batch));
    return out_.apply(g, batch);
}

Mat FcVae::output_to_case(const Tensor& xhat, int item) const {
    Mat out(v_fine_, 3);
    const auto& v = xhat.values();
    std::copy(v.begin() + static_cast<size_t>(item) * 3 * v_fine_,
              v.begin() + static_cast<size_t>(item + 1) * 3 * v_fine_, out.data.begin());
    return out;
}

std::vector<std::pair<std::string, Tensor>> FcVae::named_parameters() {
    std::vector<std::pair<std::string, Tensor>> out;
    collect_conv(out, "enc1", enc1_);
    collect_conv(out, "enc2", enc2_);
    collect_conv(out, "mu", mu_head_);
    collect_conv(out, "logvar", logvar_head_);
    collect_conv(out, "dec1", dec1_);
    collect_conv(out, "dec2", dec2_);
    collect_conv(out, "out", out_);
    return out;
}

// ---------------------------------------------------------------------------
// Losses

Tensor kl_loss(const std::vector<LevelLatent>& latents, int batch) {
    if (latents.empty()) throw std::invalid_argument("kl_loss: no latent levels");
    Tensor acc;
    for (const auto& l : latents) {
        const Tensor ones = Tensor::from_mat(Mat(l.mu.rows(), l.mu.cols(), 1.0));
        const Tensor per_entry = sub(add(square(l.mu), exp(l.logvar)), add(l.logvar, ones));
        const Tensor level = scalar_mul(sum_all(per_entry), 0.5 / batch);
        acc = acc.defined() ? add(acc, level) : level;
    }
    return acc;
}

Tensor recon_loss(const Tensor& x, const Tensor& xhat) {
    if (x.rows() != xhat.rows() || x.cols() != xhat.cols())
        throw std::invalid_argument("recon_loss: shape mismatch");
    const size_t entries = x.values().size();
    if (entries % 3 != 0) throw std::invalid_argument("recon_loss: entries not divisible by 3");
    const double inv_nm = 1.0 / static_cast<double>(entries / 3);
    return scalar_mul(sum_all(square(sub(x, xhat))), inv_nm);
}

Tensor total_loss(const Tensor& x, const Tensor& xhat, const std::vector<LevelLatent>& latents,
                  int batch, double alpha) {
    return add(kl_loss(latents, batch), scalar_mul(recon_loss(x, xhat), alpha));
}

// ---------------------------------------------------------------------------
// Training

namespace {

std::vector<std::vector<double>> snapshot_params(const std::vector<Tensor>& params) {
    std::vector<std::vector<double>> snap;
    snap.reserve(params.size());
    for (const auto& p : params) snap.push_back(p.values());
    return snap;
}

void restore_params(std::vector<Tensor>& params, const std::vector<std::vector<double>>& snap) {
    for (size_t i = 0; i < params.size(); ++i) params[i].values() = snap[i];
}

}  // namespace

TrainHistory train_model(NeuralShapeModel& model, const Cohort& cohort, const TrainConfig& cfg,
                         Adam* adam_state) {
    const std::vector<int> train_idx = cohort.indices(Split::Train);
    const std::vector<int> val_idx = cohort.indices(Split::Validation);
    if (train_idx.empty()) throw std::runtime_error("train: empty training split");
    if (val_idx.empty()) throw std::runtime_error("train: empty validation split");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

    std::vector<Tensor> params = model.parameters();
    std::optional<Adam> local;
    if (!adam_state) local.emplace(params, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
    Adam& adam = adam_state ? *adam_state : *local;

    const double alpha = model.config().alpha;
    TrainHistory hist;
    std::vector<std::vector<double>> best;
    int since_best = 0;

    auto eval_recon = [&](const std::vector<int>& idx) {
        double sum = 0.0;
        long count = 0;
        for (size_t start = 0; start < idx.size(); start += cfg.batch_size) {
            const int b = static_cast<int>(std::min<size_t>(cfg.batch_size, idx.size() - start));
            std::vector<const Mat*> cases;
            for (int k = 0; k < b; ++k) cases.push_back(&cohort.cases[idx[start + k]]);
            const Tensor x = model.make_input(cases);
            EncodeResult enc = model.encode(x, b, false, nullptr);
            std::vector<Tensor> zs;
            for (auto& l : enc.latents) zs.push_back(l.z);
            const Tensor xhat = model.decode(zs, b);
            sum += recon_loss(x, xhat).scalar_value() * b;
            count += b;
        }
        return sum / static_cast<double>(count);
    };

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, 101, static_cast<uint64_t>(epoch)));
        std::vector<int> order = train_idx;
        shuffle_rng.shuffle(order);
        Rng eps_rng(derive_seed(cfg.seed, 202, static_cast<uint64_t>(epoch)));

        double ep_total = 0.0, ep_kl = 0.0, ep_rec = 0.0;
        long seen = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const int b = static_cast<int>(std::min<size_t>(cfg.batch_size, order.size() - start));
            std::vector<const Mat*> cases;
            for (int k = 0; k < b; ++k) cases.push_back(&cohort.cases[order[start + k]]);
            const Tensor x = model.make_input(cases);
            EncodeResult enc = model.encode(x, b, true, &eps_rng);
            std::vector<Tensor> zs;
            for (auto& l : enc.latents) zs.push_back(l.z);
            const Tensor xhat = model.decode(zs, b);
            const Tensor kl = kl_loss(enc.latents, b);
            const Tensor rec = recon_loss(x, xhat);
            const Tensor loss = add(kl, scalar_mul(rec, alpha));
            const double lv = loss.scalar_value();
            if (!std::isfinite(lv))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch offset " + std::to_string(start));
            backward(loss);
            adam.step();
            ep_total += lv * b;
            ep_kl += kl.scalar_value() * b;
            ep_rec += rec.scalar_value() * b;
            seen += b;
        }
        hist.train_total.push_back(ep_total / seen);
        hist.train_kl.push_back(ep_kl / seen);
        hist.train_recon.push_back(ep_rec / seen);

        const double val = eval_recon(val_idx);
        if (!std::isfinite(val))
            throw std::runtime_error("train: non-finite validation loss at epoch " + std::to_string(epoch));
        hist.val_recon.push_back(val);

        if (hist.best_epoch < 0 || val < hist.best_val) {
            hist.best_val = val;
            hist.best_epoch = epoch;
            best = snapshot_params(params);
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }

    if (!best.empty()) restore_params(params, best);
    return hist;
}

// ---------------------------------------------------------------------------
// Latent-space operations

LatentCode interpolate_latents(const LatentCode& a, const LatentCode& b, double alpha, double beta) {
    if (a.num_levels() != b.num_levels())
        throw std::invalid_argument("interpolate_latents: level count mismatch");
    const int levels = a.num_levels();
    auto lerp = [](const Mat& x, const Mat& y, double c) {
        if (!x.same_shape(y)) throw std::invalid_argument("interpolate_latents: shape mismatch");
        Mat out(x.rows, x.cols);
        for (size_t i = 0; i < x.size(); ++i) out.data[i] = (1.0 - c) * x.data[i] + c * y.data[i];
        return out;
    };
    LatentCode out;
    for (int l = 0; l < levels; ++l) {
        const double c = l == levels - 1 ? beta : alpha;
        out.mu.push_back(lerp(a.mu[l], b.mu[l], c));
        out.logvar.push_back(lerp(a.logvar[l], b.logvar[l], c));
        out.z.push_back(lerp(a.z[l], b.z[l], c));
    }
    return out;
}

Mat latent_scatter(const std::vector<LatentCode>& codes) {
    if (codes.size() < 2) throw std::invalid_argument("latent_scatter: need at least 2 cases");
    const int levels = codes[0].num_levels();
    for (const auto& c : codes)
        if (c.num_levels() != levels) throw std::invalid_argument("latent_scatter: level mismatch");
    Mat out(static_cast<int>(codes.size()), levels);
    for (int l = 0; l < levels; ++l) {
        const int dim = static_cast<int>(codes[0].z[l].size());
        Mat data(static_cast<int>(codes.size()), dim);
        for (size_t i = 0; i < codes.size(); ++i) {
            if (static_cast<int>(codes[i].z[l].size()) != dim)
                throw std::invalid_argument("latent_scatter: latent size mismatch");
            std::copy(codes[i].z[l].data.begin(), codes[i].z[l].data.end(), data.row(static_cast<int>(i)));
        }
        const std::vector<double> scores = first_component_scores(data);
        for (size_t i = 0; i < codes.size(); ++i) out(static_cast<int>(i), l) = scores[i];
    }
    return out;
}

}  // namespace atlas
