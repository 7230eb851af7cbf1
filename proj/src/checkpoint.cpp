#include "atlas/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace atlas {

namespace {

constexpr char kMagic[4] = {'M', 'A', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_raw(std::ofstream& out, const void* data, size_t bytes) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

nlohmann::json model_config_json(const ModelConfig& cfg) {
    return {{"hidden", cfg.hidden},         {"latent", cfg.latent},
            {"fc_hidden1", cfg.fc_hidden1}, {"fc_hidden2", cfg.fc_hidden2},
            {"fc_latent", cfg.fc_latent},   {"alpha", cfg.alpha},
            {"init_seed", cfg.init_seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j, ModelKind kind) {
    ModelConfig cfg;
    cfg.kind = kind;
    cfg.hidden = j.at("hidden").get<int>();
    cfg.latent = j.at("latent").get<int>();
    cfg.fc_hidden1 = j.at("fc_hidden1").get<int>();
    cfg.fc_hidden2 = j.at("fc_hidden2").get<int>();
    cfg.fc_latent = j.at("fc_latent").get<int>();
    cfg.alpha = j.at("alpha").get<double>();
    cfg.init_seed = j.at("init_seed").get<uint64_t>();
    return cfg;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    nlohmann::json header;
    header["format_version"] = kVersion;
    header["model_type"] = ckpt.model_type;
    header["meta"] = ckpt.meta;
    nlohmann::json table = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& b : ckpt.buffers) {
        table.push_back({{"name", b.name},
                         {"shape", b.shape},
                         {"offset", offset},
                         {"count", b.data.size()}});
        offset += b.data.size();
    }
    header["buffers"] = table;
    const std::string header_str = header.dump();

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        write_raw(out, kMagic, 4);
        write_raw(out, &kVersion, sizeof(kVersion));
        const uint64_t len = header_str.size();
        write_raw(out, &len, sizeof(len));
        write_raw(out, header_str.data(), header_str.size());
        for (const auto& b : ckpt.buffers)
            write_raw(out, b.data.data(), b.data.size() * sizeof(double));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error(path.string() + ": not a checkpoint file");
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kVersion)
        throw std::runtime_error(path.string() + ": unsupported checkpoint version " +
                                 std::to_string(version));
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header_str(len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error(path.string() + ": truncated header");
    const nlohmann::json header = nlohmann::json::parse(header_str);

    Checkpoint ckpt;
    ckpt.model_type = header.at("model_type").get<std::string>();
    ckpt.meta = header.at("meta");
    for (const auto& e : header.at("buffers")) {
        NamedBuffer b;
        b.name = e.at("name").get<std::string>();
        b.shape = e.at("shape").get<std::vector<int>>();
        b.data.resize(e.at("count").get<size_t>());
        in.read(reinterpret_cast<char*>(b.data.data()),
                static_cast<std::streamsize>(b.data.size() * sizeof(double)));
        if (!in) throw std::runtime_error(path.string() + ": truncated buffer " + b.name);
        ckpt.buffers.push_back(std::move(b));
    }
    return ckpt;
}

std::vector<int> hierarchy_fingerprint(const TemplateHierarchy& h) {
    std::vector<int> fp;
    for (const auto& level : h.levels) fp.push_back(level.num_vertices());
    fp.push_back(h.fine().num_faces());
    return fp;
}

void save_model_checkpoint(const std::filesystem::path& path, NeuralShapeModel& model,
                           const TemplateHierarchy& h, const TrainMeta& meta, const Adam* adam) {
    Checkpoint ckpt;
    ckpt.model_type = to_string(model.kind());
    ckpt.meta["config"] = model_config_json(model.config());
    ckpt.meta["fingerprint"] = hierarchy_fingerprint(h);
    ckpt.meta["seed"] = meta.seed;
    ckpt.meta["epoch"] = meta.epoch;
    ckpt.meta["best_val"] = meta.best_val;
    ckpt.meta["adam_step"] = adam ? adam->step_count() : meta.adam_step;
    ckpt.meta["lr"] = meta.lr;
    ckpt.meta["has_adam"] = adam != nullptr;

    auto named = model.named_parameters();
    for (auto& [name, t] : named) {
        NamedBuffer b;
        b.name = name;
        b.shape = {t.rows(), t.cols()};
        b.data = t.values();
        ckpt.buffers.push_back(std::move(b));
    }
    if (adam) {
        const auto& m1 = adam->moment1();
        const auto& m2 = adam->moment2();
        if (m1.size() != named.size())
            throw std::logic_error("save_model_checkpoint: Adam state does not match parameters");
        for (size_t i = 0; i < named.size(); ++i) {
            ckpt.buffers.push_back({named[i].first + ".adam_m",
                                    {named[i].second.rows(), named[i].second.cols()}, m1[i]});
            ckpt.buffers.push_back({named[i].first + ".adam_v",
                                    {named[i].second.rows(), named[i].second.cols()}, m2[i]});
        }
    }
    save_checkpoint(path, ckpt);
}

std::unique_ptr<NeuralShapeModel> load_model_checkpoint(const std::filesystem::path& path,
                                                        const TemplateHierarchy& h,
                                                        TrainMeta* meta) {
    const Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.model_type == "pca")
        throw std::runtime_error(path.string() + ": PCA checkpoint, expected a network model");
    const ModelKind kind = model_kind_from_string(ckpt.model_type);
    const ModelConfig cfg = model_config_from_json(ckpt.meta.at("config"), kind);

    const auto fp = ckpt.meta.at("fingerprint").get<std::vector<int>>();
    if (fp != hierarchy_fingerprint(h))
        throw std::runtime_error(path.string() +
                                 ": checkpoint/architecture mismatch (hierarchy fingerprint differs)");

    auto model = build_ablation(kind, h, cfg);
    auto named = model->named_parameters();

    for (auto& [name, t] : named) {
        const NamedBuffer* found = nullptr;
        for (const auto& b : ckpt.buffers)
            if (b.name == name) {
                found = &b;
                break;
            }
        if (!found) throw std::runtime_error(path.string() + ": missing parameter " + name);
        if (found->shape != std::vector<int>{t.rows(), t.cols()} ||
            found->data.size() != t.values().size())
            throw std::runtime_error(path.string() + ": shape mismatch for parameter " + name);
        t.values() = found->data;
    }
    if (meta) {
        meta->seed = ckpt.meta.at("seed").get<uint64_t>();
        meta->epoch = ckpt.meta.at("epoch").get<int>();
        meta->best_val = ckpt.meta.at("best_val").get<double>();
        meta->adam_step = ckpt.meta.at("adam_step").get<long>();
        meta->lr = ckpt.meta.at("lr").get<double>();
    }
    return model;
}

void save_pca_checkpoint(const std::filesystem::path& path, const PcaModel& model, uint64_t seed) {
    Checkpoint ckpt;
    ckpt.model_type = "pca";
    ckpt.meta["seed"] = seed;
    ckpt.meta["dim"] = model.dim();
    ckpt.meta["k"] = model.k();
    ckpt.buffers.push_back({"mean", {model.dim(), 1}, model.mean});
    ckpt.buffers.push_back({"components", {model.components.rows, model.components.cols},
                            model.components.data});
    ckpt.buffers.push_back({"eigenvalues", {model.k(), 1}, model.eigenvalues});
    save_checkpoint(path, ckpt);
}

PcaModel load_pca_checkpoint(const std::filesystem::path& path) {
    const Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.model_type != "pca")
        throw std::runtime_error(path.string() + ": expected a PCA checkpoint, found " +
                                 ckpt.model_type);
    PcaModel model;
    for (const auto& b : ckpt.buffers) {
        if (b.name == "mean") {
            model.mean = b.data;
        } else if (b.name == "components") {
            model.components = Mat(b.shape.at(0), b.shape.at(1));
            model.components.data = b.data;
        } else if (b.name == "eigenvalues") {
            model.eigenvalues = b.data;
        }
    }
    if (model.mean.empty() || model.components.data.empty())
        throw std::runtime_error(path.string() + ": incomplete PCA checkpoint");
    return model;
}

std::string peek_checkpoint_type(const std::filesystem::path& path) {
    return load_checkpoint(path).model_type;
}

}  // namespace atlas
