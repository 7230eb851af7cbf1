// meshatlas — command-line driver for the organ-shape-atlas pipeline:
// synthetic cohorts, template hierarchies, model training, evaluation and
// latent-space interpolation.
#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "atlas/baselines.hpp"
#include "atlas/checkpoint.hpp"
#include "atlas/hierarchy.hpp"
#include "atlas/hvae.hpp"
#include "atlas/metrics.hpp"
#include "atlas/synthdata.hpp"

using namespace atlas;
namespace fs = std::filesystem;

namespace {

fs::path output_root() {
    if (const char* env = std::getenv("MESHATLAS_OUT")) return fs::path(env);
    return fs::path("out");
}

std::string num9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void write_manifest(const fs::path& path, const nlohmann::json& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest " + path.string());
    out << body.dump(2) << '\n';
}

struct HierarchyParams {
    int levels = 3;
    int base_subdivisions = 1;
    double radius_mm = 80.0;
    bool smooth = true;
};

TemplateHierarchy make_hierarchy(const HierarchyParams& p) {
    TriMesh base = icosphere(p.base_subdivisions);
    for (auto& v : base.vertices) v = v * p.radius_mm;
    return build_hierarchy(base, p.levels, p.smooth);
}

std::array<double, 3> parse_ratios(const std::string& text) {
    std::array<double, 3> parts{};
    if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &parts[0], &parts[1], &parts[2]) != 3)
        throw std::runtime_error("bad --ratios '" + text + "', expected a:b:c");
    const double sum = parts[0] + parts[1] + parts[2];
    if (sum <= 0) throw std::runtime_error("bad --ratios: nonpositive sum");
    for (auto& r : parts) r /= sum;
    return parts;
}

// Loaded model handle: either a network checkpoint or a PCA checkpoint.
struct LoadedModel {
    std::unique_ptr<NeuralShapeModel> net;
    std::optional<PcaModel> pca;
    std::string label;

    Mat reconstruct(const Mat& case_norm) const {
        if (pca) return pca_reconstruct(*pca, pca_project(*pca, case_norm));
        return net->reconstruct(case_norm);
    }
};

LoadedModel load_any_model(const fs::path& ckpt, const std::optional<fs::path>& hierarchy_dir) {
    LoadedModel lm;
    if (peek_checkpoint_type(ckpt) == "pca") {
        lm.pca = load_pca_checkpoint(ckpt);
        lm.label = "pca";
        return lm;
    }
    if (!hierarchy_dir)
        throw std::runtime_error("--hierarchy is required for network checkpoints");
    const TemplateHierarchy h = load_hierarchy(*hierarchy_dir);
    lm.net = load_model_checkpoint(ckpt, h);
    lm.label = to_string(lm.net->kind());
    return lm;
}

std::vector<std::array<unsigned char, 3>> error_colors(const std::vector<double>& err) {
    double worst = 0.0;
    for (const double e : err) worst = std::max(worst, e);
    std::vector<std::array<unsigned char, 3>> colors(err.size());
    for (size_t i = 0; i < err.size(); ++i) {
        const double t = worst > 0.0 ? err[i] / worst : 0.0;
        colors[i] = {static_cast<unsigned char>(std::lround(255.0 * t)), 0,
                     static_cast<unsigned char>(std::lround(255.0 * (1.0 - t)))};
    }
    return colors;
}

void write_loss_csv(const fs::path& path, const TrainHistory& hist) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "epoch,train_total,train_kl,train_recon,val_recon\n";
    for (size_t e = 0; e < hist.val_recon.size(); ++e)
        out << e + 1 << ',' << num9(hist.train_total[e]) << ',' << num9(hist.train_kl[e]) << ','
            << num9(hist.train_recon[e]) << ',' << num9(hist.val_recon[e]) << '\n';
}

// ---------------------------------------------------------------------------
// Commands

struct CommonOpts {
    uint64_t seed = 42;
    bool deterministic = true;
};

int cmd_build_hierarchy(const CommonOpts& common, const HierarchyParams& p, fs::path out) {
    const TemplateHierarchy h = make_hierarchy(p);
    save_hierarchy(h, out);
    nlohmann::json manifest;
    manifest["command"] = "build-hierarchy";
    manifest["seed"] = common.seed;
    manifest["levels"] = p.levels;
    manifest["base_subdivisions"] = p.base_subdivisions;
    manifest["radius_mm"] = p.radius_mm;
    manifest["smooth"] = p.smooth;
    nlohmann::json sizes = nlohmann::json::array();
    for (const auto& level : h.levels) sizes.push_back(level.num_vertices());
    manifest["level_vertices"] = sizes;
    write_manifest(out / "manifest.json", manifest);
    std::cout << "hierarchy with " << h.num_levels() << " levels written to " << out << "\n";
    return 0;
}

int cmd_gen_data(const CommonOpts& common, const std::optional<fs::path>& hierarchy_dir,
                 const HierarchyParams& hp, int cases, const DeformConfig& dc,
                 const std::string& ratios, fs::path out) {
    const TemplateHierarchy h = hierarchy_dir ? load_hierarchy(*hierarchy_dir) : make_hierarchy(hp);
    Cohort cohort = generate_cohort(h, cases, common.seed, dc);
    split_cohort(cohort, parse_ratios(ratios), derive_seed(common.seed, 7));
    save_cohort(cohort, out);

    nlohmann::json manifest;
    manifest["command"] = "gen-data";
    manifest["seed"] = common.seed;
    manifest["cases"] = cases;
    manifest["ratios"] = ratios;
    manifest["fine_vertices"] = cohort.vertex_count();
    manifest["hierarchy"] = hierarchy_dir ? hierarchy_dir->string() : std::string("(default, built in-process)");
    write_manifest(out / "manifest.json", manifest);
    std::cout << "cohort of " << cohort.num_cases() << " cases written to " << out << "\n";
    return 0;
}

int cmd_train(const CommonOpts& common, const fs::path& cohort_dir, const fs::path& hierarchy_dir,
              const std::string& model_name, ModelConfig mcfg, TrainConfig tcfg, int pca_k,
              fs::path out) {
    const Cohort cohort = load_cohort(cohort_dir);
    mcfg.init_seed = derive_seed(common.seed, 1);
    tcfg.seed = derive_seed(common.seed, 2);

    nlohmann::json manifest;
    manifest["command"] = "train";
    manifest["model"] = model_name;
    manifest["seed"] = common.seed;
    manifest["cohort"] = cohort_dir.string();

    if (model_name == "pca") {
        const PcaModel model = pca_fit(cohort, pca_k);
        save_pca_checkpoint(out, model, common.seed);
        manifest["k"] = pca_k;
        manifest["leading_eigenvalue"] = model.eigenvalues.empty() ? 0.0 : model.eigenvalues[0];
        write_manifest(fs::path(out.string() + ".manifest.json"), manifest);
        std::cout << "pca(" << pca_k << ") checkpoint written to " << out << "\n";
        return 0;
    }

    const TemplateHierarchy h = load_hierarchy(hierarchy_dir);
    if (h.fine().num_vertices() != cohort.vertex_count())
        throw std::runtime_error("cohort/hierarchy mismatch: " + std::to_string(cohort.vertex_count()) +
                                 " cohort vertices vs " + std::to_string(h.fine().num_vertices()));
    const ModelKind kind = model_kind_from_string(model_name);
    auto model = build_ablation(kind, h, mcfg);
    Adam adam(model->parameters(), AdamConfig{tcfg.lr, 0.9, 0.999, 1e-8});
    const TrainHistory hist = train_model(*model, cohort, tcfg, &adam);

    TrainMeta meta;
    meta.seed = common.seed;
    meta.epoch = hist.epochs_run();
    meta.best_val = hist.best_val;
    meta.lr = tcfg.lr;
    save_model_checkpoint(out, *model, h, meta, &adam);
    write_loss_csv(fs::path(out.string() + ".loss.csv"), hist);

    manifest["hierarchy"] = hierarchy_dir.string();
    manifest["epochs_run"] = hist.epochs_run();
    manifest["best_epoch"] = hist.best_epoch + 1;
    manifest["best_val_recon"] = hist.best_val;
    manifest["batch_size"] = tcfg.batch_size;
    manifest["max_epochs"] = tcfg.max_epochs;
    manifest["patience"] = tcfg.patience;
    manifest["lr"] = tcfg.lr;
    manifest["alpha"] = mcfg.alpha;
    manifest["hidden"] = mcfg.hidden;
    manifest["latent"] = mcfg.latent;
    write_manifest(fs::path(out.string() + ".manifest.json"), manifest);
    std::cout << "trained " << model_name << " for " << hist.epochs_run() << " epochs, best val "
              << num9(hist.best_val) << ", checkpoint " << out << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& common, const fs::path& ckpt, const fs::path& cohort_dir,
             const std::optional<fs::path>& hierarchy_dir, const std::string& split_name,
             fs::path out) {
    const LoadedModel model = load_any_model(ckpt, hierarchy_dir);
    const Cohort cohort = load_cohort(cohort_dir);
    if (model.net && model.net->fine_vertex_count() != cohort.vertex_count())
        throw std::runtime_error("checkpoint/cohort vertex-count mismatch");

    std::vector<Split> splits;
    if (split_name == "all") splits = {Split::Train, Split::Validation, Split::Test};
    else splits = {split_from_string(split_name)};

    std::vector<EvalReport> reports;
    for (const Split split : splits) {
        const std::vector<int> idx = cohort.indices(split);
        if (idx.empty()) continue;
        std::vector<std::string> ids;
        std::vector<TriMesh> pred, ref;
        for (const int i : idx) {
            ids.push_back(cohort.ids[i]);
            pred.push_back(denormalize_vertices(model.reconstruct(cohort.cases[i]), cohort.faces,
                                                cohort.unit_scale));
            ref.push_back(cohort.mesh_mm(i));
        }
        EvalReport rep;
        rep.model = model.label;
        rep.split = to_string(split);
        rep.cases.resize(ids.size());
        auto eval_case = [&](size_t i) {
            const SurfaceDistance sd = surface_distance(pred[i], ref[i]);
            rep.cases[i] = {ids[i], mae(pred[i], ref[i]), sd.mean, sd.hausdorff};
        };
        if (common.deterministic) {
            for (size_t i = 0; i < ids.size(); ++i) eval_case(i);
        } else {
            // per-case results are independent; order of completion is irrelevant
            std::vector<std::future<void>> jobs;
            for (size_t i = 0; i < ids.size(); ++i)
                jobs.push_back(std::async(std::launch::async, eval_case, i));
            for (auto& j : jobs) j.get();
        }
        reports.push_back(std::move(rep));
    }
    if (reports.empty()) throw std::runtime_error("eval: no cases in split '" + split_name + "'");

    write_eval_csv(out, reports);
    fs::path agg = out;
    agg.replace_extension();
    agg += "_aggregate.csv";
    write_aggregate_csv(agg, reports);
    nlohmann::json manifest;
    manifest["command"] = "eval";
    manifest["seed"] = common.seed;
    manifest["checkpoint"] = ckpt.string();
    manifest["cohort"] = cohort_dir.string();
    manifest["split"] = split_name;
    manifest["model"] = model.label;
    write_manifest(fs::path(out.string() + ".manifest.json"), manifest);
    for (const auto& rep : reports)
        std::cout << rep.model << " " << rep.split << ": mae " << num9(rep.mean_mae()) << " mm, md "
                  << num9(rep.mean_md()) << " mm, hd " << num9(rep.mean_hd()) << " mm over "
                  << rep.cases.size() << " cases\n";
    return 0;
}

int cmd_reconstruct(const CommonOpts& common, const fs::path& ckpt, const fs::path& cohort_dir,
                    const std::optional<fs::path>& hierarchy_dir, std::vector<std::string> case_ids,
                    bool all_cases, fs::path out) {
    const LoadedModel model = load_any_model(ckpt, hierarchy_dir);
    const Cohort cohort = load_cohort(cohort_dir);
    if (all_cases) case_ids = cohort.ids;
    if (case_ids.empty()) throw std::runtime_error("reconstruct: no cases selected");
    fs::create_directories(out);

    for (const auto& id : case_ids) {
        const int i = cohort.index_of(id);
        const Mat rec = model.reconstruct(cohort.cases[i]);
        const TriMesh pred = denormalize_vertices(rec, cohort.faces, cohort.unit_scale);
        const TriMesh ref = cohort.mesh_mm(i);
        save_mesh(pred, out / (id + "_pred.off"), MeshFormat::Off);
        std::vector<double> err(pred.vertices.size());
        for (size_t v = 0; v < err.size(); ++v) err[v] = (pred.vertices[v] - ref.vertices[v]).norm();
        save_mesh_ply(pred, out / (id + "_pred_error.ply"), error_colors(err));
    }
    nlohmann::json manifest;
    manifest["command"] = "reconstruct";
    manifest["seed"] = common.seed;
    manifest["checkpoint"] = ckpt.string();
    manifest["cases"] = case_ids;
    write_manifest(out / "manifest.json", manifest);
    std::cout << "reconstructed " << case_ids.size() << " cases into " << out << "\n";
    return 0;
}

int cmd_interpolate(const CommonOpts& common, const fs::path& ckpt, const fs::path& cohort_dir,
                    const std::optional<fs::path>& hierarchy_dir, const std::string& id_a,
                    const std::string& id_b, int steps, bool alpha_only, bool beta_only,
                    fs::path out) {
    if (steps < 1) throw std::runtime_error("interpolate: --steps must be >= 1");
    if (alpha_only && beta_only)
        throw std::runtime_error("interpolate: --alpha-only and --beta-only are exclusive");
    const LoadedModel model = load_any_model(ckpt, hierarchy_dir);
    const Cohort cohort = load_cohort(cohort_dir);
    const Mat& ca = cohort.cases[cohort.index_of(id_a)];
    const Mat& cb = cohort.cases[cohort.index_of(id_b)];
    fs::create_directories(out);

    std::optional<LatentCode> code_a, code_b;
    if (model.net) {
        code_a = model.net->encode_case(ca);
        code_b = model.net->encode_case(cb);
    }
    auto shape_at = [&](double alpha, double beta) {
        if (model.pca) return pca_interpolate(*model.pca, ca, cb, alpha, beta);
        return model.net->decode_code(interpolate_latents(*code_a, *code_b, alpha, beta));
    };

    std::vector<double> alphas, betas;
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        if (!beta_only) alphas.push_back(t);
        if (!alpha_only) betas.push_back(t);
    }
    if (alphas.empty()) alphas.push_back(0.0);
    if (betas.empty()) betas.push_back(0.0);

    struct GridShape {
        int ai, bi;
        Mat verts;
    };
    std::vector<GridShape> grid;
    for (size_t ai = 0; ai < alphas.size(); ++ai)
        for (size_t bi = 0; bi < betas.size(); ++bi)
            grid.push_back({static_cast<int>(ai), static_cast<int>(bi),
                            shape_at(alphas[ai], betas[bi])});

    // displacement coloring relative to the centroid-aligned midpoint shape
    Mat mid = shape_at(0.5, 0.5);
    auto centroid = [](const Mat& m) {
        Vec3 c{0, 0, 0};
        for (int i = 0; i < m.rows; ++i) c += {m(i, 0), m(i, 1), m(i, 2)};
        return c * (1.0 / m.rows);
    };
    const Vec3 mid_c = centroid(mid);
    double d_max = 0.0;
    std::vector<Mat> disps;
    for (const auto& g : grid) {
        const Vec3 gc = centroid(g.verts);
        Mat d(g.verts.rows, 3);
        for (int i = 0; i < d.rows; ++i) {
            d(i, 0) = (g.verts(i, 0) - gc.x) - (mid(i, 0) - mid_c.x);
            d(i, 1) = (g.verts(i, 1) - gc.y) - (mid(i, 1) - mid_c.y);
            d(i, 2) = (g.verts(i, 2) - gc.z) - (mid(i, 2) - mid_c.z);
        }
        for (const double v : d.data) d_max = std::max(d_max, std::abs(v));
        disps.push_back(std::move(d));
    }

    for (size_t g = 0; g < grid.size(); ++g) {
        char name[64];
        std::snprintf(name, sizeof(name), "interp_a%d_b%d", grid[g].ai, grid[g].bi);
        const TriMesh mesh = denormalize_vertices(grid[g].verts, cohort.faces, cohort.unit_scale);
        save_mesh(mesh, out / (std::string(name) + ".off"), MeshFormat::Off);
        std::vector<std::array<unsigned char, 3>> colors(mesh.vertices.size());
        for (int i = 0; i < disps[g].rows; ++i) {
            for (int c = 0; c < 3; ++c) {
                const double t =
                    d_max > 0.0 ? std::clamp(0.5 + disps[g](i, c) / (2.0 * d_max), 0.0, 1.0) : 0.5;
                colors[i][c] = static_cast<unsigned char>(std::lround(255.0 * t));
            }
        }
        save_mesh_ply(mesh, out / (std::string(name) + ".ply"), colors);
    }

    nlohmann::json manifest;
    manifest["command"] = "interpolate";
    manifest["checkpoint"] = ckpt.string();
    manifest["case_a"] = id_a;
    manifest["case_b"] = id_b;
    manifest["steps"] = steps;
    manifest["alpha_values"] = alphas;
    manifest["beta_values"] = betas;
    manifest["seed"] = common.seed;
    write_manifest(out / "manifest.json", manifest);
    std::cout << "wrote " << grid.size() << " interpolated shapes to " << out << "\n";
    return 0;
}

int cmd_latent_scatter(const CommonOpts& common, const fs::path& ckpt, const fs::path& cohort_dir,
                       const std::optional<fs::path>& hierarchy_dir, const std::string& split_name,
                       fs::path out) {
    const LoadedModel model = load_any_model(ckpt, hierarchy_dir);
    if (!model.net)
        throw std::runtime_error("latent-scatter: requires a network checkpoint, not PCA");
    const Cohort cohort = load_cohort(cohort_dir);

    std::vector<int> idx;
    if (split_name == "all") {
        idx.resize(cohort.num_cases());
        for (int i = 0; i < cohort.num_cases(); ++i) idx[i] = i;
    } else {
        idx = cohort.indices(split_from_string(split_name));
    }
    if (idx.size() < 2) throw std::runtime_error("latent-scatter: fewer than 2 cases");

    std::vector<LatentCode> codes;
    for (const int i : idx) codes.push_back(model.net->encode_case(cohort.cases[i]));
    const Mat scores = latent_scatter(codes);

    std::ofstream csv(out, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + out.string());
    csv << "case_id,split";
    for (int l = 0; l < scores.cols; ++l) csv << ",score_level_" << l;
    csv << "\n";
    for (size_t r = 0; r < idx.size(); ++r) {
        csv << cohort.ids[idx[r]] << ',' << to_string(cohort.split[idx[r]]);
        for (int l = 0; l < scores.cols; ++l) csv << ',' << num9(scores(static_cast<int>(r), l));
        csv << "\n";
    }
    nlohmann::json manifest;
    manifest["command"] = "latent-scatter";
    manifest["seed"] = common.seed;
    manifest["checkpoint"] = ckpt.string();
    manifest["split"] = split_name;
    write_manifest(fs::path(out.string() + ".manifest.json"), manifest);
    std::cout << "latent scatter of " << idx.size() << " cases written to " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical mesh-VAE organ shape atlas"};
    app.require_subcommand(1);
    // INI/TOML config file with one [section] per subcommand; command-line
    // flags override config values.
    app.set_config("--config", "", "configuration file (key=value with [subcommand] sections)");

    CommonOpts common;
    app.add_option("--seed", common.seed, "master seed for all stochastic steps");
    app.add_flag("--deterministic,!--no-deterministic", common.deterministic,
                 "force single-threaded execution (default on)");

    HierarchyParams hp;
    fs::path out_path;

    auto* hier = app.add_subcommand("build-hierarchy", "build and save a template hierarchy");
    hier->add_option("--levels", hp.levels, "number of levels (coarse to fine)");
    hier->add_option("--base-subdivisions", hp.base_subdivisions, "icosphere splits for the base");
    hier->add_option("--radius-mm", hp.radius_mm, "template radius in mm");
    hier->add_flag("!--no-smooth", hp.smooth, "disable loop smoothing");
    hier->add_option("--out", out_path, "output directory");

    std::optional<fs::path> gen_hierarchy;
    int gen_cases = 124;
    DeformConfig dc;
    std::string ratios = "86:19:19";
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic cohort");
    gen->add_option("--hierarchy", gen_hierarchy, "hierarchy directory (default: built in-process)");
    gen->add_option("--cases", gen_cases, "number of cases");
    gen->add_option("--levels", hp.levels, "levels of the default hierarchy");
    gen->add_option("--base-subdivisions", hp.base_subdivisions, "base icosphere splits");
    gen->add_option("--radius-mm", hp.radius_mm, "template radius in mm");
    gen->add_option("--scale-sigma", dc.scale_sigma, "log-normal scale spread");
    gen->add_option("--max-rotation-deg", dc.max_rotation_deg, "rotation bound per axis");
    gen->add_option("--waves", dc.num_waves, "number of sinusoidal displacement fields");
    gen->add_option("--wave-amplitude", dc.wave_amplitude, "amplitude as bbox-diagonal fraction");
    gen->add_option("--max-translation", dc.max_translation, "translation bound, normalized units");
    gen->add_option("--ratios", ratios, "train:validation:test ratio, e.g. 86:19:19");
    gen->add_option("--out", out_path, "output directory");

    fs::path cohort_dir, hierarchy_dir, ckpt_path;
    std::string model_name = "proposed";
    ModelConfig mcfg;
    TrainConfig tcfg;
    int pca_k = 10;
    auto* train = app.add_subcommand("train", "train a model on a cohort");
    train->add_option("--cohort", cohort_dir, "cohort directory")->required();
    train->add_option("--hierarchy", hierarchy_dir, "hierarchy directory");
    train->add_option("--model", model_name, "proposed|pooling|gcn|fc|pca");
    train->add_option("--epochs", tcfg.max_epochs, "maximum epochs");
    train->add_option("--batch-size", tcfg.batch_size, "minibatch size");
    train->add_option("--patience", tcfg.patience, "early-stopping patience (epochs)");
    train->add_option("--lr", tcfg.lr, "Adam learning rate");
    train->add_option("--alpha", mcfg.alpha, "reconstruction weight");
    train->add_option("--hidden", mcfg.hidden, "ResBlock channels");
    train->add_option("--latent", mcfg.latent, "latent channels per vertex");
    train->add_option("--pca-k", pca_k, "components for --model pca");
    train->add_option("--out", out_path, "checkpoint path");

    std::string split_name = "test";
    std::optional<fs::path> opt_hierarchy;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a cohort split");
    eval->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
    eval->add_option("--cohort", cohort_dir, "cohort directory")->required();
    eval->add_option("--hierarchy", opt_hierarchy, "hierarchy directory (network models)");
    eval->add_option("--split", split_name, "train|validation|test|all");
    eval->add_option("--out", out_path, "per-case CSV path");

    std::vector<std::string> rec_cases;
    bool rec_all = false;
    auto* rec = app.add_subcommand("reconstruct", "write predicted meshes and error-colored PLYs");
    rec->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
    rec->add_option("--cohort", cohort_dir, "cohort directory")->required();
    rec->add_option("--hierarchy", opt_hierarchy, "hierarchy directory (network models)");
    rec->add_option("--cases", rec_cases, "case ids");
    rec->add_flag("--all", rec_all, "reconstruct every case");
    rec->add_option("--out", out_path, "output directory");

    std::string case_a, case_b;
    int steps = 4;
    bool alpha_only = false, beta_only = false;
    auto* interp = app.add_subcommand("interpolate", "latent interpolation between two cases");
    interp->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
    interp->add_option("--cohort", cohort_dir, "cohort directory")->required();
    interp->add_option("--hierarchy", opt_hierarchy, "hierarchy directory (network models)");
    interp->add_option("--case-a", case_a, "first case id")->required();
    interp->add_option("--case-b", case_b, "second case id")->required();
    interp->add_option("--steps", steps, "grid steps per axis");
    interp->add_flag("--alpha-only", alpha_only, "sweep fine latents only (coarse fixed)");
    interp->add_flag("--beta-only", beta_only, "sweep the coarse latent only (fine fixed)");
    interp->add_option("--out", out_path, "output directory");

    std::string scatter_split = "all";
    auto* scatter = app.add_subcommand("latent-scatter", "1-D latent projections per level");
    scatter->add_option("--checkpoint", ckpt_path, "checkpoint path")->required();
    scatter->add_option("--cohort", cohort_dir, "cohort directory")->required();
    scatter->add_option("--hierarchy", opt_hierarchy, "hierarchy directory");
    scatter->add_option("--split", scatter_split, "train|validation|test|all");
    scatter->add_option("--out", out_path, "CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (hier->parsed()) {
            if (out_path.empty()) out_path = output_root() / "hierarchy";
            return cmd_build_hierarchy(common, hp, out_path);
        }
        if (gen->parsed()) {
            if (out_path.empty()) out_path = output_root() / "cohort";
            return cmd_gen_data(common, gen_hierarchy, hp, gen_cases, dc, ratios, out_path);
        }
        if (train->parsed()) {
            if (out_path.empty()) out_path = output_root() / (model_name + ".ckpt");
            if (model_name != "pca" && hierarchy_dir.empty())
                throw std::runtime_error("train: --hierarchy is required for network models");
            return cmd_train(common, cohort_dir, hierarchy_dir, model_name, mcfg, tcfg, pca_k,
                             out_path);
        }
        if (eval->parsed()) {
            if (out_path.empty()) out_path = output_root() / "eval.csv";
            return cmd_eval(common, ckpt_path, cohort_dir, opt_hierarchy, split_name, out_path);
        }
        if (rec->parsed()) {
            if (out_path.empty()) out_path = output_root() / "reconstruct";
            return cmd_reconstruct(common, ckpt_path, cohort_dir, opt_hierarchy, rec_cases, rec_all,
                                   out_path);
        }
        if (interp->parsed()) {
            if (out_path.empty()) out_path = output_root() / "interpolate";
            return cmd_interpolate(common, ckpt_path, cohort_dir, opt_hierarchy, case_a, case_b,
                                   steps, alpha_only, beta_only, out_path);
        }
        if (scatter->parsed()) {
            if (out_path.empty()) out_path = output_root() / "latent_scatter.csv";
            return cmd_latent_scatter(common, ckpt_path, cohort_dir, opt_hierarchy, scatter_split,
                                      out_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
