#include "atlas/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace atlas {

namespace {

// Flatten a v x 3 case to the 3v coordinate vector (x0 y0 z0 x1 ...).
Eigen::VectorXd flatten(const Mat& m) {
    Eigen::VectorXd out(m.size());
    for (size_t i = 0; i < m.size(); ++i) out[static_cast<long>(i)] = m.data[i];
    return out;
}

// Deterministic orthonormal fill-in for (near-)zero-variance directions.
Eigen::VectorXd fallback_direction(const Eigen::MatrixXd& existing, int cols_used, long dim) {
    for (long j = 0; j < dim; ++j) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
        g[j] = 1.0;
        for (int i = 0; i < cols_used; ++i) g -= existing.col(i).dot(g) * existing.col(i);
        const double n = g.norm();
        if (n > 0.5) return g / n;
    }
    throw std::logic_error("pca_fit: could not build an orthonormal fill-in direction");
}

}  // namespace

PcaModel pca_fit(const Cohort& cohort, int k) {
    const std::vector<int> train = cohort.indices(Split::Train);
    if (train.empty()) throw std::runtime_error("pca_fit: empty training split");
    const int m = static_cast<int>(train.size());
    const long dim = 3L * cohort.vertex_count();
    if (k < 1 || k > std::min<long>(dim, m - 1))
        throw std::invalid_argument("pca_fit: k must be in [1, min(3v, M-1)]");

    Eigen::MatrixXd x(m, dim);
    for (int i = 0; i < m; ++i) x.row(i) = flatten(cohort.cases[train[i]]).transpose();
    const Eigen::VectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();

    // Gram route: eigenvectors of the small M x M matrix lift to the
    // covariance eigenvectors via C^T u / sqrt(lambda).
    const Eigen::MatrixXd gram = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) throw std::runtime_error("pca_fit: eigendecomposition failed");

    PcaModel model;
    model.mean.assign(mean.data(), mean.data() + dim);
    model.components = Mat(static_cast<int>(dim), k);
    model.eigenvalues.resize(k);

    Eigen::MatrixXd comps(dim, k);
    const double lam_scale = std::max(es.eigenvalues().maxCoeff(), 0.0);
    for (int j = 0; j < k; ++j) {
        const int idx = m - 1 - j;  // eigenvalues come back ascending
        const double lam = std::max(es.eigenvalues()[idx], 0.0);
        Eigen::VectorXd g = centered.transpose() * es.eigenvectors().col(idx);
        const double n = g.norm();
        if (n * n > std::max(1e-18, 1e-14 * lam_scale)) {
            g /= n;
        } else {
            g = fallback_direction(comps, j, dim);
        }
        // re-orthonormalize against earlier components
        for (int i = 0; i < j; ++i) g -= comps.col(i).dot(g) * comps.col(i);
        const double n2 = g.norm();
        g = n2 > 0.5 ? Eigen::VectorXd(g / n2) : fallback_direction(comps, j, dim);
        comps.col(j) = g;
        model.eigenvalues[j] = m > 1 ? lam / (m - 1) : 0.0;
    }
    for (long i = 0; i < dim; ++i)
        for (int j = 0; j < k; ++j) model.components(static_cast<int>(i), j) = comps(i, j);
    return model;
}

std::vector<double> pca_project(const PcaModel& model, const Mat& case_norm) {
    if (static_cast<long>(case_norm.size()) != model.dim())
        throw std::invalid_argument("pca_project: shape mismatch");
    std::vector<double> coeffs(model.k(), 0.0);
    for (int j = 0; j < model.k(); ++j) {
        double c = 0.0;
        for (int i = 0; i < model.dim(); ++i)
            c += model.components(i, j) * (case_norm.data[i] - model.mean[i]);
        coeffs[j] = c;
    }
    return coeffs;
}

Mat pca_reconstruct(const PcaModel& model, const std::vector<double>& coeffs) {
    if (static_cast<int>(coeffs.size()) != model.k())
        throw std::invalid_argument("pca_reconstruct: coefficient count mismatch");
    if (model.dim() % 3 != 0) throw std::logic_error("pca_reconstruct: dimension not divisible by 3");
    Mat out(model.dim() / 3, 3);
    for (int i = 0; i < model.dim(); ++i) {
        double v = model.mean[i];
        for (int j = 0; j < model.k(); ++j) v += model.components(i, j) * coeffs[j];
        out.data[i] = v;
    }
    return out;
}

Mat pca_interpolate(const PcaModel& model, const Mat& a, const Mat& b, double alpha, double beta) {
    if (model.k() < 10)
        throw std::invalid_argument("pca_interpolate: requires at least 10 components");
    const std::vector<double> ca = pca_project(model, a);
    const std::vector<double> cb = pca_project(model, b);
    std::vector<double> c = ca;
    c[0] = (1.0 - beta) * ca[0] + beta * cb[0];
    for (int j = 1; j < 10; ++j) c[j] = (1.0 - alpha) * ca[j] + alpha * cb[j];
    return pca_reconstruct(model, c);
}

std::vector<double> first_component_scores(const Mat& data) {
    if (data.rows < 2) throw std::invalid_argument("first_component_scores: need at least 2 rows");
    const int n = data.rows;
    Eigen::MatrixXd x(n, data.cols);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < data.cols; ++j) x(i, j) = data(i, j);
    const Eigen::VectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
    const Eigen::MatrixXd gram = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("first_component_scores: eigendecomposition failed");
    const double lam = std::max(es.eigenvalues()[n - 1], 0.0);
    Eigen::VectorXd u = es.eigenvectors().col(n - 1);
    // deterministic sign: largest-magnitude entry positive
    int arg = 0;
    for (int i = 1; i < n; ++i)
        if (std::abs(u[i]) > std::abs(u[arg])) arg = i;
    if (u[arg] < 0.0) u = -u;
    // scores are the projections of the centered rows: sqrt(lambda) * u
    std::vector<double> scores(n);
    const double s = std::sqrt(lam);
    for (int i = 0; i < n; ++i) scores[i] = s * u[i];
    return scores;
}

std::unique_ptr<NeuralShapeModel> build_ablation(ModelKind kind, const TemplateHierarchy& h,
                                                 const ModelConfig& cfg) {
    switch (kind) {
        case ModelKind::Proposed: return std::make_unique<HVae>(h, cfg);
        case ModelKind::Pooling: return std::make_unique<PoolingVae>(h, cfg);
        case ModelKind::Gcn: return std::make_unique<GcnVae>(h, cfg);
        case ModelKind::Fc: return std::make_unique<FcVae>(h, cfg);
    }
    throw std::invalid_argument("build_ablation: unknown kind");
}

}  // namespace atlas
