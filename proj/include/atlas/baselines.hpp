// baselines.hpp — PCA statistical shape model and construction of the
// ablation model family compared against the hierarchical model.
#pragma once

#include <memory>
#include <vector>

#include "atlas/hvae.hpp"
#include "atlas/linalg.hpp"
#include "atlas/synthdata.hpp"

namespace atlas {

// Linear shape model: mean vector plus orthonormal variation modes over the
// flattened 3v coordinate vector.
struct PcaModel {
    std::vector<double> mean;        // 3v
    Mat components;                  // 3v x k, orthonormal columns
    std::vector<double> eigenvalues; // k, non-increasing

    int k() const { return components.cols; }
    int dim() const { return components.rows; }
};

// Mean-centered eigen-decomposition of the training-split sample covariance,
// via the M x M Gram matrix (M = number of training cases). k must satisfy
// k <= min(3v, M-1).
PcaModel pca_fit(const Cohort& cohort, int k);

// Coefficients of x in the component basis: G^T (x - mean).
std::vector<double> pca_project(const PcaModel& model, const Mat& case_norm);

// mean + G c, reshaped to v x 3.
Mat pca_reconstruct(const PcaModel& model, const std::vector<double>& coeffs);

// Interpolation in coefficient space: the leading mode moves with beta, modes
// 2..10 with alpha, remaining coefficients stay at A's values. Requires
// k >= 10.
Mat pca_interpolate(const PcaModel& model, const Mat& a, const Mat& b, double alpha, double beta);

// 1-component PCA scores of the rows of `data` (used for latent scatter
// plots); deterministic sign convention. Returns one score per row.
std::vector<double> first_component_scores(const Mat& data);

std::unique_ptr<NeuralShapeModel> build_ablation(ModelKind kind, const TemplateHierarchy& h,
                                                 const ModelConfig& cfg);

}  // namespace atlas
