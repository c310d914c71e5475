#pragma once

#include <string>
#include <vector>

#include "janus/data.hpp"
#include "janus/model.hpp"

namespace janus {

struct PcaResult {
    Tensor direction;  // unit M-vector, largest-magnitude entry positive
    double explained_variance_ratio = 0.0;
};

// Leading eigenvector of the sample covariance via power iteration
// (1000 iterations or update < 1e-12). Throws on zero covariance.
PcaResult pca_first_component(const Tensor& latents);

struct Pca2 {
    Tensor mean;  // [M]
    Tensor pc1, pc2;
    double ratio1 = 0.0, ratio2 = 0.0;
};

// First two components; the second from the deflated covariance.
Pca2 pca_two_components(const Tensor& latents);

struct TraversalPoint {
    int index = 0;  // dataset index
    double pc1 = 0.0;
    std::vector<double> z;
    Tensor image;  // decoded [H,W]
    double true_label = 0.0;
    double predicted = 0.0;  // property units, or argmax class
};

struct TraversalReport {
    std::vector<TraversalPoint> points;  // sorted by pc1, strictly increasing
    double spearman = 0.0;               // PC1 coordinate vs prediction, whole dataset
};

// Encodes the dataset, projects onto PC1, picks the samples nearest n_points
// evenly spaced PC1 quantiles (without repeats), decodes each.
TraversalReport latent_traversal(const JanusModel& m, const Dataset& ds, int n_points = 9);

// Rank correlation with average ranks for ties.
double spearman_rho(const std::vector<double>& a, const std::vector<double>& b);

void write_traversal_csv(const std::string& path, const TraversalReport& rep);

// Per-sample `pc1,pc2,label` rows.
void write_scatter_csv(const std::string& path, const JanusModel& m, const Dataset& ds);

}  // namespace janus
