#pragma once

#include "qsp/circuits.hpp"
#include "qsp/rng.hpp"

#include <json.hpp>

#include <vector>

namespace qsp {

// Angle law at an internal split node: left/right child subtrees carry
// n_left and n_right Gaussian leaves.
struct AngleDistribution {
    int left_leaves = 1;
    int right_leaves = 1;
};

// Gamma(shape a, unit scale).
double sample_gamma(double a, RngStream& rng);

// Beta(a, b) via the gamma ratio Y1 / (Y1 + Y2).
double sample_beta(double a, double b, RngStream& rng);

// Density of the split angle t in [0, pi/2]:
//   (2 / B(a, b)) * sin(t)^(2a-1) * cos(t)^(2b-1),
// with a = n_right / 2 and b = n_left / 2.
double angle_density(const AngleDistribution& dist, double t);

// Draws all internal node angles independently (Beta law per node) plus iid
// +-1 leaf signs. Reconstructing the leaves gives a Haar-uniform unit vector,
// equal in law to a normalized iid Gaussian vector.
AngleTree sample_angle_tree(int leaf_count, RngStream& rng);

struct IndependencePair {
    int node_i = 0;
    int node_j = 0;
    double dcor = 0.0;
};

struct IndependenceReport {
    int leaf_count = 0;
    std::size_t samples = 0;
    std::vector<IndependencePair> pairs;
    double max_dcor = 0.0;
    double threshold = 0.02;

    bool all_below_threshold() const { return max_dcor < threshold; }
    nlohmann::json to_json() const;
};

// Pairwise distance correlation across all node-angle pairs. Requires at
// least 10^4 sampled trees.
IndependenceReport independence_check(const std::vector<AngleTree>& trees, int threads = 1);

// Uniform discretization of [0, pi/2] into 2^precision_bits cells: returns
// the midpoint angle of the cell containing t.
double quantize_angle(double t, int precision_bits);

} // namespace qsp
