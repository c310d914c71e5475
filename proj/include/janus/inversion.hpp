#pragma once

#include <string>
#include <vector>

#include "janus/data.hpp"
#include "janus/model.hpp"

namespace janus {

struct InversionWeights {
    double align = 0.01;
    double cycle = 0.1;
    double deep = 0.05;
    void validate() const;
};

struct InversionConfig {
    double target = 0.0;  // property value (regression) or class index (classification)
    int swarm_size = 10;
    int steps = 2000;
    double learning_rate = 0.01;
    InversionWeights weights;
    std::uint64_t seed = 0;
    int conditional_prior = -1;  // class index; requires a reference dataset
    void validate() const;
};

struct Candidate {
    int member = 0;
    std::vector<double> z_final;
    Tensor image;                        // [H,W], decoded once at the end
    double predicted = 0.0;              // property units, or argmax class
    double confidence = 0.0;             // classification: softmax prob of the target class
    std::vector<double> objective_trace; // length == steps
    double final_objective = 0.0;
    double oracle_property = 0.0;
    bool has_oracle = false;
    bool oracle_failed = false;
};

// Sum of squared standardized coordinates: ||(z - mu) / sigma||^2.
double align_loss(const std::vector<double>& z, const Tensor& mu, const Tensor& sigma,
                  std::vector<double>* grad = nullptr);

// J(z) = task + align + cycle + deep with the given weights. `target` is the
// scaled property value (regression) or the class index (classification).
// Throws InversionError if J is non-finite.
double inversion_objective(const std::vector<double>& z, double target, const JanusModel& m,
                           const InversionWeights& w, const Tensor& mu, const Tensor& sigma,
                           std::vector<double>* grad = nullptr);

// Swarm initialization z0 ~ N(mu, sigma) clamped into the spline domain.
// With conditional_prior set, (mu, sigma) are recomputed from the reference
// dataset's images of that class (at least 8 required).
Tensor init_latents(const InversionConfig& cfg, const JanusModel& m,
                    const Dataset* reference = nullptr);

// Per-member Adam descent on J; returns candidates sorted by distance of the
// head-measured prediction from the target (ties by lower final J).
std::vector<Candidate> invert(const JanusModel& m, const InversionConfig& cfg,
                              const Dataset* reference = nullptr);

// Best candidate per target, inverted with a shared seed.
std::vector<Candidate> property_sweep(const std::vector<double>& targets, const JanusModel& m,
                                      const InversionConfig& cfg,
                                      const Dataset* reference = nullptr);

// Binarizes the candidate image at 0.5 and re-solves the transport problem.
Candidate revalidate(Candidate c, double k1, double k2, double tol = 1e-8);

void write_candidates_csv(const std::string& path, const std::vector<Candidate>& cands,
                          double target);

}  // namespace janus
