#pragma once

#include <optional>
#include <string>
#include <vector>

#include "modsindy/library.hpp"
#include "modsindy/regression.hpp"
#include "modsindy/tape.hpp"

namespace modsindy {

// Hyperparameters of the joint denoising / identification fit.
struct FitConfig {
  int q = 3;                    // prediction steps (forward and backward)
  double lambda = 0.1;          // thresholding parameter
  double c = 0.9;               // flow-map weight decay, omega_i = c^(|i|-1)
  int n_loop = 6;               // outer thresholding loops
  double lr = 0.001;            // Adam learning rate
  int max_iter = 5000;          // Adam iterations per loop
  bool soft_start = false;      // initialize nhat from pre-smoothing
  double smoothing_gamma = 1.0; // Tikhonov strength for the soft start
  unsigned long seed = 0;       // reserved for stochastic variants

  void validate() const;
};

struct FitResult {
  CoefficientMatrix xi;
  Matrix nhat;                       // m x n noise estimate
  Matrix denoised;                   // Y - nhat
  std::vector<double> loss_history;  // one entry per Adam iteration
  std::vector<std::string> warnings;

  // Set by fit_discrepancy: identified model minus the known prior g.
  std::optional<CoefficientMatrix> discrepancy;
  // Set by fit_iterative_mean: true when the support still changed between
  // the last two outer iterations.
  bool mean_iteration_unconverged = false;
};

// Derivative-approximation error e_d = ||D(Y-nhat) - Theta(Y-nhat) Xi||_2^2.
double derivative_error(const Matrix& Y, const Matrix& nhat, const CandidateLibrary& lib,
                        const Matrix& xi, double dt);

// Flow-map simulation error e_s: weighted squared mismatch between model
// propagation over +-q steps and the denoised samples.
double simulation_error(const Matrix& Y, const Matrix& nhat, const CandidateLibrary& lib,
                        const Matrix& xi, int q, double c, double dt);

// Total loss e_s + e_d.
double total_loss(const Matrix& Y, const Matrix& nhat, const CandidateLibrary& lib,
                  const Matrix& xi, const FitConfig& config, double dt);

// The recorded computation graph of the joint loss. Built once per fit;
// every optimizer iteration re-evaluates it in place.
class LossGraph {
 public:
  LossGraph(const Matrix& Y, const CandidateLibrary& lib, int q, double c, double dt);

  // Evaluate loss and gradients at (xi, nhat). Entries where active is false
  // contribute value 0 and receive zero gradient.
  const GradientRecord& value_and_grad(const Matrix& xi_values,
                                       const Eigen::Matrix<bool, -1, -1>& active,
                                       const Matrix& nhat);

  double last_es() const;
  double last_ed() const;

  // Locate the first non-finite flow-map state (window j, offset i) after a
  // divergent forward pass; nullopt when the divergence is elsewhere.
  std::optional<std::pair<long, int>> divergence_site() const;

 private:
  Tape tape_;
  Tape::NodeId xi_in_, nhat_in_, loss_, es_, ed_;
  struct ChainStep {
    Tape::NodeId node;
    int offset;
  };
  std::vector<ChainStep> chain_;
  int q_;
  GradientRecord record_;
};

// Algorithm: initialize nhat (zeros or measurement minus pre-smoothing) and
// xi (STLSQ on finite-difference derivatives), then n_loop times run Adam on
// the joint loss, freeze coefficients below lambda, and least-squares re-fit
// the surviving entries on the updated denoised signal.
//
// protected_mask, when given, marks entries that are exempt from thresholding
// (used by discrepancy fitting to keep the known model terms alive).
FitResult fit(const TimeSeries& Y, const CandidateLibrary& lib, const FitConfig& config,
              const CoefficientMatrix* initial_xi = nullptr,
              const Eigen::Matrix<bool, -1, -1>* protected_mask = nullptr);

// Discrepancy learning: the known prior g is injected into the initial
// coefficients and kept exempt from thresholding, so the optimizer corrects
// its parameters while discovering the missing terms. The returned
// FitResult::discrepancy holds the identified model minus g.
FitResult fit_discrepancy(const TimeSeries& Y, const SystemSpec& known_g,
                          const CandidateLibrary& lib, const FitConfig& config);

// Iterative non-zero-mean handling: alternate fit and subtraction of the
// per-state mean of the identified noise, accumulating the removed mean back
// into the final noise estimate.
FitResult fit_iterative_mean(const TimeSeries& Y, const CandidateLibrary& lib,
                             const FitConfig& config, int n_outer);

}  // namespace modsindy
