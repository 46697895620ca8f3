#pragma once

#include <map>
#include <string>
#include <vector>

#include "modsindy/systems.hpp"

namespace modsindy {

enum class NoiseKind { Gaussian, Uniform, Gamma, Rayleigh, Dweibull };

NoiseKind noise_kind_from_string(const std::string& name);
std::string to_string(NoiseKind kind);

// Synthetic measurement noise at a given noise level. The level fixes the
// per-state standard deviation to (level/100) * std(signal column); Gamma and
// Rayleigh keep their natural non-zero mean at that scale.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::Gaussian;
  double level_percent = 10.0;
  unsigned long seed = 0;
};

// m x n noise matrix; column k is drawn from an independent stream seeded by
// (spec.seed, k). Throws DegenerateSignal for zero-variance columns.
Matrix generate_noise(const NoiseSpec& spec, const TimeSeries& signal);

// Maximum-likelihood fit of one candidate family to a sample.
struct DistributionFit {
  std::string family;
  std::map<std::string, double> params;
  double sse = 0.0;     // squared error of fitted density vs histogram density
  double loglik = 0.0;
  double mean = 0.0;    // implied by the fitted parameters
  double stddev = 0.0;
  bool ok = true;       // false: fit failed, excluded from ranking
  std::string note;
};

// The default seven candidate families.
std::vector<std::string> default_noise_families();

// Fit each candidate family and rank ascending by SSE against the empirical
// histogram density (100 equal-width bins). Failed families sort last.
std::vector<DistributionFit> fit_distribution(const std::vector<double>& samples,
                                              const std::vector<std::string>& candidates =
                                                  default_noise_families());

struct StateNoiseSummary {
  double mean = 0.0;
  double stddev = 0.0;
  double skewness = 0.0;
  std::vector<double> bin_centers;
  std::vector<double> densities;
};

// Per-state moments and fixed-bin histogram, ready for plotting.
std::vector<StateNoiseSummary> summarize_noise(const Matrix& nhat, int bins = 100);

void write_histogram_csv(const StateNoiseSummary& summary, const std::string& path);
std::string distribution_fits_to_json(const std::vector<DistributionFit>& fits);

}  // namespace modsindy
