#include "modsindy/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

namespace modsindy {

namespace {

constexpr double kDweibullShape = 2.07;

// Deterministic samplers built on mt19937_64 so generated data is identical
// across standard library implementations.
class SampleStream {
 public:
  SampleStream(unsigned long seed, unsigned long stream) {
    std::seed_seq seq{static_cast<unsigned int>(seed), static_cast<unsigned int>(seed >> 32),
                      static_cast<unsigned int>(stream), 0x9e3779b9u};
    rng_.seed(seq);
  }

  double uniform01() {  // [0, 1)
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  }
  double uniform_open() {  // (0, 1)
    double u;
    do {
      u = uniform01();
    } while (u == 0.0);
    return u;
  }
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }
  double exponential() { return -std::log(uniform_open()); }
  double rayleigh() { return std::sqrt(2.0 * exponential()); }
  double weibull(double c) { return std::pow(exponential(), 1.0 / c); }
  bool coin() { return (rng_() & 1u) != 0; }

 private:
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

double population_std(const Eigen::VectorXd& col) {
  const double mu = col.mean();
  return std::sqrt((col.array() - mu).square().mean());
}

double digamma(double x) {
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x, inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
  return result;
}

double trigamma(double x) {
  double result = 0.0;
  while (x < 6.0) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x, inv2 = inv * inv;
  result += inv * (1.0 + 0.5 * inv + inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 / 42.0)));
  return result;
}

struct Stats {
  double mean, sd, min, max;
};

Stats basic_stats(const std::vector<double>& x) {
  Stats s{0, 0, x[0], x[0]};
  for (double v : x) {
    s.mean += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean /= static_cast<double>(x.size());
  for (double v : x) s.sd += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(s.sd / static_cast<double>(x.size()));
  return s;
}

}  // namespace

NoiseKind noise_kind_from_string(const std::string& name) {
  if (name == "gaussian" || name == "normal") return NoiseKind::Gaussian;
  if (name == "uniform") return NoiseKind::Uniform;
  if (name == "gamma") return NoiseKind::Gamma;
  if (name == "rayleigh") return NoiseKind::Rayleigh;
  if (name == "dweibull") return NoiseKind::Dweibull;
  throw ConfigError("unknown noise kind: " + name, "noise.kind");
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::Uniform: return "uniform";
    case NoiseKind::Gamma: return "gamma";
    case NoiseKind::Rayleigh: return "rayleigh";
    case NoiseKind::Dweibull: return "dweibull";
  }
  return "?";
}

Matrix generate_noise(const NoiseSpec& spec, const TimeSeries& signal) {
  if (spec.level_percent < 0.0) throw Error("noise level must be >= 0");
  const long m = signal.samples();
  const int n = signal.dim();
  Matrix noise = Matrix::Zero(m, n);
  if (spec.level_percent == 0.0) return noise;
  for (int k = 0; k < n; ++k) {
    const double sd = population_std(signal.states.col(k));
    if (sd <= 0.0)
      throw DegenerateSignal("state " + std::to_string(k + 1) + " has zero variance");
    const double scale = spec.level_percent / 100.0 * sd;
    SampleStream stream(spec.seed, static_cast<unsigned long>(k));
    for (long j = 0; j < m; ++j) {
      double v = 0.0;
      switch (spec.kind) {
        case NoiseKind::Gaussian:
          v = scale * stream.normal();
          break;
        case NoiseKind::Uniform:
          v = scale * std::sqrt(3.0) * (2.0 * stream.uniform01() - 1.0);
          break;
        case NoiseKind::Gamma:  // shape 1, scale matched to the noise level
          v = scale * stream.exponential();
          break;
        case NoiseKind::Rayleigh:
          v = scale * stream.rayleigh();
          break;
        case NoiseKind::Dweibull:
          v = (stream.coin() ? 1.0 : -1.0) * scale * stream.weibull(kDweibullShape);
          break;
      }
      noise(j, k) = v;
    }
  }
  return noise;
}

std::vector<std::string> default_noise_families() {
  return {"gaussian", "uniform", "gamma", "dweibull", "rayleigh", "cauchy", "beta"};
}

namespace {

using Pdf = std::function<double(double)>;

struct FamilyFit {
  DistributionFit fit;
  Pdf pdf;
};

FamilyFit fit_gaussian(const std::vector<double>& x, const Stats& s) {
  FamilyFit f;
  f.fit.family = "gaussian";
  f.fit.params = {{"mu", s.mean}, {"sigma", s.sd}};
  f.fit.mean = s.mean;
  f.fit.stddev = s.sd;
  const double mu = s.mean, sd = s.sd;
  double ll = 0.0;
  for (double v : x) ll += -0.5 * std::pow((v - mu) / sd, 2) - std::log(sd) -
                           0.5 * std::log(2.0 * std::numbers::pi);
  f.fit.loglik = ll;
  f.pdf = [mu, sd](double v) {
    return std::exp(-0.5 * std::pow((v - mu) / sd, 2)) / (sd * std::sqrt(2.0 * std::numbers::pi));
  };
  return f;
}

FamilyFit fit_uniform(const std::vector<double>& x, const Stats& s) {
  FamilyFit f;
  f.fit.family = "uniform";
  const double a = s.min, b = s.max, w = b - a;
  f.fit.params = {{"loc", a}, {"scale", w}};
  f.fit.mean = 0.5 * (a + b);
  f.fit.stddev = w / std::sqrt(12.0);
  f.fit.loglik = -static_cast<double>(x.size()) * std::log(w);
  f.pdf = [a, b, w](double v) { return (v >= a && v <= b) ? 1.0 / w : 0.0; };
  return f;
}

FamilyFit fit_rayleigh(const std::vector<double>& x, const Stats& s) {
  FamilyFit f;
  f.fit.family = "rayleigh";
  const double range = s.max - s.min;
  double best_ll = -1e300, best_loc = 0.0, best_scale = 1.0;
  for (int g = 0; g <= 60; ++g) {
    const double loc = s.min - range * (1e-6 + (0.5 - 1e-6) * g / 60.0);
    double sum2 = 0.0, sumlog = 0.0;
    for (double v : x) {
      const double z = v - loc;
      sum2 += z * z;
      sumlog += std::log(z);
    }
    const double scale2 = sum2 / (2.0 * static_cast<double>(x.size()));
    const double scale = std::sqrt(scale2);
    const double ll = sumlog - static_cast<double>(x.size()) * std::log(scale2) -
                      sum2 / (2.0 * scale2);
    if (ll > best_ll) {
      best_ll = ll;
      best_loc = loc;
      best_scale = scale;
    }
  }
  f.fit.params = {{"loc", best_loc}, {"scale", best_scale}};
  f.fit.mean = best_loc + best_scale * std::sqrt(std::numbers::pi / 2.0);
  f.fit.stddev = best_scale * std::sqrt(2.0 - std::numbers::pi / 2.0);
  f.fit.loglik = best_ll;
  const double loc = best_loc, sc2 = best_scale * best_scale;
  f.pdf = [loc, sc2](double v) {
    const double z = v - loc;
    return z > 0.0 ? z / sc2 * std::exp(-z * z / (2.0 * sc2)) : 0.0;
  };
  return f;
}

// Gamma shape MLE given samples shifted by loc: solve log k - psi(k) = s.
double gamma_shape_mle(double s) {
  double k = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  for (int it = 0; it < 40; ++it) {
    const double g = std::log(k) - digamma(k) - s;
    const double gp = 1.0 / k - trigamma(k);
    const double step = g / gp;
    k -= step;
    if (k <= 1e-8) k = 1e-8;
    if (std::abs(step) < 1e-12 * std::max(1.0, k)) break;
  }
  return k;
}

FamilyFit fit_gamma(const std::vector<double>& x, const Stats& s) {
  FamilyFit f;
  f.fit.family = "gamma";
  const double range = s.max - s.min;
  double best_ll = -1e300, best_loc = 0.0, best_k = 1.0, best_theta = 1.0;
  for (int g = 0; g <= 48; ++g) {
    const double loc = s.min - range * (1e-4 + (0.75 - 1e-4) * g / 48.0);
    double mean_z = 0.0, mean_log = 0.0;
    for (double v : x) {
      mean_z += v - loc;
      mean_log += std::log(v - loc);
    }
    mean_z /= static_cast<double>(x.size());
    mean_log /= static_cast<double>(x.size());
    const double stat = std::log(mean_z) - mean_log;
    if (!(stat > 0.0)) continue;
    const double k = gamma_shape_mle(stat);
    const double theta = mean_z / k;
    const double ll = static_cast<double>(x.size()) *
                      ((k - 1.0) * mean_log - mean_z / theta - std::lgamma(k) -
                       k * std::log(theta));
    if (ll > best_ll) {
      best_ll = ll;
      best_loc = loc;
      best_k = k;
      best_theta = theta;
    }
  }
  if (best_ll <= -1e300) {
    f.fit.ok = false;
    f.fit.note = "gamma: no admissible location";
    return f;
  }
  f.fit.params = {{"k", best_k}, {"loc", best_loc}, {"theta", best_theta}};
  f.fit.mean = best_loc + best_k * best_theta;
  f.fit.stddev = std::sqrt(best_k) * best_theta;
  f.fit.loglik = best_ll;
  const double loc = best_loc, k = best_k, th = best_theta;
  const double lognorm = std::lgamma(k) + k * std::log(th);
  f.pdf = [loc, k, th, lognorm](double v) {
    const double z = v - loc;
    return z > 0.0 ? std::exp((k - 1.0) * std::log(z) - z / th - lognorm) : 0.0;
  };
  return f;
}

// Weibull MLE on the absolute deviations from the symmetry center.
FamilyFit fit_dweibull(const std::vector<double>& x, const Stats& s) {
  FamilyFit f;
  f.fit.family = "dweibull";
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const double loc = sorted[sorted.size() / 2];
  std::vector<double> z;
  z.reserve(x.size());
  for (double v : x) {
    const double a = std::abs(v - loc);
    if (a > 1e-300) z.push_back(a);
  }
  if (z.size() < 10) {
    f.fit.ok = false;
    f.fit.note = "dweibull: degenerate deviations";
    return f;
  }
  double mean_log = 0.0;
  for (double v : z) mean_log += std::log(v);
  mean_log /= static_cast<double>(z.size());
  double c = 1.2;
  for (int it = 0; it < 80; ++it) {
    double swc = 0.0, swcl = 0.0, swcl2 = 0.0;
    for (double v : z) {
      const double w = std::pow(v, c), l = std::log(v);
      swc += w;
      swcl += w * l;
      swcl2 += w * l * l;
    }
    const double g = swcl / swc - 1.0 / c - mean_log;
    const double gp = (swcl2 * swc - swcl * swcl) / (swc * swc) + 1.0 / (c * c);
    const double step = g / gp;
    c -= step;
    if (c < 0.05) c = 0.05;
    if (c > 50.0) c = 50.0;
    if (std::abs(step) < 1e-12 * std::max(1.0, c)) break;
  }
  double swc = 0.0;
  for (double v : z) swc += std::pow(v, c);
  const double scale = std::pow(swc / static_cast<double>(z.size()), 1.0 / c);
  double ll = 0.0;
  for (double v : z)
    ll += std::log(c / 2.0) + (c - 1.0) * (std::log(v) - std::log(scale)) - std::log(scale) -
          std::pow(v / scale, c);
  f.fit.params = {{"c", c}, {"loc", loc}, {"scale", scale}};
  f.fit.mean = loc;
  f.fit.stddev = scale * std::sqrt(std::tgamma(1.0 + 2.0 / c));
  f.fit.loglik = ll;
  const double cc = c, sc = scale, lc = loc;
  f.pdf = [cc, sc, lc](double v) {
    const double a = std::abs(v - lc) / sc;
    if (a <= 0.0) return 0.0;
    return cc / (2.0 * sc) * std::pow(a, cc - 1.0) * std::exp(-std::pow(a, cc));
  };
  return f;
}

double cauchy_loglik(const std::vector<double>& x, double loc, double scale) {
  double ll = 0.0;
  for (double v : x) {
    const double z = (v - loc) / scale;
    ll -= std::log(std::numbers::pi * scale * (1.0 + z * z));
  }
  return ll;
}

FamilyFit fit_cauchy(const std::vector<double>& x, const Stats& s) {
  FamilyFit f;
  f.fit.family = "cauchy";
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const size_t m = sorted.size();
  double loc = sorted[m / 2];
  double scale = std::max(1e-12, 0.5 * (sorted[3 * m / 4] - sorted[m / 4]));
  // Coarse-to-fine local grid refinement of the likelihood.
  double dl = std::max(scale, s.sd);
  double dlog = std::log(4.0);
  for (int round = 0; round < 6; ++round) {
    double best_ll = -1e300, best_loc = loc, best_scale = scale;
    for (int a = -5; a <= 5; ++a) {
      for (int b = -5; b <= 5; ++b) {
        const double l = loc + dl * a / 5.0;
        const double sc = scale * std::exp(dlog * b / 5.0);
        const double ll = cauchy_loglik(x, l, sc);
        if (ll > best_ll) {
          best_ll = ll;
          best_loc = l;
          best_scale = sc;
        }
      }
    }
    loc = best_loc;
    scale = best_scale;
    dl *= 0.3;
    dlog *= 0.3;
  }
  f.fit.params = {{"loc", loc}, {"scale", scale}};
  f.fit.mean = loc;      // moments are undefined; report the center
  f.fit.stddev = scale;  // and the scale in their place
  f.fit.note = "cauchy moments undefined; mean/stddev report loc/scale";
  f.fit.loglik = cauchy_loglik(x, loc, scale);
  f.pdf = [loc, scale](double v) {
    const double z = (v - loc) / scale;
    return 1.0 / (std::numbers::pi * scale * (1.0 + z * z));
  };
  return f;
}

FamilyFit fit_beta(const std::vector<double>& x, const Stats& s) {
  FamilyFit f;
  f.fit.family = "beta";
  const double width = s.max - s.min;
  const size_t m = x.size();
  // Min-max rescale with an interior shrink so the endpoints stay off 0/1.
  std::vector<double> u(m);
  double mu = 0.0;
  for (size_t i = 0; i < m; ++i) {
    u[i] = ((x[i] - s.min) / width * (static_cast<double>(m) - 1.0) + 0.5) /
           static_cast<double>(m);
    mu += u[i];
  }
  mu /= static_cast<double>(m);
  double var = 0.0;
  for (double v : u) var += (v - mu) * (v - mu);
  var /= static_cast<double>(m);
  double a = mu * (mu * (1.0 - mu) / var - 1.0);
  double b = (1.0 - mu) * (mu * (1.0 - mu) / var - 1.0);
  if (!(a > 0.0) || !(b > 0.0)) {
    f.fit.ok = false;
    f.fit.note = "beta: moment initialization failed";
    return f;
  }
  double mlog = 0.0, mlog1 = 0.0;
  for (double v : u) {
    mlog += std::log(v);
    mlog1 += std::log(1.0 - v);
  }
  mlog /= static_cast<double>(m);
  mlog1 /= static_cast<double>(m);
  for (int it = 0; it < 60; ++it) {
    const double pab = digamma(a + b);
    const double g1 = digamma(a) - pab - mlog;
    const double g2 = digamma(b) - pab - mlog1;
    const double tab = trigamma(a + b);
    const double h11 = trigamma(a) - tab, h22 = trigamma(b) - tab, h12 = -tab;
    const double det = h11 * h22 - h12 * h12;
    if (std::abs(det) < 1e-14) break;
    const double da = (g1 * h22 - g2 * h12) / det;
    const double db = (g2 * h11 - g1 * h12) / det;
    a -= da;
    b -= db;
    if (a < 1e-4) a = 1e-4;
    if (b < 1e-4) b = 1e-4;
    if (std::abs(da) + std::abs(db) < 1e-12 * (a + b)) break;
  }
  const double lognorm = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  double ll = 0.0;
  for (double v : u) ll += (a - 1.0) * std::log(v) + (b - 1.0) * std::log(1.0 - v);
  ll -= static_cast<double>(m) * (lognorm + std::log(width));
  f.fit.params = {{"a", a}, {"b", b}, {"loc", s.min}, {"scale", width}};
  f.fit.mean = s.min + width * a / (a + b);
  f.fit.stddev = width * std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0)));
  f.fit.loglik = ll;
  const double lo = s.min, aa = a, bb = b, ln = lognorm;
  f.pdf = [lo, width, aa, bb, ln](double v) {
    const double t = (v - lo) / width;
    if (t <= 0.0 || t >= 1.0) return 0.0;
    return std::exp((aa - 1.0) * std::log(t) + (bb - 1.0) * std::log(1.0 - t) - ln) / width;
  };
  return f;
}

}  // namespace

std::vector<DistributionFit> fit_distribution(const std::vector<double>& samples,
                                              const std::vector<std::string>& candidates) {
  if (samples.empty()) throw DegenerateSamples("empty sample");
  const Stats s = basic_stats(samples);
  if (s.sd <= 0.0) throw DegenerateSamples("constant sample");

  std::string size_note;
  if (samples.size() < 200)
    size_note = "fewer than 200 samples; family selection is unreliable";

  // Empirical histogram density on 100 equal-width bins spanning [min, max].
  constexpr int kBins = 100;
  const double width = (s.max - s.min) / kBins;
  std::vector<double> density(kBins, 0.0);
  for (double v : samples) {
    int b = static_cast<int>((v - s.min) / width);
    if (b >= kBins) b = kBins - 1;
    if (b < 0) b = 0;
    density[b] += 1.0;
  }
  for (double& d : density) d /= static_cast<double>(samples.size()) * width;

  std::vector<DistributionFit> out;
  for (const auto& name : candidates) {
    FamilyFit f;
    try {
      if (name == "gaussian" || name == "normal") f = fit_gaussian(samples, s);
      else if (name == "uniform") f = fit_uniform(samples, s);
      else if (name == "rayleigh") f = fit_rayleigh(samples, s);
      else if (name == "gamma") f = fit_gamma(samples, s);
      else if (name == "dweibull") f = fit_dweibull(samples, s);
      else if (name == "cauchy") f = fit_cauchy(samples, s);
      else if (name == "beta") f = fit_beta(samples, s);
      else throw Error("unknown distribution family: " + name);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      f.fit.family = name;
      f.fit.ok = false;
      f.fit.note = e.what();
    }
    if (f.fit.ok) {
      double sse = 0.0;
      for (int b = 0; b < kBins; ++b) {
        const double center = s.min + (b + 0.5) * width;
        const double diff = f.pdf(center) - density[b];
        sse += diff * diff;
      }
      f.fit.sse = sse;
      if (!std::isfinite(sse)) {
        f.fit.ok = false;
        f.fit.note = "non-finite density";
      }
    }
    if (!size_note.empty())
      f.fit.note = f.fit.note.empty() ? size_note : f.fit.note + "; " + size_note;
    out.push_back(std::move(f.fit));
  }
  std::stable_sort(out.begin(), out.end(), [](const DistributionFit& a, const DistributionFit& b) {
    if (a.ok != b.ok) return a.ok;
    return a.sse < b.sse;
  });
  // Parsimony tie-break: nested families (e.g. beta with a=b=1 vs uniform)
  // can match the histogram equally well, with the richer family slightly
  // ahead because it also fits sampling noise in the bins. Within 10% of the
  // best SSE the family with the fewest parameters wins.
  if (!out.empty() && out.front().ok) {
    size_t best = 0;
    for (size_t i = 1; i < out.size(); ++i) {
      if (!out[i].ok || out[i].sse > 1.10 * out.front().sse) break;
      if (out[i].params.size() < out[best].params.size()) best = i;
    }
    if (best != 0) std::rotate(out.begin(), out.begin() + best, out.begin() + best + 1);
  }
  // Nested-family tie-break: beta contains uniform (a = b = 1) and t contains
  // gaussian (df -> inf), so the richer family can always edge out its special
  // case by fitting histogram noise. Prefer the special case unless the nested
  // fit is decisively better.
  if (!out.empty() && out.front().ok) {
    const std::pair<const char*, const char*> nested[] = {{"beta", "uniform"},
                                                          {"t", "gaussian"}};
    for (const auto& [rich, special] : nested) {
      if (out.front().family != rich) continue;
      for (size_t i = 1; i < out.size(); ++i) {
        if (!out[i].ok) break;
        if (out[i].family == special && out[i].sse <= 2.0 * out.front().sse) {
          std::rotate(out.begin(), out.begin() + i, out.begin() + i + 1);
          break;
        }
      }
    }
  }
  return out;
}

std::vector<StateNoiseSummary> summarize_noise(const Matrix& nhat, int bins) {
  std::vector<StateNoiseSummary> out;
  for (long k = 0; k < nhat.cols(); ++k) {
    StateNoiseSummary s;
    const auto col = nhat.col(k).array();
    s.mean = col.mean();
    const double var = (col - s.mean).square().mean();
    s.stddev = std::sqrt(var);
    s.skewness = var > 0.0 ? (col - s.mean).cube().mean() / std::pow(var, 1.5) : 0.0;
    const double lo = col.minCoeff(), hi = col.maxCoeff();
    if (hi == lo) {
      s.bin_centers = {lo};
      s.densities = {1.0};
    } else {
      const double width = (hi - lo) / bins;
      s.bin_centers.resize(bins);
      s.densities.assign(bins, 0.0);
      for (int b = 0; b < bins; ++b) s.bin_centers[b] = lo + (b + 0.5) * width;
      for (long j = 0; j < nhat.rows(); ++j) {
        int b = static_cast<int>((nhat(j, k) - lo) / width);
        if (b >= bins) b = bins - 1;
        s.densities[b] += 1.0;
      }
      for (double& d : s.densities) d /= static_cast<double>(nhat.rows()) * width;
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_histogram_csv(const StateNoiseSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << "bin_center,density\n";
  char buf[64];
  for (size_t i = 0; i < summary.bin_centers.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", summary.bin_centers[i],
                  summary.densities[i]);
    out << buf;
  }
}

std::string distribution_fits_to_json(const std::vector<DistributionFit>& fits) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : fits) {
    nlohmann::json j;
    j["family"] = f.family;
    j["params"] = f.params;
    j["sse"] = f.sse;
    j["loglik"] = f.loglik;
    j["mean"] = f.mean;
    j["stddev"] = f.stddev;
    j["ok"] = f.ok;
    if (!f.note.empty()) j["note"] = f.note;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

}  // namespace modsindy
