#include "dyncart/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "dyncart/error.hpp"

namespace dyncart {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// mt19937_64 is fully specified by the standard; the bit-to-double mapping
// is ours so draws are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  std::size_t index(std::size_t n) {
    return std::min(static_cast<std::size_t>(uniform() * static_cast<double>(n)), n - 1);
  }

 private:
  std::mt19937_64 gen_;
};

struct Params {
  std::vector<double> weights;
  std::vector<VectorXd> means;
  std::vector<MatrixXd> covariances;
};

struct Factorized {
  double log_weight;
  VectorXd mean;
  MatrixXd lower;  // Cholesky factor of the covariance
  double log_det;
};

std::vector<Factorized> factorize(const std::vector<double>& weights,
                                  const std::vector<VectorXd>& means,
                                  const std::vector<MatrixXd>& covariances) {
  std::vector<Factorized> out;
  out.reserve(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    Eigen::LLT<MatrixXd> llt(covariances[k]);
    if (llt.info() != Eigen::Success) {
      throw std::runtime_error("covariance of component " + std::to_string(k) +
                               " is not positive definite");
    }
    MatrixXd lower = llt.matrixL();
    double log_det = 0.0;
    for (Index d = 0; d < lower.rows(); ++d) log_det += 2.0 * std::log(lower(d, d));
    out.push_back({std::log(weights[k]), means[k], std::move(lower), log_det});
  }
  return out;
}

// Fills resp with normalized posteriors; returns the total log-likelihood.
double expectation(const std::vector<Factorized>& comps, const MatrixXd& x, MatrixXd& resp) {
  const Index n = x.rows();
  const Index dim = x.cols();
  const auto k = static_cast<Index>(comps.size());
  const double log_norm = static_cast<double>(dim) * std::log(2.0 * std::numbers::pi);
  resp.resize(n, k);
  std::vector<double> logp(comps.size());
  VectorXd diff(dim);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < k; ++c) {
      const auto& comp = comps[static_cast<std::size_t>(c)];
      diff = x.row(i).transpose() - comp.mean;
      const double maha = comp.lower.triangularView<Eigen::Lower>().solve(diff).squaredNorm();
      logp[static_cast<std::size_t>(c)] = comp.log_weight - 0.5 * (log_norm + comp.log_det + maha);
      top = std::max(top, logp[static_cast<std::size_t>(c)]);
    }
    double sum = 0.0;
    for (Index c = 0; c < k; ++c) {
      resp(i, c) = std::exp(logp[static_cast<std::size_t>(c)] - top);
      sum += resp(i, c);
    }
    resp.row(i) /= sum;
    total += top + std::log(sum);
  }
  return total;
}

MatrixXd regularized_covariance(const MatrixXd& x, std::span<const double> w, const VectorXd& mean,
                                double weight_sum, double epsilon) {
  const Index dim = x.cols();
  MatrixXd cov = MatrixXd::Zero(dim, dim);
  VectorXd diff(dim);
  for (Index i = 0; i < x.rows(); ++i) {
    const double r = w.empty() ? 1.0 : w[static_cast<std::size_t>(i)];
    diff = x.row(i).transpose() - mean;
    for (Index a = 0; a < dim; ++a) {
      for (Index b = a; b < dim; ++b) cov(a, b) += r * diff(a) * diff(b);
    }
  }
  for (Index a = 0; a < dim; ++a) {
    for (Index b = a; b < dim; ++b) {
      cov(a, b) /= weight_sum;
      cov(b, a) = cov(a, b);
    }
    cov(a, a) += epsilon;
  }
  return cov;
}

Params maximization(const MatrixXd& x, const MatrixXd& resp, double epsilon) {
  const Index n = x.rows();
  const Index k = resp.cols();
  constexpr double kMinMass = 10.0 * std::numeric_limits<double>::epsilon();
  Params p;
  std::vector<double> mass(static_cast<std::size_t>(k));
  double total_mass = 0.0;
  std::vector<double> w(static_cast<std::size_t>(n));
  for (Index c = 0; c < k; ++c) {
    double nk = 0.0;
    VectorXd mean = VectorXd::Zero(x.cols());
    for (Index i = 0; i < n; ++i) {
      w[static_cast<std::size_t>(i)] = resp(i, c);
      nk += resp(i, c);
      mean += resp(i, c) * x.row(i).transpose();
    }
    nk = std::max(nk, kMinMass);
    mean /= nk;
    p.covariances.push_back(regularized_covariance(x, w, mean, nk, epsilon));
    p.means.push_back(std::move(mean));
    mass[static_cast<std::size_t>(c)] = nk;
    total_mass += nk;
  }
  for (double m : mass) p.weights.push_back(m / total_mass);
  return p;
}

double squared_distance(const MatrixXd& x, Index i, const VectorXd& c) {
  return (x.row(i).transpose() - c).squaredNorm();
}

std::vector<VectorXd> kmeans_pp_centers(const MatrixXd& x, std::size_t k, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<VectorXd> centers;
  centers.push_back(x.row(static_cast<Index>(rng.index(n))).transpose());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x, static_cast<Index>(i), centers.back()));
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double cum = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        cum += d2[i];
        if (cum > u && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    centers.push_back(x.row(static_cast<Index>(pick)).transpose());
  }
  return centers;
}

void lloyd_refine(const MatrixXd& x, std::vector<VectorXd>& centers, std::size_t steps) {
  const Index n = x.rows();
  const std::size_t k = centers.size();
  for (std::size_t step = 0; step < steps; ++step) {
    std::vector<VectorXd> sums(k, VectorXd::Zero(x.cols()));
    std::vector<std::size_t> counts(k, 0);
    for (Index i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(x, i, centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(x, i, centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      sums[best] += x.row(i).transpose();
      ++counts[best];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) centers[c] = sums[c] / static_cast<double>(counts[c]);
    }
  }
}

Params initialize(const MatrixXd& x, const GmmOptions& opt, Rng& rng) {
  Params p;
  p.means = kmeans_pp_centers(x, opt.components, rng);
  lloyd_refine(x, p.means, opt.kmeans_steps);
  const VectorXd global_mean = x.colwise().mean().transpose();
  const MatrixXd global_cov =
      regularized_covariance(x, {}, global_mean, static_cast<double>(x.rows()), opt.epsilon);
  p.covariances.assign(opt.components, global_cov);
  p.weights.assign(opt.components, 1.0 / static_cast<double>(opt.components));
  return p;
}

struct RunResult {
  Params params;
  std::vector<double> trace;
  std::size_t iterations = 0;
  bool converged = false;
  double log_likelihood = 0.0;
};

RunResult run_em(const MatrixXd& x, const GmmOptions& opt, std::uint64_t seed) {
  Rng rng(seed);
  RunResult run;
  run.params = initialize(x, opt, rng);
  MatrixXd resp;
  double ll = expectation(factorize(run.params.weights, run.params.means, run.params.covariances),
                          x, resp);
  run.trace.push_back(ll);
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    run.params = maximization(x, resp, opt.epsilon);
    const double next = expectation(
        factorize(run.params.weights, run.params.means, run.params.covariances), x, resp);
    run.trace.push_back(next);
    run.iterations = it;
    const double improvement = next - ll;
    ll = next;
    if (improvement < opt.tol * std::max(std::abs(ll), 1.0)) {
      run.converged = true;
      break;
    }
  }
  run.log_likelihood = ll;
  return run;
}

bool all_rows_identical(const MatrixXd& x) {
  for (Index i = 1; i < x.rows(); ++i) {
    if (x.row(i) != x.row(0)) return false;
  }
  return true;
}

void check_input(const GmmModel& model, const MatrixXd& x) {
  if (model.k() == 0) throw InputError("mixture model has no components");
  if (static_cast<std::size_t>(x.cols()) != model.dim()) {
    throw InputError("dimension mismatch: model has " + std::to_string(model.dim()) +
                     " dimensions, data has " + std::to_string(x.cols()));
  }
}

}  // namespace

GmmFit fit_gmm(const MatrixXd& x, const GmmOptions& options) {
  if (options.components < 1) throw InputError("component count must be >= 1");
  if (static_cast<std::size_t>(x.rows()) <= options.components) {
    throw InputError("need more rows than components: N=" + std::to_string(x.rows()) +
                     ", K=" + std::to_string(options.components));
  }
  if (x.cols() < 1) throw InputError("feature matrix has no columns");
  if (!x.allFinite()) throw InputError("feature matrix contains non-finite values");
  if (options.n_init < 1) throw InputError("n_init must be >= 1");
  if (!(options.epsilon > 0.0)) throw InputError("epsilon must be positive");
  if (!(options.tol >= 0.0)) throw InputError("tol must be non-negative");

  GmmFit fit;
  if (all_rows_identical(x)) {
    fit.warnings.push_back(
        "degenerate data: all points are identical; covariances reduce to the regularization term");
  }

  Rng seeds(options.seed);
  std::optional<RunResult> best;
  for (std::size_t r = 0; r < options.n_init; ++r) {
    RunResult run = run_em(x, options, seeds.next());
    fit.traces.push_back(run.trace);
    if (!best || run.log_likelihood > best->log_likelihood) {
      best = std::move(run);
      fit.best_restart = r;
    }
  }

  fit.model.weights = std::move(best->params.weights);
  fit.model.means = std::move(best->params.means);
  fit.model.covariances = std::move(best->params.covariances);
  fit.model.seed = options.seed;
  fit.model.iterations = best->iterations;
  fit.model.converged = best->converged;
  fit.model.log_likelihood = best->log_likelihood;
  if (!fit.model.converged) {
    fit.warnings.push_back("EM did not converge within " + std::to_string(options.max_iter) +
                           " iterations");
  }
  return fit;
}

MatrixXd responsibilities(const GmmModel& model, const MatrixXd& x) {
  check_input(model, x);
  MatrixXd resp;
  expectation(factorize(model.weights, model.means, model.covariances), x, resp);
  return resp;
}

double log_likelihood(const GmmModel& model, const MatrixXd& x) {
  check_input(model, x);
  MatrixXd resp;
  return expectation(factorize(model.weights, model.means, model.covariances), x, resp);
}

std::vector<std::size_t> assign_clusters(const MatrixXd& resp) {
  std::vector<std::size_t> labels(static_cast<std::size_t>(resp.rows()));
  for (Index i = 0; i < resp.rows(); ++i) {
    Index best = 0;
    for (Index c = 1; c < resp.cols(); ++c) {
      if (resp(i, c) > resp(i, best)) best = c;
    }
    labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return labels;
}

std::vector<std::size_t> assign_clusters(const GmmModel& model, const MatrixXd& x) {
  return assign_clusters(responsibilities(model, x));
}

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::ambiguous: return "ambiguous";
    case Difficulty::hard: return "hard";
  }
  return "?";
}

std::optional<Difficulty> parse_difficulty(std::string_view s) {
  for (auto d : kAllDifficulties) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

EmptyClusterError::EmptyClusterError(std::size_t cluster)
    : std::runtime_error("cluster " + std::to_string(cluster) + " has no members"),
      cluster_(cluster) {}

ClusterRanking rank_difficulty(std::span<const std::size_t> labels,
                               std::span<const double> raw_confidence, std::size_t k) {
  if (labels.size() != raw_confidence.size()) {
    throw InputError("rank_difficulty: " + std::to_string(labels.size()) + " labels but " +
                     std::to_string(raw_confidence.size()) + " confidence values");
  }
  if (k == 0) throw InputError("rank_difficulty: no clusters");
  std::vector<double> sums(k, 0.0);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k) throw InputError("cluster label out of range");
    sums[labels[i]] += raw_confidence[i];
    ++counts[labels[i]];
  }
  ClusterRanking ranking;
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) throw EmptyClusterError(c);
    ranking.mean_confidence.push_back(sums[c] / static_cast<double>(counts[c]));
  }
  ranking.order.resize(k);
  for (std::size_t c = 0; c < k; ++c) ranking.order[c] = c;
  std::stable_sort(ranking.order.begin(), ranking.order.end(), [&](std::size_t a, std::size_t b) {
    return ranking.mean_confidence[a] > ranking.mean_confidence[b];
  });
  ranking.difficulty.assign(k, Difficulty::ambiguous);
  ranking.difficulty[ranking.order.front()] = Difficulty::easy;
  if (k > 1) ranking.difficulty[ranking.order.back()] = Difficulty::hard;
  return ranking;
}

}  // namespace dyncart
