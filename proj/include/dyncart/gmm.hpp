#pragma once

// Full-covariance Gaussian mixture fitted by EM, and the confidence ranking
// that turns mixture components into difficulty levels.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dyncart {

struct GmmOptions {
  std::size_t components = 3;
  std::uint64_t seed = 0;
  std::size_t n_init = 10;
  std::size_t max_iter = 200;
  double tol = 1e-6;        // relative log-likelihood improvement
  double epsilon = 1e-6;    // added to every covariance diagonal
  std::size_t kmeans_steps = 10;
};

struct GmmModel {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
  bool converged = false;
  double log_likelihood = 0.0;  // total over the fitted rows

  std::size_t k() const { return weights.size(); }
  std::size_t dim() const { return means.empty() ? 0 : static_cast<std::size_t>(means.front().size()); }
};

struct GmmFit {
  GmmModel model;
  std::size_t best_restart = 0;
  // Log-likelihood after initialization and after every M-step, per restart.
  std::vector<std::vector<double>> traces;
  std::vector<std::string> warnings;
};

// Deterministic for a given (x, options). Throws InputError when
// N <= K or x has non-finite entries.
GmmFit fit_gmm(const Eigen::MatrixXd& x, const GmmOptions& options);

// Posterior p(k | x_i), N x K, normalized in log space.
Eigen::MatrixXd responsibilities(const GmmModel& model, const Eigen::MatrixXd& x);

// Total log-likelihood of x under the model.
double log_likelihood(const GmmModel& model, const Eigen::MatrixXd& x);

// Argmax responsibility per row, lowest component on ties.
std::vector<std::size_t> assign_clusters(const Eigen::MatrixXd& resp);
std::vector<std::size_t> assign_clusters(const GmmModel& model, const Eigen::MatrixXd& x);

enum class Difficulty { easy, ambiguous, hard };

inline constexpr std::array<Difficulty, 3> kAllDifficulties{Difficulty::easy, Difficulty::ambiguous,
                                                            Difficulty::hard};

std::string_view to_string(Difficulty d);
std::optional<Difficulty> parse_difficulty(std::string_view s);

// A cluster with no members; the caller may refit with another seed.
class EmptyClusterError : public std::runtime_error {
 public:
  explicit EmptyClusterError(std::size_t cluster);
  std::size_t cluster() const { return cluster_; }

 private:
  std::size_t cluster_;
};

struct ClusterRanking {
  std::vector<double> mean_confidence;      // per cluster
  std::vector<std::size_t> order;           // order[r] = cluster at rank r, easiest first
  std::vector<Difficulty> difficulty;       // per cluster
};

// Sorts clusters by mean raw ph confidence, descending, lower cluster id on
// ties. Rank 0 is easy, the last rank is hard, anything between ambiguous.
ClusterRanking rank_difficulty(std::span<const std::size_t> labels,
                               std::span<const double> raw_confidence, std::size_t k);

}  // namespace dyncart
