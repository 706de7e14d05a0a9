#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "playenv/geometry.hpp"
#include "playenv/state.hpp"

namespace playenv {

/// What happens to the pose code when an action is applied.
struct PoseUpdate {
  /// Empty bank: pose is carried unchanged. Otherwise the pose after tick t is bank[t % size].
  std::vector<PoseCode> cyclic_bank;
};

/// Discrete action space: K motion centroids in camera-relative displacement space.
struct ActionModel {
  std::vector<Vec3> centroids;
  PoseUpdate pose_update;

  int action_count() const { return static_cast<int>(centroids.size()); }
  void validate() const;
};

struct LossWeights {
  double lambda_rec = 1.0;
  double lambda_act = 0.15;
  double lambda_delta = 0.1;
  double lambda_G = 0.1;
};

struct LossComponents {
  double rec = 0.0;
  double act = 0.0;
  double delta = 0.0;
  std::optional<double> generator;  // adversarial term supplied by an external discriminator
};

/// K nonnegative probabilities summing to 1.
using ActionDistribution = Eigen::VectorXd;

struct InferredAction {
  int action = 0;
  Vec3 variability = Vec3::Zero();
};

/// World displacement between two valid states expressed in camera coordinates: M^T (x' - x).
/// Empty when either state is invalid.
std::optional<Vec3> extract_delta(const EnvironmentState& s_t, const EnvironmentState& s_next,
                                  const CameraModel& camera);

struct KMeansResult {
  std::vector<Vec3> centroids;
  std::vector<int> assignment;
  /// Within-cluster sum of squares after each assignment step.
  std::vector<double> sse_history;
  int iterations = 0;
};

/// Best of up to 10 restarts. Each restart seeds by farthest point from a first pick drawn from
/// `seed`, runs Lloyd to an assignment fixpoint or `max_iterations`, then applies single-point
/// transfers while they lower the SSE. Deterministic in `seed`.
KMeansResult kmeans(std::span<const Vec3> points, int k, std::uint64_t seed,
                    int max_iterations = 100);

/// Throws DomainError with fewer than K distinct points.
ActionModel fit_action_space(std::span<const Vec3> deltas, int k, std::uint64_t seed);

/// Nearest centroid (ties to the lowest index) and the residual from it.
int nearest_action(const Vec3& delta_cam, const ActionModel& model);
std::optional<InferredAction> infer_action(const EnvironmentState& s_t,
                                           const EnvironmentState& s_next,
                                           const CameraModel& camera, const ActionModel& model);

struct StepOptions {
  /// Playable objects stay on the ground: the stepped position gets y = 0.
  bool clamp_to_ground = true;
  /// Tick index of the produced state, used by a cyclic pose bank.
  std::int64_t tick = 0;
};

/// x' = x + M (mu_a + v). Variability defaults to zero, the inference-time setting.
EnvironmentState dynamics_step(const EnvironmentState& s_t, int action, const CameraModel& camera,
                               const ActionModel& model, const Vec3& variability = Vec3::Zero(),
                               const StepOptions& options = {});

/// Autoregressive fold of dynamics_step; returns |actions| + 1 states starting with s_1.
std::vector<EnvironmentState> rollout(const EnvironmentState& s_1, std::span<const int> actions,
                                      std::span<const CameraModel> cameras,
                                      const ActionModel& model, bool clamp_to_ground = true);

/// Length of the longest all-valid prefix.
std::size_t valid_prefix(std::span<const EnvironmentState> states);

/// MSE over concatenated (x, w, pi) of the valid prefix of `states`.
double state_reconstruction_loss(std::span<const EnvironmentState> states,
                                 std::span<const EnvironmentState> reconstructed);

/// Mutual information of the batch joint (1/J) sum_j p_j p_hat_j^T; returns -MI (natural log).
double mutual_information_loss(std::span<const ActionDistribution> ps,
                               std::span<const ActionDistribution> ps_hat);

/// Per-point total variance (1/J) sum_j |d_j - mean|^2.
double total_variance(std::span<const Vec3> deltas);

/// Soft displacement loss: sum_j sum_k p_jk |d_j - mu_k|^2 / Var, mu_k the p-weighted means.
double delta_loss(std::span<const Vec3> deltas, std::span<const ActionDistribution> assignments);

double total_loss(const LossComponents& components, const LossWeights& weights = {});

enum class GumbelNoise { Sampled, None };

/// softmax((logits + g) / tau) with g = -log(-log u). `None` gives the plain tempered softmax.
ActionDistribution gumbel_softmax_sample(const Eigen::VectorXd& logits, double tau,
                                         std::mt19937_64& rng,
                                         GumbelNoise noise = GumbelNoise::Sampled);
ActionDistribution gumbel_softmax_sample(const Eigen::VectorXd& logits, double tau,
                                         std::uint64_t seed,
                                         GumbelNoise noise = GumbelNoise::Sampled);

/// Throws DomainError unless p is nonnegative and sums to 1 within 1e-9.
void check_distribution(const ActionDistribution& p);

}  // namespace playenv
