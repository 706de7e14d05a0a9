#include "playenv/action.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "playenv/errors.hpp"

namespace playenv {

void ActionModel::validate() const {
  if (centroids.empty()) throw DomainError("action model needs at least one action");
  for (const auto& c : centroids)
    if (!c.allFinite()) throw DomainError("action centroids must be finite");
}

std::optional<Vec3> extract_delta(const EnvironmentState& s_t, const EnvironmentState& s_next,
                                  const CameraModel& camera) {
  if (!s_t.valid || !s_next.valid) return std::nullopt;
  return Vec3(camera.rotation.transpose() * (s_next.x - s_t.x));
}

namespace {

int nearest(const Vec3& p, std::span<const Vec3> centers) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < static_cast<int>(centers.size()); ++k) {
    const double d = (p - centers[k]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

std::size_t distinct_count(std::span<const Vec3> points, std::size_t enough) {
  std::vector<Vec3> seen;
  for (const auto& p : points) {
    if (std::none_of(seen.begin(), seen.end(), [&](const Vec3& q) { return q == p; })) {
      seen.push_back(p);
      if (seen.size() >= enough) break;
    }
  }
  return seen.size();
}

}  // namespace

namespace {

constexpr int kRestarts = 10;

void recenter(std::span<const Vec3> points, KMeansResult& res) {
  const std::size_t k = res.centroids.size();
  std::vector<Vec3> sums(k, Vec3::Zero());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    sums[res.assignment[i]] += points[i];
    ++counts[res.assignment[i]];
  }
  // empty clusters keep their previous centroid
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] > 0) res.centroids[c] = sums[c] / static_cast<double>(counts[c]);
}

double sse_of(std::span<const Vec3> points, const KMeansResult& res) {
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    sse += (points[i] - res.centroids[res.assignment[i]]).squaredNorm();
  return sse;
}

// Farthest-point seeding from points[first], then Lloyd to a fixpoint.
KMeansResult lloyd(std::span<const Vec3> points, int k, std::size_t first, int max_iterations) {
  const std::size_t n = points.size();
  KMeansResult res;
  res.centroids.push_back(points[first]);
  std::vector<double> min_dist(n);
  for (std::size_t i = 0; i < n; ++i) min_dist[i] = (points[i] - res.centroids[0]).squaredNorm();
  while (static_cast<int>(res.centroids.size()) < k) {
    const auto far = std::max_element(min_dist.begin(), min_dist.end()) - min_dist.begin();
    res.centroids.push_back(points[far]);
    for (std::size_t i = 0; i < n; ++i)
      min_dist[i] = std::min(min_dist[i], (points[i] - res.centroids.back()).squaredNorm());
  }

  const auto assign = [&] {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int a = nearest(points[i], res.centroids);
      changed |= a != res.assignment[i];
      res.assignment[i] = a;
    }
    res.sse_history.push_back(sse_of(points, res));
    return changed;
  };

  res.assignment.assign(n, -1);
  assign();
  for (int it = 0; it < max_iterations; ++it) {
    recenter(points, res);
    ++res.iterations;
    if (!assign()) break;
  }
  return res;
}

// Single-point transfers (Hartigan) while one strictly lowers the SSE. A transfer-stable
// assignment is also a Lloyd fixpoint, so this only ever leaves Lloyd's local optimum downhill.
void transfer_refine(std::span<const Vec3> points, KMeansResult& res) {
  const std::size_t n = points.size(), k = res.centroids.size();
  recenter(points, res);
  std::vector<std::size_t> counts(k, 0);
  for (int a : res.assignment) ++counts[a];
  for (std::size_t pass = 0; pass < 100 * n; ++pass) {
    double best_gain = 0.0;
    std::size_t best_i = 0, best_to = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto from = static_cast<std::size_t>(res.assignment[i]);
      if (counts[from] < 2) continue;
      const double nf = static_cast<double>(counts[from]);
      const double leave = nf / (nf - 1.0) * (points[i] - res.centroids[from]).squaredNorm();
      for (std::size_t to = 0; to < k; ++to) {
        if (to == from) continue;
        const double nt = static_cast<double>(counts[to]);
        const double gain = leave - nt / (nt + 1.0) * (points[i] - res.centroids[to]).squaredNorm();
        if (gain > best_gain) {
          best_gain = gain;
          best_i = i;
          best_to = to;
        }
      }
    }
    if (!(best_gain > 1e-12 * std::max(1.0, res.sse_history.back()))) break;
    --counts[res.assignment[best_i]];
    ++counts[best_to];
    res.assignment[best_i] = static_cast<int>(best_to);
    recenter(points, res);
    res.sse_history.push_back(sse_of(points, res));
  }
}

}  // namespace

KMeansResult kmeans(std::span<const Vec3> points, int k, std::uint64_t seed, int max_iterations) {
  if (k < 1) throw DomainError("k must be >= 1");
  if (distinct_count(points, static_cast<std::size_t>(k)) < static_cast<std::size_t>(k))
    throw DomainError("need at least " + std::to_string(k) + " distinct points");
  const std::size_t n = points.size();

  // first picks: one drawn from the seed, then further seeded picks for the restarts
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::swap(order[0], order[rng() % n]);
  std::shuffle(order.begin() + 1, order.end(), rng);

  KMeansResult best;
  double best_sse = std::numeric_limits<double>::infinity();
  const std::size_t starts = std::min<std::size_t>(n, kRestarts);
  for (std::size_t s = 0; s < starts; ++s) {
    KMeansResult r = lloyd(points, k, order[s], max_iterations);
    transfer_refine(points, r);
    const double sse = r.sse_history.back();
    if (sse < best_sse) {
      best_sse = sse;
      best = std::move(r);
    }
  }
  return best;
}

ActionModel fit_action_space(std::span<const Vec3> deltas, int k, std::uint64_t seed) {
  ActionModel model;
  model.centroids = kmeans(deltas, k, seed).centroids;
  return model;
}

int nearest_action(const Vec3& delta_cam, const ActionModel& model) {
  model.validate();
  return nearest(delta_cam, model.centroids);
}

std::optional<InferredAction> infer_action(const EnvironmentState& s_t,
                                           const EnvironmentState& s_next,
                                           const CameraModel& camera, const ActionModel& model) {
  const auto delta = extract_delta(s_t, s_next, camera);
  if (!delta) return std::nullopt;
  const int a = nearest_action(*delta, model);
  return InferredAction{a, *delta - model.centroids[a]};
}

EnvironmentState dynamics_step(const EnvironmentState& s_t, int action, const CameraModel& camera,
                               const ActionModel& model, const Vec3& variability,
                               const StepOptions& options) {
  if (action < 0 || action >= model.action_count())
    throw DomainError("action index " + std::to_string(action) + " out of range");
  EnvironmentState next = s_t;
  next.x = s_t.x + camera_relative_to_world(model.centroids[action] + variability, camera);
  if (options.clamp_to_ground) next.x.y() = 0.0;
  const auto& bank = model.pose_update.cyclic_bank;
  if (!bank.empty()) {
    const auto size = static_cast<std::int64_t>(bank.size());
    next.pi = bank[static_cast<std::size_t>(((options.tick % size) + size) % size)];
  }
  return next;
}

std::vector<EnvironmentState> rollout(const EnvironmentState& s_1, std::span<const int> actions,
                                      std::span<const CameraModel> cameras,
                                      const ActionModel& model, bool clamp_to_ground) {
  if (actions.size() != cameras.size())
    throw DomainError("rollout needs one camera per action");
  std::vector<EnvironmentState> out{s_1};
  out.reserve(actions.size() + 1);
  for (std::size_t t = 0; t < actions.size(); ++t) {
    StepOptions opts{clamp_to_ground, static_cast<std::int64_t>(t + 1)};
    out.push_back(dynamics_step(out.back(), actions[t], cameras[t], model, Vec3::Zero(), opts));
  }
  return out;
}

std::size_t valid_prefix(std::span<const EnvironmentState> states) {
  std::size_t n = 0;
  while (n < states.size() && states[n].valid) ++n;
  return n;
}

double state_reconstruction_loss(std::span<const EnvironmentState> states,
                                 std::span<const EnvironmentState> reconstructed) {
  if (states.size() != reconstructed.size())
    throw DomainError("state sequences differ in length");
  const std::size_t prefix = valid_prefix(states);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < prefix; ++t) {
    const Eigen::VectorXd a = states[t].flatten();
    const Eigen::VectorXd b = reconstructed[t].flatten();
    if (a.size() != b.size()) throw DomainError("state dimensions differ");
    sum += (a - b).squaredNorm();
    count += static_cast<std::size_t>(a.size());
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

void check_distribution(const ActionDistribution& p) {
  if (p.size() < 1) throw DomainError("empty action distribution");
  if ((p.array() < 0.0).any() || !p.allFinite())
    throw DomainError("action probabilities must be finite and nonnegative");
  if (std::abs(p.sum() - 1.0) > 1e-9) throw DomainError("action probabilities must sum to 1");
}

double mutual_information_loss(std::span<const ActionDistribution> ps,
                               std::span<const ActionDistribution> ps_hat) {
  if (ps.empty() || ps.size() != ps_hat.size())
    throw DomainError("mutual information needs two equal-length non-empty batches");
  const auto k = ps.front().size();
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(k, ps_hat.front().size());
  for (std::size_t j = 0; j < ps.size(); ++j) {
    check_distribution(ps[j]);
    check_distribution(ps_hat[j]);
    if (ps[j].size() != joint.rows() || ps_hat[j].size() != joint.cols())
      throw DomainError("action distributions differ in size");
    joint.noalias() += ps[j] * ps_hat[j].transpose();
  }
  joint /= static_cast<double>(ps.size());
  const Eigen::VectorXd row = joint.rowwise().sum();
  const Eigen::VectorXd col = joint.colwise().sum().transpose();
  double mi = 0.0;
  for (Eigen::Index a = 0; a < joint.rows(); ++a) {
    for (Eigen::Index b = 0; b < joint.cols(); ++b) {
      const double p = joint(a, b);
      if (p > 0.0) mi += p * std::log(p / (row[a] * col[b]));
    }
  }
  return -mi;
}

double total_variance(std::span<const Vec3> deltas) {
  if (deltas.empty()) throw DomainError("variance of an empty set");
  Vec3 mean = Vec3::Zero();
  for (const auto& d : deltas) mean += d;
  mean /= static_cast<double>(deltas.size());
  double var = 0.0;
  for (const auto& d : deltas) var += (d - mean).squaredNorm();
  return var / static_cast<double>(deltas.size());
}

double delta_loss(std::span<const Vec3> deltas, std::span<const ActionDistribution> assignments) {
  if (deltas.size() < 2 || deltas.size() != assignments.size())
    throw DomainError("delta loss needs J >= 2 displacements with one assignment each");
  const double var = total_variance(deltas);
  if (!(var > 0.0)) throw DomainError("displacements have zero variance");
  const auto k = assignments.front().size();
  for (const auto& p : assignments) {
    check_distribution(p);
    if (p.size() != k) throw DomainError("assignment distributions differ in size");
  }
  double loss = 0.0;
  for (Eigen::Index c = 0; c < k; ++c) {
    double mass = 0.0;
    Vec3 mu = Vec3::Zero();
    for (std::size_t j = 0; j < deltas.size(); ++j) {
      mass += assignments[j][c];
      mu += assignments[j][c] * deltas[j];
    }
    if (mass == 0.0) continue;
    mu /= mass;
    for (std::size_t j = 0; j < deltas.size(); ++j)
      loss += assignments[j][c] * (deltas[j] - mu).squaredNorm();
  }
  return loss / var;
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  return w.lambda_rec * c.rec + w.lambda_act * c.act + w.lambda_delta * c.delta +
         w.lambda_G * c.generator.value_or(0.0);
}

ActionDistribution gumbel_softmax_sample(const Eigen::VectorXd& logits, double tau,
                                         std::mt19937_64& rng, GumbelNoise noise) {
  if (!(tau > 0.0)) throw DomainError("temperature must be positive");
  if (logits.size() < 1) throw DomainError("empty logits");
  Eigen::VectorXd z(logits.size());
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    double g = 0.0;
    if (noise == GumbelNoise::Sampled) {
      const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
      g = -std::log(-std::log(u));
    }
    z[k] = (logits[k] + g) / tau;
  }
  z.array() -= z.maxCoeff();
  z = z.array().exp();
  return z / z.sum();
}

ActionDistribution gumbel_softmax_sample(const Eigen::VectorXd& logits, double tau,
                                         std::uint64_t seed, GumbelNoise noise) {
  std::mt19937_64 rng(seed);
  return gumbel_softmax_sample(logits, tau, rng, noise);
}

}  // namespace playenv
