#include "playenv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "playenv/action.hpp"
#include "playenv/errors.hpp"

namespace playenv {

namespace {

std::map<int, Vec3> action_means(std::span<const Vec3> deltas, std::span<const int> actions) {
  std::map<int, std::pair<Vec3, std::size_t>> acc;
  for (std::size_t j = 0; j < deltas.size(); ++j) {
    auto& [sum, count] = acc.try_emplace(actions[j], Vec3::Zero(), 0).first->second;
    sum += deltas[j];
    ++count;
  }
  std::map<int, Vec3> means;
  for (const auto& [a, sc] : acc) means[a] = sc.first / static_cast<double>(sc.second);
  return means;
}

void check_labels(std::span<const Vec3> deltas, std::span<const int> actions) {
  if (deltas.size() != actions.size())
    throw DomainError("one action label per displacement is required");
}

}  // namespace

double delta_mse(std::span<const Vec3> deltas, std::span<const int> actions) {
  check_labels(deltas, actions);
  if (deltas.size() < 2) throw DomainError("delta_mse needs at least 2 samples");
  const double var = total_variance(deltas);
  if (!(var > 0.0)) throw DomainError("displacements have zero variance");
  const auto means = action_means(deltas, actions);
  double sse = 0.0;
  for (std::size_t j = 0; j < deltas.size(); ++j)
    sse += (deltas[j] - means.at(actions[j])).squaredNorm();
  return sse / static_cast<double>(deltas.size()) / var;
}

double delta_acc(std::span<const Vec3> deltas, std::span<const int> actions) {
  check_labels(deltas, actions);
  if (deltas.empty()) throw DomainError("delta_acc needs at least one sample");
  const auto means = action_means(deltas, actions);
  std::size_t hits = 0;
  for (std::size_t j = 0; j < deltas.size(); ++j) {
    int best = means.begin()->first;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& [a, mu] : means) {
      const double d = (deltas[j] - mu).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = a;
      }
    }
    hits += best == actions[j];
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(deltas.size());
}

namespace {

const Detection* find_valid(const DetectionFrame& frame, int id) {
  for (const auto& d : frame)
    if (d.valid && d.object_id == id) return &d;
  return nullptr;
}

void check_frames(std::span<const DetectionFrame> gt, std::span<const DetectionFrame> rec) {
  if (gt.size() != rec.size()) throw DomainError("detection frame counts differ");
}

}  // namespace

std::optional<double> add_metric(std::span<const DetectionFrame> gt,
                                 std::span<const DetectionFrame> rec) {
  check_frames(gt, rec);
  double total = 0.0;
  std::size_t matched = 0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    for (const auto& g : gt[f]) {
      if (!g.valid) continue;
      if (const auto* r = find_valid(rec[f], g.object_id)) {
        total += (g.bbox.center() - r->bbox.center()).norm();
        ++matched;
      }
    }
  }
  if (matched == 0) return std::nullopt;
  return total / static_cast<double>(matched);
}

double mdr(std::span<const DetectionFrame> gt, std::span<const DetectionFrame> rec) {
  check_frames(gt, rec);
  std::size_t present = 0;
  std::size_t missed = 0;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    for (const auto& g : gt[f]) {
      if (!g.valid) continue;
      ++present;
      missed += find_valid(rec[f], g.object_id) == nullptr;
    }
  }
  if (present == 0) throw DomainError("no ground-truth detections");
  return 100.0 * static_cast<double>(missed) / static_cast<double>(present);
}

WarpResult warp_eval(const Image& original, const Image& rendered, const Homography& h,
                     const std::vector<bool>* mask) {
  if (original.width != rendered.width || original.height != rendered.height ||
      original.channels != rendered.channels)
    throw DomainError("warp_eval needs images of the same size");
  const std::size_t total = std::size_t(original.width) * original.height;
  if (mask && mask->size() != total) throw DomainError("mask size does not match the image");

  constexpr double kEdge = 1e-9;
  const int w = rendered.width;
  const int hgt = rendered.height;
  double abs_sum = 0.0;
  std::size_t covered = 0;
  for (int y = 0; y < original.height; ++y) {
    for (int x = 0; x < original.width; ++x) {
      if (mask && !(*mask)[std::size_t(y) * original.width + x]) continue;
      Vec2 q;
      try {
        q = apply_homography(h, Vec2(x + 0.5, y + 0.5));
      } catch (const DomainError&) {
        continue;
      }
      double gx = q.x() - 0.5;
      double gy = q.y() - 0.5;
      if (!(gx >= -kEdge && gx <= w - 1 + kEdge && gy >= -kEdge && gy <= hgt - 1 + kEdge)) continue;
      gx = std::clamp(gx, 0.0, double(w - 1));
      gy = std::clamp(gy, 0.0, double(hgt - 1));
      const int x0 = static_cast<int>(std::floor(gx));
      const int y0 = static_cast<int>(std::floor(gy));
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, hgt - 1);
      const double ax = gx - x0;
      const double ay = gy - y0;
      for (int c = 0; c < rendered.channels; ++c) {
        const double top = rendered.at(x0, y0, c) + ax * (rendered.at(x1, y0, c) - rendered.at(x0, y0, c));
        const double bot = rendered.at(x0, y1, c) + ax * (rendered.at(x1, y1, c) - rendered.at(x0, y1, c));
        abs_sum += std::abs(original.at(x, y, c) - (top + ay * (bot - top)));
      }
      ++covered;
    }
  }
  if (covered == 0) throw DomainError("warped image does not overlap the original");
  return WarpResult{abs_sum / (static_cast<double>(covered) * rendered.channels),
                    static_cast<double>(covered) / static_cast<double>(total)};
}

}  // namespace playenv
