#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "playenv/geometry.hpp"

namespace playenv {

inline constexpr int kMaxCodeDim = 16;
inline constexpr int kDefaultStyleDim = 8;
inline constexpr int kDefaultPoseDim = 4;
inline constexpr int kDefaultFeatureDim = 3;

/// Small fixed-capacity vector; style codes, pose codes and features all fit inline.
using Code = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxCodeDim, 1>;
using StyleCode = Code;
using PoseCode = Code;
using Feature = Code;

struct RadianceSample {
  double sigma = 0.0;
  Feature feature;
};

/// Affine style response: gamma(w) = gamma0 + gamma_w * w, beta(w) = beta0 + beta_w * w.
/// gamma_w and beta_w are (feature_dim x style_dim).
struct StyleResponse {
  Feature gamma0;
  Eigen::MatrixXd gamma_w;
  Feature beta0;
  Eigen::MatrixXd beta_w;

  static StyleResponse identity(int feature_dim, int style_dim);

  int feature_dim() const { return static_cast<int>(gamma0.size()); }
  Feature gamma(const StyleCode& w) const;
  Feature beta(const StyleCode& w) const;
};

struct ZeroBend {};

/// B(x, pi) = (pi0, pi1, pi2).
struct TranslationBend {};

/// B(x, pi) = (pi0 * sin(pi1 * x.y), 0, 0).
struct SwayBend {};

using BendDescriptor = std::variant<ZeroBend, TranslationBend, SwayBend>;

struct UniformBoxField {
  double sigma0 = 0.0;
  Feature color;
  BoundingVolume box;
};

/// Slab |y - plane_y| <= half_thickness, colored by the parity of the (x, z) cell.
struct CheckerPlaneField {
  double sigma0 = 0.0;
  Feature color_even;
  Feature color_odd;
  double cell = 1.0;
  double plane_y = 0.0;
  double half_thickness = 0.01;
};

/// Nearest-cell lookup over a regular grid spanning `bounds`; x-fastest storage.
struct VoxelGridField {
  BoundingVolume bounds;
  int nx = 1;
  int ny = 1;
  int nz = 1;
  std::vector<double> sigma;
  std::vector<Feature> color;

  std::size_t cell_count() const { return static_cast<std::size_t>(nx) * ny * nz; }
};

/// Single-sample background: vertical gradient over the view direction, shifted linearly by the
/// ray origin. Always terminal-opaque.
struct SphereBackgroundField {
  Feature bottom_color;
  Feature top_color;
  Eigen::MatrixXd origin_shift;  // feature_dim x 3
};

using FieldVariant =
    std::variant<UniformBoxField, CheckerPlaneField, VoxelGridField, SphereBackgroundField>;

struct FieldDescriptor {
  FieldVariant variant;
  StyleResponse style_response;

  int feature_dim() const { return style_response.feature_dim(); }
  bool is_background() const { return std::holds_alternative<SphereBackgroundField>(variant); }

  /// Throws DomainError on broken invariants (negative sigma, mismatched dimensions, ...).
  void validate(int style_dim) const;
};

/// (x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^{L-1} pi x), cos(2^{L-1} pi x)), octave-major.
/// When `weights` is given (size L) the sin/cos block of octave k is scaled by weights[k].
std::vector<double> positional_encoding(std::span<const double> x, int octaves,
                                        std::span<const double> weights = {});

/// Cosine easing per octave: (1 - cos(pi * clamp(alpha * L - k, 0, 1))) / 2.
std::vector<double> encoding_anneal_weights(double alpha, int octaves);

Feature style_modulate(const Feature& h, const StyleCode& w, const StyleResponse& response);

Vec3 bend(const Vec3& x, const PoseCode& pi, const BendDescriptor& descriptor);

/// Evaluates a field at an object-frame position. Geometry (sigma) never sees the style code.
/// The background variant needs `view_dir` and `ray_origin`.
RadianceSample sample_field(const FieldDescriptor& field, const Vec3& x, const StyleCode& w,
                            const std::optional<Vec3>& view_dir = std::nullopt,
                            const std::optional<Vec3>& ray_origin = std::nullopt);

}  // namespace playenv
