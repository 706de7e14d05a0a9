#include "playenv/fields.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "playenv/errors.hpp"

namespace playenv {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double component(const PoseCode& pi, int i) { return i < pi.size() ? pi[i] : 0.0; }

Feature zeros(int dim) { return Feature::Zero(dim); }

}  // namespace

StyleResponse StyleResponse::identity(int feature_dim, int style_dim) {
  return StyleResponse{Feature::Ones(feature_dim), Eigen::MatrixXd::Zero(feature_dim, style_dim),
                       Feature::Zero(feature_dim), Eigen::MatrixXd::Zero(feature_dim, style_dim)};
}

Feature StyleResponse::gamma(const StyleCode& w) const {
  Feature g = gamma0;
  if (gamma_w.size() > 0) g.noalias() += gamma_w * w;
  return g;
}

Feature StyleResponse::beta(const StyleCode& w) const {
  Feature b = beta0;
  if (beta_w.size() > 0) b.noalias() += beta_w * w;
  return b;
}

void FieldDescriptor::validate(int style_dim) const {
  const int df = feature_dim();
  if (df < 1 || df > kMaxCodeDim) throw DomainError("feature dimension out of range");
  const auto& r = style_response;
  if (r.beta0.size() != df) throw DomainError("style response gamma/beta dimensions differ");
  for (const auto* m : {&r.gamma_w, &r.beta_w}) {
    if (m->size() != 0 && (m->rows() != df || m->cols() != style_dim))
      throw DomainError("style response matrix must be feature_dim x style_dim");
  }
  const auto check_color = [df](const Feature& c, const char* what) {
    if (c.size() != df) throw DomainError(std::string(what) + " has the wrong feature dimension");
    if (!c.allFinite()) throw DomainError(std::string(what) + " must be finite");
  };
  std::visit(overloaded{
                 [&](const UniformBoxField& f) {
                   if (!(f.sigma0 >= 0.0)) throw DomainError("sigma0 must be >= 0");
                   if (!f.box.valid()) throw DomainError("uniform_box extent is inverted");
                   check_color(f.color, "uniform_box color");
                 },
                 [&](const CheckerPlaneField& f) {
                   if (!(f.sigma0 >= 0.0)) throw DomainError("sigma0 must be >= 0");
                   if (!(f.cell > 0.0)) throw DomainError("checker cell must be positive");
                   if (!(f.half_thickness >= 0.0))
                     throw DomainError("checker half thickness must be >= 0");
                   check_color(f.color_even, "checker color");
                   check_color(f.color_odd, "checker color");
                 },
                 [&](const VoxelGridField& f) {
                   if (f.nx < 1 || f.ny < 1 || f.nz < 1)
                     throw DomainError("voxel grid dimensions must be positive");
                   if (!f.bounds.valid()) throw DomainError("voxel grid bounds are inverted");
                   if (f.sigma.size() != f.cell_count() || f.color.size() != f.cell_count())
                     throw DomainError("voxel grid data does not match its dimensions");
                   for (double s : f.sigma)
                     if (!(s >= 0.0)) throw DomainError("voxel sigma must be >= 0");
                   for (const auto& c : f.color) check_color(c, "voxel color");
                 },
                 [&](const SphereBackgroundField& f) {
                   check_color(f.bottom_color, "background color");
                   check_color(f.top_color, "background color");
                   if (f.origin_shift.size() != 0 &&
                       (f.origin_shift.rows() != df || f.origin_shift.cols() != 3))
                     throw DomainError("background origin shift must be feature_dim x 3");
                 },
             },
             variant);
}

std::vector<double> positional_encoding(std::span<const double> x, int octaves,
                                        std::span<const double> weights) {
  if (octaves < 0) throw DomainError("octave count must be >= 0");
  if (!weights.empty() && static_cast<int>(weights.size()) != octaves)
    throw DomainError("one anneal weight per octave is required");
  const std::size_t n = x.size();
  std::vector<double> out;
  out.reserve(n * (2 * static_cast<std::size_t>(octaves) + 1));
  out.insert(out.end(), x.begin(), x.end());
  for (int k = 0; k < octaves; ++k) {
    const double freq = std::ldexp(std::numbers::pi, k);
    const double wk = weights.empty() ? 1.0 : weights[k];
    for (std::size_t i = 0; i < n; ++i) out.push_back(wk * std::sin(freq * x[i]));
    for (std::size_t i = 0; i < n; ++i) out.push_back(wk * std::cos(freq * x[i]));
  }
  return out;
}

std::vector<double> encoding_anneal_weights(double alpha, int octaves) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  std::vector<double> w(static_cast<std::size_t>(std::max(octaves, 0)));
  for (int k = 0; k < octaves; ++k) {
    const double ramp = std::clamp(alpha * octaves - k, 0.0, 1.0);
    w[k] = 0.5 * (1.0 - std::cos(std::numbers::pi * ramp));
  }
  return w;
}

Feature style_modulate(const Feature& h, const StyleCode& w, const StyleResponse& response) {
  if (h.size() != response.feature_dim() || response.beta0.size() != h.size())
    throw DomainError("feature and style response dimensions differ");
  if (response.gamma_w.size() != 0 && response.gamma_w.cols() != w.size())
    throw DomainError("style code dimension does not match the style response");
  if (response.beta_w.size() != 0 && response.beta_w.cols() != w.size())
    throw DomainError("style code dimension does not match the style response");
  return response.gamma(w).cwiseProduct(h) + response.beta(w);
}

Vec3 bend(const Vec3& x, const PoseCode& pi, const BendDescriptor& descriptor) {
  return std::visit(overloaded{
                        [&](const ZeroBend&) { return x; },
                        [&](const TranslationBend&) {
                          return Vec3(x + Vec3(component(pi, 0), component(pi, 1),
                                               component(pi, 2)));
                        },
                        [&](const SwayBend&) {
                          Vec3 out = x;
                          out.x() += component(pi, 0) * std::sin(component(pi, 1) * x.y());
                          return out;
                        },
                    },
                    descriptor);
}

RadianceSample sample_field(const FieldDescriptor& field, const Vec3& x, const StyleCode& w,
                            const std::optional<Vec3>& view_dir,
                            const std::optional<Vec3>& ray_origin) {
  const int df = field.feature_dim();
  const auto modulated = [&](double sigma, const Feature& c) {
    return RadianceSample{sigma, style_modulate(c, w, field.style_response)};
  };
  return std::visit(
      overloaded{
          [&](const UniformBoxField& f) {
            if (!f.box.contains(x)) return RadianceSample{0.0, zeros(df)};
            return modulated(f.sigma0, f.color);
          },
          [&](const CheckerPlaneField& f) {
            if (std::abs(x.y() - f.plane_y) > f.half_thickness)
              return RadianceSample{0.0, zeros(df)};
            const auto parity = static_cast<long long>(std::floor(x.x() / f.cell)) +
                                static_cast<long long>(std::floor(x.z() / f.cell));
            return modulated(f.sigma0, (parity % 2 == 0) ? f.color_even : f.color_odd);
          },
          [&](const VoxelGridField& f) {
            if (!f.bounds.contains(x)) return RadianceSample{0.0, zeros(df)};
            const Vec3 extent = f.bounds.max_corner - f.bounds.min_corner;
            const int dims[3] = {f.nx, f.ny, f.nz};
            int idx[3];
            for (int a = 0; a < 3; ++a) {
              const double rel = extent[a] > 0.0 ? (x[a] - f.bounds.min_corner[a]) / extent[a] : 0.0;
              idx[a] = std::clamp(static_cast<int>(std::floor(rel * dims[a])), 0, dims[a] - 1);
            }
            const std::size_t cell =
                (static_cast<std::size_t>(idx[2]) * f.ny + idx[1]) * f.nx + idx[0];
            return modulated(f.sigma[cell], f.color[cell]);
          },
          [&](const SphereBackgroundField& f) {
            if (!view_dir || !ray_origin)
              throw DomainError("background field needs the ray direction and origin");
            const double s = 0.5 * (view_dir->y() + 1.0);
            Feature c = f.bottom_color + s * (f.top_color - f.bottom_color);
            if (f.origin_shift.size() != 0) c.noalias() += f.origin_shift * (*ray_origin);
            return modulated(1.0, c);
          },
      },
      field.variant);
}

}  // namespace playenv
