#include "playenv/state.hpp"

namespace playenv {

Eigen::VectorXd EnvironmentState::flatten() const {
  Eigen::VectorXd out(3 + w.size() + pi.size());
  out << x, w, pi;
  return out;
}

}  // namespace playenv
