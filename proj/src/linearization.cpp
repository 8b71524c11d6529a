#include "rgov/linearization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rgov/errors.hpp"
#include "rgov/numkit/linalg.hpp"

namespace rgov {

void NonlinearPlant::validate() const {
  if (state_dim <= 0 || input_dim <= 0) {
    throw InvalidArgument("plant dimensions must be positive");
  }
  if (static_cast<int>(relative_degree.size()) != input_dim) {
    throw InvalidArgument("one relative degree per output is required");
  }
  for (int r : relative_degree) {
    if (r < 1) throw InvalidArgument("relative degrees must be >= 1");
  }
  if (std::accumulate(relative_degree.begin(), relative_degree.end(), 0) != state_dim) {
    throw InvalidArgument("relative degrees must sum to the state dimension");
  }
  if (!drift || !input_matrix || !output || !coordinate_map || !decoupling || !drift_term) {
    throw InvalidArgument("plant '" + name + "' is missing a model function");
  }
}

void AckermannParams::validate() const {
  if (!(wheelbase_m > 0.0)) throw InvalidArgument("wheelbase_m must be > 0");
  if (!(v_min_mps > 0.0)) throw InvalidArgument("v_min_mps must be > 0");
  if (!(max_steer_rad > 0.0 && max_steer_rad < M_PI / 2)) {
    throw InvalidArgument("max_steer_rad must lie in (0, pi/2)");
  }
  if (!(beta >= v_min_mps * v_min_mps / wheelbase_m) || !std::isfinite(beta)) {
    throw InvalidArgument("beta must be finite and >= v_min^2 / l");
  }
}

double ackermann_profile_ratio(const AckermannParams& params, const Eigen::VectorXd& x) {
  const double c = std::cos(x(ack::kSteer));
  return x(ack::kV) * x(ack::kV) / (params.wheelbase_m * c * c);
}

NonlinearPlant ackermann_plant(const AckermannParams& params) {
  params.validate();
  const double l = params.wheelbase_m;

  NonlinearPlant p;
  p.name = "ackermann";
  p.state_dim = 6;
  p.input_dim = 2;
  p.relative_degree = {3, 3};

  p.drift = [l](const Eigen::VectorXd& x) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(6);
    const double psi = x(ack::kPsi), v = x(ack::kV);
    f(ack::kX) = v * std::cos(psi);
    f(ack::kY) = v * std::sin(psi);
    f(ack::kPsi) = v * std::tan(x(ack::kSteer)) / l;
    f(ack::kV) = x(ack::kA);
    return f;
  };
  p.input_matrix = [](const Eigen::VectorXd&) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(6, 2);
    g(ack::kA, 0) = 1.0;      // jerk
    g(ack::kSteer, 1) = 1.0;  // steering rate
    return g;
  };
  p.output = [](const Eigen::VectorXd& x) {
    return Eigen::Vector2d(x(ack::kX), x(ack::kY)).eval();
  };
  p.coordinate_map = [l](const Eigen::VectorXd& x) {
    const double psi = x(ack::kPsi), v = x(ack::kV), a = x(ack::kA);
    const double psi_dot = v * std::tan(x(ack::kSteer)) / l;
    const double c = std::cos(psi), s = std::sin(psi);
    Eigen::VectorXd z(6);
    z << x(ack::kX), v * c, a * c - v * psi_dot * s,
         x(ack::kY), v * s, a * s + v * psi_dot * c;
    return z;
  };
  p.decoupling = [l](const Eigen::VectorXd& x) {
    const double psi = x(ack::kPsi), v = x(ack::kV);
    const double cd = std::cos(x(ack::kSteer));
    const double k = v * v / (l * cd * cd);
    Eigen::MatrixXd m(2, 2);
    m << std::cos(psi), -k * std::sin(psi),
         std::sin(psi), k * std::cos(psi);
    return m;
  };
  p.drift_term = [l](const Eigen::VectorXd& x) {
    const double psi = x(ack::kPsi), v = x(ack::kV), a = x(ack::kA);
    const double w = v * std::tan(x(ack::kSteer)) / l;
    const double c = std::cos(psi), s = std::sin(psi);
    return Eigen::Vector2d(-3.0 * a * w * s - v * w * w * c,
                           3.0 * a * w * c - v * w * w * s).eval();
  };
  p.singular_reason = [](const Eigen::VectorXd& x) -> std::optional<std::string> {
    if (std::abs(x(ack::kV)) < 1e-12) return std::string("speed v is zero");
    if (std::abs(std::cos(x(ack::kSteer))) < 1e-12) {
      return std::string("steering angle at +-pi/2");
    }
    return std::nullopt;
  };
  return p;
}

Eigen::VectorXd feedback_linearize(const NonlinearPlant& plant, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& v_cmd) {
  if (plant.singular_reason) {
    if (auto why = plant.singular_reason(x)) {
      throw SingularState("decoupling matrix singular: " + *why);
    }
  }
  const Eigen::MatrixXd m = plant.decoupling(x);
  const Eigen::VectorXd rhs = v_cmd - plant.drift_term(x);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible()) throw SingularState("decoupling matrix not invertible");
  return lu.solve(rhs);
}

int BrunovskyRealization::chain_offset(std::size_t i) const {
  return std::accumulate(block_sizes.begin(), block_sizes.begin() + i, 0);
}

BrunovskyRealization brunovsky_realization(const std::vector<int>& rho) {
  if (rho.empty()) throw InvalidArgument("relative degree vector is empty");
  for (int r : rho) {
    if (r < 1) throw InvalidArgument("relative degrees must be >= 1");
  }
  const int m = static_cast<int>(rho.size());
  const int n = std::accumulate(rho.begin(), rho.end(), 0);

  BrunovskyRealization out;
  out.block_sizes = rho;
  out.A = Eigen::MatrixXd::Zero(n, n);
  out.B = Eigen::MatrixXd::Zero(n, m);
  out.C = Eigen::MatrixXd::Zero(m, n);
  int offset = 0;
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k + 1 < rho[i]; ++k) out.A(offset + k, offset + k + 1) = 1.0;
    out.B(offset + rho[i] - 1, i) = 1.0;
    out.C(i, offset) = 1.0;
    offset += rho[i];
  }

  // Derivative level k of chain i goes to row (count of states at lower
  // levels) + (rank of i among chains that reach level k).
  out.T = Eigen::MatrixXd::Zero(n, n);
  const int max_level = *std::max_element(rho.begin(), rho.end());
  int row = 0;
  for (int level = 0; level < max_level; ++level) {
    offset = 0;
    for (int i = 0; i < m; ++i) {
      if (level < rho[i]) out.T(row++, offset + level) = 1.0;
      offset += rho[i];
    }
  }
  return out;
}

LinearFeedbackGains::LinearFeedbackGains(Eigen::MatrixXd k, const BrunovskyRealization& real)
    : k_(std::move(k)) {
  if (k_.rows() != real.B.cols() || k_.cols() != real.A.rows()) {
    throw InvalidArgument("gain matrix must be m x n");
  }
  const double abscissa = numkit::spectral_abscissa(real.A - real.B * k_);
  if (!(abscissa < 0.0)) {
    throw NotHurwitz("A - BK has spectral abscissa " + std::to_string(abscissa));
  }
}

LinearFeedbackGains place_chain_poles(
    const BrunovskyRealization& real,
    const std::vector<std::vector<std::complex<double>>>& chain_poles) {
  if (chain_poles.size() != real.block_sizes.size()) {
    throw InvalidArgument("need one pole set per integrator chain");
  }
  const auto n = real.A.rows();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(real.B.cols(), n);
  for (std::size_t i = 0; i < chain_poles.size(); ++i) {
    const auto& poles = chain_poles[i];
    if (static_cast<int>(poles.size()) != real.block_sizes[i]) {
      throw InvalidArgument("chain " + std::to_string(i) + " needs " +
                            std::to_string(real.block_sizes[i]) + " poles");
    }
    // Coefficients of prod (s - p), lowest degree first.
    std::vector<std::complex<double>> c{1.0};
    for (const auto& p : poles) {
      std::vector<std::complex<double>> next(c.size() + 1, 0.0);
      for (std::size_t j = 0; j < c.size(); ++j) {
        next[j + 1] += c[j];
        next[j] -= p * c[j];
      }
      c = std::move(next);
    }
    const int offset = real.chain_offset(i);
    for (int j = 0; j < real.block_sizes[i]; ++j) {
      if (std::abs(c[j].imag()) > 1e-9 * (1.0 + std::abs(c[j].real()))) {
        throw InvalidArgument("complex poles must come in conjugate pairs");
      }
      // Last row of a chain in companion form is -c; the chain input adds -K.
      k(static_cast<Eigen::Index>(i), offset + j) = c[j].real();
    }
  }
  return LinearFeedbackGains(k, real);
}

std::vector<std::vector<std::complex<double>>> split_poles(
    const BrunovskyRealization& real, const std::vector<std::complex<double>>& poles) {
  const std::size_t m = real.block_sizes.size();
  const int r = real.block_sizes.front();
  for (int size : real.block_sizes) {
    if (size != r) throw InvalidArgument("a flat pole list needs equal chain lengths");
  }
  if (static_cast<int>(poles.size()) == r) {
    return std::vector<std::vector<std::complex<double>>>(m, poles);
  }
  if (poles.size() != m * static_cast<std::size_t>(r)) {
    throw InvalidArgument("pole list length must be r or m*r");
  }
  std::vector<std::complex<double>> distinct;
  std::vector<std::size_t> count;
  for (const auto& p : poles) {
    std::size_t j = 0;
    while (j < distinct.size() && std::abs(distinct[j] - p) > 1e-9 * (1.0 + std::abs(p))) ++j;
    if (j == distinct.size()) {
      distinct.push_back(p);
      count.push_back(0);
    }
    ++count[j];
  }
  std::vector<std::complex<double>> per_chain;
  for (std::size_t j = 0; j < distinct.size(); ++j) {
    if (count[j] % m != 0) {
      throw InvalidArgument("each pole must appear a multiple of the chain count");
    }
    per_chain.insert(per_chain.end(), count[j] / m, distinct[j]);
  }
  return std::vector<std::vector<std::complex<double>>>(m, per_chain);
}

double bw_norm_bound(const NonlinearPlant& plant, const AckermannParams& params) {
  if (plant.name != "ackermann") {
    throw InvalidArgument("no closed-form decoupling bound for plant '" + plant.name + "'");
  }
  if (!std::isfinite(params.beta)) throw InvalidArgument("beta must be finite");
  return std::max(1.0, params.beta);
}

}  // namespace rgov
