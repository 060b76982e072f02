// Copyright 2026 The mpcard Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpcard/error.hpp"
#include "mpcard/network.hpp"

namespace mpcard {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Nodal admittance matrix with the slack bus at row/column 0, so that
// Y = [Y00 Y0L; YL0 YLL].
inline MatrixXcd build_admittance(const BusNetwork& net) {
  const Eigen::Index n = static_cast<Eigen::Index>(net.size());
  MatrixXcd y = MatrixXcd::Zero(n, n);
  for (const Branch& br : net.branches()) {
    const Complex z{br.series_resistance, br.series_reactance};
    if (std::abs(z) == 0.0) {
      throw ModelError("branch " + br.from_bus + "-" + br.to_bus + " has zero impedance");
    }
    const Complex ys = 1.0 / z;
    const Complex ysh{0.0, 0.5 * br.shunt_susceptance};
    const auto f = static_cast<Eigen::Index>(net.index_of(br.from_bus));
    const auto t = static_cast<Eigen::Index>(net.index_of(br.to_bus));
    y(f, f) += ys + ysh;
    y(t, t) += ys + ysh;
    y(f, t) -= ys;
    y(t, f) -= ys;
  }
  return y;
}

// Cached factorisation of the non-slack block. Everything downstream of
// the admittance matrix goes through this.
class PowerFlowModel {
 public:
  explicit PowerFlowModel(const BusNetwork& net)
      : slack_(net.slack_voltage()), y_(build_admittance(net)) {
    const Eigen::Index n = y_.rows() - 1;
    const MatrixXcd yll = y_.bottomRightCorner(n, n);
    Eigen::FullPivLU<MatrixXcd> lu(yll);
    if (!lu.isInvertible()) throw ModelError("YLL is singular");
    zll_ = lu.inverse();
    noload_ = -zll_ * y_.bottomLeftCorner(n, 1) * slack_;
  }

  const MatrixXcd& admittance() const { return y_; }
  // YLL^{-1}
  const MatrixXcd& impedance() const { return zll_; }
  // No-load voltages at the non-slack buses.
  const VectorXcd& noload() const { return noload_; }
  Complex slack_voltage() const { return slack_; }
  Eigen::Index load_bus_count() const { return noload_.size(); }

  // Total loss Re(v^H Y v) for full voltage vector v (slack first).
  double loss(const VectorXcd& v) const { return (v.adjoint() * y_ * v)(0, 0).real(); }

  VectorXcd full_voltages(const VectorXcd& load_voltages) const {
    VectorXcd v(load_voltages.size() + 1);
    v(0) = slack_;
    v.tail(load_voltages.size()) = load_voltages;
    return v;
  }

 private:
  Complex slack_;
  MatrixXcd y_;
  MatrixXcd zll_;
  VectorXcd noload_;
};

// w = -YLL^{-1} YL0 v_slack
inline VectorXcd solve_noload(const BusNetwork& net, const MatrixXcd& y) {
  const Eigen::Index n = y.rows() - 1;
  if (n != static_cast<Eigen::Index>(net.size()) - 1) {
    throw ValidationError("admittance matrix does not match network size");
  }
  Eigen::FullPivLU<MatrixXcd> lu(y.bottomRightCorner(n, n));
  if (!lu.isInvertible()) throw ModelError("YLL is singular");
  return lu.solve(-y.bottomLeftCorner(n, 1) * net.slack_voltage());
}

struct PowerFlowResult {
  VectorXcd voltages;  // all buses, slack first
  double loss = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

struct PowerFlowOptions {
  double tolerance = 1e-10;
  int max_iterations = 100;
};

// Fixed-point iteration v <- w + YLL^{-1} diag(conj(v))^{-1} conj(s) where
// `injections` holds the complex power injected at each non-slack bus.
inline PowerFlowResult ac_power_flow(const PowerFlowModel& model, const VectorXcd& injections,
                                     const PowerFlowOptions& opts = {}) {
  const Eigen::Index n = model.load_bus_count();
  if (injections.size() != n) {
    throw ValidationError("injection vector must have one entry per non-slack bus");
  }
  const VectorXcd& w = model.noload();
  const VectorXcd sc = injections.conjugate();
  VectorXcd v = w;
  double residual = 0.0;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    VectorXcd next = w + model.impedance() * sc.cwiseQuotient(v.conjugate());
    residual = (next - v).cwiseAbs().maxCoeff();
    v = std::move(next);
    if (!std::isfinite(residual) || v.cwiseAbs().minCoeff() < 1e-3) {
      throw ConvergenceError("power flow diverged", residual, it);
    }
    if (residual < opts.tolerance) {
      PowerFlowResult out;
      out.voltages = model.full_voltages(v);
      out.loss = model.loss(out.voltages);
      out.iterations = it;
      out.residual = residual;
      return out;
    }
  }
  throw ConvergenceError("power flow did not converge in " +
                             std::to_string(opts.max_iterations) +
                             " iterations (last residual " + std::to_string(residual) + ")",
                         residual, opts.max_iterations);
}

inline PowerFlowResult ac_power_flow(const BusNetwork& net, const VectorXcd& injections,
                                     const PowerFlowOptions& opts = {}) {
  return ac_power_flow(PowerFlowModel(net), injections, opts);
}

// Quadratic surrogate loss(x) = x' Lambda x + lambda' x + sigma.
struct LossQuadratic {
  MatrixXd Lambda;
  VectorXd lambda;
  double sigma = 0.0;

  double evaluate(const VectorXd& x) const {
    return x.dot(Lambda * x) + lambda.dot(x) + sigma;
  }
};

// Symmetrise and clip negative eigenvalues. Returns the smallest eigenvalue
// seen before clipping.
inline double project_psd(MatrixXd& m) {
  m = 0.5 * (m + m.transpose());
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  VectorXd vals = eig.eigenvalues();
  const double min_before = vals.minCoeff();
  if (min_before >= 0.0) return min_before;
  vals = vals.cwiseMax(0.0);
  m = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
  m = 0.5 * (m + m.transpose());
  return min_before;
}

namespace detail {

// d v / d x for x = [P(buses); Q(buses)] at the no-load point, all buses
// (slack row is zero). First-order Taylor expansion of the fixed-point map.
inline MatrixXcd voltage_sensitivity(const PowerFlowModel& model,
                                     const std::vector<Eigen::Index>& load_cols) {
  const Eigen::Index n = model.load_bus_count();
  const auto m = static_cast<Eigen::Index>(load_cols.size());
  const VectorXcd& w = model.noload();
  MatrixXcd sens = MatrixXcd::Zero(n + 1, 2 * m);
  const Complex j{0.0, 1.0};
  for (Eigen::Index c = 0; c < m; ++c) {
    const Eigen::Index k = load_cols[static_cast<std::size_t>(c)];
    const VectorXcd col = model.impedance().col(k) / std::conj(w(k));
    sens.block(1, c, n, 1) = col;
    sens.block(1, m + c, n, 1) = -j * col;
  }
  return sens;
}

inline MatrixXd magnitude_jacobian(const PowerFlowModel& model, const MatrixXcd& sens) {
  const VectorXcd& w = model.noload();
  const Eigen::Index n = w.size();
  MatrixXd k(n, sens.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Complex wc = std::conj(w(i)) / std::abs(w(i));
    for (Eigen::Index c = 0; c < sens.cols(); ++c) {
      k(i, c) = (wc * sens(i + 1, c)).real();
    }
  }
  return k;
}

inline LossQuadratic loss_quadratic(const PowerFlowModel& model, const MatrixXcd& sens) {
  const MatrixXd g = model.admittance().real();
  const VectorXcd v0 = model.full_voltages(model.noload());
  const MatrixXcd gs = g * sens;
  LossQuadratic q;
  q.Lambda = (sens.adjoint() * gs).real();
  project_psd(q.Lambda);
  q.lambda = 2.0 * (v0.adjoint() * gs).real().transpose();
  q.sigma = (v0.adjoint() * g * v0)(0, 0).real();
  return q;
}

inline std::vector<Eigen::Index> pcc_columns(const BusNetwork& net,
                                             const std::vector<std::string>& pcc) {
  std::vector<Eigen::Index> cols;
  for (const std::string& id : pcc) {
    if (!net.contains(id)) throw ModelError("PCC bus '" + id + "' is not in the network");
    cols.push_back(static_cast<Eigen::Index>(net.load_index_of(id)));
  }
  return cols;
}

}  // namespace detail

struct VoltageModel {
  MatrixXd K;  // (n_bus - 1) x 2m
  VectorXd b;  // no-load magnitudes
};

// Affine voltage-magnitude model V = K x + b about the no-load point `w`
// for injections x = [P_pcc; Q_pcc].
inline VoltageModel linearize_voltage(const BusNetwork& net, const VectorXcd& w,
                                      const std::vector<std::string>& pcc) {
  const PowerFlowModel model(net);
  if ((model.noload() - w).cwiseAbs().maxCoeff() > 1e-8) {
    throw ValidationError("w is not the no-load solution of this network");
  }
  const auto cols = detail::pcc_columns(net, pcc);
  return {detail::magnitude_jacobian(model, detail::voltage_sensitivity(model, cols)),
          w.cwiseAbs()};
}

// Quadratic network-loss model from the affine complex-voltage model.
inline LossQuadratic build_loss_quadratic(const BusNetwork& net, const VectorXcd& w,
                                          const std::vector<std::string>& pcc) {
  const PowerFlowModel model(net);
  if ((model.noload() - w).cwiseAbs().maxCoeff() > 1e-8) {
    throw ValidationError("w is not the no-load solution of this network");
  }
  const auto cols = detail::pcc_columns(net, pcc);
  return detail::loss_quadratic(model, detail::voltage_sensitivity(model, cols));
}

// Voltage and loss models for one timestep, after background injections
// have been folded into the constant terms.
struct FoldedModel {
  MatrixXd K;
  VectorXd b;
  LossQuadratic loss;
};

// Linearised network seen from the converter terminals. Also retains the
// all-bus sensitivities so background demand can be folded in per timestep
// without re-linearising.
class LinearizedGrid {
 public:
  LinearizedGrid(const BusNetwork& net, std::vector<std::string> pcc_buses)
      : pcc_buses_(std::move(pcc_buses)), bus_ids_(net.load_bus_ids()) {
    const PowerFlowModel model(net);
    const Eigen::Index n = model.load_bus_count();
    std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
    const MatrixXcd sens = detail::voltage_sensitivity(model, all);
    k_all_ = detail::magnitude_jacobian(model, sens);
    loss_all_ = detail::loss_quadratic(model, sens);
    b_ = model.noload().cwiseAbs();

    pcc_cols_ = detail::pcc_columns(net, pcc_buses_);
    for (std::size_t a = 0; a < pcc_cols_.size(); ++a) {
      for (std::size_t c = a + 1; c < pcc_cols_.size(); ++c) {
        if (pcc_cols_[a] == pcc_cols_[c]) throw ModelError("PCC buses must be distinct");
      }
    }
    const auto m = static_cast<Eigen::Index>(pcc_cols_.size());
    selector_ = MatrixXd::Zero(2 * n, 2 * m);
    for (Eigen::Index c = 0; c < m; ++c) {
      selector_(pcc_cols_[static_cast<std::size_t>(c)], c) = 1.0;
      selector_(n + pcc_cols_[static_cast<std::size_t>(c)], m + c) = 1.0;
    }
    k_ = k_all_ * selector_;
    loss_.Lambda = selector_.transpose() * loss_all_.Lambda * selector_;
    loss_.lambda = selector_.transpose() * loss_all_.lambda;
    loss_.sigma = loss_all_.sigma;
    lambda_all_sel_ = loss_all_.Lambda * selector_;
  }

  std::size_t terminal_count() const { return pcc_buses_.size(); }
  const std::vector<std::string>& pcc_buses() const { return pcc_buses_; }
  // Non-slack bus ids, the row order of K and b.
  const std::vector<std::string>& bus_ids() const { return bus_ids_; }

  const MatrixXd& K() const { return k_; }
  const VectorXd& b() const { return b_; }
  const LossQuadratic& loss() const { return loss_; }

  const MatrixXd& K_all() const { return k_all_; }
  const LossQuadratic& loss_all() const { return loss_all_; }

  // Stacks per-bus complex injections into [P; Q].
  static VectorXd stack(const VectorXcd& s) {
    VectorXd x(2 * s.size());
    x << s.real(), s.imag();
    return x;
  }

  // Substitutes x_total = x_conv + x_background into the voltage and loss
  // models.
  FoldedModel fold(const VectorXcd& background) const {
    const Eigen::Index n = static_cast<Eigen::Index>(bus_ids_.size());
    if (background.size() != n) {
      throw ValidationError("background injections must cover every non-slack bus");
    }
    const VectorXd xd = stack(background);
    FoldedModel out;
    out.K = k_;
    out.b = b_ + k_all_ * xd;
    out.loss.Lambda = loss_.Lambda;
    out.loss.lambda = loss_.lambda + 2.0 * lambda_all_sel_.transpose() * xd;
    out.loss.sigma = loss_all_.evaluate(xd);
    return out;
  }

  // Converter injections [P; Q] mapped onto the all-bus injection vector.
  VectorXcd expand(const VectorXd& x_conv) const {
    const Eigen::Index n = static_cast<Eigen::Index>(bus_ids_.size());
    const auto m = static_cast<Eigen::Index>(pcc_cols_.size());
    VectorXcd s = VectorXcd::Zero(n);
    for (Eigen::Index c = 0; c < m; ++c) {
      s(pcc_cols_[static_cast<std::size_t>(c)]) += Complex{x_conv(c), x_conv(m + c)};
    }
    return s;
  }

 private:
  std::vector<std::string> pcc_buses_;
  std::vector<std::string> bus_ids_;
  std::vector<Eigen::Index> pcc_cols_;
  MatrixXd k_all_;
  LossQuadratic loss_all_;
  VectorXd b_;
  MatrixXd selector_;
  MatrixXd k_;
  LossQuadratic loss_;
  MatrixXd lambda_all_sel_;
};

struct LinearizationCheck {
  double k_error = 0.0;       // max |K - K_fd|
  double lambda_error = 0.0;  // max |lambda - lambda_fd|
  double min_eigenvalue = 0.0;  // of the terminal Lambda
};

// Central finite differences of the ac power flow at zero converter
// injection, compared against the linearised terminal model.
inline LinearizationCheck check_linearization(const BusNetwork& net, const LinearizedGrid& grid,
                                              double step = 1e-6) {
  const PowerFlowModel model(net);
  const auto m2 = static_cast<Eigen::Index>(2 * grid.terminal_count());
  LinearizationCheck out;
  for (Eigen::Index j = 0; j < m2; ++j) {
    VectorXd e = VectorXd::Zero(m2);
    e(j) = step;
    const PowerFlowResult up = ac_power_flow(model, grid.expand(e));
    const PowerFlowResult dn = ac_power_flow(model, grid.expand(-e));
    const VectorXd dv = (up.voltages.tail(up.voltages.size() - 1).cwiseAbs() -
                         dn.voltages.tail(dn.voltages.size() - 1).cwiseAbs()) /
                        (2.0 * step);
    out.k_error = std::max(out.k_error, (dv - grid.K().col(j)).cwiseAbs().maxCoeff());
    const double dl = (up.loss - dn.loss) / (2.0 * step);
    out.lambda_error = std::max(out.lambda_error, std::abs(dl - grid.loss().lambda(j)));
  }
  if (m2 > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(grid.loss().Lambda);
    out.min_eigenvalue = eig.eigenvalues().minCoeff();
  }
  return out;
}

}  // namespace mpcard
