#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "vmerton/model.hpp"
#include "vmerton/numkernel.hpp"

namespace vmerton {

/// F(psi) = a + psi B + (q_1 psi_1^2, ..., q_d psi_d^2) with psi a row
/// vector; stored as column vectors, so psi B is evaluated as B^T psi.
struct VectorRiccatiRHS {
  Eigen::VectorXd a;
  Eigen::MatrixXd B;
  Eigen::VectorXd q;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(a.size()); }
  Eigen::VectorXd operator()(const Eigen::VectorXd& psi) const;
};

/// f(psi) = psi M + M^T psi + 2 psi S psi + Gamma for symmetric psi.
struct MatrixRiccatiRHS {
  Eigen::MatrixXd M;
  Eigen::MatrixXd S;
  Eigen::MatrixXd Gamma;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(M.rows()); }
  Eigen::MatrixXd operator()(const Eigen::MatrixXd& psi) const;
};

struct BlowUp {
  double detected_at;  // last node with an acceptable value: estimate of T_max
  double norm;         // sup-norm that tripped the threshold (inf on overflow)
};

/// Solution psi on a grid. After a blow-up, values stop at the last
/// acceptable node, so values.size() may be smaller than grid.size().
template <class Value>
struct RiccatiPath {
  TimeGrid grid;
  std::vector<Value> values;
  std::optional<BlowUp> blowup;
  double residual = 0.0;

  bool complete() const noexcept { return !blowup && values.size() == grid.size(); }
  const Value& operator[](std::size_t j) const { return values[j]; }
  /// psi(T - t_j): node n - j. Throws BlowUpError on an incomplete path.
  const Value& reversed(std::size_t j) const;
  Sampled<Value> sampled() const;
};

using VectorRiccatiPath = RiccatiPath<Eigen::VectorXd>;
using MatrixRiccatiPath = RiccatiPath<Eigen::MatrixXd>;

struct SolverOptions {
  double blowup_threshold = 1e8;
  bool compute_residual = true;
};

VectorRiccatiRHS build_F1(const VectorModel& model);
VectorRiccatiRHS build_F2(const VectorModel& model);
MatrixRiccatiRHS build_wishart_rhs(const WishartModel& model);

/// psi = K * F(psi) by the fractional Adams PECE scheme, component i
/// convolved with K_i.
VectorRiccatiPath solve_riccati_vector(const DiagonalKernel& kernel, const VectorRiccatiRHS& rhs,
                                       const TimeGrid& grid, const SolverOptions& options = {});

/// psi = f(psi) * K. With distinct kernels the right convolution is
/// symmetrized: entry (i, j) is convolved with (K_i + K_j) / 2, which keeps
/// psi symmetric and equals f(psi) * K whenever the kernels coincide.
MatrixRiccatiPath solve_riccati_matrix(const DiagonalKernel& kernel, const MatrixRiccatiRHS& rhs,
                                       const TimeGrid& grid, const SolverOptions& options = {});

/// Classical limit of a constant kernel K_i = c_i: the Riccati ODE
/// psi' = c o F(psi), psi(0) = 0 (entrywise (c_i + c_j)/2 in the matrix
/// case), by RK4 with `substeps` steps per grid interval. Kernels only
/// contribute their scale.
VectorRiccatiPath solve_riccati_ode(const DiagonalKernel& kernel, const VectorRiccatiRHS& rhs,
                                    const TimeGrid& grid, std::size_t substeps = 10,
                                    const SolverOptions& options = {});
MatrixRiccatiPath solve_riccati_ode(const DiagonalKernel& kernel, const MatrixRiccatiRHS& rhs,
                                    const TimeGrid& grid, std::size_t substeps = 10,
                                    const SolverOptions& options = {});

/// Per-component sufficient condition for a global solution of the
/// general-correlation equation when D is diagonal.
struct GlobalExistence {
  bool applicable = false;  // false when D has nonzero off-diagonal entries
  std::vector<bool> components;

  bool all() const noexcept;
};

GlobalExistence check_global_existence_diagonal(const VectorModel& model);

/// sup_j |psi(t_j) - (K * F(psi))(t_j)| using a product midpoint rule that
/// is independent of the solver weights.
double verify_fixed_point(const VectorRiccatiPath& path, const DiagonalKernel& kernel,
                          const VectorRiccatiRHS& rhs);
double verify_fixed_point(const MatrixRiccatiPath& path, const DiagonalKernel& kernel,
                          const MatrixRiccatiRHS& rhs);

}  // namespace vmerton
