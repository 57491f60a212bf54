#pragma once

#include <string>

#include "ratesmooth/graph.hpp"
#include "ratesmooth/types.hpp"

namespace ratesmooth {

/// Full symmetric eigensystem with eigenvalues sorted descending, so the
/// smoothest (lowest-eigenvalue) directions occupy the trailing columns.
struct EigenSystem {
  Vector values;
  Matrix vectors;  // columns aligned with values
};

/// Symmetric positive-semidefinite precision structure with known rank and
/// null space. The prior for a random-effect block u is N(0, [tau * R]^-).
struct StructureMatrix {
  Matrix entries;
  int rank = 0;
  Matrix null_basis;  // dim x nullity, orthonormal
  bool scaled = false;
  double scale_factor = 1.0;
  double log_gdet = 0.0;  // log pseudo-determinant (positive eigenvalues)

  int dim() const { return static_cast<int>(entries.rows()); }
  int nullity() const { return static_cast<int>(null_basis.cols()); }
};

enum class InteractionType { I, II, III, IV };

InteractionType parse_interaction_type(const std::string& s);
std::string to_string(InteractionType t);

/// Random-walk structure matrix D'D for the given difference order (1 or 2).
/// Rank n - order; null space holds the constant (and, for order 2, linear)
/// direction.
StructureMatrix rw_structure(int n, int order);

/// Intrinsic CAR structure D_W - W. Nullity equals the number of connected
/// components; row sums are exactly zero.
StructureMatrix icar_structure(const AdjacencyGraph& graph);

/// Rescale R so the geometric mean of the marginal variances (diagonal of the
/// Moore-Penrose inverse) equals one. Idempotent.
StructureMatrix scale_structure(const StructureMatrix& r);

/// Two-way interaction structure from Kronecker products of the second-axis
/// (time or space) structure and the age structure, with the age index
/// varying fastest. Inputs must be scaled.
///   I:  identity        II: R_second x I
///   III: I x R_age      IV: R_second x R_age
StructureMatrix interaction_structure(InteractionType type,
                                      const StructureMatrix& second,
                                      const StructureMatrix& age);

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
EigenSystem eigendecompose(const Matrix& m);

/// Moore-Penrose inverse via eigendecomposition; eigenvalues below
/// 1e-9 * lambda_max are treated as zero.
Matrix generalized_inverse(const Matrix& m);

}  // namespace ratesmooth
