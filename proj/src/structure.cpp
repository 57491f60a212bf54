#include "ratesmooth/structure.hpp"

#include <cmath>

#include <unsupported/Eigen/KroneckerProduct>

namespace ratesmooth {

InteractionType parse_interaction_type(const std::string& s) {
  if (s == "I" || s == "i" || s == "1") return InteractionType::I;
  if (s == "II" || s == "ii" || s == "2") return InteractionType::II;
  if (s == "III" || s == "iii" || s == "3") return InteractionType::III;
  if (s == "IV" || s == "iv" || s == "4") return InteractionType::IV;
  throw DataError("unknown interaction type '" + s + "'");
}

std::string to_string(InteractionType t) {
  switch (t) {
    case InteractionType::I: return "I";
    case InteractionType::II: return "II";
    case InteractionType::III: return "III";
    case InteractionType::IV: return "IV";
  }
  return "?";
}

EigenSystem eigendecompose(const Matrix& m) {
  if (m.rows() != m.cols()) throw NumericalError("eigendecompose: not square");
  double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (asym > 1e-10 * scale)
    throw NumericalError("eigendecompose: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success)
    throw NumericalError("eigendecompose: solver failed");
  const int n = static_cast<int>(m.rows());
  EigenSystem es;
  es.values = solver.eigenvalues().reverse();
  es.vectors.resize(n, n);
  for (int j = 0; j < n; ++j) es.vectors.col(j) = solver.eigenvectors().col(n - 1 - j);
  return es;
}

Matrix generalized_inverse(const Matrix& m) {
  EigenSystem es = eigendecompose(m);
  double lmax = es.values.size() > 0 ? std::abs(es.values(0)) : 0.0;
  double cutoff = 1e-9 * lmax;
  Vector inv = Vector::Zero(es.values.size());
  for (int i = 0; i < es.values.size(); ++i)
    if (es.values(i) > cutoff) inv(i) = 1.0 / es.values(i);
  return es.vectors * inv.asDiagonal() * es.vectors.transpose();
}

namespace {

double pseudo_log_det(const Matrix& m, int rank) {
  EigenSystem es = eigendecompose(m);
  double s = 0.0;
  for (int i = 0; i < rank; ++i) s += std::log(es.values(i));
  return s;
}

// Orthonormal basis of the complement of the (orthonormal) columns of n.
Matrix orthogonal_complement(const Matrix& n, int dim) {
  if (n.cols() == 0) return Matrix::Identity(dim, dim);
  Eigen::HouseholderQR<Matrix> qr(n);
  Matrix q = qr.householderQ() * Matrix::Identity(dim, dim);
  return q.rightCols(dim - n.cols());
}

}  // namespace

StructureMatrix rw_structure(int n, int order) {
  if (order != 1 && order != 2)
    throw DataError("random-walk order must be 1 or 2");
  if (n < order + 1)
    throw DataError("random-walk structure needs at least order+1 points");
  Matrix d = Matrix::Zero(n - order, n);
  for (int i = 0; i < n - order; ++i) {
    if (order == 1) {
      d(i, i) = 1.0;
      d(i, i + 1) = -1.0;
    } else {
      d(i, i) = 1.0;
      d(i, i + 1) = -2.0;
      d(i, i + 2) = 1.0;
    }
  }
  StructureMatrix r;
  r.entries = d.transpose() * d;
  r.rank = n - order;
  // constant plus (for order 2) linear trend, orthonormalized
  Matrix nb(n, order);
  nb.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
  if (order == 2) {
    Vector t = Vector::LinSpaced(n, 0, n - 1);
    t.array() -= t.mean();
    nb.col(1) = t / t.norm();
  }
  r.null_basis = nb;
  r.log_gdet = pseudo_log_det(r.entries, r.rank);
  return r;
}

StructureMatrix icar_structure(const AdjacencyGraph& graph) {
  const int n = graph.n_areas;
  if (n < 1) throw DataError("icar structure needs at least one area");
  StructureMatrix r;
  r.entries = -graph.adjacency();
  for (int i = 0; i < n; ++i) r.entries(i, i) = static_cast<double>(graph.degree[i]);
  r.rank = n - graph.n_components;
  Matrix nb = Matrix::Zero(n, graph.n_components);
  std::vector<int> size(graph.n_components, 0);
  for (int i = 0; i < n; ++i) ++size[graph.component[i]];
  for (int i = 0; i < n; ++i)
    nb(i, graph.component[i]) = 1.0 / std::sqrt(static_cast<double>(size[graph.component[i]]));
  r.null_basis = nb;
  r.log_gdet = pseudo_log_det(r.entries, r.rank);
  return r;
}

StructureMatrix scale_structure(const StructureMatrix& r) {
  if (r.entries.cwiseAbs().maxCoeff() == 0.0)
    throw NumericalError("scale_structure: zero matrix");
  Vector marg = generalized_inverse(r.entries).diagonal();
  double log_gm = 0.0;
  for (int i = 0; i < marg.size(); ++i) {
    if (marg(i) <= 0.0)
      throw NumericalError("scale_structure: nonpositive marginal variance at index " +
                           std::to_string(i + 1));
    log_gm += std::log(marg(i));
  }
  double c = std::exp(log_gm / static_cast<double>(marg.size()));
  StructureMatrix out = r;
  out.entries = c * r.entries;
  out.scaled = true;
  out.scale_factor = r.scale_factor * c;
  out.log_gdet = r.log_gdet + r.rank * std::log(c);
  return out;
}

StructureMatrix interaction_structure(InteractionType type,
                                      const StructureMatrix& second,
                                      const StructureMatrix& age) {
  const int t = second.dim();
  const int a = age.dim();
  if (t < 1 || a < 1) throw DataError("interaction_structure: empty factor");
  if (!second.scaled || !age.scaled)
    throw DataError("interaction_structure: factors must be scaled");

  StructureMatrix r;
  const Matrix it = Matrix::Identity(t, t);
  const Matrix ia = Matrix::Identity(a, a);
  // null(left x right) = N_left x R^a  +  C_left x N_right   (orthogonal)
  Matrix n_left, n_right;
  switch (type) {
    case InteractionType::I:
      r.entries = Matrix::Identity(t * a, t * a);
      r.rank = t * a;
      break;
    case InteractionType::II:
      r.entries = Eigen::kroneckerProduct(second.entries, ia);
      r.rank = second.rank * a;
      n_left = second.null_basis;
      break;
    case InteractionType::III:
      r.entries = Eigen::kroneckerProduct(it, age.entries);
      r.rank = t * age.rank;
      n_right = age.null_basis;
      break;
    case InteractionType::IV:
      r.entries = Eigen::kroneckerProduct(second.entries, age.entries);
      r.rank = second.rank * age.rank;
      n_left = second.null_basis;
      n_right = age.null_basis;
      break;
  }
  const int n_l = static_cast<int>(n_left.cols());
  const int n_r = static_cast<int>(n_right.cols());
  Matrix nb(t * a, n_l * a + (t - n_l) * n_r);
  int col = 0;
  for (int j = 0; j < n_l; ++j)
    for (int k = 0; k < a; ++k)
      nb.col(col++) = Eigen::kroneckerProduct(n_left.col(j), ia.col(k)).eval();
  if (n_r > 0) {
    Matrix c_left = orthogonal_complement(n_left.cols() ? n_left : Matrix(t, 0), t);
    for (int j = 0; j < c_left.cols(); ++j)
      for (int k = 0; k < n_r; ++k)
        nb.col(col++) = Eigen::kroneckerProduct(c_left.col(j), n_right.col(k)).eval();
  }
  r.null_basis = nb;
  r.scaled = true;  // scaled factors give a marginal-variance geometric mean of one
  r.scale_factor = 1.0;
  switch (type) {
    case InteractionType::I:
      r.log_gdet = 0.0;
      break;
    case InteractionType::II:
      r.log_gdet = a * second.log_gdet;
      break;
    case InteractionType::III:
      r.log_gdet = t * age.log_gdet;
      break;
    case InteractionType::IV:
      r.log_gdet = age.rank * second.log_gdet + second.rank * age.log_gdet;
      break;
  }
  return r;
}

}  // namespace ratesmooth
