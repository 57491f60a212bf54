#include "ratesmooth/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ratesmooth {

std::string to_string(ModelKind k) {
  return k == ModelKind::AgeTime ? "age-time" : "age-space";
}

std::string to_string(PriorKind p) {
  switch (p) {
    case PriorKind::RW1: return "rw1";
    case PriorKind::RW2: return "rw2";
    case PriorKind::ICar: return "icar";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

PriorKind parse_prior(const std::string& v) {
  if (v == "rw1") return PriorKind::RW1;
  if (v == "rw2") return PriorKind::RW2;
  if (v == "icar") return PriorKind::ICar;
  throw DataError("unknown prior '" + v + "'");
}

CovariateSpec parse_covariate_spec(const std::string& value) {
  auto toks = split_ws(value);
  if (toks.size() < 2)
    throw DataError("covariate spec needs '<name> <spatial|temporal> [...]'");
  CovariateSpec c;
  c.name = toks[0];
  if (toks[1] == "spatial") c.axis = CovariateAxis::Spatial;
  else if (toks[1] == "temporal") c.axis = CovariateAxis::Temporal;
  else throw DataError("covariate axis must be spatial or temporal");
  for (size_t i = 2; i < toks.size(); ++i) {
    const std::string& t = toks[i];
    if (t == "decorrelate") c.decorrelate = true;
    else if (t == "exact-count") c.removal = RemovalCount::Exact;
    else if (t.rfind("k=", 0) == 0) c.k = std::stoi(t.substr(2));
    else throw DataError("unknown covariate option '" + t + "'");
  }
  if (c.k >= 0 && !c.decorrelate) c.decorrelate = true;
  return c;
}

}  // namespace

ModelSpec parse_model_spec(const std::string& config_text) {
  ModelSpec spec;
  bool saw_kind = false, saw_second = false, saw_age = false;
  bool saw_interaction = false;
  PriorKind second = PriorKind::RW1;
  std::string second_key;

  std::string normalized = config_text;
  std::replace(normalized.begin(), normalized.end(), ';', '\n');
  std::istringstream in(normalized);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line == "age-time" || line == "age-space") {
        spec.kind = line == "age-time" ? ModelKind::AgeTime : ModelKind::AgeSpace;
        saw_kind = true;
        continue;
      }
      throw DataError("model spec: cannot parse '" + line + "'");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "kind") {
      if (value == "age-time") spec.kind = ModelKind::AgeTime;
      else if (value == "age-space") spec.kind = ModelKind::AgeSpace;
      else throw DataError("model spec: kind must be age-time or age-space");
      saw_kind = true;
    } else if (key == "age") {
      if (parse_prior(value) != PriorKind::RW1)
        throw DataError("model spec: the age effect uses an rw1 prior");
      saw_age = true;
    } else if (key == "time" || key == "space") {
      if (saw_second) throw DataError("model spec: duplicate second-axis prior");
      second = parse_prior(value);
      second_key = key;
      saw_second = true;
    } else if (key == "interaction") {
      if (value == "none") spec.interaction.reset();
      else spec.interaction = parse_interaction_type(value);
      saw_interaction = true;
    } else if (key == "covariate") {
      spec.covariates.push_back(parse_covariate_spec(value));
    } else {
      throw DataError("model spec: unknown key '" + key + "'");
    }
  }
  (void)saw_age;
  (void)saw_interaction;
  if (!saw_kind) throw DataError("model spec: missing kind");
  if (spec.kind == ModelKind::AgeTime) {
    if (saw_second && second_key != "time")
      throw DataError("model spec: age-time models take a 'time' prior, not '" +
                      second_key + "'");
    if (saw_second && second == PriorKind::ICar)
      throw DataError("model spec: icar is a spatial prior; age-time models "
                      "take rw1 or rw2");
    spec.second_prior = saw_second ? second : PriorKind::RW1;
  } else {
    if (saw_second && second_key != "space")
      throw DataError("model spec: age-space models take a 'space' prior, not '" +
                      second_key + "'");
    if (saw_second && second != PriorKind::ICar)
      throw DataError("model spec: age-space models require the icar prior");
    spec.second_prior = PriorKind::ICar;
  }
  for (const auto& c : spec.covariates) {
    bool spatial_model = spec.kind == ModelKind::AgeSpace;
    bool spatial_cov = c.axis == CovariateAxis::Spatial;
    if (spatial_model != spatial_cov)
      throw DataError("model spec: covariate '" + c.name +
                      "' axis does not match the model kind");
  }
  return spec;
}

std::string format_model_spec(const ModelSpec& spec) {
  std::ostringstream out;
  out << "kind = " << to_string(spec.kind) << "\n";
  out << "age = rw1\n";
  out << (spec.kind == ModelKind::AgeTime ? "time = " : "space = ")
      << to_string(spec.second_prior) << "\n";
  out << "interaction = "
      << (spec.interaction ? to_string(*spec.interaction) : std::string("none"))
      << "\n";
  for (const auto& c : spec.covariates) {
    out << "covariate = " << c.name << ' '
        << (c.axis == CovariateAxis::Spatial ? "spatial" : "temporal");
    if (c.decorrelate) {
      out << " decorrelate";
      if (c.k >= 0) out << " k=" << c.k;
      if (c.removal == RemovalCount::Exact) out << " exact-count";
    }
    out << "\n";
  }
  return out.str();
}

namespace {

// A one-level axis carries no random effect; the intercept absorbs it.
struct BlockStructures {
  std::optional<StructureMatrix> age;
  std::optional<StructureMatrix> second;
  std::optional<StructureMatrix> interaction;
};

BlockStructures build_structures(const ModelSpec& spec, int n_age, int n_second,
                                 const AdjacencyGraph* graph) {
  BlockStructures s;
  if (n_age > 1) s.age = scale_structure(rw_structure(n_age, 1));
  if (n_second > 1) {
    if (spec.kind == ModelKind::AgeSpace) {
      if (!graph) throw DataError("age-space models need an adjacency graph");
      if (graph->n_areas != n_second)
        throw DataError("graph has " + std::to_string(graph->n_areas) +
                        " areas but the model needs " + std::to_string(n_second));
      s.second = scale_structure(icar_structure(*graph));
    } else {
      s.second = scale_structure(
          rw_structure(n_second, spec.second_prior == PriorKind::RW2 ? 2 : 1));
    }
  }
  if (spec.interaction) {
    if (!s.age || !s.second)
      throw DataError("interaction effects need at least two levels on both "
                      "axes");
    s.interaction = interaction_structure(*spec.interaction, *s.second, *s.age);
  }
  return s;
}

// Raw (unorthonormalized) constraint rows over [alpha | age | second | delta].
struct RawConstraints {
  std::vector<Vector> main_rows;
  std::vector<Vector> interaction_rows;
  int expected_main = 0;
  int expected_interaction = 0;
};

RawConstraints raw_constraint_rows(const ModelSpec& spec,
                                   const BlockStructures& s, int n_age,
                                   int n_second) {
  const int a = n_age, t = n_second;
  const bool has_age = s.age.has_value();
  const bool has_second = s.second.has_value();
  const int n_delta = spec.interaction ? a * t : 0;
  const int dim = 1 + (has_age ? a : 0) + (has_second ? t : 0) + n_delta;
  const int age_off = 1;
  const int second_off = 1 + (has_age ? a : 0);
  const int delta_off = second_off + (has_second ? t : 0);
  RawConstraints rc;

  auto push_main = [&](int off, const Vector& v) {
    Vector row = Vector::Zero(dim);
    row.segment(off, v.size()) = v;
    rc.main_rows.push_back(row);
  };

  // Age: sum to zero.
  if (has_age) {
    push_main(age_off, Vector::Ones(a));
    rc.expected_main += 1;
  }
  // Second axis: one sum per connectivity component; the RW2 linear trend
  // stays unconstrained.
  if (has_second) {
    if (spec.second_prior == PriorKind::ICar) {
      const Matrix& nb = s.second->null_basis;
      for (int j = 0; j < nb.cols(); ++j) push_main(second_off, nb.col(j));
      rc.expected_main += static_cast<int>(nb.cols());
    } else {
      push_main(second_off, Vector::Ones(t));
      rc.expected_main += 1;
    }
  }

  if (!spec.interaction) return rc;

  auto push_delta = [&](const Vector& v) {
    Vector row = Vector::Zero(dim);
    row.segment(delta_off, n_delta) = v;
    rc.interaction_rows.push_back(row);
  };

  if (*spec.interaction == InteractionType::I) {
    push_delta(Vector::Ones(n_delta));
    rc.expected_interaction = 1;
    return rc;
  }

  // Families u' delta_{.,a} = 0 and v' delta_{t,.} = 0 over the factor null
  // bases; dependent rows are removed afterwards.
  const Matrix& n_left = s.second->null_basis;  // second axis
  const Matrix& n_right = s.age->null_basis;    // age axis
  bool use_left = *spec.interaction == InteractionType::II ||
                  *spec.interaction == InteractionType::IV;
  bool use_right = *spec.interaction == InteractionType::III ||
                   *spec.interaction == InteractionType::IV;
  int n_l = use_left ? static_cast<int>(n_left.cols()) : 0;
  int n_r = use_right ? static_cast<int>(n_right.cols()) : 0;
  if (use_left) {
    for (int j = 0; j < n_l; ++j)
      for (int k = 0; k < a; ++k) {
        Vector v = Vector::Zero(n_delta);
        for (int ti = 0; ti < t; ++ti) v(ti * a + k) = n_left(ti, j);
        push_delta(v);
      }
  }
  if (use_right) {
    for (int j = 0; j < n_r; ++j)
      for (int ti = 0; ti < t; ++ti) {
        Vector v = Vector::Zero(n_delta);
        for (int k = 0; k < a; ++k) v(ti * a + k) = n_right(k, j);
        push_delta(v);
      }
  }
  rc.expected_interaction = n_l * a + n_r * t - n_l * n_r;
  return rc;
}

// Orthonormalize rows, dropping dependent ones. Returns an m x dim matrix.
Matrix orthonormal_rows(const std::vector<Vector>& rows, int dim,
                        int expected) {
  if (rows.empty()) return Matrix(0, dim);
  Matrix stacked(static_cast<int>(rows.size()), dim);
  for (size_t i = 0; i < rows.size(); ++i) stacked.row(static_cast<int>(i)) = rows[i];
  Eigen::ColPivHouseholderQR<Matrix> qr(stacked.transpose());
  qr.setThreshold(1e-10);
  int rank = static_cast<int>(qr.rank());
  if (rank != expected)
    throw NumericalError("constraint rows have rank " + std::to_string(rank) +
                         ", expected " + std::to_string(expected));
  Matrix q = qr.householderQ() * Matrix::Identity(dim, rank);
  return q.transpose();
}

}  // namespace

ConstraintSet constraint_set(const ModelSpec& spec, int n_age, int n_second,
                             const AdjacencyGraph* graph) {
  BlockStructures s = build_structures(spec, n_age, n_second, graph);
  RawConstraints rc = raw_constraint_rows(spec, s, n_age, n_second);
  ConstraintSet cs;
  std::vector<Vector> all = rc.main_rows;
  all.insert(all.end(), rc.interaction_rows.begin(), rc.interaction_rows.end());
  const int dim = 1 + (s.age ? n_age : 0) + (s.second ? n_second : 0) +
                  (spec.interaction ? n_age * n_second : 0);
  cs.rows = orthonormal_rows(all, dim, rc.expected_main + rc.expected_interaction);
  cs.n_main_rows = rc.expected_main;
  cs.n_interaction_rows = rc.expected_interaction;
  return cs;
}

const LatentBlock& AssembledModel::block(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw DataError("model has no latent block '" + name + "'");
}

bool AssembledModel::has_block(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return true;
  return false;
}

Vector AssembledModel::linear_predictor(const Vector& x) const {
  return log_exposure + incidence * x;
}

Vector AssembledModel::pointwise_log_likelihood(const Vector& x) const {
  constexpr double log_2pi = 1.8378770664093453;
  Vector eta = linear_predictor(x);
  Vector out = Vector::Zero(observed.size());
  for (size_t i = 0; i < observed.size(); ++i) {
    int c = observed[i];
    if (family == ObservationFamily::Poisson) {
      out(static_cast<int>(i)) = cells[c].deaths * eta(c) - std::exp(eta(c)) -
                                 std::lgamma(cells[c].deaths + 1.0);
    } else {
      double resid = (cells[c].deaths - eta(c)) / noise_sd;
      out(static_cast<int>(i)) =
          -0.5 * (log_2pi + 2.0 * std::log(noise_sd) + resid * resid);
    }
  }
  return out;
}

double AssembledModel::log_likelihood(const Vector& x) const {
  return pointwise_log_likelihood(x).sum();
}

double AssembledModel::deviance(const Vector& x) const {
  return -2.0 * log_likelihood(x);
}

double AssembledModel::log_prior(const Vector& x, const Vector& theta) const {
  constexpr double log_2pi = 1.8378770664093453;
  double lp = 0.0;
  for (const auto& b : blocks) {
    Vector xb = x.segment(b.offset, b.dim);
    double quad = xb.dot(b.r * xb);
    if (b.fixed_precision > 0.0) {
      lp += 0.5 * b.dim * (std::log(b.fixed_precision) - log_2pi) -
            0.5 * b.fixed_precision * quad;
    } else {
      double th = theta(b.theta_index);
      lp += 0.5 * b.rank * (th - log_2pi) + 0.5 * b.log_gdet -
            0.5 * std::exp(th) * quad;
    }
  }
  return lp;
}

double AssembledModel::log_prior_theta(const Vector& theta) const {
  // flat prior on each standard deviation, mapped to theta = log precision
  double lp = 0.0;
  for (int i = 0; i < theta.size(); ++i)
    lp += -std::log(2.0) - 0.5 * theta(i);
  return lp;
}

Matrix AssembledModel::prior_precision(const Vector& theta) const {
  Matrix q = Matrix::Zero(n_latent, n_latent);
  for (const auto& b : blocks) {
    double tau = b.fixed_precision > 0.0 ? b.fixed_precision
                                         : std::exp(theta(b.theta_index));
    q.block(b.offset, b.offset, b.dim, b.dim) = tau * b.r;
  }
  return q;
}

double AssembledModel::log_posterior(const Vector& x, const Vector& theta) const {
  return log_likelihood(x) + log_prior(x, theta) + log_prior_theta(theta);
}

Vector AssembledModel::log_posterior_gradient(const Vector& x,
                                              const Vector& theta) const {
  Vector eta = linear_predictor(x);
  Vector g = -prior_precision(theta) * x;
  for (int c : observed) {
    double resid = family == ObservationFamily::Poisson
                       ? cells[c].deaths - std::exp(eta(c))
                       : (cells[c].deaths - eta(c)) / (noise_sd * noise_sd);
    g += resid * incidence.row(c).transpose();
  }
  return g;
}

namespace {

constexpr double kFixedEffectPrecision = 0.001;

struct AggregatedCells {
  std::vector<AssembledModel::Cell> cells;
  std::vector<std::string> second_labels;
};

AggregatedCells aggregate(const ModelSpec& spec, const Dataset& data,
                          const std::string& sex,
                          const AdjacencyGraph* graph) {
  auto panel_it = data.panels.find(sex);
  if (panel_it == data.panels.end())
    throw DataError("dataset has no sex '" + sex + "'");
  const auto& panel = panel_it->second;

  AggregatedCells out;
  const int n_age = data.n_ages();
  std::vector<int> area_order(data.n_areas());
  if (spec.kind == ModelKind::AgeSpace) {
    // spatial indexing follows the graph
    for (int s = 0; s < graph->n_areas; ++s) {
      int idx = -1;
      for (int a = 0; a < data.n_areas(); ++a)
        if (data.area_labels[a] == graph->labels[s]) idx = a;
      if (idx < 0)
        throw DataError("graph area '" + graph->labels[s] +
                        "' is not in the dataset");
      area_order[s] = idx;
    }
    if (data.n_areas() != graph->n_areas)
      throw DataError("dataset has areas not present in the graph");
    out.second_labels = graph->labels;
  } else {
    for (int y : data.years) out.second_labels.push_back(std::to_string(y));
  }

  const int n_second = static_cast<int>(out.second_labels.size());
  out.cells.resize(static_cast<size_t>(n_second) * n_age);
  for (int s2 = 0; s2 < n_second; ++s2)
    for (int g = 0; g < n_age; ++g) {
      AssembledModel::Cell cell;
      cell.age = g;
      cell.second = s2;
      double deaths = 0.0, pop = 0.0;
      bool any = false;
      auto accumulate = [&](int area, int year) {
        int idx = data.cell(area, year, g);
        if (panel.missing[idx]) return;
        any = true;
        deaths += panel.deaths[idx];
        pop += panel.population[idx];
      };
      if (spec.kind == ModelKind::AgeSpace) {
        for (int y = 0; y < data.n_years(); ++y) accumulate(area_order[s2], y);
      } else {
        for (int a = 0; a < data.n_areas(); ++a) accumulate(a, s2);
      }
      if (any) {
        if (pop <= 0.0)
          throw DataError("non-missing cell with nonpositive exposure");
        cell.deaths = deaths;
        cell.population = pop;
      } else {
        cell.missing = true;
        // exposure for prediction: pooled population ignoring missing flags
        double pred_pop = 0.0;
        if (spec.kind == ModelKind::AgeSpace) {
          for (int y = 0; y < data.n_years(); ++y)
            pred_pop += panel.population[data.cell(area_order[s2], y, g)];
        } else {
          for (int a = 0; a < data.n_areas(); ++a)
            pred_pop += panel.population[data.cell(a, s2, g)];
        }
        cell.population = pred_pop;
      }
      out.cells[static_cast<size_t>(s2) * n_age + g] = cell;
    }
  return out;
}

}  // namespace

AssembledModel assemble_model(const ModelSpec& spec, const Dataset& data,
                              const std::string& sex,
                              const AdjacencyGraph* graph) {
  if (spec.kind == ModelKind::AgeSpace && !graph)
    throw DataError("age-space models need an adjacency graph");

  AssembledModel m;
  m.spec = spec;
  m.sex = sex;
  m.n_age = data.n_ages();
  m.age_labels = data.age_labels;

  AggregatedCells agg = aggregate(spec, data, sex, graph);
  m.cells = std::move(agg.cells);
  m.second_labels = std::move(agg.second_labels);
  m.n_second = static_cast<int>(m.second_labels.size());
  for (size_t i = 0; i < m.cells.size(); ++i)
    if (!m.cells[i].missing) m.observed.push_back(static_cast<int>(i));

  BlockStructures s = build_structures(spec, m.n_age, m.n_second, graph);

  const int n_cov = static_cast<int>(spec.covariates.size());
  const int n_delta = spec.interaction ? m.n_age * m.n_second : 0;
  m.n_latent = 1 + n_cov + (s.age ? m.n_age : 0) + (s.second ? m.n_second : 0) +
               n_delta;

  // layout: [alpha | beta | age | second | interaction]
  int off = 0;
  auto add_fixed = [&](const std::string& name, int dim) {
    LatentBlock b;
    b.name = name;
    b.offset = off;
    b.dim = dim;
    b.r = Matrix::Identity(dim, dim);
    b.fixed_precision = kFixedEffectPrecision;
    b.rank = dim;
    b.log_gdet = 0.0;
    m.blocks.push_back(std::move(b));
    off += dim;
  };
  int next_theta = 0;
  auto add_structured = [&](const std::string& name, const StructureMatrix& r) {
    LatentBlock b;
    b.name = name;
    b.offset = off;
    b.dim = r.dim();
    b.r = r.entries;
    b.theta_index = next_theta++;
    b.rank = r.rank;
    b.log_gdet = r.log_gdet;
    m.blocks.push_back(std::move(b));
    m.theta_names.push_back(name);
    off += b.dim;
  };

  add_fixed("intercept", 1);
  for (const auto& c : spec.covariates) add_fixed("beta:" + c.name, 1);
  if (s.age) add_structured("age", *s.age);
  if (s.second)
    add_structured(spec.kind == ModelKind::AgeTime ? "time" : "space",
                   *s.second);
  if (spec.interaction) add_structured("interaction", *s.interaction);
  m.n_theta = next_theta;

  // incidence map
  const int n_cells = static_cast<int>(m.cells.size());
  m.incidence = Matrix::Zero(n_cells, m.n_latent);
  m.log_exposure.resize(n_cells);
  const int age_off = s.age ? m.block("age").offset : -1;
  const int second_off =
      s.second
          ? m.block(spec.kind == ModelKind::AgeTime ? "time" : "space").offset
          : -1;
  const int delta_off = spec.interaction ? m.block("interaction").offset : -1;
  for (int c = 0; c < n_cells; ++c) {
    const auto& cell = m.cells[c];
    m.log_exposure(c) = std::log(cell.population);
    m.incidence(c, 0) = 1.0;
    if (age_off >= 0) m.incidence(c, age_off + cell.age) = 1.0;
    if (second_off >= 0) m.incidence(c, second_off + cell.second) = 1.0;
    if (delta_off >= 0)
      m.incidence(c, delta_off + cell.second * m.n_age + cell.age) = 1.0;
  }

  // covariates: standardize, then decorrelate when requested
  for (int j = 0; j < n_cov; ++j) {
    const auto& cspec = spec.covariates[j];
    CovariateVector cov;
    cov.name = cspec.name;
    cov.axis = cspec.axis;
    cov.values = data.covariate_values(cspec.name, sex);
    if (spec.kind == ModelKind::AgeSpace && graph) {
      // reorder per the graph's spatial indexing
      Vector reordered(m.n_second);
      for (int s2 = 0; s2 < m.n_second; ++s2) {
        int idx = -1;
        for (int a = 0; a < data.n_areas(); ++a)
          if (data.area_labels[a] == m.second_labels[s2]) idx = a;
        reordered(s2) = cov.values(idx);
      }
      cov.values = reordered;
    }
    if (cov.values.size() != m.n_second)
      throw DataError("covariate '" + cspec.name + "' length mismatch");
    CovariateVector std_cov = standardize_covariate(cov);

    AssembledModel::CovariateInfo info;
    info.name = cspec.name;
    info.axis = cspec.axis;
    info.center = std_cov.center;
    info.scale = std_cov.scale;
    info.coefficient_index = 1 + j;
    Vector design = std_cov.values;
    if (cspec.decorrelate) {
      int k = cspec.k >= 0 ? cspec.k
                           : (cspec.axis == CovariateAxis::Spatial ? 5 : 2);
      auto dec = decorrelate_covariate(design, eigendecompose(s.second.entries),
                                       k, cspec.removal);
      design = dec.z;
      info.decorrelated = true;
      info.k = k;
      info.removed_energy = dec.removed_energy;
    }
    m.covariate_info.push_back(info);
    for (int c = 0; c < n_cells; ++c)
      m.incidence(c, 1 + j) = design(m.cells[c].second);
  }

  // constraints over the covariate-free layout, then splice in beta columns
  ConstraintSet cs = constraint_set(spec, m.n_age, m.n_second, graph);
  const int m_rows = static_cast<int>(cs.rows.rows());
  m.constraints = Matrix::Zero(m_rows, m.n_latent);
  m.constraints.col(0) = cs.rows.col(0);
  m.constraints.middleCols(1 + n_cov, m.n_latent - 1 - n_cov) =
      cs.rows.rightCols(cs.rows.cols() - 1);

  // orthonormal basis of the feasible subspace {x : Cx = 0}
  Eigen::HouseholderQR<Matrix> qr(m.constraints.transpose());
  Matrix q = qr.householderQ() * Matrix::Identity(m.n_latent, m.n_latent);
  m.feasible = q.rightCols(m.n_latent - m_rows);
  m.incidence_reduced = m.incidence * m.feasible;
  return m;
}

AssembledModel intercept_only_model(const Vector& deaths,
                                    const Vector& exposure,
                                    double prior_precision) {
  const int n = static_cast<int>(deaths.size());
  if (exposure.size() != n)
    throw DataError("intercept_only_model: deaths and exposure sizes differ");
  AssembledModel m;
  m.sex = "all";
  m.n_age = 1;
  m.age_labels = {"all"};
  m.n_second = n;
  m.n_latent = 1;
  m.n_theta = 0;
  m.incidence = Matrix::Ones(n, 1);
  m.log_exposure.resize(n);
  for (int i = 0; i < n; ++i) {
    if (exposure(i) <= 0.0)
      throw DataError("intercept_only_model: exposure must be positive");
    m.log_exposure(i) = std::log(exposure(i));
    AssembledModel::Cell cell;
    cell.age = 0;
    cell.second = i;
    cell.deaths = deaths(i);
    cell.population = exposure(i);
    m.cells.push_back(cell);
    m.observed.push_back(i);
    m.second_labels.push_back(std::to_string(i + 1));
  }
  LatentBlock b;
  b.name = "intercept";
  b.offset = 0;
  b.dim = 1;
  b.r = Matrix::Identity(1, 1);
  b.fixed_precision = prior_precision;
  b.rank = 1;
  m.blocks.push_back(std::move(b));
  m.constraints = Matrix(0, 1);
  m.feasible = Matrix::Identity(1, 1);
  m.incidence_reduced = m.incidence;
  return m;
}

}  // namespace ratesmooth
