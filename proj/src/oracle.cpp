#include "ratesmooth/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

namespace ratesmooth {

const QuantitySummary& OracleResult::summary(const std::string& name) const {
  for (const auto& s : summaries)
    if (s.name == name) return s;
  throw DataError("oracle result has no quantity '" + name + "'");
}

double effective_sample_size(const Vector& chain) {
  const int n = static_cast<int>(chain.size());
  if (n < 4) return static_cast<double>(n);
  double mean = chain.mean();
  Vector centered = chain.array() - mean;
  double c0 = centered.squaredNorm() / n;
  if (c0 <= 0.0) return static_cast<double>(n);
  auto autocov = [&](int lag) {
    double s = 0.0;
    for (int i = 0; i + lag < n; ++i) s += centered(i) * centered(i + lag);
    return s / n;
  };
  double sum = 0.0;
  for (int lag = 1; lag + 1 < n; lag += 2) {
    double pair = autocov(lag) + autocov(lag + 1);
    if (pair <= 0.0) break;
    sum += pair;
  }
  return n / (1.0 + 2.0 * sum / c0);
}

namespace {

struct ChainResult {
  Matrix draws;  // kept draws x dim
  double acceptance = 0.0;
};

ChainResult run_chain(const std::function<double(const Vector&)>& log_density,
                      int dim, int iterations, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> norm(0.0, 1.0);

  const int burn = iterations / 2;
  const int adapt_until = burn / 2;  // frozen after 50% of burn-in
  const double target = dim == 1 ? 0.44 : 0.234;

  Vector x = Vector::Zero(dim);
  double lp = log_density(x);
  // nudge the start if the origin is degenerate
  int tries = 0;
  while (!std::isfinite(lp) && tries < 100) {
    for (int i = 0; i < dim; ++i) x(i) = 0.5 * norm(rng);
    lp = log_density(x);
    ++tries;
  }
  if (!std::isfinite(lp))
    throw NumericalError("mcmc: found no starting point with finite density");

  double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(dim)));
  Vector run_mean = x;
  Vector run_m2 = Vector::Ones(dim);
  long accepted = 0, proposed = 0;

  ChainResult out;
  out.draws.resize(iterations - burn, dim);
  for (int t = 1; t <= iterations; ++t) {
    Vector sd =
        (run_m2 / std::max(1, t - 1)).cwiseMax(1e-8).cwiseSqrt();
    Vector prop = x;
    double s = std::exp(log_scale);
    for (int i = 0; i < dim; ++i) prop(i) += s * sd(i) * norm(rng);
    double lp_prop = log_density(prop);
    ++proposed;
    bool accept = false;
    if (std::isfinite(lp_prop)) {
      double logu = std::log(std::uniform_real_distribution<double>(
          std::numeric_limits<double>::min(), 1.0)(rng));
      accept = logu < lp_prop - lp;
    } else {
      // keep the RNG sequence aligned
      std::uniform_real_distribution<double>(
          std::numeric_limits<double>::min(), 1.0)(rng);
    }
    if (accept) {
      x = prop;
      lp = lp_prop;
      ++accepted;
    }
    if (t <= adapt_until) {
      double rate = static_cast<double>(accepted) / proposed;
      log_scale += (rate - target) / std::sqrt(static_cast<double>(t));
      Vector delta = x - run_mean;
      run_mean += delta / t;
      run_m2 += delta.cwiseProduct(x - run_mean);
    }
    if (t > burn) out.draws.row(t - burn - 1) = x;
  }
  out.acceptance = static_cast<double>(accepted) / proposed;
  return out;
}

double split_rhat(const std::vector<Vector>& chains) {
  std::vector<Vector> halves;
  for (const auto& c : chains) {
    int n = static_cast<int>(c.size()) / 2;
    halves.push_back(c.head(n));
    halves.push_back(c.segment(n, n));
  }
  const int m = static_cast<int>(halves.size());
  const int n = static_cast<int>(halves[0].size());
  double grand = 0.0;
  std::vector<double> means(m), vars(m);
  for (int j = 0; j < m; ++j) {
    means[j] = halves[j].mean();
    vars[j] = (halves[j].array() - means[j]).square().sum() / (n - 1);
    grand += means[j] / m;
  }
  double b = 0.0, w = 0.0;
  for (int j = 0; j < m; ++j) {
    b += (means[j] - grand) * (means[j] - grand);
    w += vars[j] / m;
  }
  b *= static_cast<double>(n) / (m - 1);
  if (w <= 0.0) return 1.0;
  double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

QuantitySummary summarize_draws(const std::string& name, const Matrix& draws,
                                int col, int n_chains) {
  QuantitySummary s;
  s.name = name;
  Vector v = draws.col(col);
  const int n = static_cast<int>(v.size());
  s.mean = v.mean();
  s.sd = std::sqrt((v.array() - s.mean).square().sum() / (n - 1));
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end());
  auto quant = [&](double p) {
    double idx = p * (n - 1);
    int lo = static_cast<int>(idx);
    int hi = std::min(lo + 1, n - 1);
    double f = idx - lo;
    return (1 - f) * sorted[lo] + f * sorted[hi];
  };
  s.q025 = quant(0.025);
  s.median = quant(0.5);
  s.q975 = quant(0.975);

  const int per_chain = n / n_chains;
  double ess = 0.0;
  std::vector<Vector> chains;
  for (int c = 0; c < n_chains; ++c) {
    Vector chain = v.segment(c * per_chain, per_chain);
    ess += effective_sample_size(chain);
    chains.push_back(chain);
  }
  s.ess = ess;
  s.rhat = split_rhat(chains);
  s.mcse = s.sd / std::sqrt(std::max(1.0, ess));
  return s;
}

}  // namespace

OracleResult mcmc_sample_density(
    const std::function<double(const Vector&)>& log_density, int dim,
    const McmcConfig& config, const std::vector<std::string>& names) {
  if (config.iterations < 100)
    throw DataError("mcmc: needs at least 100 iterations");
  std::vector<ChainResult> chains(config.chains);
  std::vector<std::thread> workers;
  for (int c = 0; c < config.chains; ++c)
    workers.emplace_back([&, c]() {
      chains[c] = run_chain(log_density, dim, config.iterations,
                            config.seed + static_cast<unsigned>(c));
    });
  for (auto& w : workers) w.join();

  OracleResult out;
  const int kept = static_cast<int>(chains[0].draws.rows());
  out.draws.resize(kept * config.chains, dim);
  for (int c = 0; c < config.chains; ++c)
    out.draws.middleRows(c * kept, kept) = chains[c].draws;
  out.names = names;
  if (out.names.empty())
    for (int i = 0; i < dim; ++i) out.names.push_back("v" + std::to_string(i));
  for (int i = 0; i < dim; ++i) {
    out.summaries.push_back(
        summarize_draws(out.names[i], out.draws, i, config.chains));
    if (out.summaries.back().ess < 100.0)
      out.warnings.push_back("low effective sample size for " + out.names[i]);
  }
  return out;
}

namespace {

std::vector<std::string> latent_names(const AssembledModel& model) {
  std::vector<std::string> names(model.n_latent);
  for (const auto& b : model.blocks)
    for (int i = 0; i < b.dim; ++i)
      names[b.offset + i] =
          b.dim == 1 ? b.name : b.name + "[" + std::to_string(i + 1) + "]";
  return names;
}

}  // namespace

OracleResult mcmc_sample(const AssembledModel& model, const McmcConfig& config,
                         const std::optional<Vector>& fixed_theta) {
  if (model.n_latent > 200)
    throw DataError("mcmc_sample: latent dimension " +
                    std::to_string(model.n_latent) + " exceeds the guard (200)");
  const int d = static_cast<int>(model.feasible.cols());
  const int q = fixed_theta ? 0 : model.n_theta;
  if (fixed_theta && fixed_theta->size() != model.n_theta)
    throw DataError("mcmc_sample: fixed theta has the wrong size");

  auto target = [&](const Vector& v) {
    Vector x = model.feasible * v.head(d);
    Vector theta = fixed_theta ? *fixed_theta : Vector(v.tail(q));
    double lp = model.log_likelihood(x) + model.log_prior(x, theta);
    if (!fixed_theta) lp += model.log_prior_theta(theta);
    return lp;
  };

  std::vector<std::string> vnames(d + q);
  for (int i = 0; i < d; ++i) vnames[i] = "u" + std::to_string(i);
  for (int i = 0; i < q; ++i) vnames[d + i] = "log_tau:" + model.theta_names[i];
  OracleResult reduced = mcmc_sample_density(target, d + q, config, vnames);

  // report the latent field in natural coordinates
  OracleResult out;
  out.warnings = reduced.warnings;
  auto xnames = latent_names(model);
  out.names = xnames;
  for (int i = 0; i < q; ++i) out.names.push_back("log_tau:" + model.theta_names[i]);
  const int rows = static_cast<int>(reduced.draws.rows());
  out.draws.resize(rows, model.n_latent + q);
  out.draws.leftCols(model.n_latent) =
      reduced.draws.leftCols(d) * model.feasible.transpose();
  if (q > 0) out.draws.rightCols(q) = reduced.draws.rightCols(q);
  out.warnings.clear();
  for (int i = 0; i < model.n_latent + q; ++i) {
    out.summaries.push_back(
        summarize_draws(out.names[i], out.draws, i, config.chains));
    if (out.summaries.back().ess < 100.0)
      out.warnings.push_back("low effective sample size for " + out.names[i]);
  }
  return out;
}

namespace {

// Compact Nelder-Mead for the quadrature pilot (dim <= 3).
Vector nelder_mead(const std::function<double(const Vector&)>& f, int dim,
                   int max_iter = 800) {
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  std::vector<Vector> pts;
  std::vector<double> vals;
  pts.push_back(Vector::Zero(dim));
  for (int i = 0; i < dim; ++i) {
    Vector p = Vector::Zero(dim);
    p(i) = 1.0;
    pts.push_back(p);
  }
  auto eval = [&](const Vector& p) {
    double v = f(p);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
  };
  for (const auto& p : pts) vals.push_back(eval(p));
  for (int it = 0; it < max_iter; ++it) {
    std::vector<int> order(pts.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return vals[a] < vals[b]; });
    std::vector<Vector> np;
    std::vector<double> nv;
    for (int i : order) {
      np.push_back(pts[i]);
      nv.push_back(vals[i]);
    }
    pts = np;
    vals = nv;
    if (std::abs(vals.back() - vals.front()) < 1e-12 &&
        (pts.back() - pts.front()).norm() < 1e-10)
      break;
    Vector centroid = Vector::Zero(dim);
    for (size_t i = 0; i + 1 < pts.size(); ++i) centroid += pts[i];
    centroid /= static_cast<double>(dim);
    Vector worst = pts.back();
    Vector refl = centroid + alpha * (centroid - worst);
    double fr = eval(refl);
    if (fr < vals.front()) {
      Vector exp_pt = centroid + gamma * (refl - centroid);
      double fe = eval(exp_pt);
      if (fe < fr) {
        pts.back() = exp_pt;
        vals.back() = fe;
      } else {
        pts.back() = refl;
        vals.back() = fr;
      }
    } else if (fr < vals[vals.size() - 2]) {
      pts.back() = refl;
      vals.back() = fr;
    } else {
      Vector contr = centroid + rho * (worst - centroid);
      double fc = eval(contr);
      if (fc < vals.back()) {
        pts.back() = contr;
        vals.back() = fc;
      } else {
        for (size_t i = 1; i < pts.size(); ++i) {
          pts[i] = pts.front() + sigma * (pts[i] - pts.front());
          vals[i] = eval(pts[i]);
        }
      }
    }
  }
  int best = 0;
  for (size_t i = 1; i < pts.size(); ++i)
    if (vals[i] < vals[best]) best = static_cast<int>(i);
  return pts[best];
}

}  // namespace

OracleResult grid_posterior(const AssembledModel& model,
                            const std::optional<Vector>& fixed_theta,
                            const GridOracleConfig& config) {
  const int d = static_cast<int>(model.feasible.cols());
  const int q = fixed_theta ? 0 : model.n_theta;
  const int dim = d + q;
  if (dim > 3)
    throw DataError("grid_posterior: free dimension " + std::to_string(dim) +
                    " exceeds the guard (3)");
  if (config.points_per_axis < 401)
    throw DataError("grid_posterior: needs at least 401 points per axis");

  auto target = [&](const Vector& v) {
    Vector x = model.feasible * v.head(d);
    Vector theta = fixed_theta ? *fixed_theta : Vector(v.tail(q));
    double lp = model.log_likelihood(x) + model.log_prior(x, theta);
    if (!fixed_theta) lp += model.log_prior_theta(theta);
    return lp;
  };

  // pilot mode and curvature for the integration box
  Vector center = nelder_mead(target, dim);
  double f0 = target(center);
  if (!std::isfinite(f0))
    throw NumericalError("grid_posterior: pilot search failed");
  Vector sds = Vector::Ones(dim);
  {
    const double h = 1e-3;
    Matrix hess(dim, dim);
    bool ok = true;
    for (int i = 0; i < dim && ok; ++i)
      for (int j = i; j < dim && ok; ++j) {
        Vector pp = center, pm = center, mp = center, mm = center;
        pp(i) += h; pp(j) += h;
        pm(i) += h; pm(j) -= h;
        mp(i) -= h; mp(j) += h;
        mm(i) -= h; mm(j) -= h;
        double v =
            (target(pp) - target(pm) - target(mp) + target(mm)) / (4 * h * h);
        if (!std::isfinite(v)) ok = false;
        hess(i, j) = hess(j, i) = v;
      }
    if (ok) {
      Eigen::LLT<Matrix> llt(Matrix(-hess));
      if (llt.info() == Eigen::Success) {
        Matrix cov = llt.solve(Matrix::Identity(dim, dim));
        for (int i = 0; i < dim; ++i)
          sds(i) = std::sqrt(std::max(cov(i, i), 1e-12));
      }
    }
  }

  const int npts = config.points_per_axis;
  std::vector<Vector> axes(dim);
  std::vector<double> step(dim);
  for (int i = 0; i < dim; ++i) {
    double lo = center(i) - config.range_sd * sds(i);
    double hi = center(i) + config.range_sd * sds(i);
    axes[i] = Vector::LinSpaced(npts, lo, hi);
    step[i] = (hi - lo) / (npts - 1);
  }

  // quantities: latent coordinates then free hyperparameters
  auto xnames = latent_names(model);
  std::vector<std::string> names = xnames;
  for (int i = 0; i < q; ++i) names.push_back("log_tau:" + model.theta_names[i]);
  const int n_quant = model.n_latent + q;

  // value of each quantity is affine in v; bound it over the box for the
  // histogram ranges
  Matrix lin = Matrix::Zero(n_quant, dim);
  lin.topLeftCorner(model.n_latent, d) = model.feasible;
  for (int i = 0; i < q; ++i) lin(model.n_latent + i, d + i) = 1.0;
  std::vector<std::pair<double, double>> ranges(n_quant);
  for (int k = 0; k < n_quant; ++k) {
    double mid = lin.row(k).dot(center);
    double half = 0.0;
    for (int i = 0; i < dim; ++i)
      half += std::abs(lin(k, i)) * config.range_sd * sds(i);
    ranges[k] = {mid - half - 1e-12, mid + half + 1e-12};
  }

  const int n_bins = 2048;
  Matrix hist = Matrix::Zero(n_quant, n_bins);
  Vector sum = Vector::Zero(n_quant), sumsq = Vector::Zero(n_quant);
  Vector sum_coarse = Vector::Zero(n_quant);
  double mass = 0.0, mass_coarse = 0.0;
  double boundary_max = -std::numeric_limits<double>::infinity();

  std::vector<int> idx(dim, 0);
  Vector v(dim), quant(n_quant);
  while (true) {
    double w = 1.0, w_coarse = 1.0;
    bool coarse = true, boundary = false;
    for (int i = 0; i < dim; ++i) {
      v(i) = axes[i](idx[i]);
      bool edge = idx[i] == 0 || idx[i] == npts - 1;
      w *= edge ? 0.5 : 1.0;
      if (edge) boundary = true;
      if (idx[i] % 2 != 0) coarse = false;
      else w_coarse *= edge ? 0.5 : 1.0;
    }
    double lp = target(v);
    if (std::isfinite(lp)) {
      double density = std::exp(lp - f0);
      double mw = w * density;
      if (boundary) boundary_max = std::max(boundary_max, density);
      mass += mw;
      quant = lin * v;
      sum += mw * quant;
      sumsq += mw * quant.cwiseAbs2();
      for (int k = 0; k < n_quant; ++k) {
        double frac = (quant(k) - ranges[k].first) /
                      (ranges[k].second - ranges[k].first);
        int bin = std::clamp(static_cast<int>(frac * n_bins), 0, n_bins - 1);
        hist(k, bin) += mw;
      }
      if (coarse) {
        mass_coarse += w_coarse * density;
        sum_coarse += w_coarse * density * quant;
      }
    }
    int i = 0;
    for (; i < dim; ++i) {
      if (++idx[i] < npts) break;
      idx[i] = 0;
    }
    if (i == dim) break;
  }
  if (mass <= 0.0)
    throw NumericalError("grid_posterior: zero integrated mass");

  OracleResult out;
  out.names = names;
  if (boundary_max > 1e-10)
    out.warnings.push_back(
        "posterior mass at the integration boundary; widen the box");
  out.mode = lin * center;
  for (int k = 0; k < n_quant; ++k) {
    QuantitySummary s;
    s.name = names[k];
    s.mean = sum(k) / mass;
    s.sd = std::sqrt(std::max(0.0, sumsq(k) / mass - s.mean * s.mean));
    double width = (ranges[k].second - ranges[k].first) / n_bins;
    auto hquant = [&](double p) {
      double cum = 0.0, targetm = p * mass;
      for (int b = 0; b < n_bins; ++b) {
        cum += hist(k, b);
        if (cum >= targetm)
          return ranges[k].first + width * (b + 0.5);
      }
      return ranges[k].second;
    };
    s.q025 = hquant(0.025);
    s.median = hquant(0.5);
    s.q975 = hquant(0.975);
    double mean_coarse = mass_coarse > 0.0 ? sum_coarse(k) / mass_coarse : s.mean;
    s.mcse = std::abs(s.mean - mean_coarse);
    s.ess = std::numeric_limits<double>::infinity();
    s.rhat = 1.0;
    out.summaries.push_back(s);
  }
  return out;
}

}  // namespace ratesmooth
