#include "ratesmooth/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace ratesmooth {

namespace {

double strict_double(const std::string& s, const std::string& context) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw DataError(context + ": bad number '" + s + "'");
  }
  if (pos != s.size())
    throw DataError(context + ": bad number '" + s + "'");
  return v;
}

int strict_int(const std::string& s, const std::string& context) {
  size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    throw DataError(context + ": bad integer '" + s + "'");
  }
  if (pos != s.size())
    throw DataError(context + ": bad integer '" + s + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

struct RawRow {
  std::string area;
  int year;
  std::string age;
  std::string sex;
  std::string value;  // raw text, may be empty
  int lineno;
};

std::vector<RawRow> read_stratified_csv(std::istream& in,
                                        const std::string& value_column) {
  std::string line;
  if (!std::getline(in, line))
    throw DataError(value_column + " file: empty");
  auto header = split_csv_line(line);
  std::vector<std::string> expected = {"area", "year", "age_group", "sex",
                                       value_column};
  if (header != expected) {
    std::string want;
    for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
    throw DataError(value_column + " file: header must be '" + want + "'");
  }
  std::vector<RawRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != 5)
      throw DataError(value_column + " file line " + std::to_string(lineno) +
                      ": expected 5 fields");
    RawRow r;
    r.area = f[0];
    r.year = strict_int(f[1], value_column + " file line " + std::to_string(lineno));
    r.age = f[2];
    r.sex = f[3];
    r.value = f[4];
    r.lineno = lineno;
    rows.push_back(std::move(r));
  }
  return rows;
}

int age_lower_bound(const std::string& label) {
  size_t i = 0;
  while (i < label.size() && !std::isdigit(static_cast<unsigned char>(label[i]))) ++i;
  size_t j = i;
  while (j < label.size() && std::isdigit(static_cast<unsigned char>(label[j]))) ++j;
  if (i == j) throw DataError("age group label '" + label + "' has no leading age");
  return std::stoi(label.substr(i, j - i));
}

template <typename T>
int index_in(const std::vector<T>& v, const T& x) {
  auto it = std::find(v.begin(), v.end(), x);
  return it == v.end() ? -1 : static_cast<int>(it - v.begin());
}

}  // namespace

const Vector& Dataset::covariate_values(const std::string& name,
                                        const std::string& sex) const {
  auto it = covariates.find(name);
  if (it == covariates.end())
    throw DataError("unknown covariate '" + name + "'");
  auto bysex = it->second.by_sex.find(sex);
  if (bysex != it->second.by_sex.end()) return bysex->second;
  auto shared = it->second.by_sex.find("");
  if (shared != it->second.by_sex.end()) return shared->second;
  throw DataError("covariate '" + name + "' has no series for sex '" + sex + "'");
}

Dataset ingest_dataset(std::istream& counts_csv, std::istream& population_csv) {
  auto count_rows = read_stratified_csv(counts_csv, "deaths");
  auto pop_rows = read_stratified_csv(population_csv, "population");
  if (count_rows.empty()) throw DataError("counts file has no data rows");

  Dataset d;
  std::set<std::string> areas, ages, sexes;
  std::set<int> years;
  for (const auto& r : count_rows) {
    areas.insert(r.area);
    years.insert(r.year);
    ages.insert(r.age);
    sexes.insert(r.sex);
  }
  d.area_labels.assign(areas.begin(), areas.end());
  d.years.assign(years.begin(), years.end());
  d.age_labels.assign(ages.begin(), ages.end());
  std::sort(d.age_labels.begin(), d.age_labels.end(),
            [](const std::string& a, const std::string& b) {
              return age_lower_bound(a) < age_lower_bound(b);
            });

  const int cells = d.n_areas() * d.n_years() * d.n_ages();
  for (const auto& sex : sexes) {
    auto& p = d.panels[sex];
    p.deaths.assign(cells, 0.0);
    p.missing.assign(cells, 2);  // 2 = not seen yet
    p.population.assign(cells, -1.0);
  }

  auto locate = [&](const RawRow& r, const char* what) {
    int a = index_in(d.area_labels, r.area);
    int y = index_in(d.years, r.year);
    int g = index_in(d.age_labels, r.age);
    auto panel = d.panels.find(r.sex);
    if (a < 0 || y < 0 || g < 0 || panel == d.panels.end())
      throw DataError(std::string(what) + " line " + std::to_string(r.lineno) +
                      ": label combination not present in counts grid");
    return std::pair<Dataset::Panel*, int>{&panel->second, d.cell(a, y, g)};
  };

  for (const auto& r : count_rows) {
    auto [panel, idx] = locate(r, "counts");
    if (panel->missing[idx] != 2)
      throw DataError("counts line " + std::to_string(r.lineno) +
                      ": duplicate cell");
    if (r.value.empty()) {
      panel->missing[idx] = 1;
    } else {
      double v = strict_double(r.value, "counts line " + std::to_string(r.lineno));
      if (v < 0.0 || v != std::floor(v))
        throw DataError("counts line " + std::to_string(r.lineno) +
                        ": deaths must be a nonnegative integer");
      panel->missing[idx] = 0;
      panel->deaths[idx] = v;
    }
  }
  for (auto& [sex, panel] : d.panels)
    for (int i = 0; i < cells; ++i)
      if (panel.missing[i] == 2)
        throw DataError("counts grid has gaps (sex '" + sex +
                        "' does not cover the full area x year x age grid)");

  for (const auto& r : pop_rows) {
    auto [panel, idx] = locate(r, "population");
    if (r.value.empty())
      throw DataError("population line " + std::to_string(r.lineno) +
                      ": population must not be empty");
    double v = strict_double(r.value, "population line " + std::to_string(r.lineno));
    if (v <= 0.0)
      throw DataError("population line " + std::to_string(r.lineno) +
                      ": population must be positive");
    if (panel->population[idx] >= 0.0)
      throw DataError("population line " + std::to_string(r.lineno) +
                      ": duplicate cell");
    panel->population[idx] = v;
  }
  for (auto& [sex, panel] : d.panels)
    for (int i = 0; i < cells; ++i) {
      if (panel.population[i] < 0.0)
        throw DataError("population grid has gaps for sex '" + sex + "'");
      if (!panel.missing[i] && panel.deaths[i] > panel.population[i])
        throw DataError("cell with deaths exceeding population (sex '" + sex +
                        "')");
    }
  return d;
}

void attach_covariate(Dataset& data, const std::string& name,
                      std::istream& csv) {
  std::string line;
  if (!std::getline(csv, line))
    throw DataError("covariate '" + name + "': empty file");
  auto header = split_csv_line(line);
  bool has_sex;
  if (header == std::vector<std::string>{"label", "value"}) {
    has_sex = false;
  } else if (header == std::vector<std::string>{"label", "sex", "value"}) {
    has_sex = true;
  } else {
    throw DataError("covariate '" + name +
                    "': header must be 'label,value' or 'label,sex,value'");
  }

  struct Entry { std::string label, sex; double value; };
  std::vector<Entry> entries;
  int lineno = 1;
  while (std::getline(csv, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != (has_sex ? 3u : 2u))
      throw DataError("covariate '" + name + "' line " +
                      std::to_string(lineno) + ": wrong field count");
    Entry e;
    e.label = f[0];
    e.sex = has_sex ? f[1] : "";
    e.value = strict_double(f.back(), "covariate '" + name + "' line " +
                                        std::to_string(lineno));
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw DataError("covariate '" + name + "': no rows");

  // Axis from the labels: area labels or years.
  bool all_areas = true, all_years = true;
  for (const auto& e : entries) {
    if (index_in(data.area_labels, e.label) < 0) all_areas = false;
    bool is_year = false;
    try {
      is_year = index_in(data.years, strict_int(e.label, "")) >= 0;
    } catch (const std::exception&) {
    }
    if (!is_year) all_years = false;
  }
  if (!all_areas && !all_years)
    throw DataError("covariate '" + name +
                    "': labels match neither the area set nor the year set");
  if (all_areas && all_years)
    throw DataError("covariate '" + name + "': ambiguous labels");

  Dataset::Covariate cov;
  cov.name = name;
  cov.axis = all_areas ? CovariateAxis::Spatial : CovariateAxis::Temporal;
  const int n = all_areas ? data.n_areas() : data.n_years();
  std::map<std::string, std::vector<unsigned char>> seen;
  for (const auto& e : entries) {
    auto& series = cov.by_sex[e.sex];
    auto& mask = seen[e.sex];
    if (series.size() == 0) {
      series = Vector::Zero(n);
      mask.assign(n, 0);
    }
    int idx = all_areas ? index_in(data.area_labels, e.label)
                        : index_in(data.years, strict_int(e.label, "covariate label"));
    if (mask[idx])
      throw DataError("covariate '" + name + "': duplicate label '" + e.label +
                      "'");
    mask[idx] = 1;
    series(idx) = e.value;
  }
  for (const auto& [sex, mask] : seen)
    if (std::count(mask.begin(), mask.end(), 1) != n)
      throw DataError("covariate '" + name + "': incomplete series" +
                      (sex.empty() ? "" : " for sex '" + sex + "'"));
  data.covariates[name] = std::move(cov);
}

GroupDim parse_group_dim(const std::string& s) {
  if (s == "sex") return GroupDim::Sex;
  if (s == "ageband" || s == "age-band" || s == "age_band") return GroupDim::AgeBand;
  if (s == "year") return GroupDim::Year;
  if (s == "area") return GroupDim::Area;
  if (s == "rurality") return GroupDim::Rurality;
  throw DataError("unknown grouping dimension '" + s + "'");
}

std::string to_string(GroupDim d) {
  switch (d) {
    case GroupDim::Sex: return "sex";
    case GroupDim::AgeBand: return "ageband";
    case GroupDim::Year: return "year";
    case GroupDim::Area: return "area";
    case GroupDim::Rurality: return "rurality";
  }
  return "?";
}

namespace {

std::string age_band(const std::string& age_label) {
  int lo = age_lower_bound(age_label);
  if (lo < 40) return "<=40";
  if (lo < 70) return "40-70";
  return ">=70";
}

std::string rurality_band(double pct) {
  if (pct < 20.0) return "low";
  if (pct <= 40.0) return "medium";
  return "high";
}

}  // namespace

std::vector<CrudeRateRow> crude_rates(const Dataset& data,
                                      const std::vector<GroupDim>& grouping,
                                      const CrudeRateOptions& options) {
  const Vector* rural = nullptr;
  if (std::find(grouping.begin(), grouping.end(), GroupDim::Rurality) !=
      grouping.end()) {
    rural = &data.covariate_values(options.rurality_covariate, "");
    if (data.covariates.at(options.rurality_covariate).axis !=
        CovariateAxis::Spatial)
      throw DataError("rurality covariate must be spatial");
  }

  std::map<std::vector<std::string>, std::pair<double, double>> pooled;
  std::map<std::vector<std::string>, int> observed_cells;
  for (const auto& [sex, panel] : data.panels) {
    for (int a = 0; a < data.n_areas(); ++a)
      for (int y = 0; y < data.n_years(); ++y)
        for (int g = 0; g < data.n_ages(); ++g) {
          std::vector<std::string> key;
          for (GroupDim dim : grouping) {
            switch (dim) {
              case GroupDim::Sex: key.push_back(sex); break;
              case GroupDim::AgeBand: key.push_back(age_band(data.age_labels[g])); break;
              case GroupDim::Year: key.push_back(std::to_string(data.years[y])); break;
              case GroupDim::Area: key.push_back(data.area_labels[a]); break;
              case GroupDim::Rurality: key.push_back(rurality_band((*rural)(a))); break;
            }
          }
          int idx = data.cell(a, y, g);
          auto& cell_count = observed_cells[key];
          if (panel.missing[idx]) continue;  // excluded from both sums
          ++cell_count;
          auto& acc = pooled[key];
          acc.first += panel.deaths[idx];
          acc.second += panel.population[idx];
        }
  }

  std::vector<CrudeRateRow> rows;
  for (const auto& [key, count] : observed_cells) {
    if (count == 0)
      throw DataError("crude_rates: empty stratum (all cells missing)");
    const auto& acc = pooled.at(key);
    CrudeRateRow row;
    for (size_t i = 0; i < grouping.size(); ++i)
      row.keys.emplace_back(to_string(grouping[i]), key[i]);
    row.deaths = acc.first;
    row.population = acc.second;
    row.rate = 1e5 * acc.first / acc.second;
    double half = 1.96 * 1e5 * std::sqrt(acc.first) / acc.second;
    row.ci_low = row.rate - half;
    row.ci_high = row.rate + half;
    if (options.clamp_at_zero && row.ci_low < 0.0) row.ci_low = 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ratesmooth
