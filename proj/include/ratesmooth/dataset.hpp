#pragma once

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ratesmooth/covariates.hpp"
#include "ratesmooth/types.hpp"

namespace ratesmooth {

/// Stratified counts over a full (area, year, age group, sex) grid. Deaths
/// may be missing per cell; population must be positive everywhere.
struct Dataset {
  std::vector<std::string> area_labels;
  std::vector<int> years;               // ascending
  std::vector<std::string> age_labels;  // ascending by lower age bound

  struct Panel {
    std::vector<double> deaths;      // undefined where missing
    std::vector<unsigned char> missing;
    std::vector<double> population;
  };
  std::map<std::string, Panel> panels;  // keyed by sex label

  struct Covariate {
    std::string name;
    CovariateAxis axis = CovariateAxis::Spatial;
    std::map<std::string, Vector> by_sex;  // "" = shared across sexes
  };
  std::map<std::string, Covariate> covariates;

  int n_areas() const { return static_cast<int>(area_labels.size()); }
  int n_years() const { return static_cast<int>(years.size()); }
  int n_ages() const { return static_cast<int>(age_labels.size()); }
  int cell(int area, int year, int age) const {
    return (area * n_years() + year) * n_ages() + age;
  }

  /// Covariate values for one sex, falling back to the shared series.
  const Vector& covariate_values(const std::string& name,
                                 const std::string& sex) const;
};

/// Read counts and population CSVs
/// (area,year,age_group,sex,deaths / area,year,age_group,sex,population)
/// into a validated full-grid dataset. An empty deaths field marks the cell
/// missing.
Dataset ingest_dataset(std::istream& counts_csv, std::istream& population_csv);

/// Attach a covariate CSV (label,value or label,sex,value). The axis is
/// inferred from whether the labels are area labels or years.
void attach_covariate(Dataset& data, const std::string& name,
                      std::istream& csv);

enum class GroupDim { Sex, AgeBand, Year, Area, Rurality };

GroupDim parse_group_dim(const std::string& s);
std::string to_string(GroupDim d);

struct CrudeRateRow {
  std::vector<std::pair<std::string, std::string>> keys;  // (dim, value)
  double deaths = 0.0;
  double population = 0.0;
  double rate = 0.0;     // per 100,000
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct CrudeRateOptions {
  bool clamp_at_zero = true;
  std::string rurality_covariate = "rural";
};

/// Pooled-count rates per 100,000 with normal-approximation 95% confidence
/// intervals, grouped by any subset of {sex, ageband, year, area, rurality}.
/// Missing cells contribute neither deaths nor population. Age bands are
/// "<=40", "40-70" and ">=70" by the lower bound of each age group; rurality
/// bands are "low" (<20), "medium" (20-40) and "high" (>40) from the
/// per-area rurality covariate.
std::vector<CrudeRateRow> crude_rates(const Dataset& data,
                                      const std::vector<GroupDim>& grouping,
                                      const CrudeRateOptions& options = {});

}  // namespace ratesmooth
