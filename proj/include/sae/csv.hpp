#ifndef SAE_CSV_HPP
#define SAE_CSV_HPP

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "sae/areal.hpp"

namespace sae {

namespace csv_detail {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_number(const std::string& cell, const std::string& context) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw std::invalid_argument("csv: non-numeric cell '" + cell + "' in " +
                                context);
  return value;
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace csv_detail

struct SurveyData {
  std::vector<UnitRecord> units;
  std::vector<std::string> covariate_names;
};

struct CensusData {
  std::vector<CensusArea> areas;
  std::vector<std::string> covariate_names;
};

// Survey CSV schema: area_id,stratum,y,x_<name>,...
inline SurveyData ingest_survey_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: empty file " + path);
  const auto header = csv_detail::split_line(csv_detail::strip_cr(line));
  if (header.size() < 3 || header[0] != "area_id" || header[1] != "stratum" ||
      header[2] != "y")
    throw std::invalid_argument("csv: survey header must start area_id,stratum,y");
  SurveyData out;
  for (std::size_t j = 3; j < header.size(); ++j) {
    if (header[j].rfind("x_", 0) != 0)
      throw std::invalid_argument("csv: survey covariate column '" + header[j] +
                                  "' must be named x_<name>");
    out.covariate_names.push_back(header[j].substr(2));
  }
  const std::size_t p = out.covariate_names.size();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = csv_detail::strip_cr(line);
    if (line.empty()) continue;
    const auto cells = csv_detail::split_line(line);
    if (cells.size() != 3 + p)
      throw std::invalid_argument("csv: survey line " + std::to_string(line_no) +
                                  " has wrong column count");
    UnitRecord u;
    u.area_id = cells[0];
    u.stratum = cells[1];
    u.y = csv_detail::parse_number(cells[2], path + ":" + std::to_string(line_no));
    u.x.resize(p);
    for (std::size_t j = 0; j < p; ++j)
      u.x[j] = csv_detail::parse_number(cells[3 + j],
                                        path + ":" + std::to_string(line_no));
    out.units.push_back(std::move(u));
  }
  return out;
}

// Census CSV schema: area_id,stratum,N,xbar_<name>,...
inline CensusData ingest_census_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: empty file " + path);
  const auto header = csv_detail::split_line(csv_detail::strip_cr(line));
  if (header.size() < 3 || header[0] != "area_id" || header[1] != "stratum" ||
      header[2] != "N")
    throw std::invalid_argument("csv: census header must start area_id,stratum,N");
  CensusData out;
  for (std::size_t j = 3; j < header.size(); ++j) {
    if (header[j].rfind("xbar_", 0) != 0)
      throw std::invalid_argument("csv: census covariate column '" + header[j] +
                                  "' must be named xbar_<name>");
    out.covariate_names.push_back(header[j].substr(5));
  }
  const std::size_t p = out.covariate_names.size();
  std::unordered_set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = csv_detail::strip_cr(line);
    if (line.empty()) continue;
    const auto cells = csv_detail::split_line(line);
    if (cells.size() != 3 + p)
      throw std::invalid_argument("csv: census line " + std::to_string(line_no) +
                                  " has wrong column count");
    CensusArea a;
    a.area_id = cells[0];
    if (!seen.insert(a.area_id).second)
      throw std::invalid_argument("csv: duplicate census area_id " + a.area_id);
    a.stratum = cells[1];
    const double n = csv_detail::parse_number(
        cells[2], path + ":" + std::to_string(line_no));
    a.n_total = static_cast<std::int64_t>(n);
    a.xbar.resize(p);
    for (std::size_t j = 0; j < p; ++j)
      a.xbar[j] = csv_detail::parse_number(cells[3 + j],
                                           path + ":" + std::to_string(line_no));
    out.areas.push_back(std::move(a));
  }
  return out;
}

// Fixed numeric formatting shared by every report writer, so reruns are
// byte-comparable.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline void write_survey_csv(const std::string& path,
                             const std::vector<UnitRecord>& units,
                             const std::vector<std::string>& covariate_names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  out << "area_id,stratum,y";
  for (const auto& name : covariate_names) out << ",x_" << name;
  out << "\n";
  for (const auto& u : units) {
    out << u.area_id << ',' << u.stratum << ','
        << fmt_double(u.y.value_or(0.0));
    for (double x : u.x) out << ',' << fmt_double(x);
    out << "\n";
  }
}

inline void write_census_csv(const std::string& path,
                             const std::vector<CensusArea>& areas,
                             const std::vector<std::string>& covariate_names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  out << "area_id,stratum,N";
  for (const auto& name : covariate_names) out << ",xbar_" << name;
  out << "\n";
  for (const auto& a : areas) {
    out << a.area_id << ',' << a.stratum << ',' << a.n_total;
    for (double x : a.xbar) out << ',' << fmt_double(x);
    out << "\n";
  }
}

// Builds an ArealDataset from ingested survey and census files, requiring the
// covariate headers to match exactly (same names, same order).
inline ArealDataset dataset_from_csv(const SurveyData& survey,
                                     const CensusData& census,
                                     const AggregateOptions& opts_in = {}) {
  if (survey.covariate_names != census.covariate_names)
    throw std::invalid_argument(
        "csv: survey and census covariate names do not match");
  AggregateOptions opts = opts_in;
  opts.covariate_names = survey.covariate_names;
  return aggregate(survey.units, census.areas, opts);
}

}  // namespace sae

#endif  // SAE_CSV_HPP
