#include "cnmix/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace cnmix {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

}  // namespace

void Dataset::validate() const {
  if (values.rows() != mask.rows() || values.cols() != mask.cols())
    throw DataError("dataset: values and mask shapes differ");
  if (values.rows() == 0) throw DataError("dataset: no rows");
  if (!columns.empty() &&
      static_cast<Eigen::Index>(columns.size()) != values.cols())
    throw DataError("dataset: header width differs from data width");
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    if (!mask.row(i).any())
      throw DataError("dataset: row " + std::to_string(i + 1) +
                      " has all cells missing");
}

Dataset load_dataset(const std::filesystem::path& path,
                     const std::string& missing_token) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");

  std::string header;
  if (!std::getline(in, header)) throw DataError("empty file: " + path.string());
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';

  Dataset ds;
  ds.columns = split_line(header, delim);
  const auto d = static_cast<Eigen::Index>(ds.columns.size());
  if (d == 0) throw DataError("header row has no columns");

  std::vector<std::vector<double>> vals;
  std::vector<std::vector<bool>> obs;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_line(line, delim);
    if (static_cast<Eigen::Index>(cells.size()) != d)
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(d) + " cells, found " +
                      std::to_string(cells.size()));
    std::vector<double> v(d);
    std::vector<bool> o(d);
    bool any = false;
    for (Eigen::Index j = 0; j < d; ++j) {
      const std::string& cell = cells[j];
      if (cell.empty() || cell == missing_token) {
        v[j] = std::numeric_limits<double>::quiet_NaN();
        o[j] = false;
        continue;
      }
      double parsed = 0.0;
      const auto* first = cell.data();
      const auto* last = cell.data() + cell.size();
      auto [ptr, ec] = std::from_chars(first, last, parsed);
      if (ec != std::errc() || ptr != last)
        throw DataError("row " + std::to_string(row) + ", column " +
                        std::to_string(j + 1) + ": unparseable cell '" + cell +
                        "'");
      v[j] = parsed;
      o[j] = true;
      any = true;
    }
    if (!any)
      throw DataError("row " + std::to_string(row) + " has all cells missing");
    vals.push_back(std::move(v));
    obs.push_back(std::move(o));
  }
  if (vals.empty()) throw DataError("no data rows in '" + path.string() + "'");

  const auto n = static_cast<Eigen::Index>(vals.size());
  ds.values.resize(n, d);
  ds.mask.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      ds.values(i, j) = vals[i][j];
      ds.mask(i, j) = obs[i][j];
    }
  return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (std::size_t j = 0; j < ds.columns.size(); ++j) {
    if (j) out << ',';
    out << ds.columns[j];
  }
  if (ds.columns.empty())
    for (Eigen::Index j = 0; j < ds.d(); ++j) out << (j ? ",x" : "x") << (j + 1);
  out << '\n';
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.d(); ++j) {
      if (j) out << ',';
      if (ds.mask(i, j))
        out << format_double(ds.values(i, j));
      else
        out << "NA";
    }
    out << '\n';
  }
}

std::vector<ObservationView> observation_views(const Dataset& ds) {
  std::vector<ObservationView> views;
  views.reserve(static_cast<std::size_t>(ds.n()));
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    ObservationView v;
    v.row = static_cast<int>(i);
    for (Eigen::Index j = 0; j < ds.d(); ++j) {
      if (ds.mask(i, j))
        v.observed_idx.push_back(static_cast<int>(j));
      else
        v.missing_idx.push_back(static_cast<int>(j));
    }
    v.d_obs = static_cast<int>(v.observed_idx.size());
    views.push_back(std::move(v));
  }
  return views;
}

std::vector<PatternGroup> pattern_groups(const Dataset& ds) {
  std::vector<PatternGroup> groups;
  std::map<std::vector<bool>, std::size_t> index;
  std::vector<bool> key(static_cast<std::size_t>(ds.d()));
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    for (Eigen::Index j = 0; j < ds.d(); ++j) key[static_cast<std::size_t>(j)] = ds.mask(i, j);
    auto it = index.find(key);
    if (it == index.end()) {
      PatternGroup g;
      for (Eigen::Index j = 0; j < ds.d(); ++j) {
        if (ds.mask(i, j))
          g.observed_idx.push_back(static_cast<int>(j));
        else
          g.missing_idx.push_back(static_cast<int>(j));
      }
      it = index.emplace(key, groups.size()).first;
      groups.push_back(std::move(g));
    }
    groups[it->second].rows.push_back(static_cast<int>(i));
  }
  return groups;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace cnmix
