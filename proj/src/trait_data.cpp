#include "phylogauss/trait_data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace phylogauss {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

}  // namespace

TraitData parse_trait_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("trait CSV: empty file");
  auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "taxon") {
    throw std::runtime_error("trait CSV: header must be 'taxon,<trait names...>'");
  }

  TraitData data;
  data.trait_names.assign(header.begin() + 1, header.end());
  const int p = static_cast<int>(data.trait_names.size());

  std::vector<std::vector<double>> rows;
  std::vector<std::vector<bool>> masks;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (static_cast<int>(fields.size()) != p + 1) {
      throw std::runtime_error("trait CSV: line " + std::to_string(line_no) +
                               ": expected " + std::to_string(p + 1) + " fields, got " +
                               std::to_string(fields.size()));
    }
    data.taxa.push_back(fields[0]);
    std::vector<double> row(p, 0.0);
    std::vector<bool> mask(p, true);
    for (int k = 0; k < p; ++k) {
      const std::string& f = fields[k + 1];
      if (f == "NA") {
        row[k] = 0.0;
        mask[k] = false;
        continue;
      }
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (end != f.c_str() + f.size() || f.empty()) {
        throw std::runtime_error("trait CSV: line " + std::to_string(line_no) +
                                 ": malformed value '" + f + "'");
      }
      if (!std::isfinite(v)) {
        throw std::runtime_error("trait CSV: line " + std::to_string(line_no) +
                                 ": non-finite trait value");
      }
      row[k] = v;
    }
    rows.push_back(std::move(row));
    masks.push_back(std::move(mask));
  }

  const int n = static_cast<int>(rows.size());
  data.values.resize(n, p);
  data.observed.resize(n, p);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < p; ++k) {
      data.values(i, k) = rows[i][k];
      data.observed(i, k) = masks[i][k];
    }
  }
  return data;
}

TraitData read_trait_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("trait CSV: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_trait_csv(ss.str());
}

std::string format_trait_csv(const TraitData& data) {
  std::string out = "taxon";
  for (const auto& t : data.trait_names) out += "," + t;
  out += "\n";
  char buf[40];
  for (int i = 0; i < data.n_obs(); ++i) {
    out += data.taxa[i];
    for (int k = 0; k < data.n_traits(); ++k) {
      if (data.observed(i, k)) {
        std::snprintf(buf, sizeof(buf), ",%.17g", data.values(i, k));
        out += buf;
      } else {
        out += ",NA";
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace phylogauss
