#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "sonder/analytics.hpp"
#include "sonder/error.hpp"

namespace sonder {

namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::string csv_cell(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string roman(int n) {
  if (n < 1 || n > 3999) throw Error(ErrorCode::InvalidInput, "roman numeral out of range");
  static constexpr std::pair<int, const char*> kTable[] = {{1000, "M"}, {900, "CM"}, {500, "D"}, {400, "CD"},
                                                           {100, "C"},  {90, "XC"},  {50, "L"},  {40, "XL"},
                                                           {10, "X"},   {9, "IX"},   {5, "V"},   {4, "IV"},
                                                           {1, "I"}};
  std::string out;
  for (const auto& [value, glyph] : kTable) {
    while (n >= value) {
      out += glyph;
      n -= value;
    }
  }
  return out;
}

TableExport export_table(std::span<const RegressionFit> fits, std::span<const std::string> labels,
                         const StarLegend& legend) {
  if (fits.empty()) throw Error(ErrorCode::EmptyInput, "no fits to export");
  if (!labels.empty() && labels.size() != fits.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one label per fit expected");
  }
  std::vector<std::string> cols;
  for (std::size_t i = 0; i < fits.size(); ++i) cols.push_back(labels.empty() ? roman(static_cast<int>(i) + 1) : labels[i]);

  TableExport out;

  std::ostringstream csv;
  csv << "model,term,estimate,std_error,t_value,p_value,stars,n_obs,r_squared\n";
  for (std::size_t i = 0; i < fits.size(); ++i) {
    for (const auto& c : fits[i].coefficients) {
      csv << csv_cell(cols[i]) << ',' << csv_cell(c.term) << ',' << full(c.estimate) << ',' << full(c.std_error)
          << ',' << full(c.t_value) << ',' << full(c.p_value) << ',' << stars(c.p_value, legend) << ','
          << fits[i].n_obs << ',' << full(fits[i].r_squared) << '\n';
    }
  }
  out.csv = csv.str();

  // Term order: first appearance across models.
  std::vector<std::string> terms;
  for (const auto& f : fits) {
    for (const auto& c : f.coefficients) {
      if (std::find(terms.begin(), terms.end(), c.term) == terms.end()) terms.push_back(c.term);
    }
  }
  std::vector<std::string> fe_names;
  for (const auto& f : fits) {
    for (const auto& fe : f.fixed_effects) {
      if (std::find(fe_names.begin(), fe_names.end(), fe) == fe_names.end()) fe_names.push_back(fe);
    }
  }

  std::vector<std::vector<std::string>> rows;
  rows.push_back({""});
  for (const auto& c : cols) rows.back().push_back(c);
  const std::size_t header_rows = 1;
  for (const auto& term : terms) {
    std::vector<std::string> est{term};
    std::vector<std::string> se{""};
    for (const auto& f : fits) {
      if (f.has(term)) {
        const auto& c = f.at(term);
        est.push_back(fixed2(c.estimate) + stars(c.p_value, legend));
        se.push_back("(" + fixed2(c.std_error) + ")");
      } else {
        est.emplace_back();
        se.emplace_back();
      }
    }
    rows.push_back(std::move(est));
    rows.push_back(std::move(se));
  }
  const std::size_t body_end = rows.size();
  for (const auto& fe : fe_names) {
    std::vector<std::string> row{fe + " FE"};
    for (const auto& f : fits) {
      row.push_back(std::find(f.fixed_effects.begin(), f.fixed_effects.end(), fe) != f.fixed_effects.end() ? "Yes"
                                                                                                          : "No");
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::string> n_row{"N"};
  for (const auto& f : fits) n_row.push_back(std::to_string(f.n_obs));
  rows.push_back(std::move(n_row));

  std::vector<std::size_t> widths(cols.size() + 1, 0);
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j) widths[j] = std::max(widths[j], row[j].size());
  }
  std::size_t total = 0;
  for (auto w : widths) total += w + 2;
  const std::string rule(total, '-');

  std::ostringstream text;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j == 0) {
        text << std::left << std::setw(static_cast<int>(widths[j])) << row[j];
      } else {
        text << "  " << std::right << std::setw(static_cast<int>(widths[j])) << row[j];
      }
    }
    text << '\n';
  };
  text << rule << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    emit(rows[i]);
    if (i + 1 == header_rows || i + 1 == body_end) text << rule << '\n';
  }
  text << rule << '\n';
  char legend_line[128];
  std::snprintf(legend_line, sizeof legend_line, "***p<%g; **p<%g; *p<%g\n", legend.three, legend.two, legend.one);
  text << legend_line;
  out.text = text.str();
  return out;
}

std::vector<ParsedCoefficient> parse_regression_csv(std::string_view csv) {
  std::vector<ParsedCoefficient> out;
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty regression CSV");
  const auto header = split_csv_line(line);
  auto col = [&](std::string_view name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::ParseError, "regression CSV lacks column " + std::string(name));
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_model = col("model"), c_term = col("term"), c_est = col("estimate"), c_se = col("std_error"),
             c_p = col("p_value"), c_stars = col("stars");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw Error(ErrorCode::ParseError, "ragged regression CSV row");
    try {
      out.push_back({cells[c_model], cells[c_term], std::stod(cells[c_est]), std::stod(cells[c_se]),
                     std::stod(cells[c_p]), cells[c_stars]});
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("bad number in regression CSV: ") + e.what());
    }
  }
  return out;
}

}  // namespace sonder
