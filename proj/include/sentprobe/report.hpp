#pragma once

// JSON (full precision) and aligned markdown (2 decimals, x100) renderings of
// evaluation reports, plus the Method x dataset summary table.

#include <algorithm>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sentprobe/evalsuite.hpp"

namespace sentprobe {

inline std::string fixed2(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

// Markdown table with every column padded to its widest cell. Columns listed
// in `right_aligned` get a right-aligned separator.
inline std::string markdown_table(const std::vector<std::string>& header,
                                  const std::vector<std::vector<std::string>>& rows,
                                  const std::vector<bool>& right_aligned = {}) {
  std::vector<std::size_t> width(header.size(), 3);
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = std::max(width[c], header[c].size());
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto right = [&](std::size_t c) { return c < right_aligned.size() && right_aligned[c]; };
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s = "|";
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string& cell = c < cells.size() ? cells[c] : std::string();
      const std::string pad(width[c] - cell.size(), ' ');
      s += " " + (right(c) ? pad + cell : cell + pad) + " |";
    }
    return s + "\n";
  };
  std::string out = line(header);
  out += "|";
  for (std::size_t c = 0; c < width.size(); ++c) {
    out += right(c) ? " " + std::string(width[c] - 1, '-') + ": |" : " " + std::string(width[c], '-') + " |";
  }
  out += "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

namespace detail {

inline nlohmann::json row_to_json(const StsRow& r) {
  nlohmann::json j = {{"label", r.label},
                      {"n", r.n},
                      {"spearman_x100", r.spearman},
                      {"pearson_x100", r.pearson},
                      {"spearman_x100_per_seed", r.spearman_per_seed},
                      {"pearson_x100_per_seed", r.pearson_per_seed}};
  j["error"] = r.valid() ? nlohmann::json(nullptr) : nlohmann::json(r.error);
  return j;
}

inline std::string runs_note(std::size_t runs) {
  return runs > 1 ? "mean of " + std::to_string(runs) + " runs" : "single run";
}

}  // namespace detail

inline nlohmann::json to_json(const StsReport& r) {
  nlohmann::json j;
  j["kind"] = "sts";
  j["provider"] = r.provider;
  j["runs"] = r.runs;
  j["seeds"] = r.seeds;
  j["subsets"] = nlohmann::json::array();
  for (const auto& s : r.subsets) j["subsets"].push_back(detail::row_to_json(s));
  j["all"] = detail::row_to_json(r.all);
  return j;
}

inline std::string to_markdown(const StsReport& r) {
  std::vector<std::vector<std::string>> rows;
  auto add = [&](const StsRow& row) {
    if (row.valid()) {
      rows.push_back({row.label, std::to_string(row.n), fixed2(row.spearman), fixed2(row.pearson)});
    } else {
      rows.push_back({row.label, std::to_string(row.n), "n/a", "n/a (" + row.error + ")"});
    }
  };
  for (const auto& s : r.subsets) add(s);
  add(r.all);
  std::string out = "STS: " + (r.provider.empty() ? std::string("provider") : r.provider) + " (" +
                    detail::runs_note(r.runs) + ")\n\n";
  out += markdown_table({"Subset", "n", "Spearman x100", "Pearson x100"}, rows,
                        {false, true, true, true});
  return out;
}

inline nlohmann::json to_json(const ProbeReport& r) {
  nlohmann::json j;
  j["kind"] = "probe";
  j["provider"] = r.provider;
  j["runs"] = r.runs;
  j["seeds"] = r.seeds;
  j["tasks"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    j["tasks"].push_back({{"task", row.task},
                          {"n", row.n},
                          {"accuracy_x100", row.accuracy},
                          {"accuracy_x100_per_seed", row.accuracy_per_seed}});
  }
  return j;
}

inline std::string to_markdown(const ProbeReport& r) {
  std::vector<std::vector<std::string>> rows;
  double sum = 0.0;
  for (const auto& row : r.rows) {
    rows.push_back({row.task, std::to_string(row.n), fixed2(row.accuracy)});
    sum += row.accuracy;
  }
  if (!r.rows.empty()) rows.push_back({"Avg.", "", fixed2(sum / static_cast<double>(r.rows.size()))});
  std::string out = "Probe: " + (r.provider.empty() ? std::string("provider") : r.provider) + " (" +
                    detail::runs_note(r.runs) + ")\n\n";
  out += markdown_table({"Task", "n", "Accuracy x100"}, rows, {false, true, true});
  return out;
}

// Method x dataset grid with a trailing average column.
struct ResultTable {
  std::string title;
  std::vector<std::string> columns;
  struct Row {
    std::string method;
    std::vector<std::optional<double>> cells;
  };
  std::vector<Row> rows;

  static std::optional<double> average(const Row& r) {
    if (r.cells.empty()) return std::nullopt;
    double s = 0.0;
    for (const auto& c : r.cells) {
      if (!c) return std::nullopt;
      s += *c;
    }
    return s / static_cast<double>(r.cells.size());
  }
};

inline nlohmann::json to_json(const ResultTable& t) {
  nlohmann::json j;
  j["title"] = t.title;
  j["columns"] = t.columns;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : r.cells) cells.push_back(c ? nlohmann::json(*c) : nlohmann::json(nullptr));
    const auto avg = ResultTable::average(r);
    j["rows"].push_back({{"method", r.method},
                         {"cells", cells},
                         {"avg", avg ? nlohmann::json(*avg) : nlohmann::json(nullptr)}});
  }
  return j;
}

inline std::string to_markdown(const ResultTable& t) {
  std::vector<std::string> header{"Method"};
  header.insert(header.end(), t.columns.begin(), t.columns.end());
  header.push_back("Avg.");
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : t.rows) {
    std::vector<std::string> cells{r.method};
    for (const auto& c : r.cells) cells.push_back(c ? fixed2(*c) : "n/a");
    const auto avg = ResultTable::average(r);
    cells.push_back(avg ? fixed2(*avg) : "n/a");
    rows.push_back(std::move(cells));
  }
  std::vector<bool> right(header.size(), true);
  right[0] = false;
  return (t.title.empty() ? std::string() : t.title + "\n\n") + markdown_table(header, rows, right);
}

}  // namespace sentprobe
