#include "scriptorium/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "scriptorium/errors.hpp"

namespace scriptorium {

double topn_accuracy(const std::vector<ScoredTrial>& trials, int n) {
  if (n < 1) throw ConfigError("top-n: n must be >= 1");
  if (trials.empty()) throw DataError("top-n: no trials");
  size_t hits = 0;
  for (const auto& t : trials) {
    if (t.ranked_labels.empty()) throw DataError("top-n: empty ranked list");
    size_t limit = std::min<size_t>(static_cast<size_t>(n),
                                    t.ranked_labels.size());
    for (size_t i = 0; i < limit; ++i)
      if (t.ranked_labels[i] == t.true_label) {
        ++hits;
        break;
      }
  }
  return static_cast<double>(hits) / static_cast<double>(trials.size());
}

double soft_topn(const std::vector<ScoredTrial>& trials, int n) {
  return topn_accuracy(trials, n);
}

double hard_topn(const std::vector<ScoredTrial>& trials, int n) {
  if (n < 1) throw ConfigError("top-n: n must be >= 1");
  if (trials.empty()) throw DataError("top-n: no trials");
  size_t hits = 0;
  for (const auto& t : trials) {
    if (t.ranked_labels.empty()) throw DataError("top-n: empty ranked list");
    if (t.ranked_labels.size() < static_cast<size_t>(n)) continue;
    bool all = true;
    for (int i = 0; i < n; ++i)
      if (t.ranked_labels[static_cast<size_t>(i)] != t.true_label) {
        all = false;
        break;
      }
    if (all) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(trials.size());
}

namespace {

double far_at(const std::vector<double>& impostor_sorted, double t) {
  // fraction of impostor scores >= t
  auto it = std::lower_bound(impostor_sorted.begin(), impostor_sorted.end(), t);
  return static_cast<double>(impostor_sorted.end() - it) /
         static_cast<double>(impostor_sorted.size());
}

double frr_at(const std::vector<double>& genuine_sorted, double t) {
  // fraction of genuine scores < t
  auto it = std::lower_bound(genuine_sorted.begin(), genuine_sorted.end(), t);
  return static_cast<double>(it - genuine_sorted.begin()) /
         static_cast<double>(genuine_sorted.size());
}

std::vector<double> candidate_thresholds(const std::vector<double>& genuine,
                                         const std::vector<double>& impostor) {
  std::set<double> scores(genuine.begin(), genuine.end());
  scores.insert(impostor.begin(), impostor.end());
  std::vector<double> distinct(scores.begin(), scores.end());
  std::vector<double> cands;
  cands.push_back(distinct.front() - 1.0);  // accept everything
  for (size_t i = 0; i < distinct.size(); ++i) {
    cands.push_back(distinct[i]);
    if (i + 1 < distinct.size())
      cands.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  }
  cands.push_back(distinct.back() + 1.0);  // reject everything
  return cands;
}

}  // namespace

std::vector<RocPoint> roc_curve(const std::vector<double>& genuine_scores,
                                const std::vector<double>& impostor_scores) {
  if (genuine_scores.empty() || impostor_scores.empty())
    throw DataError("roc: empty score list");
  std::vector<double> g = genuine_scores, im = impostor_scores;
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());
  std::vector<RocPoint> out;
  for (double t : candidate_thresholds(g, im))
    out.push_back({t, far_at(im, t), frr_at(g, t)});
  return out;
}

std::pair<double, double> eer(const std::vector<double>& genuine_scores,
                              const std::vector<double>& impostor_scores) {
  if (genuine_scores.empty() || impostor_scores.empty())
    throw DataError("eer: empty score list");
  std::vector<double> g = genuine_scores, im = impostor_scores;
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());
  double best = 1.0, best_t = 0.0;
  for (double t : candidate_thresholds(g, im)) {
    double rate = 0.5 * (far_at(im, t) + frr_at(g, t));
    if (rate < best) {
      best = rate;
      best_t = t;
    }
  }
  return {best, best_t};
}

double silhouette(const std::vector<std::vector<float>>& points,
                  const std::vector<int>& assignments) {
  const size_t n = points.size();
  if (n == 0 || assignments.size() != n)
    throw DataError("silhouette: points/assignments mismatch");
  int k = 0;
  for (int a : assignments) {
    if (a < 0) throw DataError("silhouette: negative cluster index");
    k = std::max(k, a + 1);
  }
  if (k < 2) throw DataError("silhouette: need at least 2 clusters");
  std::vector<size_t> cluster_size(static_cast<size_t>(k), 0);
  for (int a : assignments) ++cluster_size[static_cast<size_t>(a)];
  for (size_t c = 0; c < cluster_size.size(); ++c)
    if (cluster_size[c] == 0)
      throw DataError("silhouette: empty cluster " + std::to_string(c));

  auto dist = [&](size_t i, size_t j) {
    double s = 0.0;
    for (size_t d = 0; d < points[i].size(); ++d) {
      double diff = static_cast<double>(points[i][d]) - points[j][d];
      s += diff * diff;
    }
    return std::sqrt(s);
  };

  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    int ci = assignments[i];
    if (cluster_size[static_cast<size_t>(ci)] == 1) continue;  // contributes 0
    std::vector<double> sum(static_cast<size_t>(k), 0.0);
    for (size_t j = 0; j < n; ++j)
      if (j != i) sum[static_cast<size_t>(assignments[j])] += dist(i, j);
    double a =
        sum[static_cast<size_t>(ci)] /
        static_cast<double>(cluster_size[static_cast<size_t>(ci)] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == ci) continue;
      b = std::min(b, sum[static_cast<size_t>(c)] /
                          static_cast<double>(cluster_size[static_cast<size_t>(c)]));
    }
    double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Report

namespace {

// Column-name driven formatting: silhouette with two decimals, cluster
// counts as signed integers, percentages with one decimal.
std::string format_value(const std::string& column, double v) {
  char buf[64];
  if (column.find("Sil") != std::string::npos) {
    std::snprintf(buf, sizeof(buf), "%.2f", v);
  } else if (column.find("K") != std::string::npos ||
             column.find("dK") != std::string::npos) {
    std::snprintf(buf, sizeof(buf), "%+lld", static_cast<long long>(v));
  } else {
    std::snprintf(buf, sizeof(buf), "%.1f", v);
  }
  return buf;
}

}  // namespace

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << "# evaluation report\n";
  out << "provenance: " << provenance << "\n";
  for (const auto& t : tables) {
    out << "\n## " << t.task << "\n";
    out << "| split |";
    for (const auto& c : t.columns) out << " " << c << " |";
    out << "\n";
    for (const auto& [label, values] : t.rows) {
      out << "| " << label << " |";
      for (size_t i = 0; i < values.size(); ++i)
        out << " " << format_value(t.columns[i], values[i]) << " |";
      out << "\n";
    }
  }
  return out.str();
}

EvalReport EvalReport::from_text(const std::string& text) {
  EvalReport report;
  std::istringstream in(text);
  std::string line;
  MetricTable* current = nullptr;
  auto split_row = [](const std::string& l) {
    std::vector<std::string> cells;
    size_t pos = l.find('|');
    while (pos != std::string::npos) {
      size_t next = l.find('|', pos + 1);
      if (next == std::string::npos) break;
      std::string cell = l.substr(pos + 1, next - pos - 1);
      size_t b = cell.find_first_not_of(' ');
      size_t e = cell.find_last_not_of(' ');
      cells.push_back(b == std::string::npos ? ""
                                             : cell.substr(b, e - b + 1));
      pos = next;
    }
    return cells;
  };
  while (std::getline(in, line)) {
    if (line.rfind("provenance: ", 0) == 0) {
      report.provenance = line.substr(12);
    } else if (line.rfind("## ", 0) == 0) {
      report.tables.push_back(MetricTable{line.substr(3), {}, {}});
      current = &report.tables.back();
    } else if (!line.empty() && line.front() == '|' && current) {
      auto cells = split_row(line);
      if (cells.empty()) continue;
      if (current->columns.empty()) {
        current->columns.assign(cells.begin() + 1, cells.end());
      } else {
        std::vector<double> values;
        for (size_t i = 1; i < cells.size(); ++i)
          values.push_back(std::stod(cells[i]));
        current->rows.emplace_back(cells[0], std::move(values));
      }
    }
  }
  return report;
}

std::string EvalReport::to_json_text() const {
  nlohmann::json j;
  j["provenance"] = provenance;
  j["tasks"] = nlohmann::json::object();
  for (const auto& t : tables) {
    nlohmann::json rows = nlohmann::json::object();
    for (const auto& [label, values] : t.rows) {
      nlohmann::json row = nlohmann::json::object();
      for (size_t i = 0; i < values.size(); ++i) row[t.columns[i]] = values[i];
      rows[label] = row;
    }
    j["tasks"][t.task] = rows;
  }
  return j.dump(2);
}

}  // namespace scriptorium
