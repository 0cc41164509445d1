#pragma once

// Detection-side evaluation: confusion-matrix metrics, categorical
// association, per-subgroup tallies and embedding-drift angles.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bms/errors.hpp"
#include "bms/numerics.hpp"

namespace bms {

struct ClassReport {
  std::vector<std::string> labels;
  std::vector<std::vector<std::int64_t>> confusion;  // [true][pred]
  double accuracy = 0.0;
  std::vector<double> precision, recall, f1;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double balanced_accuracy = 0.0;
  double kappa = 0.0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["labels"] = labels;
    j["confusion"] = confusion;
    j["accuracy"] = accuracy;
    j["precision"] = precision;
    j["recall"] = recall;
    j["f1"] = f1;
    j["macro_precision"] = macro_precision;
    j["macro_recall"] = macro_recall;
    j["macro_f1"] = macro_f1;
    j["weighted_f1"] = weighted_f1;
    j["balanced_accuracy"] = balanced_accuracy;
    j["kappa"] = kappa;
    return j;
  }
};

inline ClassReport classification_metrics(const std::vector<std::string>& y_true,
                                          const std::vector<std::string>& y_pred) {
  if (y_true.empty()) throw Error(ErrorCode::EmptyEval, "no evaluation data");
  if (y_true.size() != y_pred.size())
    throw Error(ErrorCode::ShapeError, "truth/prediction length mismatch");

  ClassReport r;
  r.labels.assign(y_true.begin(), y_true.end());
  r.labels.insert(r.labels.end(), y_pred.begin(), y_pred.end());
  std::sort(r.labels.begin(), r.labels.end());
  r.labels.erase(std::unique(r.labels.begin(), r.labels.end()), r.labels.end());
  auto idx = [&](const std::string& s) {
    return std::size_t(std::lower_bound(r.labels.begin(), r.labels.end(), s) -
                       r.labels.begin());
  };

  std::size_t c = r.labels.size(), n = y_true.size();
  r.confusion.assign(c, std::vector<std::int64_t>(c, 0));
  for (std::size_t i = 0; i < n; ++i) ++r.confusion[idx(y_true[i])][idx(y_pred[i])];

  std::int64_t trace = 0;
  std::vector<std::int64_t> support(c, 0), predicted(c, 0);
  for (std::size_t i = 0; i < c; ++i) {
    trace += r.confusion[i][i];
    for (std::size_t j = 0; j < c; ++j) {
      support[i] += r.confusion[i][j];
      predicted[j] += r.confusion[i][j];
    }
  }
  r.accuracy = double(trace) / double(n);

  double recall_sum = 0.0;
  std::size_t recall_classes = 0;
  for (std::size_t i = 0; i < c; ++i) {
    double tp = double(r.confusion[i][i]);
    double prec = predicted[i] > 0 ? tp / double(predicted[i]) : 0.0;
    double rec = support[i] > 0 ? tp / double(support[i]) : 0.0;
    double f = (prec + rec > 0) ? 2 * prec * rec / (prec + rec) : 0.0;
    r.precision.push_back(prec);
    r.recall.push_back(rec);
    r.f1.push_back(f);
    r.macro_precision += prec / double(c);
    r.macro_recall += rec / double(c);
    r.macro_f1 += f / double(c);
    r.weighted_f1 += f * double(support[i]) / double(n);
    if (support[i] > 0) {
      recall_sum += rec;
      ++recall_classes;
    }
  }
  r.balanced_accuracy = recall_classes ? recall_sum / double(recall_classes) : 0.0;

  // Cohen's kappa: (p_o - p_e) / (1 - p_e)
  double pe = 0.0;
  for (std::size_t i = 0; i < c; ++i)
    pe += double(support[i]) * double(predicted[i]) / (double(n) * double(n));
  r.kappa = (pe < 1.0) ? (r.accuracy - pe) / (1.0 - pe) : 1.0;
  return r;
}

struct CramersV {
  double value = 0.0;
  bool degenerate = false;  // a series with a single category
};

inline CramersV cramers_v(const std::vector<std::string>& x,
                          const std::vector<std::string>& y) {
  if (x.size() != y.size() || x.empty())
    throw Error(ErrorCode::EmptyEval, "cramers_v needs equal non-empty series");
  auto categories = [](const std::vector<std::string>& s) {
    std::vector<std::string> c(s.begin(), s.end());
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    return c;
  };
  std::vector<std::string> cx = categories(x), cy = categories(y);
  if (cx.size() < 2 || cy.size() < 2) return CramersV{0.0, true};

  auto idx = [](const std::vector<std::string>& cats, const std::string& s) {
    return std::size_t(std::lower_bound(cats.begin(), cats.end(), s) - cats.begin());
  };
  std::size_t r = cx.size(), c = cy.size(), n = x.size();
  std::vector<std::vector<double>> table(r, std::vector<double>(c, 0.0));
  for (std::size_t i = 0; i < n; ++i) table[idx(cx, x[i])][idx(cy, y[i])] += 1.0;

  std::vector<double> row(r, 0.0), col(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      row[i] += table[i][j];
      col[j] += table[i][j];
    }
  double chi2 = 0.0;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      double expected = row[i] * col[j] / double(n);
      if (expected > 0) {
        double d = table[i][j] - expected;
        chi2 += d * d / expected;
      }
    }
  double denom = double(n) * double(std::min(r, c) - 1);
  return CramersV{std::sqrt(chi2 / denom), false};
}

struct SubgroupStats {
  std::int64_t correct = 0;
  std::int64_t incorrect = 0;
  double accuracy() const {
    std::int64_t t = correct + incorrect;
    return t ? double(correct) / double(t) : 0.0;
  }
};

// Per-(group, correctness) tallies restricted to the target classes; unknown
// group values collapse into "other".
inline std::map<std::string, SubgroupStats> subgroup_report(
    const std::vector<std::string>& y_true, const std::vector<std::string>& y_pred,
    const std::vector<std::string>& group,
    const std::vector<std::string>& target_classes,
    const std::vector<std::string>& known_groups = {}) {
  if (y_true.size() != y_pred.size() || y_true.size() != group.size())
    throw Error(ErrorCode::ShapeError, "subgroup_report length mismatch");
  std::map<std::string, SubgroupStats> out;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (std::find(target_classes.begin(), target_classes.end(), y_true[i]) ==
        target_classes.end())
      continue;
    std::string g = group[i];
    if (!known_groups.empty() &&
        std::find(known_groups.begin(), known_groups.end(), g) ==
            known_groups.end())
      g = "other";
    if (y_true[i] == y_pred[i]) ++out[g].correct;
    else ++out[g].incorrect;
  }
  return out;
}

struct DriftSummary {
  std::vector<double> angles;        // radians, NaN where undefined
  std::vector<std::int64_t> flagged; // zero-vector node ids
  double mean_angle = 0.0;
  std::vector<std::int64_t> histogram;  // 18 bins over [0, pi]
};

// Angle between each node's initial and trained embedding vector.
inline DriftSummary embedding_drift(const Tensor& initial, const Tensor& trained) {
  if (initial.rows() != trained.rows())
    throw Error(ErrorCode::ShapeError, "drift: node count mismatch");
  if (initial.cols() != trained.cols())
    throw Error(ErrorCode::ShapeError, "drift: dimension mismatch");
  DriftSummary s;
  s.histogram.assign(18, 0);
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < initial.rows(); ++i) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t j = 0; j < initial.cols(); ++j) {
      dot += initial.at(i, j) * trained.at(i, j);
      na += initial.at(i, j) * initial.at(i, j);
      nb += trained.at(i, j) * trained.at(i, j);
    }
    if (na == 0 || nb == 0) {
      s.angles.push_back(std::nan(""));
      s.flagged.push_back(std::int64_t(i));
      continue;
    }
    double cosv = dot / (std::sqrt(na) * std::sqrt(nb));
    cosv = std::min(1.0, std::max(-1.0, cosv));
    double angle = std::acos(cosv);
    s.angles.push_back(angle);
    sum += angle;
    ++counted;
    std::size_t bin = std::min<std::size_t>(17, std::size_t(angle / M_PI * 18.0));
    ++s.histogram[bin];
  }
  s.mean_angle = counted ? sum / double(counted) : 0.0;
  return s;
}

// Rank-based AUC with midrank tie handling; shared by the fraud harness.
inline double auc_score(const std::vector<int>& y_true,
                        const std::vector<double>& scores) {
  if (y_true.size() != scores.size() || y_true.empty())
    throw Error(ErrorCode::EmptyEval, "auc needs equal non-empty series");
  std::vector<std::size_t> order(y_true.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  std::vector<double> rank(y_true.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    double mid = 0.5 * double(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double pos_ranks = 0.0;
  std::int64_t pos = 0, neg = 0;
  for (std::size_t k = 0; k < y_true.size(); ++k) {
    if (y_true[k]) {
      pos_ranks += rank[k];
      ++pos;
    } else {
      ++neg;
    }
  }
  if (!pos || !neg)
    throw Error(ErrorCode::DegenerateLabels, "auc needs both classes");
  return (pos_ranks - double(pos) * double(pos + 1) / 2.0) /
         (double(pos) * double(neg));
}

}  // namespace bms
