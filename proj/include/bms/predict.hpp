#pragma once

// Next-interaction prediction at desk scale: Pop / ItemKNN / embedding-dot
// scorers, ranking metrics, and time-independent entropy.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bms/errors.hpp"
#include "bms/ingest.hpp"
#include "bms/numerics.hpp"

namespace bms {

struct Interaction {
  std::string user;
  std::string item;
  std::int64_t impression_ts = 0;
  std::optional<std::int64_t> click_ts;  // absent for non-clicks
};

class InteractionLog {
 public:
  void add(Interaction ev) {
    if (ev.click_ts && *ev.click_ts < ev.impression_ts)
      throw Error(ErrorCode::SchemaMismatch,
                  "click before impression for user " + ev.user);
    events_.push_back(std::move(ev));
  }

  // Clicked items per user, ordered by (click time, input index).
  std::map<std::string, std::vector<std::string>> click_histories() const {
    std::map<std::string, std::vector<std::pair<std::int64_t, std::size_t>>> keyed;
    for (std::size_t i = 0; i < events_.size(); ++i) {
      const auto& e = events_[i];
      if (e.click_ts) keyed[e.user].emplace_back(*e.click_ts, i);
    }
    std::map<std::string, std::vector<std::string>> out;
    for (auto& [user, v] : keyed) {
      std::sort(v.begin(), v.end());
      for (const auto& [ts, i] : v) out[user].push_back(events_[i].item);
    }
    return out;
  }

  const std::vector<Interaction>& events() const { return events_; }

  static InteractionLog from_csv(const std::string& path) {
    InteractionLog log;
    auto res = read_csv(path, interact_schema());
    for (const auto& rec : res.records) {
      Interaction ev;
      ev.user = rec.values.at("user");
      ev.item = rec.values.at("item");
      ev.impression_ts = std::stoll(rec.values.at("impression_ts"));
      auto it = rec.values.find("click_ts");
      if (it != rec.values.end()) {
        std::int64_t c = std::stoll(it->second);
        if (c != 0) ev.click_ts = c;  // 0 marks a non-click
      }
      log.add(std::move(ev));
    }
    return log;
  }

 private:
  std::vector<Interaction> events_;
};

// ---------------------------------------------------------------------------
// Time-independent entropy
// ---------------------------------------------------------------------------

// S = -sum_j p(j) log2 p(j) over the empirical item frequencies.
inline double entropy_bits(const std::vector<std::string>& history) {
  if (history.empty()) throw Error(ErrorCode::EmptyHistory, "empty history");
  std::map<std::string, std::size_t> freq;
  for (const auto& item : history) ++freq[item];
  double s = 0.0;
  for (const auto& [item, n] : freq) {
    double p = double(n) / double(history.size());
    s -= p * std::log2(p);
  }
  return s;
}

struct EntropyProfile {
  std::string user;
  std::vector<std::size_t> history_lengths;
  std::vector<double> values;
};

struct EntropyCurve {
  std::vector<std::size_t> checkpoints;      // event-prefix counts
  std::vector<double> mean_entropy;          // NaN for omitted checkpoints
  std::vector<std::size_t> users_counted;
  std::vector<EntropyProfile> profiles;
};

// Checkpoints are event-prefix counts; at checkpoint t each user contributes
// the entropy of their first min(t, len) clicks; users with no clicks by t
// are skipped.
inline EntropyCurve entropy_curve(const InteractionLog& log,
                                  const std::vector<std::string>& users,
                                  const std::vector<std::size_t>& checkpoints) {
  for (std::size_t i = 1; i < checkpoints.size(); ++i)
    if (checkpoints[i] <= checkpoints[i - 1])
      throw Error(ErrorCode::InvalidK, "checkpoints must increase");
  auto histories = log.click_histories();
  EntropyCurve out;
  out.checkpoints = checkpoints;
  for (const auto& u : users) {
    EntropyProfile p;
    p.user = u;
    out.profiles.push_back(std::move(p));
  }
  for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
    std::size_t t = checkpoints[ci];
    double sum = 0.0;
    std::size_t counted = 0;
    for (std::size_t ui = 0; ui < users.size(); ++ui) {
      auto it = histories.find(users[ui]);
      if (it == histories.end() || it->second.empty()) continue;
      std::size_t len = std::min(t, it->second.size());
      if (len == 0) continue;
      std::vector<std::string> prefix(it->second.begin(),
                                      it->second.begin() + len);
      double s = entropy_bits(prefix);
      out.profiles[ui].history_lengths.push_back(len);
      out.profiles[ui].values.push_back(s);
      sum += s;
      ++counted;
    }
    out.users_counted.push_back(counted);
    out.mean_entropy.push_back(counted ? sum / double(counted)
                                       : std::nan(""));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scorers
// ---------------------------------------------------------------------------

enum class Scorer { Pop, ItemKnn, EmbeddingDot };

struct ScoringContext {
  std::map<std::string, std::int64_t> item_clicks;  // global click counts
  std::map<std::string, std::map<std::string, double>> cooccur;  // item -> item -> count
  std::map<std::string, std::vector<std::string>> user_history;
  std::map<std::string, std::vector<double>> user_vec, item_vec;
  bool cold_user_fallback = false;  // set when itemknn fell back to pop

  static ScoringContext from_log(const InteractionLog& log) {
    ScoringContext ctx;
    ctx.user_history = log.click_histories();
    for (const auto& [user, items] : ctx.user_history) {
      std::set<std::string> distinct(items.begin(), items.end());
      for (const auto& item : items) ++ctx.item_clicks[item];
      for (const auto& a : distinct)
        for (const auto& b : distinct)
          if (a != b) ctx.cooccur[a][b] += 1.0;
    }
    return ctx;
  }
};

inline double cosine(const std::map<std::string, double>& a,
                     const std::map<std::string, double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (const auto& [k, v] : a) {
    na += v * v;
    auto it = b.find(k);
    if (it != b.end()) dot += v * it->second;
  }
  for (const auto& [k, v] : b) nb += v * v;
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Top-K candidates under the chosen scorer; ties broken by item token order.
inline std::vector<std::string> rank_items(Scorer scorer, ScoringContext& ctx,
                                           const std::string& user,
                                           std::vector<std::string> candidates,
                                           std::size_t k) {
  if (candidates.empty())
    throw Error(ErrorCode::EmptyInput, "no candidates to rank");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());

  Scorer effective = scorer;
  if (scorer == Scorer::ItemKnn) {
    auto it = ctx.user_history.find(user);
    if (it == ctx.user_history.end() || it->second.empty()) {
      effective = Scorer::Pop;  // cold user
      ctx.cold_user_fallback = true;
    }
  }

  std::vector<std::pair<double, std::string>> scored;
  for (const auto& item : candidates) {
    double s = 0.0;
    switch (effective) {
      case Scorer::Pop: {
        auto it = ctx.item_clicks.find(item);
        s = it == ctx.item_clicks.end() ? 0.0 : double(it->second);
        break;
      }
      case Scorer::ItemKnn: {
        static const std::map<std::string, double> empty;
        auto ci = ctx.cooccur.find(item);
        const auto& vec_i = ci == ctx.cooccur.end() ? empty : ci->second;
        for (const auto& h : ctx.user_history.at(user)) {
          auto ch = ctx.cooccur.find(h);
          const auto& vec_h = ch == ctx.cooccur.end() ? empty : ch->second;
          s += cosine(vec_i, vec_h);
        }
        break;
      }
      case Scorer::EmbeddingDot: {
        auto ui = ctx.user_vec.find(user);
        auto ii = ctx.item_vec.find(item);
        if (ui == ctx.user_vec.end())
          throw Error(ErrorCode::MissingEmbedding, "no vector for user " + user);
        if (ii != ctx.item_vec.end()) {
          for (std::size_t d = 0; d < ui->second.size(); ++d)
            s += ui->second[d] * ii->second[d];
        }
        break;
      }
    }
    scored.emplace_back(s, item);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // tie: item token order
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, scored.size()); ++i)
    out.push_back(scored[i].second);
  return out;
}

// ---------------------------------------------------------------------------
// Ranking metrics
// ---------------------------------------------------------------------------

struct RankingMetrics {
  double recall = 0, mrr = 0, ndcg = 0, hit = 0, precision = 0;

  nlohmann::ordered_json to_json() const {
    return {{"recall", recall}, {"mrr", mrr}, {"ndcg", ndcg},
            {"hit", hit},       {"precision", precision}};
  }
};

// One ground-truth item per user (leave-one-out). NDCG_i = 1/log2(P_i + 1)
// with the 1-based hit position; misses contribute 0 everywhere.
inline RankingMetrics ranking_metrics(
    const std::vector<std::vector<std::string>>& recommendations,
    const std::vector<std::string>& truth, std::size_t k = 10) {
  if (k == 0) throw Error(ErrorCode::InvalidK, "K must be positive");
  if (recommendations.size() != truth.size() || truth.empty())
    throw Error(ErrorCode::EmptyEval, "recommendation/truth mismatch");
  RankingMetrics m;
  double n = double(truth.size());
  for (std::size_t u = 0; u < truth.size(); ++u) {
    const auto& rec = recommendations[u];
    std::size_t limit = std::min(k, rec.size());
    std::size_t pos = 0;  // 1-based, 0 = miss
    for (std::size_t i = 0; i < limit; ++i) {
      if (rec[i] == truth[u]) {
        pos = i + 1;
        break;
      }
    }
    if (pos) {
      m.hit += 1.0 / n;
      m.recall += 1.0 / n;
      m.mrr += 1.0 / double(pos) / n;
      m.ndcg += 1.0 / std::log2(double(pos) + 1.0) / n;
      m.precision += 1.0 / double(k) / n;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Leave-last-out evaluation with sampled negatives
// ---------------------------------------------------------------------------

struct PredictEvalResult {
  RankingMetrics metrics;
  std::size_t users_evaluated = 0;
};

// Per user: hold out the last click, score it against 100 sampled negative
// items plus the truth, report metrics at K.
inline PredictEvalResult evaluate_scorer(const InteractionLog& log, Scorer scorer,
                                         std::size_t k = 10,
                                         std::size_t negatives = 100,
                                         std::uint64_t seed = 1,
                                         const std::map<std::string, std::vector<double>>* user_vecs = nullptr,
                                         const std::map<std::string, std::vector<double>>* item_vecs = nullptr) {
  auto histories = log.click_histories();
  std::vector<std::string> all_items;
  {
    std::set<std::string> s;
    for (const auto& [u, h] : histories) s.insert(h.begin(), h.end());
    all_items.assign(s.begin(), s.end());
  }
  if (all_items.empty()) throw Error(ErrorCode::EmptyEval, "log has no clicks");

  // training context excludes each user's held-out last click (last by
  // click time, index as tie break)
  InteractionLog train;
  std::map<std::string, std::string> held;
  {
    std::map<std::string, std::pair<std::pair<std::int64_t, std::size_t>,
                                    std::size_t>> last;  // user -> (key, idx)
    std::map<std::string, std::size_t> click_count;
    const auto& events = log.events();
    for (std::size_t i = 0; i < events.size(); ++i) {
      const auto& ev = events[i];
      if (!ev.click_ts) continue;
      ++click_count[ev.user];
      std::pair<std::int64_t, std::size_t> key{*ev.click_ts, i};
      auto it = last.find(ev.user);
      if (it == last.end() || key > it->second.first) last[ev.user] = {key, i};
    }
    std::set<std::size_t> drop;
    for (const auto& [user, entry] : last) {
      if (click_count[user] >= 2) {
        held[user] = events[entry.second].item;
        drop.insert(entry.second);
      }
    }
    for (std::size_t i = 0; i < events.size(); ++i)
      if (!drop.count(i)) train.add(events[i]);
  }

  ScoringContext ctx = ScoringContext::from_log(train);
  if (user_vecs) ctx.user_vec = *user_vecs;
  if (item_vecs) ctx.item_vec = *item_vecs;

  DetRng rng(derive_seed(seed, "negatives"));
  std::vector<std::vector<std::string>> recs;
  std::vector<std::string> truth;
  for (const auto& [user, t] : held) {
    std::vector<std::string> cand{t};
    std::set<std::string> chosen{t};
    std::size_t want = std::min(negatives, all_items.size() - 1);
    while (chosen.size() < want + 1) {
      const std::string& item = all_items[rng.next_below(all_items.size())];
      if (chosen.insert(item).second) cand.push_back(item);
    }
    recs.push_back(rank_items(scorer, ctx, user, cand, k));
    truth.push_back(t);
  }
  if (truth.empty()) throw Error(ErrorCode::EmptyEval, "no user has >= 2 clicks");

  PredictEvalResult out;
  out.metrics = ranking_metrics(recs, truth, k);
  out.users_evaluated = truth.size();
  return out;
}

}  // namespace bms
