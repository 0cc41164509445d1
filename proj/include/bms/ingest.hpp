#pragma once

// CSV ingestion and per-field transforms for the crime / fraud / interaction
// schemas, plus schema-compatible synthetic generators for desk-scale runs.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bms/core.hpp"
#include "bms/errors.hpp"

namespace bms {

// ---------------------------------------------------------------------------
// Scalar transforms
// ---------------------------------------------------------------------------

struct CivilDate {
  int year = 0, month = 0, day = 0;
  int hour = 0, minute = 0, second = 0;
};

// Howard Hinnant's days-from-civil; proleptic Gregorian.
inline std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// "MM/DD/YYYY hh:mm:ss AM/PM", e.g. "01/08/2020 12:00:00 AM".
inline CivilDate parse_datetime(const std::string& raw) {
  CivilDate c;
  char sep1, sep2, c1, c2, c3;
  char ampm[3] = {0, 0, 0};
  std::istringstream is(raw);
  is >> c.month >> sep1 >> c.day >> sep2 >> c.year >> c.hour >> c1 >> c.minute
     >> c2 >> c.second >> ampm[0] >> ampm[1];
  (void)c3;
  if (!is || sep1 != '/' || sep2 != '/' || c1 != ':' || c2 != ':')
    throw Error(ErrorCode::InvalidTime, "unparsable datetime '" + raw + "'");
  if (c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31)
    throw Error(ErrorCode::InvalidTime, "out-of-range date '" + raw + "'");
  if (ampm[0] == 'P' || ampm[0] == 'p') {
    if (c.hour != 12) c.hour += 12;
  } else if (ampm[0] == 'A' || ampm[0] == 'a') {
    if (c.hour == 12) c.hour = 0;
  } else {
    throw Error(ErrorCode::InvalidTime, "missing AM/PM in '" + raw + "'");
  }
  return c;
}

struct DateDiffResult {
  std::int64_t days = 0;
  bool negative = false;  // data noise, retained
};

inline DateDiffResult date_difference(const std::string& date_rptd,
                                      const std::string& date_occ) {
  CivilDate r = parse_datetime(date_rptd);
  CivilDate o = parse_datetime(date_occ);
  std::int64_t d = days_from_civil(r.year, r.month, r.day) -
                   days_from_civil(o.year, o.month, o.day);
  return DateDiffResult{d, d < 0};
}

// Raw day counts would explode the token space; bin before interning.
inline std::string date_diff_token(std::int64_t days) {
  if (days < 0) return "neg";
  if (days == 0) return "0";
  if (days == 1) return "1";
  if (days <= 7) return "2-7";
  if (days <= 30) return "8-30";
  return "31+";
}

struct SplitDate {
  int year, month, day;
};

inline SplitDate split_datetime(const std::string& raw) {
  CivilDate c = parse_datetime(raw);
  return SplitDate{c.year, c.month, c.day};
}

struct HourMinute {
  int hour, minute;
};

// 1-4 digit military time, zero-padded on the left: "145" -> 01:45.
inline HourMinute extract_hm(const std::string& time_occ) {
  std::string t = normalize_token(time_occ);
  if (t.empty() || t.size() > 4)
    throw Error(ErrorCode::InvalidTime, "bad military time '" + time_occ + "'");
  for (char ch : t)
    if (!std::isdigit(static_cast<unsigned char>(ch)))
      throw Error(ErrorCode::InvalidTime, "bad military time '" + time_occ + "'");
  t.insert(t.begin(), 4 - t.size(), '0');
  int hour = (t[0] - '0') * 10 + (t[1] - '0');
  int minute = (t[2] - '0') * 10 + (t[3] - '0');
  if (hour > 23 || minute > 59)
    throw Error(ErrorCode::InvalidTime, "out-of-range time '" + time_occ + "'");
  return HourMinute{hour, minute};
}

// Bucket an amount by its maximum counting unit in decimals.
inline std::string decimal_bucket(double amount) {
  if (amount < 0 || std::isnan(amount))
    throw Error(ErrorCode::InvalidAmount, "negative amount");
  if (amount == 0) return "zero";
  if (amount < 1) return "sub1";
  return "e" + std::to_string(static_cast<int>(std::floor(std::log10(amount))));
}

inline int count_class(std::int64_t clicks) {
  if (clicks < 20) return 0;
  if (clicks < 50) return 1;
  if (clicks < 100) return 2;
  return 3;
}

inline std::string age_decade_token(const std::string& raw) {
  int age = 0;
  std::string t = normalize_token(raw);
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), age);
  if (ec != std::errc() || p != t.data() + t.size() || age < 0)
    throw Error(ErrorCode::MissingValue, "unparsable age '" + raw + "'");
  return std::to_string((age / 10) * 10) + "s";
}

// ---------------------------------------------------------------------------
// Schemas
// ---------------------------------------------------------------------------

enum class TransformKind {
  Identity,
  DateSplit,       // one timestamp column -> Year_/Month_/Day_ fields
  HourMinute,      // military time -> Hour, Minute
  DateDifference,  // two timestamp columns -> binned day-count token
  DecimalBucket,
  DecadeBin,
};

struct FieldSpec {
  TransformKind kind = TransformKind::Identity;
  std::vector<std::string> inputs;   // csv column names
  std::vector<std::string> outputs;  // attribute field names
};

struct DatasetSchema {
  std::string name;
  std::string id_field;                 // csv column; empty -> row number
  std::string label_field;              // csv column; empty -> unlabeled
  std::vector<FieldSpec> specs;

  std::vector<std::string> attribute_fields() const {
    std::vector<std::string> out;
    for (const auto& s : specs)
      for (const auto& f : s.outputs) out.push_back(f);
    return out;
  }

  std::vector<std::string> csv_columns() const {
    std::vector<std::string> out;
    if (!id_field.empty()) out.push_back(id_field);
    for (const auto& s : specs)
      for (const auto& c : s.inputs)
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    if (!label_field.empty()) out.push_back(label_field);
    return out;
  }
};

// The 19 crime attribute fields plus the Crm Cd label.
inline DatasetSchema crime_schema() {
  DatasetSchema s;
  s.name = "crime";
  s.id_field = "DR_NO";
  s.label_field = "Crm Cd";
  auto id = [](std::string col, std::string out) {
    return FieldSpec{TransformKind::Identity, {std::move(col)}, {std::move(out)}};
  };
  s.specs = {
      id("AREA", "AREA"),
      id("Rpt Dist No", "Rpt Dist No"),
      id("Part 1-2", "Part 1-2"),
      FieldSpec{TransformKind::DecadeBin, {"Vict Age"}, {"Vict Age"}},
      id("Vict Sex", "Vict Sex"),
      id("Vict Descent", "Vict Descent"),
      id("Premis Cd", "Premis Cd"),
      id("Weapon Used Cd", "Weapon Used Cd"),
      id("Status", "Status"),
      id("Cross Street", "Cross Street"),
      FieldSpec{TransformKind::DateSplit,
                {"Date Rptd"},
                {"Year_Rptd", "Month_Rptd", "Day_Rptd"}},
      FieldSpec{TransformKind::DateSplit,
                {"DATE OCC"},
                {"Year_OCC", "Month_OCC", "Day_OCC"}},
      FieldSpec{TransformKind::DateDifference,
                {"Date Rptd", "DATE OCC"},
                {"Date Difference"}},
      FieldSpec{TransformKind::HourMinute, {"TIME OCC"}, {"Hour", "Minute"}},
  };
  return s;
}

inline DatasetSchema fraud_schema() {
  DatasetSchema s;
  s.name = "fraud";
  s.id_field = "txn_id";
  s.label_field = "isFraud";
  auto id = [](std::string col) {
    return FieldSpec{TransformKind::Identity, {col}, {col}};
  };
  auto amt = [](std::string col) {
    return FieldSpec{TransformKind::DecimalBucket, {col}, {col}};
  };
  s.specs = {
      id("step"),           id("type"),           amt("amount"),
      id("nameOrig"),       amt("oldBalanceOrg"), amt("newbalanceOrig"),
      id("nameDest"),       amt("oldbalanceDest"), amt("newbalanceDest"),
  };
  return s;
}

// Interaction logs for the prediction pipeline (user, item, timestamps).
inline DatasetSchema interact_schema() {
  DatasetSchema s;
  s.name = "interact";
  s.id_field = "";
  s.label_field = "";
  auto id = [](std::string col) {
    return FieldSpec{TransformKind::Identity, {col}, {col}};
  };
  s.specs = {id("user"), id("item"), id("impression_ts"), id("click_ts")};
  return s;
}

inline DatasetSchema schema_by_name(const std::string& name) {
  if (name == "crime") return crime_schema();
  if (name == "fraud") return fraud_schema();
  if (name == "interact") return interact_schema();
  throw Error(ErrorCode::SchemaMismatch, "unknown schema '" + name + "'");
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// RFC 4180: comma separated, double quotes, "" escapes a quote.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false, any = false;
  int ch;
  while ((ch = in.get()) != EOF) {
    char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          cell += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
      any = true;
    } else if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
      any = true;
    } else if (c == '\r') {
      // swallowed; \n ends the row
    } else if (c == '\n') {
      if (any || !cell.empty() || !row.empty()) {
        row.push_back(std::move(cell));
        cell.clear();
        rows.push_back(std::move(row));
        row.clear();
        any = false;
      }
    } else {
      cell += c;
      any = true;
    }
  }
  if (any || !cell.empty() || !row.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

struct IngestDiagnostic {
  std::size_t row = 0;  // 1-based data row number
  std::string message;
};

struct IngestResult {
  std::vector<BehaviorRecord> records;
  std::vector<IngestDiagnostic> diagnostics;  // dropped rows
};

inline BehaviorRecord transform_row(const DatasetSchema& schema,
                                    const std::map<std::string, std::string>& raw,
                                    const std::string& fallback_id) {
  BehaviorRecord rec;
  rec.record_id =
      schema.id_field.empty() ? fallback_id : raw.at(schema.id_field);
  for (const auto& spec : schema.specs) {
    switch (spec.kind) {
      case TransformKind::Identity: {
        const std::string& v = raw.at(spec.inputs[0]);
        if (!normalize_token(v).empty()) rec.values[spec.outputs[0]] = v;
        break;
      }
      case TransformKind::DateSplit: {
        const std::string& v = raw.at(spec.inputs[0]);
        if (normalize_token(v).empty()) break;
        SplitDate d = split_datetime(v);
        rec.values[spec.outputs[0]] = std::to_string(d.year);
        rec.values[spec.outputs[1]] = std::to_string(d.month);
        rec.values[spec.outputs[2]] = std::to_string(d.day);
        break;
      }
      case TransformKind::HourMinute: {
        const std::string& v = raw.at(spec.inputs[0]);
        if (normalize_token(v).empty()) break;
        HourMinute hm = extract_hm(v);
        rec.values[spec.outputs[0]] = std::to_string(hm.hour);
        rec.values[spec.outputs[1]] = std::to_string(hm.minute);
        break;
      }
      case TransformKind::DateDifference: {
        const std::string& a = raw.at(spec.inputs[0]);
        const std::string& b = raw.at(spec.inputs[1]);
        if (normalize_token(a).empty() || normalize_token(b).empty()) break;
        rec.values[spec.outputs[0]] = date_diff_token(date_difference(a, b).days);
        break;
      }
      case TransformKind::DecimalBucket: {
        const std::string& v = raw.at(spec.inputs[0]);
        if (normalize_token(v).empty()) break;
        rec.values[spec.outputs[0]] = decimal_bucket(std::stod(v));
        break;
      }
      case TransformKind::DecadeBin: {
        const std::string& v = raw.at(spec.inputs[0]);
        if (normalize_token(v).empty()) break;
        rec.values[spec.outputs[0]] = age_decade_token(v);
        break;
      }
    }
  }
  if (!schema.label_field.empty()) {
    auto it = raw.find(schema.label_field);
    if (it != raw.end() && !normalize_token(it->second).empty())
      rec.label = normalize_token(it->second);
  }
  return rec;
}

inline IngestResult read_csv(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  auto rows = parse_csv(in);
  if (rows.empty()) throw Error(ErrorCode::SchemaMismatch, "empty file");

  const auto& header = rows[0];
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const auto& want : schema.csv_columns())
    if (!col.count(want))
      throw Error(ErrorCode::SchemaMismatch, "missing column '" + want + "'");

  IngestResult out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    std::map<std::string, std::string> raw;
    bool short_row = false;
    for (const auto& [name, idx] : col) {
      if (idx >= cells.size()) {
        short_row = true;
        break;
      }
      raw[name] = cells[idx];
    }
    if (short_row) {
      out.diagnostics.push_back({r, "short row"});
      continue;
    }
    try {
      out.records.push_back(transform_row(schema, raw, "row" + std::to_string(r)));
    } catch (const Error& e) {
      out.diagnostics.push_back({r, e.what()});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Label filtering
// ---------------------------------------------------------------------------

inline std::vector<BehaviorRecord> top_k_labels(
    const std::vector<BehaviorRecord>& records, std::size_t k) {
  if (k < 1) throw Error(ErrorCode::InvalidK, "k must be >= 1");
  std::map<std::string, std::int64_t> freq;
  for (const auto& r : records)
    if (r.label) ++freq[*r.label];
  if (freq.empty()) throw Error(ErrorCode::NoLabels, "dataset has no labels");

  // sort by (-count, token); ties at rank k keep the smaller token
  std::vector<std::pair<std::string, std::int64_t>> order(freq.begin(), freq.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (order.size() > k) order.resize(k);
  std::map<std::string, bool> keep;
  for (const auto& [tok, cnt] : order) keep[tok] = true;

  std::vector<BehaviorRecord> out;
  for (const auto& r : records)
    if (r.label && keep.count(*r.label)) out.push_back(r);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic generators (planted-rule, deterministic per seed)
// ---------------------------------------------------------------------------

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += "\"";
  return out;
}

inline void write_csv(const std::string& path,
                      const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << csv_quote(header[i]);
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << csv_quote(row[i]);
    out << "\n";
  }
}

// Crime-like sample whose label is a planted function of attribute
// co-occurrence: label = c<(Month_OCC + AREA) mod 10>. A perfect classifier
// reaches accuracy 1.0 by construction.
inline void synth_crime_csv(const std::string& path, std::size_t n,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&rng](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  std::vector<std::string> header = {
      "DR_NO",       "Date Rptd", "DATE OCC",      "TIME OCC", "AREA",
      "Rpt Dist No", "Part 1-2",  "Vict Age",      "Vict Sex", "Vict Descent",
      "Premis Cd",   "Weapon Used Cd", "Status",   "Cross Street", "Crm Cd"};
  // non-signal fields stay low-cardinality so the planted co-occurrence rule
  // is the only thing worth learning
  const char* sexes[] = {"M", "F"};
  const char* descents[] = {"H", "W"};
  const char* statuses[] = {"AA", "IC"};
  std::vector<std::vector<std::string>> rows;
  rows.reserve(n);
  char buf[64];
  for (std::size_t i = 0; i < n; ++i) {
    int month = pick(1, 10);
    int day = pick(1, 4);
    int area = pick(1, 10);
    int diff = pick(0, 2);
    int rday = day + diff;
    std::snprintf(buf, sizeof buf, "%02d/%02d/2020 12:00:00 AM", month, day);
    std::string occ = buf;
    std::snprintf(buf, sizeof buf, "%02d/%02d/2020 12:00:00 AM", month, rday);
    std::string rptd = buf;
    int label = (month + area) % 10;
    rows.push_back({
        "id" + std::to_string(i),
        rptd,
        occ,
        std::to_string(pick(0, 3) * 100),  // on the hour
        std::to_string(area),
        std::to_string(pick(100, 102)),
        std::to_string(pick(1, 2)),
        std::to_string(pick(20, 39)),
        sexes[pick(0, 1)],
        descents[pick(0, 1)],
        std::to_string(pick(100, 101)),
        std::to_string(pick(200, 201)),
        statuses[pick(0, 1)],
        "block " + std::to_string(pick(1, 3)),
        "c" + std::to_string(label),
    });
  }
  write_csv(path, header, rows);
}

// Fraud-like sample per the transaction schema. The planted rule marks a
// transaction fraudulent iff it is a TRANSFER with amount >= 1e5, so the
// label is recoverable from (type, amount-bucket) co-occurrence.
inline void synth_fraud_csv(const std::string& path, std::size_t n,
                            std::uint64_t seed, double fraud_rate = 0.15) {
  std::mt19937_64 rng(seed);
  auto pick = [&rng](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  auto uniform = [&rng]() {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  const char* types[] = {"PAYMENT", "CASH_OUT", "CASH_IN", "DEBIT", "TRANSFER"};
  std::vector<std::string> header = {"txn_id",    "step",          "type",
                                     "amount",    "nameOrig",      "oldBalanceOrg",
                                     "newbalanceOrig", "nameDest", "oldbalanceDest",
                                     "newbalanceDest", "isFraud"};
  std::vector<std::vector<std::string>> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    bool fraud = uniform() < fraud_rate;
    std::string type;
    double amount;
    if (fraud) {
      type = "TRANSFER";
      amount = 1e5 * (1.0 + uniform() * 99.0);  // e5..e6
    } else {
      type = types[pick(0, 4)];
      amount = std::pow(10.0, uniform() * 4.0) * (1.0 + uniform());  // < 1e5 mostly
      if (type == "TRANSFER" && amount >= 1e5) amount = 9e4;
    }
    double old_org = amount * (0.5 + uniform());
    double new_org = std::max(0.0, old_org - amount);
    double old_dst = std::pow(10.0, uniform() * 5.0);
    double new_dst = old_dst + amount;
    rows.push_back({
        "t" + std::to_string(i),
        std::to_string(pick(1, 30)),
        type,
        std::to_string(amount),
        (uniform() < 0.5 ? "C" : "M") + std::to_string(pick(1000, 1019)),
        std::to_string(old_org),
        std::to_string(new_org),
        (uniform() < 0.5 ? "C" : "M") + std::to_string(pick(2000, 2019)),
        std::to_string(old_dst),
        std::to_string(new_dst),
        fraud ? "1" : "0",
    });
  }
  write_csv(path, header, rows);
}

// Interaction log: users converge to a per-user favorite item after a
// uniform exploration phase, so entropy curves have a known shape.
inline void synth_interactions_csv(const std::string& path, std::size_t users,
                                   std::size_t events_per_user,
                                   std::size_t items, std::uint64_t seed,
                                   double converge = 0.8) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng]() {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  std::vector<std::string> header = {"user", "item", "impression_ts", "click_ts"};
  std::vector<std::vector<std::string>> rows;
  for (std::size_t u = 0; u < users; ++u) {
    std::size_t favorite = rng() % items;
    for (std::size_t t = 0; t < events_per_user; ++t) {
      // exploration early, favorite-biased later
      double p_fav = (t < events_per_user / 4) ? 0.0 : converge;
      std::size_t item = (uniform() < p_fav) ? favorite : rng() % items;
      std::int64_t ts = static_cast<std::int64_t>(u * 100000 + t * 60);
      rows.push_back({"u" + std::to_string(u), "i" + std::to_string(item),
                      std::to_string(ts), std::to_string(ts + 5)});
    }
  }
  write_csv(path, header, rows);
}

inline void synth_dataset(const std::string& schema_name, const std::string& path,
                          std::size_t n, std::uint64_t seed) {
  if (schema_name == "crime") {
    synth_crime_csv(path, n, seed);
  } else if (schema_name == "fraud") {
    synth_fraud_csv(path, n, seed);
  } else if (schema_name == "interact") {
    std::size_t users = std::max<std::size_t>(1, n / 40);
    synth_interactions_csv(path, users, 40, 20, seed);
  } else {
    throw Error(ErrorCode::SchemaMismatch, "unknown schema '" + schema_name + "'");
  }
}

}  // namespace bms
