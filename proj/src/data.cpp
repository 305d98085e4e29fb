#include "ventseq/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "ventseq/cells.hpp"

namespace ventseq {

namespace {

using FieldPtr = double VentRecord::*;

const std::vector<std::pair<std::string, FieldPtr>>& numeric_fields() {
  static const std::vector<std::pair<std::string, FieldPtr>> fields = {
      {"R", &VentRecord::R},           {"C", &VentRecord::C},
      {"time_step", &VentRecord::time_step}, {"u_in", &VentRecord::u_in},
      {"u_out", &VentRecord::u_out},   {"pressure", &VentRecord::pressure},
  };
  return fields;
}

FieldPtr field_by_name(const std::string& name) {
  for (const auto& [n, ptr] : numeric_fields())
    if (n == name) return ptr;
  throw UsageError("unknown column '" + name + "'");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  cells.push_back(cur);
  return cells;
}

bool cell_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "nan" || s == "NaN";
}

double parse_double(const std::string& s, std::size_t line_no, const std::string& col) {
  if (cell_missing(s)) return std::numeric_limits<double>::quiet_NaN();
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": cannot parse '" + s +
                    "' in column " + col);
  }
  if (pos != s.size())
    throw DataError("line " + std::to_string(line_no) + ": trailing junk in '" + s +
                    "' in column " + col);
  return v;
}

long long parse_int(const std::string& s, std::size_t line_no, const std::string& col) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("junk");
    return v;
  } catch (const std::exception&) {
    throw DataError("line " + std::to_string(line_no) + ": cannot parse '" + s +
                    "' in column " + col);
  }
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

} // namespace

const ColumnStats* ScalerParams::find(const std::string& name) const {
  for (const auto& c : columns)
    if (c.column == name) return &c;
  return nullptr;
}

std::vector<std::string> default_scaled_columns(bool scale_rc, bool include_pressure) {
  std::vector<std::string> cols = {"time_step", "u_in"};
  if (scale_rc) {
    cols.insert(cols.begin(), {"R", "C"});
  }
  if (include_pressure) cols.push_back("pressure");
  return cols;
}

std::vector<VentRecord> load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");

  const std::vector<std::string> header = split_csv_line(line);
  std::map<std::string, std::size_t> col_idx;
  for (std::size_t i = 0; i < header.size(); ++i) col_idx[header[i]] = i;

  for (const char* required : {"id", "breath_id", "R", "C", "time_step", "u_in", "u_out"})
    if (!col_idx.count(required))
      throw DataError("'" + path + "': missing column '" + required + "'");
  const bool has_pressure = col_idx.count("pressure") > 0;

  std::vector<VentRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() < header.size())
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    VentRecord r;
    r.id = parse_int(cells[col_idx["id"]], line_no, "id");
    r.breath_id = parse_int(cells[col_idx["breath_id"]], line_no, "breath_id");
    r.R = parse_double(cells[col_idx["R"]], line_no, "R");
    r.C = parse_double(cells[col_idx["C"]], line_no, "C");
    r.time_step = parse_double(cells[col_idx["time_step"]], line_no, "time_step");
    r.u_in = parse_double(cells[col_idx["u_in"]], line_no, "u_in");
    r.u_out = parse_double(cells[col_idx["u_out"]], line_no, "u_out");
    if (has_pressure) {
      r.pressure = parse_double(cells[col_idx["pressure"]], line_no, "pressure");
      r.has_pressure = true;
    }
    records.push_back(r);
  }
  return records;
}

void write_csv(const std::vector<VentRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  const bool has_pressure = !records.empty() && records.front().has_pressure;
  out << "id,breath_id,R,C,time_step,u_in,u_out";
  if (has_pressure) out << ",pressure";
  out << "\n";
  for (const auto& r : records) {
    out << r.id << "," << r.breath_id << "," << fmt_double(r.R) << "," << fmt_double(r.C)
        << "," << fmt_double(r.time_step) << "," << fmt_double(r.u_in) << ","
        << fmt_double(r.u_out);
    if (has_pressure) out << "," << fmt_double(r.pressure);
    out << "\n";
  }
}

ImputeParams fit_impute(const std::vector<VentRecord>& records) {
  ImputeParams p;
  for (const auto& [name, ptr] : numeric_fields()) {
    if (name == "pressure" && (records.empty() || !records.front().has_pressure)) continue;
    std::vector<double> values;
    values.reserve(records.size());
    for (const auto& r : records)
      if (!std::isnan(r.*ptr)) values.push_back(r.*ptr);
    if (values.empty()) throw DataError("column '" + name + "' has no non-missing values");
    p.medians[name] = quantile_linear(std::move(values), 0.5);
  }
  return p;
}

std::vector<VentRecord> apply_impute(std::vector<VentRecord> records, const ImputeParams& p) {
  for (auto& r : records) {
    for (const auto& [name, median] : p.medians) {
      FieldPtr ptr = field_by_name(name);
      if (std::isnan(r.*ptr)) r.*ptr = median;
    }
  }
  return records;
}

double quantile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw DataError("quantile of empty column");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

ScalerParams fit_scaler(const std::vector<VentRecord>& records,
                        const std::vector<std::string>& columns) {
  ScalerParams s;
  for (const auto& name : columns) {
    FieldPtr ptr = field_by_name(name);
    std::vector<double> values;
    values.reserve(records.size());
    for (const auto& r : records)
      if (!std::isnan(r.*ptr)) values.push_back(r.*ptr);
    if (values.size() < 2)
      throw DataError("column '" + name + "' needs at least 2 values to fit a scaler");
    const double median = quantile_linear(values, 0.5);
    const double iqr = quantile_linear(values, 0.75) - quantile_linear(values, 0.25);
    if (iqr <= 0.0) throw DataError("column '" + name + "' is degenerate: IQR is 0");
    s.columns.push_back({name, median, iqr});
  }
  return s;
}

std::vector<VentRecord> apply_scaler(std::vector<VentRecord> records, const ScalerParams& s) {
  for (const auto& c : s.columns) {
    FieldPtr ptr = field_by_name(c.column);
    if (c.column == "pressure" && !records.empty() && !records.front().has_pressure) continue;
    for (auto& r : records) r.*ptr = (r.*ptr - c.median) / c.iqr;
  }
  return records;
}

std::vector<BreathSequence> group_breaths(const std::vector<VentRecord>& records) {
  std::map<long long, std::vector<const VentRecord*>> groups;
  for (const auto& r : records) groups[r.breath_id].push_back(&r);
  if (groups.empty()) return {};

  std::size_t T = groups.begin()->second.size();
  std::vector<long long> bad;
  for (const auto& [id, rows] : groups)
    if (rows.size() != T) bad.push_back(id);
  if (!bad.empty()) {
    std::ostringstream os;
    os << "breaths differ in length (expected " << T << "): ids";
    for (long long id : bad) os << " " << id;
    throw DataError(os.str());
  }

  std::vector<BreathSequence> out;
  out.reserve(groups.size());
  for (auto& [id, rows] : groups) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const VentRecord* a, const VentRecord* b) {
                       return a->time_step < b->time_step;
                     });
    BreathSequence seq;
    seq.breath_id = id;
    seq.features = Tensor({T, kNumFeatures});
    const bool has_target = rows.front()->has_pressure;
    if (has_target) seq.target = Tensor({T});
    for (std::size_t t = 0; t < T; ++t) {
      const VentRecord& r = *rows[t];
      seq.features.at(t, 0) = r.R;
      seq.features.at(t, 1) = r.C;
      seq.features.at(t, 2) = r.time_step;
      seq.features.at(t, 3) = r.u_in;
      seq.features.at(t, 4) = r.u_out;
      if (has_target) seq.target[t] = r.pressure;
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<VentRecord> flatten(const std::vector<BreathSequence>& breaths) {
  std::vector<VentRecord> records;
  long long id = 0;
  for (const auto& b : breaths) {
    const std::size_t T = b.features.dim(0);
    for (std::size_t t = 0; t < T; ++t) {
      VentRecord r;
      r.id = id++;
      r.breath_id = b.breath_id;
      r.R = b.features.at(t, 0);
      r.C = b.features.at(t, 1);
      r.time_step = b.features.at(t, 2);
      r.u_in = b.features.at(t, 3);
      r.u_out = b.features.at(t, 4);
      if (b.has_target()) {
        r.pressure = b.target[t];
        r.has_pressure = true;
      }
      records.push_back(r);
    }
  }
  return records;
}

// First-order lung: dp/dt = u_in*k1/C - p/(R*C*k2).
std::vector<double> simulate_pressure(double R, double C, const std::vector<double>& u_in,
                                      double dt, double p0) {
  constexpr double k1 = 0.3;
  constexpr double k2 = 0.05;
  std::vector<double> p(u_in.size());
  double cur = p0;
  for (std::size_t t = 0; t < u_in.size(); ++t) {
    p[t] = cur;
    cur += dt * (u_in[t] * k1 / C - cur / (R * C * k2));
  }
  return p;
}

std::vector<BreathSequence> synth_generate(std::size_t n_breaths, std::size_t T,
                                           std::uint64_t seed, double noise_sigma) {
  if (n_breaths < 1 || T < 2) throw UsageError("synth_generate needs n_breaths >= 1, T >= 2");
  static const double r_levels[] = {5.0, 20.0, 50.0};
  static const double c_levels[] = {10.0, 20.0, 50.0};
  const double dt = 3.0 / static_cast<double>(T);
  const std::size_t insp_end = (T * 3) / 5; // u_out switches at 60% of the breath

  Rng rng(seed);
  std::vector<BreathSequence> out;
  out.reserve(n_breaths);
  for (std::size_t b = 0; b < n_breaths; ++b) {
    const double R = r_levels[rng.below(3)];
    const double C = c_levels[rng.below(3)];
    // piecewise-constant inspiratory drive, three random levels
    const double levels[3] = {rng.uniform(5.0, 80.0), rng.uniform(5.0, 80.0),
                              rng.uniform(5.0, 80.0)};
    std::vector<double> u_in(T, 0.0);
    for (std::size_t t = 0; t < insp_end; ++t) u_in[t] = levels[(t * 3) / insp_end];

    std::vector<double> p = simulate_pressure(R, C, u_in, dt, rng.uniform(1.0, 5.0));

    BreathSequence seq;
    seq.breath_id = static_cast<long long>(b);
    seq.features = Tensor({T, kNumFeatures});
    seq.target = Tensor({T});
    for (std::size_t t = 0; t < T; ++t) {
      seq.features.at(t, 0) = R;
      seq.features.at(t, 1) = C;
      seq.features.at(t, 2) = static_cast<double>(t) * dt;
      seq.features.at(t, 3) = u_in[t];
      seq.features.at(t, 4) = t < insp_end ? 0.0 : 1.0;
      seq.target[t] = p[t] + (noise_sigma > 0.0 ? rng.normal(0.0, noise_sigma) : 0.0);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

void pack_batch(const std::vector<BreathSequence>& breaths, const std::vector<std::size_t>& idx,
                Tensor& X, Tensor& Y) {
  if (idx.empty()) throw UsageError("pack_batch: empty index list");
  const std::size_t T = breaths[idx[0]].features.dim(0);
  X = Tensor({idx.size(), T, kNumFeatures});
  Y = Tensor({idx.size(), T, 1});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const BreathSequence& seq = breaths[idx[b]];
    if (seq.features.dim(0) != T)
      throw DataError("pack_batch: breath " + std::to_string(seq.breath_id) +
                      " has different length");
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t f = 0; f < kNumFeatures; ++f) X.at(b, t, f) = seq.features.at(t, f);
      Y.at(b, t, 0) = seq.has_target() ? seq.target[t] : 0.0;
    }
  }
}

} // namespace ventseq
