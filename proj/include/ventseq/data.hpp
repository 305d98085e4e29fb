#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ventseq/tensor.hpp"

namespace ventseq {

// One CSV row of the ventilator dataset. Missing numeric cells are NaN
// until imputation.
struct VentRecord {
  long long id = 0;
  long long breath_id = 0;
  double R = 0.0;         // airway restriction, cmH2O/L/s
  double C = 0.0;         // lung compliance, mL/cmH2O
  double time_step = 0.0; // seconds
  double u_in = 0.0;      // inspiratory valve control, [0, 100]
  double u_out = 0.0;     // expiratory valve control, {0, 1}
  double pressure = 0.0;  // target, cmH2O
  bool has_pressure = false;
};

// Fixed feature column order for model input.
inline constexpr std::size_t kNumFeatures = 5;
inline const char* const kFeatureNames[kNumFeatures] = {"R", "C", "time_step", "u_in", "u_out"};

struct BreathSequence {
  long long breath_id = 0;
  Tensor features; // [T, 5]
  Tensor target;   // [T]; empty when pressure absent
  bool has_target() const { return !target.empty(); }
};

struct ColumnStats {
  std::string column;
  double median = 0.0;
  double iqr = 0.0;
};

struct ScalerParams {
  std::vector<ColumnStats> columns;
  const ColumnStats* find(const std::string& name) const;
};

// Per-column medians used to fill missing cells; fitted on train data only.
struct ImputeParams {
  std::map<std::string, double> medians;
};

// Columns scaled by default: R and C are three-level physical settings and
// stay raw unless scale_rc is requested.
std::vector<std::string> default_scaled_columns(bool scale_rc, bool include_pressure);

std::vector<VentRecord> load_csv(const std::string& path);
void write_csv(const std::vector<VentRecord>& records, const std::string& path);

ImputeParams fit_impute(const std::vector<VentRecord>& records);
std::vector<VentRecord> apply_impute(std::vector<VentRecord> records, const ImputeParams& p);

// Median / IQR per column with linear-interpolation quantiles at p*(n-1).
ScalerParams fit_scaler(const std::vector<VentRecord>& records,
                        const std::vector<std::string>& columns);
std::vector<VentRecord> apply_scaler(std::vector<VentRecord> records, const ScalerParams& s);

double quantile_linear(std::vector<double> values, double p);

std::vector<BreathSequence> group_breaths(const std::vector<VentRecord>& records);
std::vector<VentRecord> flatten(const std::vector<BreathSequence>& breaths);

// Clean pressure recurrence of the synthetic lung:
// p_{t+1} = p_t + dt*(u_in[t]*k1/C - p_t/(R*C*k2)).
std::vector<double> simulate_pressure(double R, double C, const std::vector<double>& u_in,
                                      double dt, double p0);

// Deterministic first-order lung simulation for desk-scale testing.
// noise_sigma 0 gives the clean recurrence.
std::vector<BreathSequence> synth_generate(std::size_t n_breaths, std::size_t T,
                                           std::uint64_t seed, double noise_sigma = 0.01);

// Pack breaths[idx[0..B)] into X [B, T, 5] and Y [B, T, 1].
void pack_batch(const std::vector<BreathSequence>& breaths, const std::vector<std::size_t>& idx,
                Tensor& X, Tensor& Y);

} // namespace ventseq
