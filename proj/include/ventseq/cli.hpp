#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ventseq/model.hpp"
#include "ventseq/train.hpp"

namespace ventseq {

// Exit code contract: 0 success, 1 check/compute failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitUsage = 2;

struct RunConfig {
  // paths
  std::string data_path;
  std::string test_data_path;
  std::string checkpoint_path = "model.vseq";
  std::string metrics_out = "metrics.csv";
  std::string pred_out;
  std::string synth_out = "synth.csv";

  // model
  ModelConfig model;

  // training
  std::size_t epochs = 10;
  std::size_t batch_size = 512;
  LossKind loss = LossKind::Mae;
  std::uint64_t seed = 42;
  double lr = 1e-3;
  std::size_t patience = 0;

  // data handling
  std::size_t synth_breaths = 0; // 0 means read --data
  std::size_t seq_len = 80;
  bool scale_rc = false;
  bool mask_inspiratory = false;
  bool include_timing = false;

  // gradcheck
  bool fault_inject = false;
};

int cmd_synth(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
int cmd_predict(const RunConfig& cfg);
int cmd_gradcheck(const RunConfig& cfg);
int cmd_params(const RunConfig& cfg);

} // namespace ventseq
