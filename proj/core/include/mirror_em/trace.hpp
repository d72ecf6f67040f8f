#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mirror_em/util.hpp"

namespace mirror_em {

// One solver iteration. Record t describes the iterate theta_t and the step
// it took to theta_{t+1}; the closing record of a finished run carries the
// final iterate's nll and stationarity with no step quantities.
struct IterationRecord {
  int t = 0;
  double nll = 0.0;
  std::optional<double> kl_step;            // D_A(theta_t, theta_{t+1})
  std::optional<double> bregman_stat;       // D_A*(s(theta_t), mu_t)
  std::optional<double> natural_decrement;  // |grad L|^2 in the inverse Fisher metric
  std::optional<double> lambda_max_missing;
  std::optional<double> surrogate_gap;      // inexact M-step certificate
  std::optional<double> nll_unpenalized;    // MAP runs: the plain average NLL
  std::optional<Vec> params;
};

struct EmTrace {
  std::string algorithm;  // em | gem_multiplicative | gem_additive | map_em | online_em
  std::map<std::string, std::string> meta;  // config echo, seed, dataset name
  std::vector<IterationRecord> records;
  Vec final_params;
  // Failure message when the run stopped on a reported error (degenerate
  // M-step); records up to the failing step stay valid.
  std::optional<std::string> failure;

  // Number of completed steps (records that include step quantities).
  int steps() const;
  const IterationRecord& final_record() const;
  double initial_nll() const;
  double final_nll() const;
};

// Serialization. JSONL: one header object, then one object per record.
// CSV mirrors the same field names with empty cells for absent values.
std::string trace_to_jsonl(const EmTrace& trace);
std::string trace_to_csv(const EmTrace& trace);
void write_trace(const EmTrace& trace, const std::string& jsonl_path,
                 const std::string& csv_path);

}  // namespace mirror_em
