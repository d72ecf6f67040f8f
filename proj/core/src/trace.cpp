#include "mirror_em/trace.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mirror_em/errors.hpp"
#include "nlohmann/json.hpp"

namespace mirror_em {

using nlohmann::json;

int EmTrace::steps() const {
  int out = 0;
  for (const auto& r : records)
    if (r.kl_step.has_value()) ++out;
  return out;
}

const IterationRecord& EmTrace::final_record() const {
  if (records.empty()) throw NumericalError("trace has no records");
  return records.back();
}

double EmTrace::initial_nll() const {
  if (records.empty()) throw NumericalError("trace has no records");
  return records.front().nll;
}

double EmTrace::final_nll() const { return final_record().nll; }

namespace {

json record_to_json(const IterationRecord& r) {
  json out;
  out["t"] = r.t;
  out["nll"] = r.nll;
  out["kl_step"] = r.kl_step ? json(*r.kl_step) : json(nullptr);
  out["bregman_stat"] = r.bregman_stat ? json(*r.bregman_stat) : json(nullptr);
  out["natural_decrement"] = r.natural_decrement ? json(*r.natural_decrement) : json(nullptr);
  if (r.lambda_max_missing) out["lambda_max_missing"] = *r.lambda_max_missing;
  if (r.surrogate_gap) out["surrogate_gap"] = *r.surrogate_gap;
  if (r.nll_unpenalized) out["nll_unpenalized"] = *r.nll_unpenalized;
  if (r.params) out["params"] = std::vector<double>(r.params->begin(), r.params->end());
  return out;
}

void append_cell(std::ostream& os, const std::optional<double>& value) {
  os << ',';
  if (value) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", *value);
    os << buf;
  }
}

}  // namespace

std::string trace_to_jsonl(const EmTrace& trace) {
  std::ostringstream os;
  json header;
  header["algorithm"] = trace.algorithm;
  for (const auto& [key, value] : trace.meta) {
    // Meta values that are themselves JSON (config echoes) embed as objects.
    if (!value.empty() && (value.front() == '{' || value.front() == '[')) {
      header[key] = json::parse(value, nullptr, false);
      if (header[key].is_discarded()) header[key] = value;
    } else {
      header[key] = value;
    }
  }
  header["records"] = static_cast<int>(trace.records.size());
  if (trace.failure) header["failure"] = *trace.failure;
  if (trace.final_params.size() > 0) {
    header["final_params"] =
        std::vector<double>(trace.final_params.begin(), trace.final_params.end());
  }
  os << header.dump() << '\n';
  for (const auto& r : trace.records) os << record_to_json(r).dump() << '\n';
  return os.str();
}

std::string trace_to_csv(const EmTrace& trace) {
  std::ostringstream os;
  os << "t,nll,kl_step,bregman_stat,natural_decrement,lambda_max_missing,surrogate_gap\n";
  char buf[48];
  for (const auto& r : trace.records) {
    os << r.t;
    std::snprintf(buf, sizeof(buf), "%.17g", r.nll);
    os << ',' << buf;
    append_cell(os, r.kl_step);
    append_cell(os, r.bregman_stat);
    append_cell(os, r.natural_decrement);
    append_cell(os, r.lambda_max_missing);
    append_cell(os, r.surrogate_gap);
    os << '\n';
  }
  return os.str();
}

void write_trace(const EmTrace& trace, const std::string& jsonl_path,
                 const std::string& csv_path) {
  if (!jsonl_path.empty()) {
    std::ofstream out(jsonl_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write trace file: " + jsonl_path);
    out << trace_to_jsonl(trace);
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write trace file: " + csv_path);
    out << trace_to_csv(trace);
  }
}

}  // namespace mirror_em
