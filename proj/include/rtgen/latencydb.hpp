#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "rtgen/error.hpp"
#include "rtgen/time.hpp"
#include "rtgen/types.hpp"

namespace rtgen {

// Per-(model, stage, context bucket, backend) single-layer latencies. This is
// the simulator's entire performance model: a (model, stage, backend) triple
// with no entries defines that backend as unsupported for the model.
class LatencyDatabase {
 public:
  static const std::vector<int>& default_grid() {
    static const std::vector<int> grid{16, 32, 64, 128, 256, 512, 1024, 2048};
    return grid;
  }

  LatencyDatabase() : grid_(default_grid()) {}

  void add_entry(const std::string& model, Stage stage, int bucket, BackendKind kind, Time per_layer) {
    if (!(per_layer > Time::zero())) throw ConfigError("non-positive latency for " + describe(model, stage, kind));
    if (bucket != 0 && !std::binary_search(grid_.begin(), grid_.end(), bucket)) {
      throw ConfigError("context " + std::to_string(bucket) + " is not a grid bucket");
    }
    auto& buckets = entries_[Key{model, stage, kind}];
    if (!buckets.emplace(bucket, per_layer).second) {
      throw ConfigError("duplicate key: " + describe(model, stage, kind) + " @" + std::to_string(bucket));
    }
  }

  // Every triple must either be a single context-0 entry (single-pass models)
  // or cover the whole bucket grid.
  void validate_coverage() const {
    for (const auto& [key, buckets] : entries_) {
      if (buckets.count(0)) {
        if (buckets.size() != 1) throw ConfigError("mixed bucketed and context-0 rows: " + describe(key));
      } else if (buckets.size() != grid_.size()) {
        throw ConfigError("ragged bucket coverage: " + describe(key));
      }
    }
  }

  static LatencyDatabase from_csv(std::string_view text) {
    LatencyDatabase db;
    std::size_t pos = 0;
    bool saw_header = false;
    int line_no = 0;
    while (pos <= text.size()) {
      auto end = text.find('\n', pos);
      std::string_view line = text.substr(pos, end == std::string_view::npos ? text.size() - pos : end - pos);
      pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
      ++line_no;
      line = trim(line);
      if (line.empty() || line.front() == '#') continue;
      if (!saw_header) {
        if (line != "model,stage,context,backend,latency_ms") {
          throw ConfigError("bad CSV header: " + std::string(line));
        }
        saw_header = true;
        continue;
      }
      auto fields = split5(line, line_no);
      int bucket = parse_context(fields[2], line_no);
      db.add_entry(std::string(fields[0]), parse_stage(fields[1]), bucket, parse_backend_kind(fields[3]),
                   Time::parse_ms(fields[4]));
    }
    if (!saw_header) throw ConfigError("empty latency CSV");
    db.validate_coverage();
    return db;
  }

  static LatencyDatabase load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open latency CSV: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_csv(buf.str());
  }

  static const LatencyDatabase& default_calibrated();

  bool supports(const std::string& model, Stage stage, BackendKind kind) const {
    return entries_.count(Key{model, stage, kind}) != 0;
  }

  bool has_model_stage(const std::string& model, Stage stage) const {
    for (BackendKind k : {BackendKind::NPU, BackendKind::GPU, BackendKind::CPU}) {
      if (supports(model, stage, k)) return true;
    }
    return false;
  }

  // Context rounds UP to the nearest grid bucket; beyond the last bucket the
  // last bucket's value applies.
  Time lookup(const std::string& model, Stage stage, int context, BackendKind kind) const {
    auto it = entries_.find(Key{model, stage, kind});
    if (it == entries_.end()) {
      throw ConfigError("backend unsupported for model: " + describe(model, stage, kind));
    }
    const auto& buckets = it->second;
    if (buckets.count(0)) return buckets.at(0);
    if (context < 1) throw ConfigError("bucketed lookup needs context >= 1: " + describe(model, stage, kind));
    auto bucket_it = buckets.lower_bound(context);
    if (bucket_it == buckets.end()) --bucket_it;  // cap at the largest bucket
    return bucket_it->second;
  }

  BackendKind best_backend(const std::string& model, Stage stage, int context,
                           const std::vector<BackendKind>& candidates) const {
    bool found = false;
    BackendKind best = BackendKind::CPU;
    Time best_latency;
    for (BackendKind k : candidates) {
      if (!supports(model, stage, k)) continue;
      Time lat = lookup(model, stage, context, k);
      if (!found || lat < best_latency || (lat == best_latency && tie_rank(k) < tie_rank(best))) {
        found = true;
        best = k;
        best_latency = lat;
      }
    }
    if (!found) throw ConfigError("no supported backend for " + model + "/" + std::string(stage_name(stage)));
    return best;
  }

  std::vector<BackendKind> supported_kinds(const std::string& model, Stage stage) const {
    std::vector<BackendKind> out;
    for (BackendKind k : {BackendKind::NPU, BackendKind::GPU, BackendKind::CPU}) {
      if (supports(model, stage, k)) out.push_back(k);
    }
    return out;
  }

  const std::vector<int>& grid() const { return grid_; }
  int max_bucket() const { return grid_.back(); }
  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& [k, v] : entries_) n += v.size();
    return n;
  }

 private:
  using Key = std::tuple<std::string, Stage, BackendKind>;

  static std::string describe(const std::string& model, Stage stage, BackendKind kind) {
    return model + "/" + std::string(stage_name(stage)) + "/" + std::string(backend_kind_name(kind));
  }
  static std::string describe(const Key& key) {
    return describe(std::get<0>(key), std::get<1>(key), std::get<2>(key));
  }

  static std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  }

  static std::array<std::string_view, 5> split5(std::string_view line, int line_no) {
    std::array<std::string_view, 5> out;
    std::size_t start = 0;
    for (int i = 0; i < 5; ++i) {
      auto comma = line.find(',', start);
      bool last = (i == 4);
      if (!last && comma == std::string_view::npos) {
        throw ConfigError("malformed row at line " + std::to_string(line_no));
      }
      if (last && comma != std::string_view::npos) {
        throw ConfigError("too many fields at line " + std::to_string(line_no));
      }
      out[i] = trim(line.substr(start, last ? std::string_view::npos : comma - start));
      if (out[i].empty()) throw ConfigError("empty field at line " + std::to_string(line_no));
      start = comma + 1;
    }
    return out;
  }

  static int parse_context(std::string_view s, int line_no) {
    int v = 0;
    for (char c : s) {
      if (c < '0' || c > '9') throw ConfigError("malformed context at line " + std::to_string(line_no));
      v = v * 10 + (c - '0');
      if (v > 1 << 20) throw ConfigError("context out of range at line " + std::to_string(line_no));
    }
    return v;
  }

  std::map<Key, std::map<int, Time>> entries_;
  std::vector<int> grid_;
};

// Calibration anchors: SR/OD absolutes and their CPU/GPU deltas, the Seg
// GPU-vs-NPU relation, prefill GPU/NPU = 3.0x and decode NPU/GPU = 7.5x at
// every bucket, and the encoder's NPU->GPU preference crossover between short
// and long sequences. Unreported buckets interpolate monotonically between the
// anchored ones.
inline constexpr std::string_view kDefaultLatencyCsv =
    R"(# Calibrated per-layer latency database (milliseconds).
# Context 0 marks single-pass models without sequence-length dependence.
# SR: CPU anchor 3.78; GPU 14.6% below CPU; NPU 81.9%/84.5% below GPU/CPU.
# OD: NPU anchor 5.23; GPU/CPU hold the 42.9%/62.7% reductions.
# Seg: GPU 10.2% faster than NPU; absolute level sized for 60 FPS headroom.
# Encoder: NPU ahead at short sequences (31.9%/10.9% at 16/32), GPU ahead from
# bucket 512 (22.3% at 1024); absolute level is negligible next to prefill.
# LLM prefill: GPU = 3.0x NPU per bucket; 64/1024 NPU anchors 7.96/98.62.
# LLM decode: NPU = 7.5x GPU per bucket; 64/1024 GPU anchors 2.44/2.87.
model,stage,context,backend,latency_ms
SR,Forward,0,CPU,3.78
SR,Forward,0,GPU,3.23
SR,Forward,0,NPU,0.59
OD,Forward,0,CPU,14.02
OD,Forward,0,GPU,9.16
OD,Forward,0,NPU,5.23
Seg,Forward,0,GPU,7.18
Seg,Forward,0,NPU,8.00
Encoder,Forward,16,NPU,0.0100
Encoder,Forward,32,NPU,0.0150
Encoder,Forward,64,NPU,0.0200
Encoder,Forward,128,NPU,0.0260
Encoder,Forward,256,NPU,0.0330
Encoder,Forward,512,NPU,0.0420
Encoder,Forward,1024,NPU,0.0520
Encoder,Forward,2048,NPU,0.0650
Encoder,Forward,16,GPU,0.0147
Encoder,Forward,32,GPU,0.0168
Encoder,Forward,64,GPU,0.0205
Encoder,Forward,128,GPU,0.0263
Encoder,Forward,256,GPU,0.0335
Encoder,Forward,512,GPU,0.0395
Encoder,Forward,1024,GPU,0.0404
Encoder,Forward,2048,GPU,0.0480
LLM,Prefill,16,NPU,2.26
LLM,Prefill,32,NPU,4.24
LLM,Prefill,64,NPU,7.96
LLM,Prefill,128,NPU,14.93
LLM,Prefill,256,NPU,28.02
LLM,Prefill,512,NPU,52.57
LLM,Prefill,1024,NPU,98.62
LLM,Prefill,2048,NPU,185.04
LLM,Prefill,16,GPU,6.78
LLM,Prefill,32,GPU,12.72
LLM,Prefill,64,GPU,23.89
LLM,Prefill,128,GPU,44.79
LLM,Prefill,256,GPU,84.06
LLM,Prefill,512,GPU,157.71
LLM,Prefill,1024,GPU,295.86
LLM,Prefill,2048,GPU,555.12
LLM,Decode,16,GPU,2.40
LLM,Decode,32,GPU,2.42
LLM,Decode,64,GPU,2.44
LLM,Decode,128,GPU,2.44
LLM,Decode,256,GPU,2.64
LLM,Decode,512,GPU,2.72
LLM,Decode,1024,GPU,2.87
LLM,Decode,2048,GPU,2.87
LLM,Decode,16,NPU,18.00
LLM,Decode,32,NPU,18.15
LLM,Decode,64,NPU,18.28
LLM,Decode,128,NPU,18.28
LLM,Decode,256,NPU,19.80
LLM,Decode,512,NPU,20.40
LLM,Decode,1024,NPU,21.52
LLM,Decode,2048,NPU,21.52
)";

inline const LatencyDatabase& LatencyDatabase::default_calibrated() {
  static const LatencyDatabase db = from_csv(kDefaultLatencyCsv);
  return db;
}

}  // namespace rtgen
