#pragma once

#include <string>
#include <string_view>

#include "rtgen/error.hpp"

namespace rtgen {

enum class BackendKind { CPU, GPU, NPU };

// Preference order used for latency ties: accelerators first.
inline int tie_rank(BackendKind k) {
  switch (k) {
    case BackendKind::NPU: return 0;
    case BackendKind::GPU: return 1;
    case BackendKind::CPU: return 2;
  }
  throw InternalError("bad backend kind");
}

inline std::string_view backend_kind_name(BackendKind k) {
  switch (k) {
    case BackendKind::CPU: return "CPU";
    case BackendKind::GPU: return "GPU";
    case BackendKind::NPU: return "NPU";
  }
  throw InternalError("bad backend kind");
}

inline BackendKind parse_backend_kind(std::string_view s) {
  if (s == "CPU") return BackendKind::CPU;
  if (s == "GPU") return BackendKind::GPU;
  if (s == "NPU") return BackendKind::NPU;
  throw ConfigError("unknown backend kind: " + std::string(s));
}

enum class Stage { Forward, Prefill, Decode };

inline std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Forward: return "Forward";
    case Stage::Prefill: return "Prefill";
    case Stage::Decode: return "Decode";
  }
  throw InternalError("bad stage");
}

inline std::string_view stage_name_lower(Stage s) {
  switch (s) {
    case Stage::Forward: return "forward";
    case Stage::Prefill: return "prefill";
    case Stage::Decode: return "decode";
  }
  throw InternalError("bad stage");
}

inline Stage parse_stage(std::string_view s) {
  if (s == "Forward") return Stage::Forward;
  if (s == "Prefill") return Stage::Prefill;
  if (s == "Decode") return Stage::Decode;
  throw ConfigError("unknown stage: " + std::string(s));
}

enum class Task { SR, Seg, OD, Encoder, LLM };

inline std::string_view task_name(Task t) {
  switch (t) {
    case Task::SR: return "SR";
    case Task::Seg: return "Seg";
    case Task::OD: return "OD";
    case Task::Encoder: return "Encoder";
    case Task::LLM: return "LLM";
  }
  throw InternalError("bad task");
}

inline Task parse_task(std::string_view s) {
  if (s == "SR") return Task::SR;
  if (s == "Seg") return Task::Seg;
  if (s == "OD") return Task::OD;
  if (s == "Encoder") return Task::Encoder;
  if (s == "LLM") return Task::LLM;
  throw ConfigError("unknown task: " + std::string(s));
}

enum class ModelKind { SinglePass, Generative };

enum class RequestStatus { Pending, Running, Complete, Dropped, Starved };

inline std::string_view status_name(RequestStatus s) {
  switch (s) {
    case RequestStatus::Pending: return "pending";
    case RequestStatus::Running: return "running";
    case RequestStatus::Complete: return "complete";
    case RequestStatus::Dropped: return "dropped";
    case RequestStatus::Starved: return "starved";
  }
  throw InternalError("bad status");
}

struct BackendSpec {
  std::string id;
  BackendKind kind;
};

}  // namespace rtgen
