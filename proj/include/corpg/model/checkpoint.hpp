// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint = "CORPG1\n", the model config as key=value lines, a blank
// line, then one tensor record per parameter in name order.
#pragma once

#include <string>

#include "corpg/model/corpg.hpp"
#include "corpg/tensor_io.hpp"

namespace corpg {

inline constexpr const char* kCheckpointMagic = "CORPG1\n";

inline std::string encode_checkpoint(const CorpgModel& model) {
  std::vector<std::pair<std::string, Tensor>> records;
  for (const auto& [name, t] : model.params()) records.emplace_back(name, t);
  return encode_tensor_file(kCheckpointMagic, model.config().fields(), records);
}

inline CorpgModel decode_checkpoint(const std::string& bytes) {
  TensorFile f = decode_tensor_file(bytes, kCheckpointMagic);
  ModelConfig cfg = ModelConfig::from_fields(f.header);
  ParamStore params;
  for (auto& [name, t] : f.tensors) params.add(name, t);
  return CorpgModel(cfg, std::move(params));
}

inline void save_checkpoint(const std::string& path, const CorpgModel& model) {
  write_text_file_atomic(path, encode_checkpoint(model));
}

inline CorpgModel load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

}  // namespace corpg
