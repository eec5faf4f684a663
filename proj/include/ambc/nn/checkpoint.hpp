#pragma once

// Checkpoint file format (little-endian):
//   magic "AMBCNET1"
//   uint32 version (currently 1)
//   uint32 metadata length, then that many UTF-8 bytes ("key=value\n" lines)
//   per tensor: uint32 name length, name bytes, uint32 rank,
//               uint32 dims[rank], float32 payload
// records follow until end of file. Round-trips are bit-exact.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ambc/nn/adam.hpp"

namespace ambc::nn {

class CheckpointVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CheckpointTruncatedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CheckpointShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Metadata = std::map<std::string, std::string>;

void save_checkpoint(const std::string& path,
                     const std::vector<ParamRef>& params, const Metadata& meta);

struct LoadedCheckpoint {
  Metadata meta;
  struct Entry {
    std::vector<int> dims;
    std::vector<float> data;
  };
  std::map<std::string, Entry> tensors;
};

LoadedCheckpoint read_checkpoint(const std::string& path);

/// Copies every tensor into the matching registry entry; any missing, extra
/// or differently shaped tensor is a CheckpointShapeError naming it.
void apply_checkpoint(const LoadedCheckpoint& ck,
                      const std::vector<ParamRef>& params);

std::string format_metadata(const Metadata& meta);
Metadata parse_metadata(const std::string& text);

}  // namespace ambc::nn
