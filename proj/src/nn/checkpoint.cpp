#include "ambc/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace ambc::nn {

namespace {

constexpr char kMagic[8] = {'A', 'M', 'B', 'C', 'N', 'E', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() != 4) throw CheckpointTruncatedError("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::string format_metadata(const Metadata& meta) {
  std::ostringstream os;
  for (const auto& [k, v] : meta) os << k << '=' << v << '\n';
  return os.str();
}

Metadata parse_metadata(const std::string& text) {
  Metadata meta;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto pos = line.find('=');
    if (pos == std::string::npos) continue;
    meta[line.substr(0, pos)] = line.substr(pos + 1);
  }
  return meta;
}

void save_checkpoint(const std::string& path,
                     const std::vector<ParamRef>& params,
                     const Metadata& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 8);
  put_u32(os, kVersion);
  const std::string mtext = format_metadata(meta);
  put_u32(os, static_cast<std::uint32_t>(mtext.size()));
  os.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& p : params) {
    put_u32(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(os, static_cast<std::uint32_t>(p.dims.size()));
    for (int d : p.dims) put_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(p.data),
             static_cast<std::streamsize>(p.size() * 4));
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

LoadedCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (is.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointVersionError("not a checkpoint file (bad magic): " + path);
  const std::uint32_t version = get_u32(is);
  if (version != kVersion)
    throw CheckpointVersionError("unsupported checkpoint version " +
                                 std::to_string(version));
  const std::uint32_t mlen = get_u32(is);
  std::string mtext(mlen, '\0');
  is.read(mtext.data(), mlen);
  if (is.gcount() != static_cast<std::streamsize>(mlen))
    throw CheckpointTruncatedError("checkpoint truncated in metadata");
  LoadedCheckpoint ck;
  ck.meta = parse_metadata(mtext);
  while (true) {
    unsigned char probe;
    is.read(reinterpret_cast<char*>(&probe), 1);
    if (is.gcount() == 0) break;  // clean EOF
    is.putback(static_cast<char>(probe));
    const std::uint32_t nlen = get_u32(is);
    std::string name(nlen, '\0');
    is.read(name.data(), nlen);
    if (is.gcount() != static_cast<std::streamsize>(nlen))
      throw CheckpointTruncatedError("checkpoint truncated in tensor name");
    const std::uint32_t rank = get_u32(is);
    if (rank > 4) throw CheckpointShapeError("tensor '" + name + "' has rank > 4");
    LoadedCheckpoint::Entry e;
    long numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t d = get_u32(is);
      e.dims.push_back(static_cast<int>(d));
      numel *= static_cast<long>(d);
    }
    if (rank == 0) numel = 0;
    e.data.resize(static_cast<std::size_t>(numel));
    is.read(reinterpret_cast<char*>(e.data.data()),
            static_cast<std::streamsize>(numel * 4));
    if (is.gcount() != static_cast<std::streamsize>(numel * 4))
      throw CheckpointTruncatedError("checkpoint truncated in tensor '" + name + "'");
    ck.tensors[name] = std::move(e);
  }
  return ck;
}

void apply_checkpoint(const LoadedCheckpoint& ck,
                      const std::vector<ParamRef>& params) {
  std::set<std::string> used;
  for (const auto& p : params) {
    const auto it = ck.tensors.find(p.name);
    if (it == ck.tensors.end())
      throw CheckpointShapeError("checkpoint is missing tensor '" + p.name + "'");
    if (it->second.dims != p.dims)
      throw CheckpointShapeError("shape mismatch for tensor '" + p.name + "'");
    std::memcpy(p.data, it->second.data.data(),
                static_cast<std::size_t>(p.size()) * 4);
    used.insert(p.name);
  }
  for (const auto& [name, entry] : ck.tensors)
    if (!used.count(name))
      throw CheckpointShapeError("checkpoint has unexpected tensor '" + name + "'");
}

}  // namespace ambc::nn
