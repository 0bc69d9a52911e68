#include "humanflow/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace hf {

namespace {

constexpr int kFormatVersion = 1;

void write_f32_le(std::ofstream& os, const std::vector<double>& v) {
  std::vector<float> buf(v.size());
  for (size_t i = 0; i < v.size(); ++i) buf[i] = static_cast<float>(v[i]);
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

}  // namespace

void save_checkpoint(const std::string& dir, const ParamStore& params,
                     const std::map<std::string, std::string>& hyper) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir + "/manifest.txt");
  std::ofstream blob(dir + "/params.bin", std::ios::binary);
  if (!manifest || !blob)
    throw CheckpointError("cannot open checkpoint files under " + dir);

  manifest << "format_version " << kFormatVersion << "\n";
  for (const auto& [k, v] : hyper) manifest << "hyper " << k << " " << v << "\n";
  long offset = 0;
  for (const auto& [name, t] : params.all()) {
    manifest << "tensor " << name;
    for (long d : t.shape()) manifest << " " << d;
    manifest << " @" << offset << "\n";
    write_f32_le(blob, t.values());
    offset += t.size() * static_cast<long>(sizeof(float));
  }
}

namespace {

struct ManifestEntry {
  std::string name;
  Shape shape;
  long offset;
};

struct Manifest {
  std::map<std::string, std::string> hyper;
  std::vector<ManifestEntry> tensors;
};

Manifest parse_manifest(const std::string& dir) {
  std::ifstream in(dir + "/manifest.txt");
  if (!in) throw CheckpointError("missing manifest: " + dir + "/manifest.txt");
  Manifest m;
  std::string line;
  bool saw_version = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "format_version") {
      int v = -1;
      ls >> v;
      if (v != kFormatVersion)
        throw CheckpointError("unsupported checkpoint format version " +
                              std::to_string(v));
      saw_version = true;
    } else if (tag == "hyper") {
      std::string k, v;
      ls >> k >> v;
      m.hyper[k] = v;
    } else if (tag == "tensor") {
      ManifestEntry e;
      ls >> e.name;
      std::string tok;
      e.offset = -1;
      while (ls >> tok) {
        if (tok.size() && tok[0] == '@')
          e.offset = std::stol(tok.substr(1));
        else
          e.shape.push_back(std::stol(tok));
      }
      if (e.offset < 0)
        throw CheckpointError("manifest entry missing offset: " + e.name);
      m.tensors.push_back(std::move(e));
    } else {
      throw CheckpointError("unknown manifest line: " + line);
    }
  }
  if (!saw_version) throw CheckpointError("manifest missing format_version");
  return m;
}

}  // namespace

std::map<std::string, std::string> read_checkpoint_hyper(
    const std::string& dir) {
  return parse_manifest(dir).hyper;
}

std::map<std::string, std::string> load_checkpoint(const std::string& dir,
                                                   ParamStore& params) {
  Manifest m = parse_manifest(dir);
  std::ifstream blob(dir + "/params.bin", std::ios::binary);
  if (!blob) throw CheckpointError("missing blob: " + dir + "/params.bin");
  blob.seekg(0, std::ios::end);
  const long blob_size = static_cast<long>(blob.tellg());

  if (m.tensors.size() != params.all().size())
    throw CheckpointError(
        "checkpoint lists " + std::to_string(m.tensors.size()) +
        " tensors, model has " + std::to_string(params.all().size()));

  for (const auto& e : m.tensors) {
    if (!params.has(e.name))
      throw CheckpointError("checkpoint tensor not in model: " + e.name);
    Tensor t = params.get(e.name);
    if (t.shape() != e.shape)
      throw CheckpointError("shape mismatch for tensor " + e.name +
                            ": checkpoint " + shape_str(e.shape) + ", model " +
                            shape_str(t.shape()));
    const long bytes = t.size() * static_cast<long>(sizeof(float));
    if (e.offset + bytes > blob_size)
      throw CheckpointError("blob truncated at tensor " + e.name);
    std::vector<float> buf(static_cast<size_t>(t.size()));
    blob.seekg(e.offset);
    blob.read(reinterpret_cast<char*>(buf.data()), bytes);
    if (!blob) throw CheckpointError("read failure at tensor " + e.name);
    for (long i = 0; i < t.size(); ++i)
      t.data()[i] = static_cast<double>(buf[static_cast<size_t>(i)]);
  }
  return m.hyper;
}

}  // namespace hf
