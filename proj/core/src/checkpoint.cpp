#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "bpr/model.hpp"

namespace bpr {

namespace {

constexpr char kMagic[8] = {'B', 'P', 'R', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
}

void write_block(std::ofstream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_block(std::ifstream& in, std::vector<double>& v, std::size_t count) {
  v.resize(count);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(double)));
}

}  // namespace

void save_checkpoint(const ModelParams<double>& params, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());

  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, params.f);
  write_pod(out, params.user_count);
  write_pod(out, params.item_count);
  const std::uint8_t bias_flag = params.has_bias() ? 1 : 0;
  write_pod(out, bias_flag);
  write_block(out, params.P);
  write_block(out, params.Q);
  if (bias_flag) write_block(out, params.b);
  if (!out) throw DataError("short write on checkpoint " + path.string());
  out.close();

  nlohmann::json twin;
  twin["magic"] = "BPRCKPT";
  twin["version"] = kVersion;
  twin["f"] = params.f;
  twin["user_count"] = params.user_count;
  twin["item_count"] = params.item_count;
  twin["use_item_bias"] = params.has_bias();
  twin["precision"] = "f64";
  twin["payload"] = path.filename().string();
  std::ofstream meta(path.string() + ".json");
  if (!meta) throw DataError("cannot write checkpoint metadata " + path.string() + ".json");
  meta << twin.dump(2) << '\n';
}

ModelParams<double> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path.string() + " is not a checkpoint (bad magic)");
  }
  std::uint32_t version = 0;
  read_pod(in, version);
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }

  ModelParams<double> params;
  read_pod(in, params.f);
  read_pod(in, params.user_count);
  read_pod(in, params.item_count);
  std::uint8_t bias_flag = 0;
  read_pod(in, bias_flag);
  if (!in) throw DataError("truncated checkpoint header in " + path.string());
  if (params.f == 0) throw DataError("checkpoint declares f = 0");

  read_block(in, params.P, static_cast<std::size_t>(params.user_count) * params.f);
  read_block(in, params.Q, static_cast<std::size_t>(params.item_count) * params.f);
  if (bias_flag) read_block(in, params.b, params.item_count);
  if (!in) throw DataError("truncated checkpoint payload in " + path.string());

  auto all_finite = [](const std::vector<double>& v) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  };
  if (!all_finite(params.P) || !all_finite(params.Q) || !all_finite(params.b)) {
    throw DataError("checkpoint " + path.string() + " contains non-finite values");
  }
  return params;
}

}  // namespace bpr
