#include "rsam/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rsam/data.hpp"
#include "rsam/errors.hpp"

namespace rsam {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "rsam-checkpoint";
constexpr int kVersion = 1;

std::filesystem::path stem_of(const std::filesystem::path& p) {
  std::string s = p.string();
  for (const std::string suffix : {".meta.json", ".bin"}) {
    if (s.size() > suffix.size() && s.ends_with(suffix)) {
      return s.substr(0, s.size() - suffix.size());
    }
  }
  return p;
}

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  return stem.string() + suffix;
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

double get_f64(const std::vector<std::uint8_t>& in, std::size_t off) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{in[off + i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& stem, const std::string& experiment,
                     std::size_t step, const std::vector<ParamGroup>& groups) {
  std::vector<std::uint8_t> bytes;
  json meta_groups = json::array();
  std::size_t offset = 0;
  for (const auto& g : groups) {
    for (double v : g.point.value.flat()) put_f64(bytes, v);
    meta_groups.push_back({{"name", g.name},
                           {"rows", g.point.value.rows()},
                           {"cols", g.point.value.cols()},
                           {"manifold", g.point.manifold.is_stiefel() ? "stiefel" : "euclidean"},
                           {"offset", offset}});
    offset += g.point.value.size();
  }
  json meta = {{"format", kFormat},
               {"version", kVersion},
               {"experiment", experiment},
               {"step", step},
               {"groups", meta_groups}};

  std::ofstream bin(with_suffix(stem, ".bin"), std::ios::binary);
  bin.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  std::ofstream js(with_suffix(stem, ".meta.json"));
  js << meta.dump(2) << "\n";
  if (!bin || !js) throw std::runtime_error("checkpoint: cannot write " + stem.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto stem = stem_of(path);
  std::ifstream js(with_suffix(stem, ".meta.json"));
  if (!js) throw std::runtime_error("checkpoint: cannot open " + stem.string() + ".meta.json");
  json meta;
  try {
    meta = json::parse(js);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  const auto bytes = read_file_bytes(with_suffix(stem, ".bin"));

  Checkpoint ck;
  try {
    if (meta.at("format") != kFormat || meta.at("version") != kVersion) {
      throw FormatError("checkpoint: unsupported format");
    }
    ck.experiment = meta.at("experiment").get<std::string>();
    ck.step = meta.at("step").get<std::size_t>();
    std::size_t offset = 0;
    for (const auto& g : meta.at("groups")) {
      CheckpointEntry e;
      e.name = g.at("name").get<std::string>();
      e.rows = g.at("rows").get<std::size_t>();
      e.cols = g.at("cols").get<std::size_t>();
      e.stiefel = g.at("manifold").get<std::string>() == "stiefel";
      const std::size_t n = e.rows * e.cols;
      if ((offset + n) * 8 > bytes.size()) throw LengthError("checkpoint: payload too short");
      std::vector<double> vals(n);
      for (std::size_t i = 0; i < n; ++i) vals[i] = get_f64(bytes, (offset + i) * 8);
      e.value = Matrix(e.rows, e.cols, std::move(vals));
      offset += n;
      ck.entries.push_back(std::move(e));
    }
    if (offset * 8 != bytes.size()) throw LengthError("checkpoint: payload has trailing bytes");
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  return ck;
}

void restore_groups(const Checkpoint& ckpt, std::vector<ParamGroup>& groups) {
  for (auto& g : groups) {
    const CheckpointEntry* hit = nullptr;
    for (const auto& e : ckpt.entries) {
      if (e.name == g.name) hit = &e;
    }
    if (!hit) throw ConfigError("checkpoint has no group '" + g.name + "'");
    if (hit->rows != g.point.value.rows() || hit->cols != g.point.value.cols() ||
        hit->stiefel != g.point.manifold.is_stiefel()) {
      throw ConfigError("checkpoint group '" + g.name + "' does not match the configured model");
    }
    g.point = make_point(g.point.manifold, hit->value);
  }
}

}  // namespace rsam
