#include "gestauth/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "gestauth/error.hpp"

namespace gestauth::nn {

namespace {

using nlohmann::json;

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  auto p = stem;
  p += ext;
  return p;
}

json read_manifest(const std::filesystem::path& stem) {
  std::ifstream in(with_ext(stem, ".json"));
  if (!in) throw InputError("cannot open checkpoint manifest " + with_ext(stem, ".json").string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("bad checkpoint manifest: " + std::string(e.what()));
  }
}

void put_le(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

double get_le(const unsigned char* buf) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& stem, Module& model, const std::string& arch,
                     const std::string& extra_json) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  json m;
  m["format"] = "gestauth-checkpoint-1";
  m["arch"] = arch;
  m["seed"] = model.seed();
  m["layers"] = json::array();
  for (const auto& s : model.specs()) {
    m["layers"].push_back({{"kind", to_string(s.kind)},
                           {"name", s.name},
                           {"in", s.in},
                           {"out", s.out},
                           {"kernel", s.kernel},
                           {"stride", s.stride},
                           {"padding", s.padding == Padding::same ? "same" : "valid"},
                           {"return_sequences", s.return_sequences}});
  }
  m["params"] = json::array();
  std::size_t offset = 0;
  std::ofstream bin(with_ext(stem, ".bin"), std::ios::binary);
  if (!bin) throw InputError("cannot write checkpoint " + with_ext(stem, ".bin").string());
  for (auto* p : model.parameters()) {
    m["params"].push_back({{"name", p->name}, {"shape", p->value.shape}, {"offset", offset}});
    for (double v : p->value.data) put_le(bin, v);
    offset += p->value.numel();
  }
  m["extra"] = json::parse(extra_json);
  std::ofstream(with_ext(stem, ".json")) << m.dump(2) << '\n';
}

std::string checkpoint_arch(const std::filesystem::path& stem) { return read_manifest(stem).at("arch"); }

std::string checkpoint_extra(const std::filesystem::path& stem) {
  const auto m = read_manifest(stem);
  return m.contains("extra") ? m["extra"].dump() : "{}";
}

void load_checkpoint(const std::filesystem::path& stem, Module& model, const std::string& expected_arch) {
  const auto m = read_manifest(stem);
  if (m.value("arch", "") != expected_arch) {
    throw InputError("checkpoint arch '" + m.value("arch", "") + "' does not match '" + expected_arch + "'");
  }
  std::ifstream bin(with_ext(stem, ".bin"), std::ios::binary);
  if (!bin) throw InputError("cannot open checkpoint " + with_ext(stem, ".bin").string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  auto params = model.parameters();
  const auto& entries = m.at("params");
  if (entries.size() != params.size()) throw InputError("checkpoint parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    const auto& e = entries[k];
    if (e.at("name") != p.name || e.at("shape").get<Shape>() != p.value.shape) {
      throw InputError("checkpoint entry " + e.at("name").get<std::string>() + " does not match " + p.name);
    }
    const auto offset = e.at("offset").get<std::size_t>();
    if ((offset + p.value.numel()) * 8 > bytes.size()) throw InputError("checkpoint blob truncated");
    for (std::size_t i = 0; i < p.value.numel(); ++i) p.value[i] = get_le(bytes.data() + (offset + i) * 8);
  }
}

}  // namespace gestauth::nn
