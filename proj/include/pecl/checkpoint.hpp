#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pecl/config.hpp"
#include "pecl/error.hpp"
#include "pecl/model.hpp"

namespace pecl {

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'P', 'E', 'C', 'L',
                                             'C', 'K', 'P', 'T'};

template <typename T>
const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

}  // namespace detail

// Layout: 8-byte magic, little-endian u64 header length, JSON header, then
// every parameter's scalars back to back in registration order. The header
// echoes the full resolved config and seed and indexes each parameter by
// name, shape, trainable flag, group, and scalar offset, so a file reloads
// exactly or fails loudly.
template <typename T>
void save_checkpoint(const PeclModel<T>& m, const std::string& path) {
  Json header;
  header["format_version"] = 1;
  header["dtype"] = detail::dtype_name<T>();
  header["config"] = to_json(m.cfg);
  header["seed"] = m.cfg.seed;
  header["params"] = Json::array();
  std::size_t offset = 0;
  for (const auto& p : m.params.all()) {
    Json e;
    e["name"] = p.name;
    e["shape"] = p.value.shape();
    e["trainable"] = p.trainable;
    e["group"] = param_group_name(p.group);
    e["offset"] = offset;
    e["count"] = p.value.size();
    header["params"].push_back(e);
    offset += p.value.size();
  }
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("checkpoint: cannot write '" + path + "'");
  out.write(detail::kCheckpointMagic, 8);
  std::uint64_t hlen = head.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& p : m.params.all()) {
    const auto& data = p.value.data();
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(T)));
  }
  if (!out) throw ConfigError("checkpoint: write to '" + path + "' failed");
}

inline Json read_checkpoint_header(std::ifstream& in, const std::string& path) {
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 ||
      std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
    throw ValueError("checkpoint: '" + path + "' is not a checkpoint file");
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 8);
  if (in.gcount() != 8)
    throw ValueError("checkpoint: '" + path + "' is truncated");
  std::string head(hlen, '\0');
  in.read(head.data(), static_cast<std::streamsize>(hlen));
  if (static_cast<std::uint64_t>(in.gcount()) != hlen)
    throw ValueError("checkpoint: '" + path + "' is truncated");
  Json header = Json::parse(head, nullptr, false);
  if (header.is_discarded())
    throw ValueError("checkpoint: '" + path + "' holds a malformed header");
  return header;
}

// Convenience for tools that only need the embedded config.
inline Json peek_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint: cannot open '" + path + "'");
  return read_checkpoint_header(in, path);
}

template <typename T>
PeclModel<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("checkpoint: cannot open '" + path + "'");
  Json header = read_checkpoint_header(in, path);

  const std::string dtype = header.value("dtype", "");
  if (dtype != detail::dtype_name<T>())
    throw ConfigError("checkpoint: '" + path + "' stores " + dtype +
                      " scalars but " + detail::dtype_name<T>() +
                      " was requested");
  if (!header.contains("config") || !header.contains("params"))
    throw ValueError("checkpoint: '" + path + "' header lacks config or params");

  auto cfg = config_from_json(header["config"]);
  auto m = build_model<T>(cfg);

  const auto& entries = header["params"];
  if (entries.size() != m.params.all().size())
    throw ValueError("checkpoint: '" + path + "' indexes " +
                     std::to_string(entries.size()) + " parameters but the " +
                     "rebuilt model has " +
                     std::to_string(m.params.all().size()));

  std::size_t expect_offset = 0;
  for (const auto& e : entries) {
    const std::string name = e.at("name").get<std::string>();
    auto* p = m.params.find(name);
    if (p == nullptr)
      throw ValueError("checkpoint: unknown parameter '" + name + "'");
    const auto shape = e.at("shape").get<std::vector<std::size_t>>();
    if (shape != p->value.shape())
      throw ValueError("checkpoint: parameter '" + name +
                       "' shape does not match the rebuilt model");
    if (e.at("trainable").get<bool>() != p->trainable ||
        e.at("group").get<std::string>() != param_group_name(p->group))
      throw ValueError("checkpoint: parameter '" + name +
                       "' metadata does not match the rebuilt model");
    if (e.at("offset").get<std::size_t>() != expect_offset ||
        e.at("count").get<std::size_t>() != p->value.size())
      throw ValueError("checkpoint: parameter '" + name +
                       "' payload index is inconsistent");
    auto& data = p->value.data();
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (static_cast<std::size_t>(in.gcount()) != data.size() * sizeof(T))
      throw ValueError("checkpoint: '" + path + "' payload is truncated at '" +
                       name + "'");
    expect_offset += p->value.size();
  }
  char probe;
  if (in.read(&probe, 1))
    throw ValueError("checkpoint: '" + path + "' has trailing bytes");
  return m;
}

}  // namespace pecl
