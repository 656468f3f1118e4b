#include "metaems/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "metaems/binary_io.hpp"
#include "metaems/errors.hpp"

namespace metaems::checkpoint {
namespace {

constexpr char kMagic[8] = {'M', 'E', 'M', 'S', 'C', 'K', 'P', 'T'};

std::uint32_t Crc(const std::string& payload) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
}

void WriteFile(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to checkpoint '" + path.string() + "'");
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::string Frame(Kind kind, const std::string& payload) {
  std::ostringstream out(std::ios::binary);
  out.write(kMagic, sizeof(kMagic));
  io::WritePod(out, kFormatVersion);
  io::WritePod(out, static_cast<std::uint32_t>(kind));
  io::WritePod(out, static_cast<std::uint64_t>(payload.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  io::WritePod(out, Crc(payload));
  return out.str();
}

std::string Unframe(Kind kind, const std::string& bytes, const std::string& origin) {
  constexpr std::size_t kHeader = sizeof(kMagic) + 4 + 4 + 8;
  if (bytes.size() < kHeader + 4) throw IoError(origin + ": truncated checkpoint");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw IoError(origin + ": not a checkpoint file");
  std::istringstream in(bytes, std::ios::binary);
  in.seekg(sizeof(kMagic));
  const auto version = io::ReadPod<std::uint32_t>(in);
  if (version != kFormatVersion) {
    throw VersionMismatch(origin + ": checkpoint version " + std::to_string(version) + ", expected " +
                          std::to_string(kFormatVersion));
  }
  const auto stored_kind = io::ReadPod<std::uint32_t>(in);
  if (stored_kind != static_cast<std::uint32_t>(kind)) {
    throw VersionMismatch(origin + ": checkpoint holds kind " + std::to_string(stored_kind) + ", expected " +
                          std::to_string(static_cast<std::uint32_t>(kind)));
  }
  const auto length = io::ReadPod<std::uint64_t>(in);
  if (length != bytes.size() - kHeader - 4) throw IoError(origin + ": payload length does not match file size");
  std::string payload = bytes.substr(kHeader, length);
  in.seekg(static_cast<std::streamoff>(kHeader + length));
  const auto crc = io::ReadPod<std::uint32_t>(in);
  if (crc != Crc(payload)) throw IoError(origin + ": checksum mismatch");
  return payload;
}

void Save(const std::filesystem::path& path, const meta::MetaState& state) {
  std::ostringstream payload(std::ios::binary);
  state.Save(payload);
  WriteFile(path, Frame(Kind::kMetaState, payload.str()));
}

void Save(const std::filesystem::path& path, const agent::ActorCritic& agent) {
  std::ostringstream payload(std::ios::binary);
  agent.Save(payload);
  WriteFile(path, Frame(Kind::kAgent, payload.str()));
}

meta::MetaState LoadMetaState(const std::filesystem::path& path) {
  std::istringstream in(Unframe(Kind::kMetaState, ReadFile(path), path.string()), std::ios::binary);
  return meta::MetaState::Load(in);
}

agent::ActorCritic LoadAgent(const std::filesystem::path& path) {
  std::istringstream in(Unframe(Kind::kAgent, ReadFile(path), path.string()), std::ios::binary);
  return agent::ActorCritic::Load(in);
}

}  // namespace metaems::checkpoint
