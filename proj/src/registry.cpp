#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <openssl/evp.h>
#include <sstream>

#include "relzero/error.hpp"
#include "relzero/watermark.hpp"

namespace relzero::watermark {

std::string record_file_name(const std::string& content_id) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(content_id.data(), content_id.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::io, "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string name;
  for (unsigned int i = 0; i < len; ++i) {
    name.push_back(kHex[digest[i] >> 4]);
    name.push_back(kHex[digest[i] & 0xF]);
  }
  return name + ".rzw";
}

std::filesystem::path registry_put(const std::filesystem::path& dir, const WatermarkRecord& record, bool force) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create registry " + dir.string() + ": " + ec.message());
  const auto path = dir / record_file_name(record.content_id);
  const std::string text = to_json(record) + "\n";

  if (force) {
    // Write-then-rename so a concurrent reader never sees a partial record.
    const auto tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << text;
      if (!out) throw Error(Errc::io, "cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(Errc::io, "cannot replace " + path.string() + ": " + ec.message());
    return path;
  }

  // "x": O_CREAT | O_EXCL, exactly one concurrent writer of an id succeeds.
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wbx"), &std::fclose);
  if (!file) {
    if (errno == EEXIST) throw Error(Errc::duplicate_record, "duplicate id: record already exists for '" + record.content_id + "'");
    throw Error(Errc::io, "cannot create " + path.string() + ": " + std::strerror(errno));
  }
  if (std::fwrite(text.data(), 1, text.size(), file.get()) != text.size()) {
    throw Error(Errc::io, "short write to " + path.string());
  }
  return path;
}

WatermarkRecord registry_get(const std::filesystem::path& dir, const std::string& content_id) {
  const auto path = dir / record_file_name(content_id);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::missing_record, "missing record for '" + content_id + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace relzero::watermark
