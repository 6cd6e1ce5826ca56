// SPDX-License-Identifier: Apache-2.0
#include "fairview/array_store.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "fairview/common.hpp"
#include "fairview/sha256.hpp"

namespace fairview {

namespace fs = std::filesystem;

namespace {

constexpr char kWeightsMagic[8] = {'F', 'V', 'W', 'G', 'T', '0', '1', '\n'};
constexpr const char* kChecksumFile = "sha256sums.txt";

void put_u64_le(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_u64_le(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace

void write_f32_file(const fs::path& path, const char magic[8], const float* data,
                    std::size_t count) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), Errc::stage_failure, "cannot write " + path.string());
  out.write(magic, 8);
  put_u64_le(out, count);
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(count * sizeof(float)));
  require(static_cast<bool>(out), Errc::stage_failure, "short write to " + path.string());
}

std::vector<float> read_f32_file(const fs::path& path, const char magic[8]) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::stage_failure, "cannot open " + path.string());
  char got[8];
  in.read(got, 8);
  require(in.gcount() == 8 && std::memcmp(got, magic, 8) == 0, Errc::bad_container_header,
          "bad container header in " + path.string());
  const std::uint64_t count = get_u64_le(in);
  require(static_cast<bool>(in), Errc::bad_container_header,
          "bad container header in " + path.string());
  std::vector<float> data(count);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  require(static_cast<std::uint64_t>(in.gcount()) == count * sizeof(float),
          Errc::truncated_payload, "truncated payload in " + path.string());
  return data;
}

std::size_t peek_f32_count(const fs::path& path, const char magic[8]) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::stage_failure, "cannot open " + path.string());
  char got[8];
  in.read(got, 8);
  require(in.gcount() == 8 && std::memcmp(got, magic, 8) == 0, Errc::bad_container_header,
          "bad container header in " + path.string());
  return static_cast<std::size_t>(get_u64_le(in));
}

struct F32Writer::Impl {
  std::ofstream out;
  fs::path path;
  std::uint64_t count = 0;
};

F32Writer::F32Writer(const fs::path& path, const char magic[8]) : impl_(new Impl) {
  impl_->path = path;
  impl_->out.open(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(impl_->out), Errc::stage_failure, "cannot write " + path.string());
  impl_->out.write(magic, 8);
  put_u64_le(impl_->out, 0);  // patched by finish()
}

F32Writer::~F32Writer() { delete impl_; }

std::uint64_t F32Writer::offset() const {
  return kPayloadHeaderBytes + impl_->count * sizeof(float);
}

void F32Writer::append(const float* data, std::size_t count) {
  impl_->out.write(reinterpret_cast<const char*>(data),
                   static_cast<std::streamsize>(count * sizeof(float)));
  impl_->count += count;
}

void F32Writer::finish() {
  require(static_cast<bool>(impl_->out), Errc::stage_failure,
          "short write to " + impl_->path.string());
  impl_->out.seekp(8);
  put_u64_le(impl_->out, impl_->count);
  impl_->out.close();
}

void ArrayStore::add(const std::string& name, std::vector<std::size_t> shape, const float* p,
                     std::size_t n) {
  std::size_t expect = 1;
  for (auto d : shape) expect *= d;
  require(expect == n, Errc::stage_failure, "array shape/count mismatch for " + name);
  arrays.push_back(Entry{name, std::move(shape), std::vector<float>(p, p + n)});
}

void ArrayStore::add(const std::string& name, std::vector<std::size_t> shape,
                     std::vector<float> values) {
  add(name, std::move(shape), values.data(), values.size());
}

bool ArrayStore::has(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return true;
  return false;
}

const ArrayStore::Entry& ArrayStore::get(const std::string& name) const {
  for (const auto& a : arrays)
    if (a.name == name) return a;
  fail(Errc::stage_failure, "named array not found: " + name);
}

void ArrayStore::save(const fs::path& dir) const {
  fs::create_directories(dir);
  // Payload first so the header can carry its checksum.
  F32Writer writer(dir / "weights.bin", kWeightsMagic);
  json entries = json::array();
  for (const auto& a : arrays) {
    json e;
    e["name"] = a.name;
    e["dtype"] = "f32";
    e["shape"] = a.shape;
    e["offset"] = writer.offset();
    e["count"] = a.data.size();
    entries.push_back(e);
    writer.append(a.data.data(), a.data.size());
  }
  writer.finish();

  json header;
  header["format"] = "fairview-arrays";
  header["version"] = 1;
  header["arrays"] = entries;
  header["manifest"] = manifest;
  header["payload_sha256"] = sha256_file(dir / "weights.bin");
  write_json_file(dir / "header.json", header);
  write_checksum_file(dir, {"header.json", "weights.bin"});
}

ArrayStore ArrayStore::load(const fs::path& dir) {
  const json header = read_json_file(dir / "header.json");
  require(header.value("format", "") == "fairview-arrays", Errc::bad_container_header,
          "not a fairview named-array container: " + dir.string());
  const std::string want_sha = header.value("payload_sha256", "");
  const std::string got_sha = sha256_file(dir / "weights.bin");
  require(want_sha == got_sha, Errc::checksum_mismatch,
          "weights.bin checksum mismatch in " + dir.string());
  std::vector<float> payload = read_f32_file(dir / "weights.bin", kWeightsMagic);

  ArrayStore store;
  store.manifest = header.value("manifest", json::object());
  for (const auto& e : header.at("arrays")) {
    Entry a;
    a.name = e.at("name").get<std::string>();
    a.shape = e.at("shape").get<std::vector<std::size_t>>();
    const auto offset = e.at("offset").get<std::uint64_t>();
    const auto count = e.at("count").get<std::size_t>();
    require((offset - kPayloadHeaderBytes) % sizeof(float) == 0, Errc::bad_container_header,
            "misaligned array offset for " + a.name);
    const std::size_t start = (offset - kPayloadHeaderBytes) / sizeof(float);
    require(start + count <= payload.size(), Errc::manifest_payload_mismatch,
            "manifest/payload mismatch for array " + a.name);
    a.data.assign(payload.begin() + static_cast<std::ptrdiff_t>(start),
                  payload.begin() + static_cast<std::ptrdiff_t>(start + count));
    store.arrays.push_back(std::move(a));
  }
  return store;
}

std::string ArrayStore::checksum() const {
  std::ostringstream blob;
  blob << manifest.dump();
  for (const auto& a : arrays) {
    blob << '\n' << a.name << ':';
    for (auto d : a.shape) blob << d << ',';
    blob.write(reinterpret_cast<const char*>(a.data.data()),
               static_cast<std::streamsize>(a.data.size() * sizeof(float)));
  }
  const std::string s = blob.str();
  return sha256_hex(s.data(), s.size());
}

void write_checksum_file(const fs::path& dir, const std::vector<std::string>& filenames) {
  std::ofstream out(dir / kChecksumFile, std::ios::trunc);
  require(static_cast<bool>(out), Errc::stage_failure,
          "cannot write checksum file in " + dir.string());
  for (const auto& name : filenames) out << sha256_file(dir / name) << "  " << name << "\n";
}

void verify_checksum_file(const fs::path& dir) {
  std::ifstream in(dir / kChecksumFile);
  require(static_cast<bool>(in), Errc::stage_failure,
          "missing checksum file in " + dir.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto split = line.find("  ");
    require(split != std::string::npos, Errc::bad_container_header,
            "malformed checksum line: " + line);
    const std::string want = line.substr(0, split);
    const std::string name = line.substr(split + 2);
    const std::string got = sha256_file(dir / name);
    require(want == got, Errc::checksum_mismatch, "checksum mismatch for " + name);
  }
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::stage_failure, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail(Errc::bad_container_header, "invalid JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), Errc::stage_failure, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace fairview
