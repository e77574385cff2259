#include "scriptorium/embedstore.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "scriptorium/errors.hpp"

namespace scriptorium {

StyleVector aggregate(const std::vector<StyleVector>& vectors) {
  if (vectors.empty()) throw DataError("aggregate: empty vector list");
  const size_t dim = vectors.front().size();
  std::vector<double> acc(dim, 0.0);
  for (const auto& v : vectors) {
    if (v.size() != dim) throw DataError("aggregate: mixed dimensions");
    for (size_t i = 0; i < dim; ++i) acc[i] += v[i];
  }
  StyleVector mean(dim);
  for (size_t i = 0; i < dim; ++i)
    mean[i] = static_cast<float>(acc[i] / static_cast<double>(vectors.size()));
  return mean;
}

std::vector<WriterTemplate> build_writer_templates(
    const std::vector<EmbeddingRecord>& records) {
  std::map<std::string, std::vector<StyleVector>> grouped;
  for (const auto& r : records) grouped[r.writer_id].push_back(r.vector);
  std::vector<WriterTemplate> out;
  out.reserve(grouped.size());
  for (auto& [writer, vecs] : grouped) {
    WriterTemplate t;
    t.writer_id = writer;
    t.mean_vector = aggregate(vecs);
    t.count = vecs.size();
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<DocumentVector> build_document_vectors(
    const std::vector<EmbeddingRecord>& records) {
  std::map<std::pair<std::string, std::string>, std::vector<StyleVector>>
      grouped;
  for (const auto& r : records)
    grouped[{r.document_id, r.writer_id}].push_back(r.vector);
  std::vector<DocumentVector> out;
  out.reserve(grouped.size());
  for (auto& [key, vecs] : grouped) {
    DocumentVector d;
    d.document_id = key.first;
    d.writer_id = key.second;
    d.mean_vector = aggregate(vecs);
    d.word_count = vecs.size();
    out.push_back(std::move(d));
  }
  return out;
}

EmbeddingStore::EmbeddingStore(std::vector<EmbeddingRecord> records)
    : records_(std::move(records)) {
  for (const auto& r : records_) {
    if (r.sample_id.empty() || r.writer_id.empty())
      throw DataError("embedding record with empty id");
  }
  if (!records_.empty()) templates_ = build_writer_templates(records_);
}

namespace {

constexpr char kMagic[8] = {'E', 'M', 'B', 'S', 'T', 'O', 'R', '1'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
void write_floats(std::ostream& out, const StyleVector& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

uint32_t read_u32(std::istream& in) {
  uint32_t v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw DataError("embedding store: truncated file");
  return v;
}
uint64_t read_u64(std::istream& in) {
  uint64_t v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw DataError("embedding store: truncated file");
  return v;
}
std::string read_str(std::istream& in) {
  uint32_t len = read_u32(in);
  if (len > (1u << 20)) throw DataError("embedding store: corrupt string");
  std::string s(len, '\0');
  if (!in.read(s.data(), len))
    throw DataError("embedding store: truncated file");
  return s;
}
StyleVector read_floats(std::istream& in, uint32_t dim) {
  StyleVector v(dim);
  if (!in.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(dim * sizeof(float))))
    throw DataError("embedding store: truncated file");
  return v;
}

}  // namespace

void EmbeddingStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write embedding store: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  uint32_t dim = records_.empty()
                     ? kStyleDim
                     : static_cast<uint32_t>(records_.front().vector.size());
  write_u32(out, dim);
  write_u64(out, records_.size());
  write_u64(out, templates_.size());
  for (const auto& r : records_) {
    write_str(out, r.sample_id);
    write_str(out, r.writer_id);
    write_str(out, r.document_id);
    write_floats(out, r.vector);
  }
  for (const auto& t : templates_) {
    write_str(out, t.writer_id);
    write_u64(out, t.count);
    write_floats(out, t.mean_vector);
  }
  if (!out) throw ConfigError("write failed: " + path);
}

EmbeddingStore EmbeddingStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read embedding store: " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("embedding store: bad magic");
  uint32_t version = read_u32(in);
  if (version != kVersion)
    throw DataError("embedding store: unsupported version " +
                    std::to_string(version));
  uint32_t dim = read_u32(in);
  uint64_t n_records = read_u64(in);
  uint64_t n_templates = read_u64(in);
  EmbeddingStore store;
  store.records_.reserve(n_records);
  for (uint64_t i = 0; i < n_records; ++i) {
    EmbeddingRecord r;
    r.sample_id = read_str(in);
    r.writer_id = read_str(in);
    r.document_id = read_str(in);
    r.vector = read_floats(in, dim);
    store.records_.push_back(std::move(r));
  }
  store.templates_.reserve(n_templates);
  for (uint64_t i = 0; i < n_templates; ++i) {
    WriterTemplate t;
    t.writer_id = read_str(in);
    t.count = read_u64(in);
    t.mean_vector = read_floats(in, dim);
    store.templates_.push_back(std::move(t));
  }
  // must be at end of file
  in.peek();
  if (!in.eof()) throw DataError("embedding store: trailing bytes");
  return store;
}

void EmbeddingStore::export_tsv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write: " + path);
  out.precision(9);
  for (const auto& r : records_) {
    out << r.sample_id << '\t' << r.writer_id << '\t' << r.document_id;
    for (float v : r.vector) out << '\t' << v;
    out << '\n';
  }
}

}  // namespace scriptorium
