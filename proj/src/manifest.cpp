#include "scriptorium/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "scriptorium/errors.hpp"

namespace fs = std::filesystem;

namespace scriptorium {

std::string to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::Word: return "word";
    case SampleKind::SignatureGenuine: return "signature_genuine";
    case SampleKind::SignatureForged: return "signature_forged";
  }
  return "word";
}

SampleKind sample_kind_from_string(const std::string& s) {
  if (s == "word") return SampleKind::Word;
  if (s == "signature_genuine") return SampleKind::SignatureGenuine;
  if (s == "signature_forged") return SampleKind::SignatureForged;
  throw DataError("unknown sample kind: " + s);
}

CorpusManifest CorpusManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus manifest: " + path);
  CorpusManifest m;
  m.name = fs::path(path).stem().string();
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() < 4)
      throw DataError("manifest line " + std::to_string(lineno) +
                      ": expected at least 4 tab-separated fields");
    CorpusEntry e;
    e.image_path = fields[0];
    e.writer_id = fields[1];
    e.document_id = fields[2];
    e.kind = sample_kind_from_string(fields[3]);
    if (fields.size() > 4) e.split = fields[4];
    m.entries.push_back(std::move(e));
  }
  return m;
}

void CorpusManifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write corpus manifest: " + path);
  out << "# path\twriter_id\tdocument_id\tkind\tsplit\n";
  for (const auto& e : entries) {
    out << e.image_path << '\t' << e.writer_id << '\t' << e.document_id << '\t'
        << to_string(e.kind);
    if (!e.split.empty()) out << '\t' << e.split;
    out << '\n';
  }
}

void CorpusManifest::validate(bool check_paths) const {
  for (const auto& e : entries) {
    if (e.writer_id.empty())
      throw DataError("manifest entry with empty writer_id: " + e.image_path);
    if (check_paths && !fs::exists(e.image_path))
      throw DataError("manifest references missing image: " + e.image_path);
  }
}

std::vector<CorpusEntry> CorpusManifest::filter_split(
    const std::string& split) const {
  std::vector<CorpusEntry> out;
  for (const auto& e : entries)
    if (split.empty() || e.split == split) out.push_back(e);
  return out;
}

}  // namespace scriptorium
