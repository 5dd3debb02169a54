#include <fstream>
#include <set>
#include <sstream>

#include "pesqlab/audio_io.hpp"
#include "pesqlab/errors.hpp"

namespace pesqlab {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// Splits one CSV record. Double-quoted fields may contain commas; a doubled
// quote inside a quoted field is a literal quote.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

}  // namespace

Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    header = split_csv(t);
    break;
  }
  if (header.empty()) throw SchemaError("manifest is empty (expected header id,reference,degraded)");

  auto column = [&header](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw SchemaError("manifest header is missing column '" + name + "'");
  };
  const std::size_t id_col = column("id");
  const std::size_t ref_col = column("reference");
  const std::size_t deg_col = column("degraded");

  Manifest m;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto fields = split_csv(t);
    if (fields.size() != header.size()) {
      throw SchemaError("manifest line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(header.size()));
    }
    ManifestEntry e{fields[id_col], fields[ref_col], fields[deg_col]};
    if (e.id.empty() || e.reference_path.empty() || e.degraded_path.empty()) {
      throw ValidationError("manifest line " + std::to_string(line_no) + " has an empty field");
    }
    if (!seen.insert(e.id).second) throw ValidationError("duplicate manifest id: " + e.id);
    if (e.reference_path.is_relative()) e.reference_path = base_dir / e.reference_path;
    if (e.degraded_path.is_relative()) e.degraded_path = base_dir / e.degraded_path;
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw SchemaError("manifest has a header but no entries");
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path());
}

}  // namespace pesqlab
