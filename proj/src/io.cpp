#include "nudge/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "nudge/errors.hpp"
#include "nudge/rng.hpp"

namespace nudge {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string hash_to_hex(uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void TextArchive::set_field(const std::string& key, const std::string& value) {
  for (auto& [k, v] : fields_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  fields_.emplace_back(key, value);
}

bool TextArchive::has_field(const std::string& key) const {
  for (const auto& [k, v] : fields_) {
    if (k == key) return true;
  }
  return false;
}

const std::string& TextArchive::field(const std::string& key) const {
  for (const auto& [k, v] : fields_) {
    if (k == key) return v;
  }
  throw ParseError("archive: missing field " + key);
}

void TextArchive::add_tensor(const std::string& name, Matrix m) {
  for (auto& [k, v] : tensors_) {
    if (k == name) throw UsageError("archive: duplicate tensor " + name);
  }
  tensors_.emplace_back(name, std::move(m));
}

bool TextArchive::has_tensor(const std::string& name) const {
  for (const auto& [k, v] : tensors_) {
    if (k == name) return true;
  }
  return false;
}

const Matrix& TextArchive::tensor(const std::string& name) const {
  for (const auto& [k, v] : tensors_) {
    if (k == name) return v;
  }
  throw ParseError("archive: missing tensor " + name);
}

void TextArchive::save(std::ostream& out) const {
  out << "nudge-archive v1\n";
  for (const auto& [k, v] : fields_) {
    out << "field " << k << " " << v << "\n";
  }
  for (const auto& [name, m] : tensors_) {
    out << "tensor " << name << " " << m.rows << " " << m.cols << "\n";
    for (int i = 0; i < m.rows; ++i) {
      for (int j = 0; j < m.cols; ++j) {
        if (j) out << " ";
        out << format_double(m.at(i, j));
      }
      out << "\n";
    }
  }
  out << "end\n";
}

void TextArchive::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  save(out);
}

TextArchive TextArchive::load(std::istream& in, const std::string& where) {
  TextArchive a;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError(where + ":" + std::to_string(line_no) + ": " + msg);
  };
  if (!std::getline(in, line)) throw ParseError(where + ": empty archive");
  ++line_no;
  if (line != "nudge-archive v1") throw fail("bad magic line");
  bool ended = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "end") {
      ended = true;
      break;
    }
    if (tag == "field") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      if (key.empty()) throw fail("field without a key");
      a.set_field(key, value);
    } else if (tag == "tensor") {
      std::string name;
      int rows = -1, cols = -1;
      ls >> name >> rows >> cols;
      if (name.empty() || rows < 0 || cols < 0) throw fail("malformed tensor header");
      Matrix m(rows, cols);
      for (int i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw fail("truncated tensor " + name);
        ++line_no;
        const char* p = line.c_str();
        char* endp = nullptr;
        for (int j = 0; j < cols; ++j) {
          const double v = std::strtod(p, &endp);
          if (endp == p) throw fail("bad value in tensor " + name);
          m.at(i, j) = v;
          p = endp;
        }
      }
      a.tensors_.emplace_back(name, std::move(m));
    } else {
      throw fail("unknown record tag: " + tag);
    }
  }
  if (!ended) throw ParseError(where + ": missing end marker (truncated file)");
  return a;
}

TextArchive TextArchive::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return load(in, path);
}

uint64_t TextArchive::content_hash() const {
  std::ostringstream out;
  save(out);
  const std::string s = out.str();
  return fnv1a64(s.data(), s.size());
}

}  // namespace nudge
