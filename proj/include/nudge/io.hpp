#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "nudge/matrix.hpp"

namespace nudge {

/// Self-describing text container for checkpoints: ordered string fields
/// followed by named tensors, one value row per line at full precision
/// (%.17g round-trips doubles exactly). Emission order is fixed, so identical
/// contents serialize to identical bytes.
class TextArchive {
 public:
  void set_field(const std::string& key, const std::string& value);
  bool has_field(const std::string& key) const;
  const std::string& field(const std::string& key) const;  // ParseError if absent

  void add_tensor(const std::string& name, Matrix m);
  bool has_tensor(const std::string& name) const;
  const Matrix& tensor(const std::string& name) const;  // ParseError if absent
  const std::vector<std::pair<std::string, Matrix>>& tensors() const { return tensors_; }

  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static TextArchive load(std::istream& in, const std::string& path_for_errors);
  static TextArchive load(const std::string& path);

  /// FNV-1a fingerprint of the serialized bytes.
  uint64_t content_hash() const;

 private:
  std::vector<std::pair<std::string, std::string>> fields_;
  std::vector<std::pair<std::string, Matrix>> tensors_;
};

std::string format_double(double v);  // %.17g
std::string hash_to_hex(uint64_t h);

}  // namespace nudge
