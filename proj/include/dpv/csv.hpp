#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dpv/util.hpp"

namespace dpv::csv {

// One record per row, RFC-4180 quoting. Newlines inside quoted fields are
// preserved; CRLF and LF line endings both accepted.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Reads the next record into `fields`. Returns false at end of input.
  bool next(std::vector<std::string>& fields) {
    fields.clear();
    int c = in_.get();
    if (c == EOF) return false;
    std::string field;
    bool quoted = false;
    ++line_;
    while (true) {
      if (quoted) {
        if (c == EOF) throw InputError("csv: unterminated quote at line " + std::to_string(line_));
        if (c == '"') {
          int d = in_.get();
          if (d == '"') {
            field.push_back('"');
          } else {
            quoted = false;
            c = d;
            continue;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(static_cast<char>(c));
        }
      } else {
        if (c == EOF || c == '\n') {
          if (!field.empty() && field.back() == '\r') field.pop_back();
          fields.push_back(std::move(field));
          return true;
        }
        if (c == ',') {
          fields.push_back(std::move(field));
          field.clear();
        } else if (c == '"' && field.empty()) {
          quoted = true;
        } else {
          field.push_back(static_cast<char>(c));
        }
      }
      c = in_.get();
    }
  }

  long line() const { return line_; }

 private:
  std::istream& in_;
  long line_ = 0;
};

inline std::string quote(const std::string& s) {
  bool needs = s.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.put(',');
    out << quote(fields[i]);
  }
  out.put('\n');
}

}  // namespace dpv::csv
